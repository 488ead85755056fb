//! Legacy per-user modulation mappers.
//!
//! Square QAM is handled as two independent PAM axes. The first half of a
//! symbol's bits selects the in-phase level, the second half the quadrature
//! level. Each axis uses a binary-reflected Gray code where the all-zero
//! sub-word sits on the most positive amplitude. Points are kept as odd
//! integers; energy normalization happens in the composite encoders.

use serde::{Deserialize, Serialize};

use crate::{Complex64, Error, Result};

/// Largest supported bits per symbol (4096-QAM).
pub const MAX_BITS_PER_SYMBOL: u32 = 12;

/// An ordered binary tuple, most significant bit first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitWord(Vec<u8>);

impl BitWord {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.len() < 2 || !bits.len().is_multiple_of(2) {
            return Err(Error::InvalidInput(format!(
                "bit word length {} must be even and at least 2",
                bits.len()
            )));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidInput(format!("bit value {b} is not binary")));
        }
        Ok(BitWord(bits))
    }

    /// Builds the `m`-bit word whose integer value (MSB first) is `index`.
    pub fn from_index(index: u32, m: u32) -> Result<Self> {
        if m < 32 && index >> m != 0 {
            return Err(Error::InvalidInput(format!("index {index} does not fit in {m} bits")));
        }
        BitWord::new((0..m).rev().map(|t| ((index >> t) & 1) as u8).collect())
    }

    pub fn bits(&self) -> &[u8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn to_index(&self) -> u32 {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as u32)
    }
}

pub fn gray_encode(i: u32) -> u32 {
    i ^ (i >> 1)
}

pub fn gray_decode(mut g: u32) -> u32 {
    let mut i = g;
    while g > 1 {
        g >>= 1;
        i ^= g;
    }
    i
}

/// One PAM axis with `2^bits` odd-integer levels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pam {
    bits: u32,
}

impl Pam {
    pub fn new(bits: u32) -> Result<Self> {
        if bits == 0 || bits > MAX_BITS_PER_SYMBOL / 2 {
            return Err(Error::InvalidInput(format!("unsupported PAM width {bits}")));
        }
        Ok(Pam { bits })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn size(&self) -> usize {
        1 << self.bits
    }

    /// Amplitude of the sub-word `label` (Gray coded, most positive first).
    pub fn level(&self, label: u32) -> i64 {
        let n = self.size() as i64;
        let position = gray_decode(label) as i64;
        (n - 1) - 2 * position
    }

    /// Inverse of [`Pam::level`]; `None` for amplitudes off the grid.
    pub fn label_of(&self, level: i64) -> Option<u32> {
        let n = self.size() as i64;
        let twice_pos = (n - 1) - level;
        if twice_pos < 0 || twice_pos % 2 != 0 || twice_pos / 2 >= n {
            return None;
        }
        Some(gray_encode((twice_pos / 2) as u32))
    }

    /// All levels in ascending order.
    pub fn levels(&self) -> Vec<i64> {
        let n = self.size() as i64;
        (0..n).map(|i| 2 * i - (n - 1)).collect()
    }

    /// Mean of `level²` over equiprobable labels, `(n² - 1) / 3`.
    pub fn mean_energy(&self) -> f64 {
        let n = self.size() as f64;
        (n * n - 1.0) / 3.0
    }
}

/// A `2^m`-ary square QAM mapper (QPSK is the `m = 2` case).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegacyConstellation {
    bits_per_symbol: u32,
}

impl LegacyConstellation {
    pub fn new(bits_per_symbol: u32) -> Result<Self> {
        if bits_per_symbol < 2 || !bits_per_symbol.is_multiple_of(2) || bits_per_symbol > MAX_BITS_PER_SYMBOL
        {
            return Err(Error::InvalidInput(format!(
                "unsupported constellation with {bits_per_symbol} bits per symbol"
            )));
        }
        Ok(LegacyConstellation { bits_per_symbol })
    }

    pub fn qpsk() -> Self {
        LegacyConstellation { bits_per_symbol: 2 }
    }

    pub fn qam16() -> Self {
        LegacyConstellation { bits_per_symbol: 4 }
    }

    /// Parses `"qpsk"`, `"16qam"`, `"64qam"`, ...
    pub fn from_name(name: &str) -> Result<Self> {
        let lower = name.trim().to_ascii_lowercase();
        if lower == "qpsk" || lower == "4qam" {
            return Ok(Self::qpsk());
        }
        let order = lower
            .strip_suffix("qam")
            .and_then(|n| n.trim_end_matches('-').parse::<u32>().ok())
            .ok_or_else(|| Error::InvalidInput(format!("unknown constellation {name:?}")))?;
        if !order.is_power_of_two() {
            return Err(Error::InvalidInput(format!("unknown constellation {name:?}")));
        }
        Self::new(order.trailing_zeros())
    }

    pub fn name(&self) -> String {
        match self.bits_per_symbol {
            2 => "qpsk".to_string(),
            m => format!("{}qam", 1u32 << m),
        }
    }

    pub fn bits_per_symbol(&self) -> u32 {
        self.bits_per_symbol
    }

    pub fn order(&self) -> usize {
        1 << self.bits_per_symbol
    }

    pub fn axis_bits(&self) -> u32 {
        self.bits_per_symbol / 2
    }

    pub fn axis(&self) -> Pam {
        Pam { bits: self.axis_bits() }
    }

    /// Sorted I/Q alphabet `{±1, ±3, ..., ±(2^{m/2} - 1)}`.
    pub fn pam_levels(&self) -> Vec<i64> {
        self.axis().levels()
    }

    /// Mean symbol energy of the unnormalized integer points.
    pub fn mean_energy(&self) -> f64 {
        2.0 * self.axis().mean_energy()
    }

    /// Splits a symbol word into its I and Q sub-words.
    pub fn split_word(&self, word: u32) -> (u32, u32) {
        let k = self.axis_bits();
        (word >> k, word & ((1 << k) - 1))
    }

    pub fn join_word(&self, i_label: u32, q_label: u32) -> u32 {
        (i_label << self.axis_bits()) | q_label
    }

    /// Integer point for a word given as its integer value.
    pub fn map_index(&self, word: u32) -> (i64, i64) {
        let (i_label, q_label) = self.split_word(word);
        let axis = self.axis();
        (axis.level(i_label), axis.level(q_label))
    }

    pub fn map_bits(&self, word: &BitWord) -> Result<Complex64> {
        if word.len() != self.bits_per_symbol as usize {
            return Err(Error::InvalidInput(format!(
                "bit word has {} bits, constellation expects {}",
                word.len(),
                self.bits_per_symbol
            )));
        }
        let (i, q) = self.map_index(word.to_index());
        Ok(Complex64::new(i as f64, q as f64))
    }

    /// Word for an integer point, `None` if the point is not in the alphabet.
    pub fn word_of(&self, i: i64, q: i64) -> Option<u32> {
        let axis = self.axis();
        Some(self.join_word(axis.label_of(i)?, axis.label_of(q)?))
    }
}

pub fn iq_split(x: Complex64) -> (f64, f64) {
    (x.re, x.im)
}

/// A complex point carrying a composite bit label.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LabeledPoint {
    pub value: Complex64,
    pub label: u64,
}

/// Gray labels for one axis: the `i`-th largest distinct value gets `gray(i)`.
///
/// Returns one label per input value. Fails unless there are exactly
/// `2^bits` distinct values.
pub(crate) fn gray_axis_labels(values: &[f64], bits: u32) -> Result<Vec<u64>> {
    let mut distinct: Vec<f64> = Vec::with_capacity(values.len());
    for &v in values {
        if !v.is_finite() {
            return Err(Error::UnsupportedGeometry(format!("non-finite coordinate {v}")));
        }
        if !distinct.iter().any(|&d| same_coordinate(d, v)) {
            distinct.push(v);
        }
    }
    if distinct.len() != 1usize << bits {
        return Err(Error::UnsupportedGeometry(format!(
            "axis has {} distinct levels, expected {}",
            distinct.len(),
            1usize << bits
        )));
    }
    distinct.sort_by(|a, b| b.total_cmp(a));
    Ok(values
        .iter()
        .map(|&v| {
            let pos = distinct.iter().position(|&d| same_coordinate(d, v)).unwrap();
            gray_encode(pos as u32) as u64
        })
        .collect())
}

fn same_coordinate(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * (1.0 + a.abs().max(b.abs()))
}

/// Relabels a rectangular `2^i_bits × 2^q_bits` grid so that axis-adjacent
/// points differ in exactly one bit. The new label is `(gray_I << q_bits) |
/// gray_Q`. The point set is unchanged.
pub fn gray_permute(points: &[LabeledPoint], i_bits: u32, q_bits: u32) -> Result<Vec<LabeledPoint>> {
    let expected = 1usize << (i_bits + q_bits);
    if points.len() != expected {
        return Err(Error::UnsupportedGeometry(format!(
            "{} points do not form a {}x{} grid",
            points.len(),
            1usize << i_bits,
            1usize << q_bits
        )));
    }
    let re: Vec<f64> = points.iter().map(|p| p.value.re).collect();
    let im: Vec<f64> = points.iter().map(|p| p.value.im).collect();
    let gi = gray_axis_labels(&re, i_bits)?;
    let gq = gray_axis_labels(&im, q_bits)?;
    let relabeled: Vec<LabeledPoint> = points
        .iter()
        .zip(gi.iter().zip(&gq))
        .map(|(p, (&li, &lq))| LabeledPoint { value: p.value, label: (li << q_bits) | lq })
        .collect();
    // Every grid cell must be hit exactly once.
    let mut seen = vec![false; expected];
    for p in &relabeled {
        let slot = &mut seen[p.label as usize];
        if *slot {
            return Err(Error::UnsupportedGeometry("grid cell occupied twice".into()));
        }
        *slot = true;
    }
    Ok(relabeled)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn qpsk_zero_word_is_positive_corner() {
        let c = LegacyConstellation::qpsk();
        let p = c.map_bits(&BitWord::new(vec![0, 0]).unwrap()).unwrap();
        assert_eq!(p, Complex64::new(1.0, 1.0));
    }

    #[test]
    fn qpsk_image_is_unit_square() {
        let c = LegacyConstellation::qpsk();
        let mut pts: Vec<(i64, i64)> = (0..4).map(|w| c.map_index(w)).collect();
        pts.sort();
        assert_eq!(pts, vec![(-1, -1), (-1, 1), (1, -1), (1, 1)]);
    }

    #[test]
    fn qam16_is_bijective_and_gray() {
        let c = LegacyConstellation::qam16();
        let mut pts: Vec<(i64, i64)> = (0..16).map(|w| c.map_index(w)).collect();
        pts.sort();
        pts.dedup();
        assert_eq!(pts.len(), 16);
        for &(i, q) in &pts {
            assert!([-3, -1, 1, 3].contains(&i) && [-3, -1, 1, 3].contains(&q));
        }
        // axis neighbours differ in one bit
        for a in 0..16u32 {
            for b in 0..16u32 {
                let (ia, qa) = c.map_index(a);
                let (ib, qb) = c.map_index(b);
                let adjacent = (ia == ib && (qa - qb).abs() == 2) || (qa == qb && (ia - ib).abs() == 2);
                if adjacent {
                    assert_eq!((a ^ b).count_ones(), 1, "{a:04b} vs {b:04b}");
                }
            }
        }
    }

    #[test]
    fn iq_separability() {
        let c = LegacyConstellation::new(6).unwrap();
        for w in 0..64 {
            let (il, ql) = c.split_word(w);
            let (i, q) = c.map_index(w);
            assert_eq!(i, c.axis().level(il));
            assert_eq!(q, c.axis().level(ql));
            assert_eq!(c.word_of(i, q), Some(w));
        }
    }

    #[test]
    fn length_mismatch_is_rejected() {
        let c = LegacyConstellation::qam16();
        let w = BitWord::new(vec![0, 1]).unwrap();
        assert!(matches!(c.map_bits(&w), Err(Error::InvalidInput(_))));
        assert!(BitWord::new(vec![0, 1, 1]).is_err());
        assert!(BitWord::new(vec![0, 2]).is_err());
    }

    #[test]
    fn iq_split_examples() {
        assert_eq!(iq_split(Complex64::new(3.0, -1.0)), (3.0, -1.0));
        assert_eq!(iq_split(Complex64::new(0.0, 0.0)), (0.0, 0.0));
        let c = LegacyConstellation::qam16();
        for w in 0..16 {
            let x = c.map_bits(&BitWord::from_index(w, 4).unwrap()).unwrap();
            let (i, q) = iq_split(x);
            assert_eq!(Complex64::new(i, q), x);
        }
    }

    #[test]
    fn names_round_trip() {
        for name in ["qpsk", "16qam", "64qam", "256qam"] {
            assert_eq!(LegacyConstellation::from_name(name).unwrap().name(), name);
        }
        assert!(LegacyConstellation::from_name("8psk").is_err());
        assert!(LegacyConstellation::from_name("32qam").is_err());
    }

    #[test]
    fn gray_permute_one_bit_pam_is_identity() {
        let pts = vec![
            LabeledPoint { value: Complex64::new(1.0, 0.0), label: 0 },
            LabeledPoint { value: Complex64::new(-1.0, 0.0), label: 1 },
        ];
        assert_eq!(gray_permute(&pts, 1, 0).unwrap(), pts);
    }

    #[test]
    fn gray_permute_natural_to_gray() {
        // natural binary, most positive first
        let pts: Vec<LabeledPoint> = [3.0, 1.0, -1.0, -3.0]
            .iter()
            .enumerate()
            .map(|(i, &v)| LabeledPoint { value: Complex64::new(v, 0.0), label: i as u64 })
            .collect();
        let out = gray_permute(&pts, 2, 0).unwrap();
        let labels: Vec<u64> = out.iter().map(|p| p.label).collect();
        assert_eq!(labels, vec![0b00, 0b01, 0b11, 0b10]);
    }

    #[test]
    fn gray_permute_rejects_non_grid() {
        let pts = vec![
            LabeledPoint { value: Complex64::new(1.0, 0.0), label: 0 },
            LabeledPoint { value: Complex64::new(1.0, 0.0), label: 1 },
        ];
        assert!(matches!(gray_permute(&pts, 1, 0), Err(Error::UnsupportedGeometry(_))));
    }

    #[test]
    fn gray_codec_inverts() {
        for i in 0..1024 {
            assert_eq!(gray_decode(gray_encode(i)), i);
            assert_eq!((gray_encode(i) ^ gray_encode(i + 1)).count_ones(), 1);
        }
    }
}
