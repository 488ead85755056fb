//! Detection: equalization, SIC multistage detection with bit LLRs,
//! modulo-based parallel interference cancellation (M-PIC) and a
//! brute-force ML oracle.
//!
//! LLRs use natural log and the convention "positive means bit 0". Noise
//! variances are per real dimension.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::constellation::LegacyConstellation;
use crate::superposition::{centered_mod, Axis, AxisAlphabet, CompositeConstellation, CompositePoint};
use crate::{Error, Result};

/// Saturation bound for every LLR.
pub const LLR_CLAMP: f64 = 50.0;

/// Equalized sample with its equivalent per-dimension noise variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Equalized {
    pub y: Complex64,
    pub noise_var_per_dim: f64,
}

pub fn equalize(y: Complex64, ch: &ChannelRealization) -> Result<Equalized> {
    let g = ch.gain();
    if g == 0.0 {
        return Err(Error::SingularChannel);
    }
    Ok(Equalized { y: y / ch.h(), noise_var_per_dim: ch.noise_var_per_dim() / g })
}

/// Per-axis detection order (first entry is detected first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SicOrder {
    i: Vec<usize>,
    q: Vec<usize>,
}

impl SicOrder {
    pub fn new(i: Vec<usize>, q: Vec<usize>) -> Result<Self> {
        for order in [&i, &q] {
            let mut seen = vec![false; order.len()];
            for &u in order {
                if u >= order.len() || std::mem::replace(&mut seen[u], true) {
                    return Err(Error::InvalidInput(format!("{order:?} is not a permutation")));
                }
            }
        }
        if i.len() != q.len() {
            return Err(Error::InvalidInput("I and Q orders differ in length".into()));
        }
        Ok(SicOrder { i, q })
    }

    /// Same order on both axes.
    pub fn uniform(order: Vec<usize>) -> Result<Self> {
        SicOrder::new(order.clone(), order)
    }

    /// Weakest channel first on both axes, ties by index.
    pub fn from_channel_gains(gains: &[f64]) -> Self {
        let mut order: Vec<usize> = (0..gains.len()).collect();
        order.sort_by(|&a, &b| gains[a].total_cmp(&gains[b]).then(a.cmp(&b)));
        SicOrder { i: order.clone(), q: order }
    }

    /// Largest layer amplitude first on each axis. Ties go to the weaker
    /// channel (when gains are given), then to the lower index.
    pub fn by_layer_amplitude(alphabet: &CompositeConstellation, gains: Option<&[f64]>) -> Self {
        let pick = |axis: Axis| {
            let w = alphabet.axis(axis).weights();
            let mut order: Vec<usize> = (0..w.len()).collect();
            order.sort_by(|&a, &b| {
                w[b].total_cmp(&w[a])
                    .then_with(|| match gains {
                        Some(g) => g[a].total_cmp(&g[b]),
                        None => std::cmp::Ordering::Equal,
                    })
                    .then(a.cmp(&b))
            });
            order
        };
        SicOrder { i: pick(Axis::I), q: pick(Axis::Q) }
    }

    pub fn axis(&self, axis: Axis) -> &[usize] {
        match axis {
            Axis::I => &self.i,
            Axis::Q => &self.q,
        }
    }

    pub fn len(&self) -> usize {
        self.i.len()
    }

    pub fn is_empty(&self) -> bool {
        self.i.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LlrMode {
    #[default]
    MaxLog,
    SumExp,
}

/// Per-user, per-bit LLRs (bit order as in the user's word, MSB first).
#[derive(Debug, Clone, PartialEq)]
pub struct LlrVector {
    values: Vec<Vec<f64>>,
}

impl LlrVector {
    pub fn user(&self, user: usize) -> &[f64] {
        &self.values[user]
    }

    pub fn users(&self) -> usize {
        self.values.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.values.iter().map(Vec::as_slice)
    }

    /// Hard decision per bit; a zero LLR decides bit 0.
    pub fn hard_bits(&self, user: usize) -> Vec<u8> {
        self.values[user].iter().map(|&l| u8::from(l < 0.0)).collect()
    }
}

fn check_users(alphabet: &CompositeConstellation, order: &SicOrder) -> Result<()> {
    if order.len() != alphabet.user_count() {
        return Err(Error::InvalidInput(format!(
            "SIC order covers {} users, alphabet has {}",
            order.len(),
            alphabet.user_count()
        )));
    }
    Ok(())
}

/// Layer decisions on one axis. Additive axes peel layers in `order`;
/// modulo-folded axes are detected jointly by nearest level.
fn detect_axis(z: f64, axis: &AxisAlphabet, order: &[usize]) -> Vec<i64> {
    if axis.modulus().is_some() {
        let best = axis
            .levels()
            .iter()
            .min_by(|a, b| (z - a.value).abs().total_cmp(&(z - b.value).abs()))
            .expect("alphabet is non-empty");
        return best.layers.clone();
    }
    let w = axis.weights();
    let mut layers = vec![0i64; w.len()];
    let mut residual = z;
    for &u in order {
        let levels = axis.pams()[u].levels();
        let s = *levels
            .iter()
            .min_by(|&&a, &&b| {
                (residual - w[u] * a as f64).abs().total_cmp(&(residual - w[u] * b as f64).abs())
            })
            .expect("PAM is non-empty");
        layers[u] = s;
        residual -= w[u] * s as f64;
    }
    layers
}

fn axis_labels(axis: &AxisAlphabet, layers: &[i64]) -> Vec<u32> {
    axis.level_for_layers(layers).expect("layers come from the axis PAMs").labels.clone()
}

/// Multistage SIC detection. Returns one word per user.
pub fn sic_detect(y_eq: Complex64, alphabet: &CompositeConstellation, order: &SicOrder) -> Result<Vec<u32>> {
    check_users(alphabet, order)?;
    let z = y_eq / alphabet.scale();
    let li = axis_labels(alphabet.axis(Axis::I), &detect_axis(z.re, alphabet.axis(Axis::I), order.axis(Axis::I)));
    let lq = axis_labels(alphabet.axis(Axis::Q), &detect_axis(z.im, alphabet.axis(Axis::Q), order.axis(Axis::Q)));
    Ok(alphabet.users().iter().enumerate().map(|(u, c)| c.join_word(li[u], lq[u])).collect())
}

/// Accumulates `ln Σ exp(m)` or `max m` per bit value.
#[derive(Clone, Copy)]
struct BitMetric {
    best: f64,
    sum: f64,
}

impl BitMetric {
    const EMPTY: BitMetric = BitMetric { best: f64::NEG_INFINITY, sum: 0.0 };

    fn push(&mut self, m: f64) {
        if m > self.best {
            self.sum = self.sum * (self.best - m).exp() + 1.0;
            self.best = m;
        } else {
            self.sum += (m - self.best).exp();
        }
    }

    fn value(&self, mode: LlrMode) -> f64 {
        match mode {
            LlrMode::MaxLog => self.best,
            LlrMode::SumExp => self.best + self.sum.ln(),
        }
    }
}

fn finish_llr(zero: &[BitMetric], one: &[BitMetric], mode: LlrMode) -> Vec<f64> {
    zero.iter()
        .zip(one)
        .map(|(a, b)| {
            let (va, vb) = (a.value(mode), b.value(mode));
            let l = if va == vb { 0.0 } else { va - vb };
            l.clamp(-LLR_CLAMP, LLR_CLAMP)
        })
        .collect()
}

fn accumulate(metrics: &mut [[BitMetric; 2]], label: u32, bits: u32, metric: f64) {
    for (t, m) in metrics.iter_mut().enumerate() {
        let bit = (label >> (bits - 1 - t as u32)) & 1;
        m[bit as usize].push(metric);
    }
}

fn sic_axis_llr(
    z: f64,
    axis: &AxisAlphabet,
    order: &[usize],
    var: f64,
    mode: LlrMode,
) -> Vec<Vec<f64>> {
    let decided = detect_axis(z, axis, order);
    let w = axis.weights();
    let mut out = vec![Vec::new(); w.len()];
    for (stage, &u) in order.iter().enumerate() {
        let bits = axis.pams()[u].bits();
        let mut metrics = vec![[BitMetric::EMPTY; 2]; bits as usize];
        let known: f64 = order[..stage].iter().map(|&e| w[e] * decided[e] as f64).sum();
        for s in axis.pams()[u].levels() {
            let mut layers = decided.clone();
            layers[u] = s;
            let level = axis.level_for_layers(&layers).expect("layers come from the axis PAMs");
            let d = if axis.modulus().is_some() { z - level.value } else { z - known - w[u] * s as f64 };
            accumulate(&mut metrics, level.labels[u], bits, -d * d / (2.0 * var));
        }
        let (zero, one): (Vec<BitMetric>, Vec<BitMetric>) = metrics.iter().map(|m| (m[0], m[1])).unzip();
        out[u] = finish_llr(&zero, &one, mode);
    }
    out
}

/// Bit LLRs of the SIC stages. `noise_var` is the per-dimension variance of
/// the equalized sample; each stage conditions on earlier stages' decisions.
pub fn sic_llr(
    y_eq: Complex64,
    alphabet: &CompositeConstellation,
    order: &SicOrder,
    noise_var: f64,
    mode: LlrMode,
) -> Result<LlrVector> {
    check_users(alphabet, order)?;
    if !(noise_var > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {noise_var} must be positive")));
    }
    let z = y_eq / alphabet.scale();
    let var = noise_var / (alphabet.scale() * alphabet.scale());
    let i = sic_axis_llr(z.re, alphabet.axis(Axis::I), order.axis(Axis::I), var, mode);
    let q = sic_axis_llr(z.im, alphabet.axis(Axis::Q), order.axis(Axis::Q), var, mode);
    Ok(LlrVector { values: i.into_iter().zip(q).map(|(mut a, b)| { a.extend(b); a }).collect() })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FoldedNoise {
    /// Pre-modulo Gaussian variance (high-SNR approximation).
    #[default]
    HighSnr,
    /// Wrapped Gaussian summed over the nearest `±1` period images.
    Wrapped,
}

/// What one Cat. 3 receiver knows: its own moduli, the broadcast products,
/// the amplitude scaling, the number of co-scheduled users and its own
/// constellation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpicParams {
    q: u64,
    p: u64,
    q_total: u64,
    p_total: u64,
    scale: f64,
    users: usize,
    constellation: LegacyConstellation,
}

/// Residue structure of one axis: `residue = cmod(scaling·s + offset, modulus)`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct AxisResidue {
    scaling: i64,
    offset: i64,
    modulus: i64,
}

impl AxisResidue {
    fn new(own: u64, total: u64, users: usize) -> Self {
        let q = own as i64;
        let weight = (total / own) as i64;
        // interference is a multiple of q; its parity decides the offset
        let odd_terms = if weight % 2 == 0 { 1 } else { (users as i64 - 1) % 2 };
        AxisResidue {
            scaling: crate::superposition::centered_mod_int(weight, q),
            offset: crate::superposition::centered_mod_int(odd_terms * q, q),
            modulus: q,
        }
    }

    fn target(&self, s: i64) -> i64 {
        crate::superposition::centered_mod_int(self.scaling * s + self.offset, self.modulus)
    }
}

impl MpicParams {
    pub fn new(
        q: u64,
        p: u64,
        q_total: u64,
        p_total: u64,
        scale: f64,
        users: usize,
        constellation: LegacyConstellation,
    ) -> Result<Self> {
        if q == 0 || p == 0 || !q_total.is_multiple_of(q) || !p_total.is_multiple_of(p) {
            return Err(Error::InvalidInput(format!(
                "moduli ({q}, {p}) do not divide the products ({q_total}, {p_total})"
            )));
        }
        if !(scale > 0.0) || users == 0 {
            return Err(Error::InvalidInput("scale and user count must be positive".into()));
        }
        let params = MpicParams { q, p, q_total, p_total, scale, users, constellation };
        let levels = params.constellation.pam_levels();
        for axis in [Axis::I, Axis::Q] {
            let r = params.residue(axis);
            let mut t: Vec<i64> = levels.iter().map(|&s| r.target(s)).collect();
            t.sort_unstable();
            t.dedup();
            if t.len() != levels.len() {
                return Err(Error::NotSeparable(format!(
                    "{axis:?} modulus {} cannot separate {} levels",
                    r.modulus,
                    levels.len()
                )));
            }
        }
        Ok(params)
    }

    /// Parameters of `user` in a Cat. 3 alphabet.
    pub fn from_alphabet(alphabet: &CompositeConstellation, user: usize) -> Result<Self> {
        let primes = alphabet
            .primes()
            .ok_or_else(|| Error::UnsupportedScheme(format!("{} has no moduli", alphabet.category().name())))?;
        MpicParams::new(
            primes.q()[user],
            primes.p()[user],
            primes.q_total(),
            primes.p_total(),
            alphabet.scale(),
            alphabet.user_count(),
            alphabet.users()[user],
        )
    }

    fn residue(&self, axis: Axis) -> AxisResidue {
        match axis {
            Axis::I => AxisResidue::new(self.q, self.q_total, self.users),
            Axis::Q => AxisResidue::new(self.p, self.p_total, self.users),
        }
    }

    /// `(scaling, offset)` on the given axis.
    pub fn effective(&self, axis: Axis) -> (i64, i64) {
        let r = self.residue(axis);
        (r.scaling, r.offset)
    }

    pub fn constellation(&self) -> &LegacyConstellation {
        &self.constellation
    }

    /// Own modulus on the given axis.
    pub fn modulus(&self, axis: Axis) -> u64 {
        match axis {
            Axis::I => self.q,
            Axis::Q => self.p,
        }
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MpicOutput {
    pub word: u32,
    /// Own PAM amplitudes `(I, Q)`.
    pub symbol: (i64, i64),
    pub llr: Vec<f64>,
}

fn mpic_axis(
    z: f64,
    residue: &AxisResidue,
    pam: &crate::constellation::Pam,
    var: f64,
    folded: FoldedNoise,
) -> (u32, i64, Vec<f64>) {
    let q = residue.modulus as f64;
    let r = centered_mod(z, q).expect("modulus is positive");
    let bits = pam.bits();
    let mut metrics = vec![[BitMetric::EMPTY; 2]; bits as usize];
    let mut best = (f64::INFINITY, 0u32);
    for label in 0..pam.size() as u32 {
        let s = pam.level(label);
        let d = centered_mod(r - residue.target(s) as f64, q).expect("modulus is positive");
        if d.abs() < best.0 {
            best = (d.abs(), label);
        }
        let metric = match folded {
            FoldedNoise::HighSnr => -d * d / (2.0 * var),
            FoldedNoise::Wrapped => {
                let mut m = BitMetric::EMPTY;
                for k in -1..=1 {
                    let e = d + 2.0 * q * k as f64;
                    m.push(-e * e / (2.0 * var));
                }
                m.value(LlrMode::SumExp)
            }
        };
        accumulate(&mut metrics, label, bits, metric);
    }
    let (zero, one): (Vec<BitMetric>, Vec<BitMetric>) = metrics.iter().map(|m| (m[0], m[1])).unzip();
    (best.1, pam.level(best.1), finish_llr(&zero, &one, LlrMode::SumExp))
}

/// Detects one user's symbol by centered-modulo reduction with its own moduli.
pub fn mpic_detect(
    y_eq: Complex64,
    params: &MpicParams,
    noise_var: f64,
    folded: FoldedNoise,
) -> Result<MpicOutput> {
    if !(noise_var > 0.0) {
        return Err(Error::InvalidInput(format!("noise variance {noise_var} must be positive")));
    }
    let z = y_eq / params.scale;
    let var = noise_var / (params.scale * params.scale);
    let pam = params.constellation.axis();
    let (li, si, mut llr) = mpic_axis(z.re, &params.residue(Axis::I), &pam, var, folded);
    let (lq, sq, llr_q) = mpic_axis(z.im, &params.residue(Axis::Q), &pam, var, folded);
    llr.extend(llr_q);
    Ok(MpicOutput { word: params.constellation.join_word(li, lq), symbol: (si, sq), llr })
}

/// Exhaustive nearest-point search with cached points.
#[derive(Debug, Clone)]
pub struct MlOracle {
    points: Vec<CompositePoint>,
}

impl MlOracle {
    pub fn new(alphabet: &CompositeConstellation) -> Self {
        MlOracle { points: alphabet.points() }
    }

    /// Generating words of the nearest point; ties go to the lowest tuple index.
    pub fn detect(&self, y_eq: Complex64) -> Vec<u32> {
        let mut best = (f64::INFINITY, 0usize);
        for (t, p) in self.points.iter().enumerate() {
            let d = (y_eq - p.value).norm_sqr();
            if d < best.0 {
                best = (d, t);
            }
        }
        self.points[best.1].words.clone()
    }
}

pub fn ml_oracle(y_eq: Complex64, alphabet: &CompositeConstellation) -> Vec<u32> {
    MlOracle::new(alphabet).detect(y_eq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::superposition::{CpacSet, PrimeCpacSet};

    fn example() -> CompositeConstellation {
        let cpacs = CpacSet::new(vec![2.3, 3.11], vec![3.01, 2.18], 30.0).unwrap();
        CompositeConstellation::cat1(&cpacs, &[LegacyConstellation::qpsk(); 2]).unwrap()
    }

    #[test]
    fn equalize_noiseless() {
        let h = Complex64::new(0.3, -1.2);
        let ch = ChannelRealization::new(h, 0.1).unwrap();
        let x = Complex64::new(1.0, -3.0);
        let e = equalize(h * x, &ch).unwrap();
        assert!((e.y - x).norm() < 1e-12);
        assert!((e.noise_var_per_dim - 0.1 / h.norm_sqr()).abs() < 1e-15);
        let zero = ChannelRealization::new(Complex64::new(0.0, 0.0), 0.1).unwrap();
        assert!(matches!(equalize(x, &zero), Err(Error::SingularChannel)));
    }

    #[test]
    fn sic_noiseless_all_tuples() {
        let a = example();
        let order = SicOrder::by_layer_amplitude(&a, None);
        for p in a.points() {
            assert_eq!(sic_detect(p.value, &a, &order).unwrap(), p.words);
        }
    }

    #[test]
    fn sic_single_user_is_nearest_point() {
        let cpacs = CpacSet::new(vec![1.0], vec![1.0], 2.0).unwrap();
        let a = CompositeConstellation::cat1(&cpacs, &[LegacyConstellation::qam16()]).unwrap();
        let order = SicOrder::uniform(vec![0]).unwrap();
        let y = Complex64::new(0.9, -0.1) * a.scale();
        assert_eq!(sic_detect(y, &a, &order).unwrap(), ml_oracle(y, &a));
    }

    #[test]
    fn llr_noiseless_saturates_and_symmetric_is_zero() {
        let cpacs = CpacSet::new(vec![1.0], vec![1.0], 2.0).unwrap();
        let a = CompositeConstellation::cat1(&cpacs, &[LegacyConstellation::qpsk()]).unwrap();
        let order = SicOrder::uniform(vec![0]).unwrap();
        let llr = sic_llr(Complex64::new(1.0, 1.0), &a, &order, 1e-6, LlrMode::MaxLog).unwrap();
        assert_eq!(llr.user(0), &[LLR_CLAMP, LLR_CLAMP]);
        let llr = sic_llr(Complex64::new(0.0, -1.0), &a, &order, 0.5, LlrMode::SumExp).unwrap();
        assert_eq!(llr.user(0)[0], 0.0);
        assert!(llr.user(0)[1] < 0.0);
    }

    #[test]
    fn mpic_paper_config_offsets() {
        let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
        let users = [LegacyConstellation::qpsk(); 2];
        let a = CompositeConstellation::cat3(&primes, &users, 30.0).unwrap();
        let p0 = MpicParams::from_alphabet(&a, 0).unwrap();
        let p1 = MpicParams::from_alphabet(&a, 1).unwrap();
        assert_eq!(p0.effective(Axis::I), (-1, -2));
        assert_eq!(p1.effective(Axis::I), (2, -3));
        for u in 0..2 {
            for axis in [Axis::I, Axis::Q] {
                let e = crate::superposition::effective_params(&primes, &users, u, axis).unwrap();
                let p = MpicParams::from_alphabet(&a, u).unwrap();
                assert_eq!(p.effective(axis), (e.scaling, e.offset));
            }
        }
    }

    #[test]
    fn mpic_noiseless_recovers_own_word() {
        let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
        let a = CompositeConstellation::cat3(&primes, &[LegacyConstellation::qpsk(); 2], 30.0).unwrap();
        for u in 0..2 {
            let params = MpicParams::from_alphabet(&a, u).unwrap();
            for p in a.points() {
                let out = mpic_detect(p.value, &params, 1e-9, FoldedNoise::HighSnr).unwrap();
                assert_eq!(out.word, p.words[u]);
            }
        }
    }

    #[test]
    fn ml_ties_take_lowest_index() {
        let cpacs = CpacSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 4.0).unwrap();
        let a = CompositeConstellation::cat1(&cpacs, &[LegacyConstellation::qpsk(); 2]).unwrap();
        // (0,0) on both axes is reached by several tuples
        let words = ml_oracle(Complex64::new(0.0, 0.0), &a);
        let first = a.points().iter().position(|p| p.value.norm() < 1e-12).unwrap();
        assert_eq!(words, a.tuple_words(first));
    }

    #[test]
    fn order_validation() {
        assert!(SicOrder::uniform(vec![0, 0]).is_err());
        assert!(SicOrder::uniform(vec![1, 2]).is_err());
        assert_eq!(SicOrder::from_channel_gains(&[2.0, 1.0, 1.0]).axis(Axis::I), &[1, 2, 0]);
        let order = SicOrder::by_layer_amplitude(&example(), None);
        assert_eq!(order.axis(Axis::I), &[1, 0]);
        assert_eq!(order.axis(Axis::Q), &[0, 1]);
    }
}
