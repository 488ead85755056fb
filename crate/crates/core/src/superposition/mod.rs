//! Composite-constellation encoders.
//!
//! Every supported category is I/Q separable: the composite alphabet is the
//! product of an in-phase [`AxisAlphabet`] and a quadrature one. Each axis
//! level remembers the per-user PAM amplitude that produced it ("layers") and
//! the per-user bit sub-words it carries ("labels"). Cat. 1 labels are each
//! user's own Gray labels; Cat. 2 re-assigns labels with a joint Gray code
//! over the axis; Cat. 3 folds integer-weighted layers with a centered modulo.

mod modulo;
mod quantize;

use std::collections::HashMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

pub use modulo::{
    centered_mod, centered_mod_int, crt_residue, effective_params, gcd, is_square_free, Axis,
    CenteredModulus, EffectiveParams,
};
pub use quantize::{quantize_cpacs, QUANTIZE_BUDGET};

use crate::constellation::{gray_axis_labels, LegacyConstellation, Pam};
use crate::{Complex64, Error, Result};

const POWER_TOLERANCE: f64 = 1e-12;

/// Real-valued complex power allocation coefficients `(α_ℓ, β_ℓ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CpacSet {
    alpha: Vec<f64>,
    beta: Vec<f64>,
    power: f64,
}

impl CpacSet {
    pub fn new(alpha: Vec<f64>, beta: Vec<f64>, power: f64) -> Result<Self> {
        if alpha.is_empty() || alpha.len() != beta.len() {
            return Err(Error::InvalidInput(format!(
                "CPAC vectors have lengths {} and {}",
                alpha.len(),
                beta.len()
            )));
        }
        if !(power > 0.0) || !power.is_finite() {
            return Err(Error::InvalidInput(format!("power budget {power} must be positive")));
        }
        if alpha.iter().chain(&beta).any(|&c| !(c >= 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput("CPAC entries must be finite and nonnegative".into()));
        }
        let total: f64 = alpha.iter().chain(&beta).map(|c| c * c).sum();
        if total > power * (1.0 + POWER_TOLERANCE) {
            return Err(Error::InvalidInput(format!(
                "CPAC power {total} exceeds the budget {power}"
            )));
        }
        Ok(CpacSet { alpha, beta, power })
    }

    /// Builds a set and rescales it so that `Σ α² + β²` fills the budget.
    pub fn normalized(alpha: Vec<f64>, beta: Vec<f64>, power: f64) -> Result<Self> {
        let total: f64 = alpha.iter().chain(&beta).map(|c| c * c).sum();
        if !(total > 0.0) {
            return Err(Error::InvalidInput("all CPACs are zero".into()));
        }
        let mut s = (power / total).sqrt();
        loop {
            let a: Vec<f64> = alpha.iter().map(|c| c * s).collect();
            let b: Vec<f64> = beta.iter().map(|c| c * s).collect();
            let t: f64 = a.iter().chain(&b).map(|c| c * c).sum();
            if t <= power {
                return CpacSet::new(a, b, power);
            }
            s *= 1.0 - 1e-15;
        }
    }

    pub fn users(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &[f64] {
        &self.alpha
    }

    pub fn beta(&self) -> &[f64] {
        &self.beta
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn total(&self) -> f64 {
        self.alpha.iter().chain(&self.beta).map(|c| c * c).sum()
    }

    pub fn weights(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::I => &self.alpha,
            Axis::Q => &self.beta,
        }
    }
}

/// Pairwise-coprime integer moduli for Cat. 3: `q` on I, `p` on Q.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeCpacSet {
    q: Vec<u64>,
    p: Vec<u64>,
    q_total: u64,
    p_total: u64,
}

impl PrimeCpacSet {
    pub fn new(q: Vec<u64>, p: Vec<u64>) -> Result<Self> {
        if q.is_empty() || q.len() != p.len() {
            return Err(Error::InvalidInput(format!(
                "modulus vectors have lengths {} and {}",
                q.len(),
                p.len()
            )));
        }
        for (name, set) in [("q", &q), ("p", &p)] {
            if set.contains(&0) {
                return Err(Error::InvalidInput(format!("{name} contains a zero modulus")));
            }
            for i in 0..set.len() {
                for j in i + 1..set.len() {
                    if gcd(set[i], set[j]) != 1 {
                        return Err(Error::InvalidInput(format!(
                            "{name}[{i}] = {} and {name}[{j}] = {} are not coprime",
                            set[i], set[j]
                        )));
                    }
                }
            }
            for &v in set.iter() {
                if !is_square_free(v) {
                    log::debug!("{name} modulus {v} is not square-free; accepted since coprimality holds");
                }
            }
        }
        let q_total = q.iter().product();
        let p_total = p.iter().product();
        Ok(PrimeCpacSet { q, p, q_total, p_total })
    }

    pub fn users(&self) -> usize {
        self.q.len()
    }

    pub fn q(&self) -> &[u64] {
        &self.q
    }

    pub fn p(&self) -> &[u64] {
        &self.p
    }

    pub fn q_total(&self) -> u64 {
        self.q_total
    }

    pub fn p_total(&self) -> u64 {
        self.p_total
    }

    pub fn moduli(&self, axis: Axis) -> &[u64] {
        match axis {
            Axis::I => &self.q,
            Axis::Q => &self.p,
        }
    }

    pub fn modulus(&self, user: usize, axis: Axis) -> u64 {
        self.moduli(axis)[user]
    }

    pub fn total(&self, axis: Axis) -> u64 {
        match axis {
            Axis::I => self.q_total,
            Axis::Q => self.p_total,
        }
    }

    /// Integer weight of `user` on `axis`: the product of every other modulus.
    pub fn weight(&self, user: usize, axis: Axis) -> u64 {
        self.total(axis) / self.modulus(user, axis)
    }

    /// Checks injectivity of the composite map and per-user separability
    /// for the given legacy constellations.
    pub fn validate_for(&self, users: &[LegacyConstellation]) -> Result<()> {
        if users.len() != self.users() {
            return Err(Error::InvalidInput(format!(
                "{} constellations for {} users",
                users.len(),
                self.users()
            )));
        }
        for axis in [Axis::I, Axis::Q] {
            let alphabet = AxisAlphabet::modular(self, users, axis);
            if !alphabet.is_injective() {
                return Err(Error::NotInjective(format!(
                    "{axis:?} moduli {:?} fold distinct tuples together",
                    self.moduli(axis)
                )));
            }
            for (user, c) in users.iter().enumerate() {
                effective_params(self, users, user, axis)?.check_decodable(&c.pam_levels())?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Category {
    SmustCat1,
    SmustCat2,
    SmustCat3,
    MustCat1,
    MustCat2,
    MustCat3,
}

impl Category {
    pub fn name(&self) -> &'static str {
        match self {
            Category::SmustCat1 => "smust_cat1",
            Category::SmustCat2 => "smust_cat2",
            Category::SmustCat3 => "smust_cat3",
            Category::MustCat1 => "must_cat1",
            Category::MustCat2 => "must_cat2",
            Category::MustCat3 => "must_cat3",
        }
    }

    /// True for alphabets folded by a centered modulo (no additive layering).
    pub fn is_modular(&self) -> bool {
        matches!(self, Category::SmustCat3)
    }
}

/// One level of an axis alphabet.
#[derive(Debug, Clone, PartialEq)]
pub struct AxisLevel {
    /// Unscaled coordinate.
    pub value: f64,
    /// Per-user PAM amplitude that produced the level.
    pub layers: Vec<i64>,
    /// Per-user axis sub-word transmitted by the level.
    pub labels: Vec<u32>,
}

/// All levels on one axis, indexed by the mixed-radix label tuple with user 0
/// most significant.
#[derive(Debug, Clone)]
pub struct AxisAlphabet {
    weights: Vec<f64>,
    pams: Vec<Pam>,
    levels: Vec<AxisLevel>,
    modulus: Option<i64>,
    by_layers: HashMap<Vec<i64>, usize>,
}

impl AxisAlphabet {
    fn build(weights: Vec<f64>, pams: Vec<Pam>, modulus: Option<i64>) -> Self {
        let total: usize = pams.iter().map(Pam::size).product();
        let mut levels = Vec::with_capacity(total);
        for index in 0..total {
            let labels = split_mixed_radix(index, pams.iter().map(Pam::size));
            let layers: Vec<i64> = labels.iter().zip(&pams).map(|(&l, p)| p.level(l)).collect();
            let value = match modulus {
                Some(m) => {
                    let sum: i64 = layers.iter().zip(&weights).map(|(&s, &w)| s * w as i64).sum();
                    centered_mod_int(sum, m) as f64
                }
                None => layers.iter().zip(&weights).map(|(&s, &w)| s as f64 * w).sum(),
            };
            levels.push(AxisLevel { value, layers, labels });
        }
        let by_layers = levels.iter().enumerate().map(|(i, l)| (l.layers.clone(), i)).collect();
        AxisAlphabet { weights, pams, levels, modulus, by_layers }
    }

    fn additive(weights: &[f64], users: &[LegacyConstellation]) -> Self {
        AxisAlphabet::build(weights.to_vec(), users.iter().map(|c| c.axis()).collect(), None)
    }

    fn modular(primes: &PrimeCpacSet, users: &[LegacyConstellation], axis: Axis) -> Self {
        let weights = (0..users.len()).map(|l| primes.weight(l, axis) as f64).collect();
        AxisAlphabet::build(
            weights,
            users.iter().map(|c| c.axis()).collect(),
            Some(primes.total(axis) as i64),
        )
    }

    /// Joint Gray relabelling: the `i`-th largest level carries `gray(i)`,
    /// split across users with the heaviest-weighted user on the MSBs.
    fn gray_relabeled(&self) -> Result<Self> {
        let bits: u32 = self.pams.iter().map(Pam::bits).sum();
        let values: Vec<f64> = self.levels.iter().map(|l| l.value).collect();
        let joint = gray_axis_labels(&values, bits)?;
        let order = self.weight_order();
        let mut levels = self.levels.clone();
        for (level, &code) in self.levels.iter().zip(&joint) {
            let mut labels = vec![0u32; self.pams.len()];
            let mut shift = bits;
            for &u in &order {
                let b = self.pams[u].bits();
                shift -= b;
                labels[u] = ((code >> shift) & ((1 << b) - 1)) as u32;
            }
            let slot = self.index_of_labels(&labels);
            levels[slot] = AxisLevel { value: level.value, layers: level.layers.clone(), labels };
        }
        Ok(AxisAlphabet {
            weights: self.weights.clone(),
            pams: self.pams.clone(),
            levels,
            modulus: self.modulus,
            by_layers: HashMap::new(),
        }
        .reindexed())
    }

    fn reindexed(mut self) -> Self {
        self.by_layers =
            self.levels.iter().enumerate().map(|(i, l)| (l.layers.clone(), i)).collect();
        self
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn pams(&self) -> &[Pam] {
        &self.pams
    }

    pub fn levels(&self) -> &[AxisLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    /// Half-period of the outer modulo for Cat. 3 axes.
    pub fn modulus(&self) -> Option<i64> {
        self.modulus
    }

    pub fn index_of_labels(&self, labels: &[u32]) -> usize {
        labels.iter().zip(&self.pams).fold(0, |acc, (&l, p)| acc * p.size() + l as usize)
    }

    pub fn level_for_layers(&self, layers: &[i64]) -> Option<&AxisLevel> {
        self.by_layers.get(layers).map(|&i| &self.levels[i])
    }

    /// Users sorted by decreasing weight, ties by index.
    pub fn weight_order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.weights.len()).collect();
        order.sort_by(|&a, &b| self.weights[b].total_cmp(&self.weights[a]).then(a.cmp(&b)));
        order
    }

    pub fn mean_square(&self) -> f64 {
        self.levels.iter().map(|l| l.value * l.value).sum::<f64>() / self.levels.len() as f64
    }

    pub fn distinct_values(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.levels.iter().map(|l| l.value).collect();
        v.sort_by(f64::total_cmp);
        v.dedup_by(|a, b| (*a - *b).abs() <= 1e-9 * (1.0 + a.abs()));
        v
    }

    pub fn is_injective(&self) -> bool {
        self.distinct_values().len() == self.levels.len()
    }
}

fn split_mixed_radix(mut index: usize, radices: impl Iterator<Item = usize>) -> Vec<u32> {
    let radices: Vec<usize> = radices.collect();
    let mut out = vec![0u32; radices.len()];
    for (slot, &r) in radices.iter().enumerate().rev() {
        out[slot] = (index % r) as u32;
        index /= r;
    }
    out
}

/// A point of the composite alphabet with the words that generate it.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositePoint {
    pub value: Complex64,
    pub words: Vec<u32>,
}

/// The enumerated superposition alphabet with its scaling `λ`.
#[derive(Debug, Clone)]
pub struct CompositeConstellation {
    category: Category,
    users: Vec<LegacyConstellation>,
    i_axis: AxisAlphabet,
    q_axis: AxisAlphabet,
    scale: f64,
    power: f64,
    cpacs: Option<CpacSet>,
    primes: Option<PrimeCpacSet>,
}

impl CompositeConstellation {
    fn assemble(
        category: Category,
        users: &[LegacyConstellation],
        i_axis: AxisAlphabet,
        q_axis: AxisAlphabet,
        power: f64,
        cpacs: Option<CpacSet>,
        primes: Option<PrimeCpacSet>,
    ) -> Result<Self> {
        let energy = i_axis.mean_square() + q_axis.mean_square();
        if !(energy > 0.0) {
            return Err(Error::InvalidInput("composite alphabet has zero energy".into()));
        }
        Ok(CompositeConstellation {
            category,
            users: users.to_vec(),
            i_axis,
            q_axis,
            scale: (power / energy).sqrt(),
            power,
            cpacs,
            primes,
        })
    }

    fn check_users(n: usize, users: &[LegacyConstellation]) -> Result<()> {
        if users.len() != n {
            return Err(Error::InvalidInput(format!(
                "{} constellations for {n} users",
                users.len()
            )));
        }
        Ok(())
    }

    /// S-MUST Cat. 1: `Σ α_ℓ I(x_ℓ) + j Σ β_ℓ Q(x_ℓ)`.
    pub fn cat1(cpacs: &CpacSet, users: &[LegacyConstellation]) -> Result<Self> {
        Self::additive(Category::SmustCat1, cpacs, users)
    }

    /// S-MUST Cat. 2: Cat. 1 points with a joint Gray relabelling.
    pub fn cat2(cpacs: &CpacSet, users: &[LegacyConstellation]) -> Result<Self> {
        Self::additive(Category::SmustCat2, cpacs, users)
    }

    /// S-MUST Cat. 3: CRT-weighted integer layers folded into `[-Q*, Q*)`.
    pub fn cat3(primes: &PrimeCpacSet, users: &[LegacyConstellation], power: f64) -> Result<Self> {
        Self::check_users(primes.users(), users)?;
        primes.validate_for(users)?;
        let i_axis = AxisAlphabet::modular(primes, users, Axis::I);
        let q_axis = AxisAlphabet::modular(primes, users, Axis::Q);
        Self::assemble(Category::SmustCat3, users, i_axis, q_axis, power, None, Some(primes.clone()))
    }

    /// Conventional MUST with real power weights: `near_fraction` of the
    /// power goes to `near`, the rest to `far` (two users).
    pub fn must(
        category: Category,
        near_fraction: f64,
        users: &[LegacyConstellation],
        far: usize,
        power: f64,
    ) -> Result<Self> {
        Self::check_users(2, users)?;
        if far > 1 {
            return Err(Error::InvalidInput(format!("far user index {far} out of range")));
        }
        let near = 1 - far;
        let mut amp = vec![0.0; 2];
        match category {
            Category::MustCat1 | Category::MustCat2 => {
                if !(near_fraction > 0.0 && near_fraction < 1.0) {
                    return Err(Error::InvalidInput(format!(
                        "near-user power fraction {near_fraction} outside (0, 1)"
                    )));
                }
                amp[near] = (near_fraction / users[near].mean_energy()).sqrt();
                amp[far] = ((1.0 - near_fraction) / users[far].mean_energy()).sqrt();
            }
            Category::MustCat3 => {
                // legacy Gray QAM: the far user's PAM is stretched over the near user's
                amp[near] = 1.0;
                amp[far] = (1u64 << users[near].axis_bits()) as f64;
            }
            _ => return Err(Error::UnsupportedScheme(category.name().into())),
        }
        let cpacs = CpacSet::normalized(amp.clone(), amp, power)?;
        Self::additive(category, &cpacs, users)
    }

    /// Legacy power fraction of the near user under MUST Cat. 3.
    pub fn must_cat3_near_fraction(near: &LegacyConstellation, far: &LegacyConstellation) -> f64 {
        let w = (1u64 << near.axis_bits()) as f64;
        let e_near = near.mean_energy();
        e_near / (e_near + w * w * far.mean_energy())
    }

    fn additive(category: Category, cpacs: &CpacSet, users: &[LegacyConstellation]) -> Result<Self> {
        Self::check_users(cpacs.users(), users)?;
        let mut i_axis = AxisAlphabet::additive(cpacs.alpha(), users);
        let mut q_axis = AxisAlphabet::additive(cpacs.beta(), users);
        if matches!(category, Category::SmustCat2 | Category::MustCat2 | Category::MustCat3) {
            i_axis = i_axis.gray_relabeled()?;
            q_axis = q_axis.gray_relabeled()?;
        }
        Self::assemble(category, users, i_axis, q_axis, cpacs.power(), Some(cpacs.clone()), None)
    }

    pub fn category(&self) -> Category {
        self.category
    }

    pub fn users(&self) -> &[LegacyConstellation] {
        &self.users
    }

    pub fn user_count(&self) -> usize {
        self.users.len()
    }

    pub fn axis(&self, axis: Axis) -> &AxisAlphabet {
        match axis {
            Axis::I => &self.i_axis,
            Axis::Q => &self.q_axis,
        }
    }

    /// Amplitude scaling `λ = sqrt(P / E|W|²)`.
    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn power(&self) -> f64 {
        self.power
    }

    pub fn cpacs(&self) -> Option<&CpacSet> {
        self.cpacs.as_ref()
    }

    pub fn primes(&self) -> Option<&PrimeCpacSet> {
        self.primes.as_ref()
    }

    /// Number of bit tuples, `Π 2^{m_ℓ}`.
    pub fn size(&self) -> usize {
        self.users.iter().map(LegacyConstellation::order).product()
    }

    /// Mean power of the λ-scaled alphabet.
    pub fn mean_power(&self) -> f64 {
        self.scale * self.scale * (self.i_axis.mean_square() + self.q_axis.mean_square())
    }

    pub fn is_injective(&self) -> bool {
        self.i_axis.is_injective() && self.q_axis.is_injective()
    }

    /// Axis level indices carrying the given per-user words.
    pub fn axis_indices(&self, words: &[u32]) -> (usize, usize) {
        let (il, ql): (Vec<u32>, Vec<u32>) =
            words.iter().zip(&self.users).map(|(&w, c)| c.split_word(w)).unzip();
        (self.i_axis.index_of_labels(&il), self.q_axis.index_of_labels(&ql))
    }

    /// Unscaled composite `W(v_1, ..., v_L)`.
    pub fn unscaled(&self, words: &[u32]) -> Result<Complex64> {
        if words.len() != self.users.len() {
            return Err(Error::InvalidInput(format!(
                "{} words for {} users",
                words.len(),
                self.users.len()
            )));
        }
        for (&w, c) in words.iter().zip(&self.users) {
            if w as usize >= c.order() {
                return Err(Error::InvalidInput(format!("word {w} exceeds {}", c.name())));
            }
        }
        let (i, q) = self.axis_indices(words);
        Ok(Complex64::new(self.i_axis.levels[i].value, self.q_axis.levels[q].value))
    }

    /// Transmitted point `λ W(v_1, ..., v_L)`.
    pub fn encode_words(&self, words: &[u32]) -> Result<Complex64> {
        Ok(self.unscaled(words)? * self.scale)
    }

    /// Transmitted point for legacy integer symbols `x_ℓ = M_ℓ(v_ℓ)`.
    pub fn encode(&self, symbols: &[Complex64]) -> Result<Complex64> {
        let words = self.words_of_symbols(symbols)?;
        self.encode_words(&words)
    }

    pub fn words_of_symbols(&self, symbols: &[Complex64]) -> Result<Vec<u32>> {
        if symbols.len() != self.users.len() {
            return Err(Error::InvalidInput(format!(
                "{} symbols for {} users",
                symbols.len(),
                self.users.len()
            )));
        }
        symbols
            .iter()
            .zip(&self.users)
            .map(|(x, c)| {
                let (i, q) = (x.re.round(), x.im.round());
                if (x.re - i).abs() > 1e-9 || (x.im - q).abs() > 1e-9 {
                    return Err(Error::InvalidInput(format!("symbol {x} has non-integer PAM components")));
                }
                c.word_of(i as i64, q as i64)
                    .ok_or_else(|| Error::InvalidInput(format!("symbol {x} is not a {} point", c.name())))
            })
            .collect()
    }

    /// Words of tuple `index` (user 0 most significant).
    pub fn tuple_words(&self, index: usize) -> Vec<u32> {
        split_mixed_radix(index, self.users.iter().map(LegacyConstellation::order))
    }

    pub fn tuple_index(&self, words: &[u32]) -> usize {
        words.iter().zip(&self.users).fold(0, |acc, (&w, c)| acc * c.order() + w as usize)
    }

    /// Every λ-scaled point in tuple-index order.
    pub fn points(&self) -> Vec<CompositePoint> {
        (0..self.size())
            .map(|t| {
                let words = self.tuple_words(t);
                let (i, q) = self.axis_indices(&words);
                CompositePoint {
                    value: Complex64::new(self.i_axis.levels[i].value, self.q_axis.levels[q].value)
                        * self.scale,
                    words,
                }
            })
            .collect()
    }

    /// CSV dump: `i,q,user1,...` with unscaled coordinates and binary words.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("i,q");
        for u in 0..self.users.len() {
            let _ = write!(out, ",user{}", u + 1);
        }
        out.push('\n');
        for t in 0..self.size() {
            let words = self.tuple_words(t);
            let w = self.unscaled(&words).expect("tuple words are in range");
            let _ = write!(out, "{},{}", w.re, w.im);
            for (word, c) in words.iter().zip(&self.users) {
                let _ = write!(out, ",{:0width$b}", word, width = c.bits_per_symbol() as usize);
            }
            out.push('\n');
        }
        out
    }
}

/// `λ (Σ α_ℓ I(x_ℓ) + j Σ β_ℓ Q(x_ℓ))` with λ set by the full Cat. 1 alphabet.
pub fn encode_cat1(cpacs: &CpacSet, users: &[LegacyConstellation], symbols: &[Complex64]) -> Result<Complex64> {
    CompositeConstellation::cat1(cpacs, users)?.encode(symbols)
}

pub fn encode_cat2(cpacs: &CpacSet, users: &[LegacyConstellation], symbols: &[Complex64]) -> Result<Complex64> {
    CompositeConstellation::cat2(cpacs, users)?.encode(symbols)
}

pub fn encode_cat3(
    primes: &PrimeCpacSet,
    users: &[LegacyConstellation],
    symbols: &[Complex64],
    power: f64,
) -> Result<Complex64> {
    CompositeConstellation::cat3(primes, users, power)?.encode(symbols)
}

#[cfg(test)]
mod tests {
    use approx::assert_relative_eq;

    use super::*;

    fn qpsk2() -> Vec<LegacyConstellation> {
        vec![LegacyConstellation::qpsk(); 2]
    }

    fn example_cpacs() -> CpacSet {
        CpacSet::new(vec![2.3, 3.11], vec![3.01, 2.18], 30.0).unwrap()
    }

    #[test]
    fn single_user_passthrough() {
        let cpacs = CpacSet::new(vec![1.0], vec![1.0], 2.0).unwrap();
        let users = vec![LegacyConstellation::qpsk()];
        let x = encode_cat1(&cpacs, &users, &[Complex64::new(1.0, 1.0)]).unwrap();
        assert_relative_eq!(x.re, 1.0, epsilon = 1e-12);
        assert_relative_eq!(x.im, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn example_cpacs_before_scaling() {
        let alphabet = CompositeConstellation::cat1(&example_cpacs(), &qpsk2()).unwrap();
        let w = alphabet.unscaled(&[0, 0]).unwrap();
        assert_relative_eq!(w.re, 5.41, epsilon = 1e-12);
        assert_relative_eq!(w.im, 5.19, epsilon = 1e-12);
    }

    #[test]
    fn unit_cpacs_overlap_is_detected() {
        let cpacs = CpacSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 4.0).unwrap();
        let alphabet = CompositeConstellation::cat1(&cpacs, &qpsk2()).unwrap();
        assert_eq!(alphabet.axis(Axis::I).distinct_values(), vec![-2.0, 0.0, 2.0]);
        let zeros = alphabet.axis(Axis::I).levels().iter().filter(|l| l.value == 0.0).count();
        assert_eq!(zeros, 2);
        assert!(!alphabet.is_injective());
        // the Gray relabel needs distinct levels
        assert!(matches!(
            CompositeConstellation::cat2(&cpacs, &qpsk2()),
            Err(Error::UnsupportedGeometry(_))
        ));
    }

    #[test]
    fn power_constraint_holds() {
        for alphabet in [
            CompositeConstellation::cat1(&example_cpacs(), &qpsk2()).unwrap(),
            CompositeConstellation::cat2(&example_cpacs(), &qpsk2()).unwrap(),
            CompositeConstellation::cat3(&PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap(), &qpsk2(), 30.0)
                .unwrap(),
        ] {
            let mean: f64 =
                alphabet.points().iter().map(|p| p.value.norm_sqr()).sum::<f64>() / alphabet.size() as f64;
            assert!(mean <= 30.0 * (1.0 + 1e-12));
            assert_relative_eq!(alphabet.mean_power(), mean, max_relative = 1e-12);
        }
    }

    #[test]
    fn cat2_is_a_relabelling_of_cat1() {
        let c1 = CompositeConstellation::cat1(&example_cpacs(), &qpsk2()).unwrap();
        let c2 = CompositeConstellation::cat2(&example_cpacs(), &qpsk2()).unwrap();
        let key = |p: &CompositePoint| (p.value.re.to_bits(), p.value.im.to_bits());
        let mut a: Vec<_> = c1.points().iter().map(key).collect();
        let mut b: Vec<_> = c2.points().iter().map(key).collect();
        a.sort();
        b.sort();
        assert_eq!(a, b);
        assert!(c1.points().iter().zip(c2.points()).any(|(p, q)| p.value != q.value));
    }

    #[test]
    fn cat2_has_axis_gray_adjacency() {
        let c2 = CompositeConstellation::cat2(&example_cpacs(), &qpsk2()).unwrap();
        let pts = c2.points();
        let label = |p: &CompositePoint| (p.words[0] << 2) | p.words[1];
        let xs = c2.axis(Axis::I).distinct_values();
        let ys = c2.axis(Axis::Q).distinct_values();
        let pos = |v: f64, grid: &[f64]| grid.iter().position(|&g| (g * c2.scale() - v).abs() < 1e-9).unwrap();
        let mut pairs = 0;
        for a in &pts {
            for b in &pts {
                let (ia, qa) = (pos(a.value.re, &xs), pos(a.value.im, &ys));
                let (ib, qb) = (pos(b.value.re, &xs), pos(b.value.im, &ys));
                if (ia == ib && qb == qa + 1) || (qa == qb && ib == ia + 1) {
                    pairs += 1;
                    assert_eq!((label(a) ^ label(b)).count_ones(), 1);
                }
            }
        }
        assert_eq!(pairs, 24);
    }

    #[test]
    fn cat2_single_user_matches_cat1() {
        let cpacs = CpacSet::new(vec![1.3], vec![0.7], 4.0).unwrap();
        let users = vec![LegacyConstellation::qam16()];
        let c1 = CompositeConstellation::cat1(&cpacs, &users).unwrap();
        let c2 = CompositeConstellation::cat2(&cpacs, &users).unwrap();
        assert_eq!(c1.points(), c2.points());
    }

    #[test]
    fn cat3_example_i_alphabet() {
        let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
        let alphabet = CompositeConstellation::cat3(&primes, &qpsk2(), 1.0).unwrap();
        assert_eq!(alphabet.axis(Axis::I).distinct_values(), vec![-5.0, -1.0, 1.0, 5.0]);
        assert!(alphabet.is_injective());
        assert_eq!(alphabet.size(), 16);
    }

    #[test]
    fn cat3_single_user_is_identity() {
        let primes = PrimeCpacSet::new(vec![5], vec![5]).unwrap();
        let users = vec![LegacyConstellation::qpsk()];
        let alphabet = CompositeConstellation::cat3(&primes, &users, 2.0).unwrap();
        for w in 0..4 {
            let (i, q) = users[0].map_index(w);
            assert_eq!(alphabet.unscaled(&[w]).unwrap(), Complex64::new(i as f64, q as f64));
        }
    }

    #[test]
    fn cat3_rejects_non_integer_symbols() {
        let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
        let r = encode_cat3(&primes, &qpsk2(), &[Complex64::new(0.5, 1.0), Complex64::new(1.0, 1.0)], 1.0);
        assert!(matches!(r, Err(Error::InvalidInput(_))));
    }

    #[test]
    fn cat3_rejects_folding_moduli() {
        // q = 1 collapses user 1's I levels
        let primes = PrimeCpacSet::new(vec![1, 3], vec![3, 2]).unwrap();
        assert!(CompositeConstellation::cat3(&primes, &qpsk2(), 1.0).is_err());
        assert!(PrimeCpacSet::new(vec![2, 4], vec![3, 5]).is_err());
    }

    #[test]
    fn must_cat3_is_legacy_16qam() {
        let alphabet =
            CompositeConstellation::must(Category::MustCat3, 0.0, &qpsk2(), 0, 10.0).unwrap();
        let mut i = alphabet.axis(Axis::I).distinct_values();
        let step = i[1] - i[0];
        for v in i.iter_mut() {
            *v /= step / 2.0;
        }
        for (got, want) in i.iter().zip([-3.0, -1.0, 1.0, 3.0]) {
            assert_relative_eq!(*got, want, epsilon = 1e-12);
        }
        let fraction = CompositeConstellation::must_cat3_near_fraction(
            &LegacyConstellation::qpsk(),
            &LegacyConstellation::qpsk(),
        );
        assert_relative_eq!(fraction, 0.2, epsilon = 1e-15);
        // far user carries the Gray MSB: its word alone decides the quadrant
        for p in alphabet.points() {
            let (fi, fq) = LegacyConstellation::qpsk().map_index(p.words[0]);
            assert_eq!(p.value.re.signum() as i64, fi);
            assert_eq!(p.value.im.signum() as i64, fq);
        }
    }

    #[test]
    fn must_power_split() {
        let alphabet =
            CompositeConstellation::must(Category::MustCat1, 0.2, &qpsk2(), 0, 1.0).unwrap();
        let c = alphabet.cpacs().unwrap();
        let near_power = c.alpha()[1].powi(2) + c.beta()[1].powi(2);
        assert_relative_eq!(near_power / c.total(), 0.2, epsilon = 1e-12);
        assert!(CompositeConstellation::must(Category::MustCat1, 0.0, &qpsk2(), 0, 1.0).is_err());
    }

    #[test]
    fn cpac_validation() {
        assert!(CpacSet::new(vec![1.0], vec![1.0, 2.0], 10.0).is_err());
        assert!(CpacSet::new(vec![-1.0], vec![1.0], 10.0).is_err());
        assert!(CpacSet::new(vec![3.0], vec![3.0], 10.0).is_err());
        let c = CpacSet::normalized(vec![1.0, 2.0], vec![2.0, 1.0], 7.0).unwrap();
        assert!(c.total() <= 7.0);
        assert_relative_eq!(c.total(), 7.0, max_relative = 1e-12);
    }

    #[test]
    fn csv_export_has_header_and_rows() {
        let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
        let csv = CompositeConstellation::cat3(&primes, &qpsk2(), 1.0).unwrap().to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "i,q,user1,user2");
        assert_eq!(lines.len(), 17);
        assert_eq!(lines[1], "5,5,00,00");
    }
}
