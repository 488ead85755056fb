//! Finite-alphabet mutual information per axis, by Monte Carlo or
//! Gauss-Hermite quadrature.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::quadrature::gauss_hermite;
use crate::constellation::LegacyConstellation;
use crate::receiver::{MpicParams, SicOrder};
use crate::superposition::{centered_mod, Axis, AxisAlphabet, CompositeConstellation, CpacSet};
use crate::{Error, Result};

pub const MIN_SAMPLES: usize = 10_000;
const BATCHES: usize = 20;
const QUADRATURE_NODES: usize = 40;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MiEstimate {
    /// Bits per channel use.
    pub value: f64,
    pub std_error: f64,
    pub sample_count: usize,
}

impl MiEstimate {
    fn zero(samples: usize) -> Self {
        MiEstimate { value: 0.0, std_error: 0.0, sample_count: samples }
    }
}

/// How a receiver extracts its own data from the composite.
#[derive(Debug, Clone, PartialEq)]
pub enum Decoder {
    /// Condition on the users decoded earlier on each axis.
    Sic(SicOrder),
    /// Centered-modulo reduction by the user's own moduli.
    Mpic,
}

/// `log2 E_{num} / E_{den}` for one noisy observation of level `t`.
trait AxisTerm {
    fn levels(&self) -> usize;
    fn term(&self, t: usize, noise: f64, var: f64) -> f64;
}

/// Conditional MI table: each level lists the levels that share its known
/// layers (denominator) and flags those that also share the user's layer.
struct MixtureTable {
    values: Vec<f64>,
    groups: Vec<Vec<(usize, bool)>>,
    log_ratio: Vec<f64>,
}

impl MixtureTable {
    fn new(axis: &AxisAlphabet, known: &[usize], user: Option<usize>) -> Self {
        let levels = axis.levels();
        let mut groups = Vec::with_capacity(levels.len());
        let mut log_ratio = Vec::with_capacity(levels.len());
        for a in levels {
            let group: Vec<(usize, bool)> = levels
                .iter()
                .enumerate()
                .filter(|(_, b)| known.iter().all(|&k| a.layers[k] == b.layers[k]))
                .map(|(j, b)| {
                    let same = match user {
                        Some(u) => a.layers[u] == b.layers[u],
                        None => a.layers == b.layers,
                    };
                    (j, same)
                })
                .collect();
            let num = group.iter().filter(|g| g.1).count();
            log_ratio.push((group.len() as f64 / num as f64).log2());
            groups.push(group);
        }
        MixtureTable { values: levels.iter().map(|l| l.value).collect(), groups, log_ratio }
    }
}

impl AxisTerm for MixtureTable {
    fn levels(&self) -> usize {
        self.values.len()
    }

    fn term(&self, t: usize, noise: f64, var: f64) -> f64 {
        let z = self.values[t] + noise;
        let group = &self.groups[t];
        let mut peak = f64::NEG_INFINITY;
        for &(j, same) in group {
            if same {
                let d = z - self.values[j];
                peak = peak.max(-d * d / (2.0 * var));
            }
        }
        let (mut num, mut extra) = (0.0, 0.0);
        for &(j, same) in group {
            let d = z - self.values[j];
            let e = (-d * d / (2.0 * var) - peak).exp();
            if same {
                num += e;
            } else {
                extra += e;
            }
        }
        self.log_ratio[t] - (extra / num).ln_1p() / std::f64::consts::LN_2
    }
}

/// M-PIC channel: own level `s` lands on residue target `t_s`, observed
/// through a wrapped Gaussian with period `2q`.
struct WrappedTable {
    targets: Vec<f64>,
    modulus: f64,
}

impl WrappedTable {
    fn new(params: &MpicParams, axis: Axis) -> Self {
        let (scaling, offset) = params.effective(axis);
        let modulus = params.modulus(axis) as i64;
        let targets = params
            .constellation()
            .pam_levels()
            .iter()
            .map(|&s| crate::superposition::centered_mod_int(scaling * s + offset, modulus) as f64)
            .collect();
        WrappedTable { targets, modulus: modulus as f64 }
    }

    fn log_density(&self, r: f64, target: f64, var: f64, images: i64) -> f64 {
        let d0 = centered_mod(r - target, self.modulus).expect("modulus is positive");
        let mut peak = f64::NEG_INFINITY;
        let mut sum = 0.0;
        for k in -images..=images {
            let d = d0 + 2.0 * self.modulus * k as f64;
            let e = -d * d / (2.0 * var);
            if e > peak {
                sum = sum * (peak - e).exp() + 1.0;
                peak = e;
            } else {
                sum += (e - peak).exp();
            }
        }
        peak + sum.ln()
    }
}

impl AxisTerm for WrappedTable {
    fn levels(&self) -> usize {
        self.targets.len()
    }

    fn term(&self, t: usize, noise: f64, var: f64) -> f64 {
        let images = (4.0 * var.sqrt() / (2.0 * self.modulus)).ceil() as i64 + 1;
        let r = centered_mod(self.targets[t] + noise, self.modulus).expect("modulus is positive");
        let own = self.log_density(r, self.targets[t], var, images);
        let logs: Vec<f64> =
            self.targets.iter().map(|&x| self.log_density(r, x, var, images) - own).collect();
        let mix: f64 = logs.iter().map(|l| l.exp()).sum::<f64>() / self.targets.len() as f64;
        -mix.ln() / std::f64::consts::LN_2
    }
}

fn check_snr(snr: f64) -> Result<()> {
    if !(snr >= 0.0) || !snr.is_finite() {
        return Err(Error::InvalidSnr(snr));
    }
    Ok(())
}

/// Per-dimension noise variance in unscaled alphabet units.
fn unscaled_var(alphabet: &CompositeConstellation, snr: f64) -> f64 {
    alphabet.power() / (2.0 * snr * alphabet.scale() * alphabet.scale())
}

fn monte_carlo<R: Rng + ?Sized>(
    terms: [&dyn AxisTerm; 2],
    var: f64,
    samples: usize,
    rng: &mut R,
) -> Result<MiEstimate> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidInput(format!(
            "{samples} Monte Carlo samples requested, at least {MIN_SAMPLES} required"
        )));
    }
    let sd = var.sqrt();
    let mut batch_sums = [0.0; BATCHES];
    let mut batch_counts = vec![0usize; BATCHES];
    for k in 0..samples {
        let mut v = 0.0;
        for term in terms {
            let t = rng.random_range(0..term.levels());
            let n: f64 = StandardNormal.sample(rng);
            v += term.term(t, sd * n, var);
        }
        let b = k * BATCHES / samples;
        batch_sums[b] += v;
        batch_counts[b] += 1;
    }
    let means: Vec<f64> = batch_sums.iter().zip(&batch_counts).map(|(s, &c)| s / c as f64).collect();
    let value = batch_sums.iter().sum::<f64>() / samples as f64;
    let spread = means.iter().map(|m| (m - value).powi(2)).sum::<f64>() / (BATCHES - 1) as f64;
    Ok(MiEstimate { value, std_error: (spread / BATCHES as f64).sqrt(), sample_count: samples })
}

fn quadrature(terms: [&dyn AxisTerm; 2], var: f64) -> f64 {
    let (nodes, weights) = gauss_hermite(QUADRATURE_NODES);
    let sd = var.sqrt();
    terms
        .iter()
        .map(|term| {
            let mut acc = 0.0;
            for t in 0..term.levels() {
                for (x, w) in nodes.iter().zip(&weights) {
                    acc += w * term.term(t, std::f64::consts::SQRT_2 * sd * x, var);
                }
            }
            acc / (term.levels() as f64 * std::f64::consts::PI.sqrt())
        })
        .sum::<f64>()
        .max(0.0)
}

fn sic_tables(alphabet: &CompositeConstellation, user: usize, order: &SicOrder) -> [MixtureTable; 2] {
    [Axis::I, Axis::Q].map(|axis| {
        let o = order.axis(axis);
        let stage = o.iter().position(|&u| u == user).expect("order is a permutation");
        MixtureTable::new(alphabet.axis(axis), &o[..stage], Some(user))
    })
}

fn check_user(alphabet: &CompositeConstellation, user: usize, snr: &[f64]) -> Result<f64> {
    if user >= alphabet.user_count() || snr.len() != alphabet.user_count() {
        return Err(Error::InvalidInput(format!(
            "user {user} with {} SNR values for {} users",
            snr.len(),
            alphabet.user_count()
        )));
    }
    for &s in snr {
        check_snr(s)?;
    }
    Ok(snr[user])
}

/// `I(Y_ℓ; X_ℓ | X_earlier)` at user `user`'s SNR, summed over I and Q.
pub fn mi_conditional<R: Rng + ?Sized>(
    alphabet: &CompositeConstellation,
    user: usize,
    snr: &[f64],
    decoder: &Decoder,
    samples: usize,
    rng: &mut R,
) -> Result<MiEstimate> {
    let s = check_user(alphabet, user, snr)?;
    if s == 0.0 {
        return Ok(MiEstimate::zero(samples));
    }
    let var = unscaled_var(alphabet, s);
    match decoder {
        Decoder::Sic(order) => {
            let [ti, tq] = sic_tables(alphabet, user, order);
            monte_carlo([&ti, &tq], var, samples, rng)
        }
        Decoder::Mpic => {
            let params = MpicParams::from_alphabet(alphabet, user)?;
            let (ti, tq) = (WrappedTable::new(&params, Axis::I), WrappedTable::new(&params, Axis::Q));
            monte_carlo([&ti, &tq], var, samples, rng)
        }
    }
}

/// Deterministic counterpart of [`mi_conditional`].
pub fn mi_conditional_quadrature(
    alphabet: &CompositeConstellation,
    user: usize,
    snr: &[f64],
    decoder: &Decoder,
) -> Result<f64> {
    let s = check_user(alphabet, user, snr)?;
    if s == 0.0 {
        return Ok(0.0);
    }
    let var = unscaled_var(alphabet, s);
    Ok(match decoder {
        Decoder::Sic(order) => {
            let [ti, tq] = sic_tables(alphabet, user, order);
            quadrature([&ti, &tq], var)
        }
        Decoder::Mpic => {
            let params = MpicParams::from_alphabet(alphabet, user)?;
            quadrature([&WrappedTable::new(&params, Axis::I), &WrappedTable::new(&params, Axis::Q)], var)
        }
    })
}

/// `I(Y; X_1, ..., X_L)` at a common SNR.
pub fn mi_joint<R: Rng + ?Sized>(
    alphabet: &CompositeConstellation,
    snr: f64,
    samples: usize,
    rng: &mut R,
) -> Result<MiEstimate> {
    check_snr(snr)?;
    if snr == 0.0 {
        return Ok(MiEstimate::zero(samples));
    }
    let ti = MixtureTable::new(alphabet.axis(Axis::I), &[], None);
    let tq = MixtureTable::new(alphabet.axis(Axis::Q), &[], None);
    monte_carlo([&ti, &tq], unscaled_var(alphabet, snr), samples, rng)
}

fn single_user(constellation: &LegacyConstellation) -> CompositeConstellation {
    let cpacs = CpacSet::new(vec![1.0], vec![1.0], 2.0).expect("unit CPACs are valid");
    CompositeConstellation::cat1(&cpacs, std::slice::from_ref(constellation))
        .expect("single-user alphabet is valid")
}

/// Single-user MI of a legacy constellation at linear SNR `snr`.
pub fn mi_single<R: Rng + ?Sized>(
    constellation: &LegacyConstellation,
    snr: f64,
    samples: usize,
    rng: &mut R,
) -> Result<MiEstimate> {
    mi_joint(&single_user(constellation), snr, samples, rng)
}

pub fn mi_single_quadrature(constellation: &LegacyConstellation, snr: f64) -> Result<f64> {
    let alphabet = single_user(constellation);
    mi_conditional_quadrature(&alphabet, 0, &[snr], &Decoder::Sic(SicOrder::from_channel_gains(&[1.0])))
}
