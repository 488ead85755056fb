//! Proportional-fair scheduling: the dynamic MA baseline (OMA/MUST
//! switching) and pair scheduling for S-MUST driven by the CPAC table.
//!
//! Rates are mutual-information based. CQI is a linear channel gain and is
//! turned into an SNR as `P · CQI / 2σ²`.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::{linear_to_db, sample_rayleigh};
use crate::constellation::LegacyConstellation;
use crate::power_alloc::{alphabet_rates, cat1_rates, default_alpha_grid, far_user, mi_single_quadrature, LutGrid};
use crate::superposition::{Category, CompositeConstellation, CpacSet, PrimeCpacSet};
use crate::{Error, Result};

pub const PF_FLOOR: f64 = 1e-6;
pub const DEFAULT_TC: f64 = 100.0;

/// Smoothed per-UE throughput memory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PfState {
    avg_rate: Vec<f64>,
    t_c: f64,
}

impl PfState {
    pub fn new(ues: usize, t_c: f64) -> Result<Self> {
        if !(t_c >= 1.0) {
            return Err(Error::InvalidInput(format!("smoothing window {t_c} must be at least 1")));
        }
        Ok(PfState { avg_rate: vec![PF_FLOOR; ues], t_c })
    }

    pub fn with_rates(avg_rate: Vec<f64>, t_c: f64) -> Result<Self> {
        let mut s = PfState::new(avg_rate.len(), t_c)?;
        s.avg_rate = avg_rate.into_iter().map(|r| r.max(PF_FLOOR)).collect();
        Ok(s)
    }

    pub fn avg_rate(&self) -> &[f64] {
        &self.avg_rate
    }

    pub fn t_c(&self) -> f64 {
        self.t_c
    }

    pub fn ues(&self) -> usize {
        self.avg_rate.len()
    }
}

/// `R̄ ← (1 - 1/t_c) R̄ + R / t_c`, floored at [`PF_FLOOR`].
pub fn pf_update(state: &PfState, served: &[f64]) -> Result<PfState> {
    if served.len() != state.ues() {
        return Err(Error::InvalidInput(format!("{} rates for {} UEs", served.len(), state.ues())));
    }
    let w = 1.0 / state.t_c;
    let avg_rate =
        state.avg_rate.iter().zip(served).map(|(&a, &r)| ((1.0 - w) * a + w * r).max(PF_FLOOR)).collect();
    Ok(PfState { avg_rate, t_c: state.t_c })
}

/// `Σ R_ℓ / R̄_ℓ` over the listed UEs.
pub fn pf_metric(ues: &[usize], rates: &[f64], state: &PfState) -> f64 {
    ues.iter().zip(rates).map(|(&u, &r)| r / state.avg_rate[u]).sum()
}

/// Pair PF: instantaneous sum-rate over average sum-rate.
pub fn pf_pair(ues: [usize; 2], rates: [f64; 2], state: &PfState) -> f64 {
    (rates[0] + rates[1]) / (state.avg_rate[ues[0]] + state.avg_rate[ues[1]])
}

/// Index of the configuration with the largest minimum rate (ties: lowest index).
pub fn maxmin_fairness(rates_by_config: &[Vec<f64>]) -> Result<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (k, rates) in rates_by_config.iter().enumerate() {
        let m = rates.iter().copied().fold(f64::INFINITY, f64::min);
        if best.is_none_or(|(_, b)| m > b) {
            best = Some((k, m));
        }
    }
    best.ok_or_else(|| Error::InvalidInput("no configurations".into()))
}

/// Per-UE, per-subband channel quality and precoder index.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Feedback {
    cqi: Vec<Vec<f64>>,
    pmi: Vec<Vec<u32>>,
}

impl Feedback {
    pub fn new(cqi: Vec<Vec<f64>>, pmi: Vec<Vec<u32>>) -> Result<Self> {
        if cqi.is_empty() || cqi.len() != pmi.len() {
            return Err(Error::InvalidInput("CQI and PMI must cover the same UEs".into()));
        }
        let sb = cqi[0].len();
        if sb == 0 || cqi.iter().any(|c| c.len() != sb) || pmi.iter().any(|p| p.len() != sb) {
            return Err(Error::InvalidInput("every UE needs one CQI and PMI per subband".into()));
        }
        if cqi.iter().flatten().any(|&c| !(c > 0.0) || !c.is_finite()) {
            return Err(Error::InvalidInput("CQI values must be positive".into()));
        }
        Ok(Feedback { cqi, pmi })
    }

    /// Rayleigh-faded CQIs around per-UE mean gains, PMIs uniform in `0..pmis`.
    pub fn random<R: Rng + ?Sized>(mean_gain: &[f64], subbands: usize, pmis: u32, rng: &mut R) -> Result<Self> {
        let mut cqi = Vec::with_capacity(mean_gain.len());
        let mut pmi = Vec::with_capacity(mean_gain.len());
        for &g in mean_gain {
            cqi.push((0..subbands).map(|_| (g * sample_rayleigh(rng).norm_sqr()).max(1e-300)).collect());
            pmi.push((0..subbands).map(|_| rng.random_range(0..pmis.max(1))).collect());
        }
        Feedback::new(cqi, pmi)
    }

    pub fn ues(&self) -> usize {
        self.cqi.len()
    }

    pub fn subbands(&self) -> usize {
        self.cqi[0].len()
    }

    pub fn cqi(&self, ue: usize, subband: usize) -> f64 {
        self.cqi[ue][subband]
    }

    pub fn pmi(&self, ue: usize, subband: usize) -> u32 {
        self.pmi[ue][subband]
    }

    /// Restriction to a subset of UEs (in the given order).
    pub fn subset(&self, ues: &[usize]) -> Feedback {
        Feedback {
            cqi: ues.iter().map(|&u| self.cqi[u].clone()).collect(),
            pmi: ues.iter().map(|&u| self.pmi[u].clone()).collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TxMode {
    Oma,
    Must,
    Smust,
}

/// Operation tallies.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OpCount {
    pub pf_evals: u64,
    pub alpha_iters: u64,
    pub tx_mode_iters: u64,
    pub alignment_iters: u64,
    pub lut_lookups: u64,
}

impl OpCount {
    pub fn add(&mut self, other: &OpCount) {
        self.pf_evals += other.pf_evals;
        self.alpha_iters += other.alpha_iters;
        self.tx_mode_iters += other.tx_mode_iters;
        self.alignment_iters += other.alignment_iters;
        self.lut_lookups += other.lut_lookups;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubbandDecision {
    pub subband: usize,
    /// `None` when the subband was released.
    pub mode: Option<TxMode>,
    pub ues: Vec<usize>,
    pub rates: Vec<f64>,
    pub pf: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub near_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cpacs: Option<CpacSet>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub primes: Option<PrimeCpacSet>,
}

impl SubbandDecision {
    fn idle(subband: usize) -> Self {
        SubbandDecision {
            subband,
            mode: None,
            ues: Vec::new(),
            rates: Vec::new(),
            pf: 0.0,
            near_fraction: None,
            cpacs: None,
            primes: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleDecision {
    pub subbands: Vec<SubbandDecision>,
    pub ops: OpCount,
}

impl ScheduleDecision {
    /// Total rate per UE over all subbands.
    pub fn served(&self, ues: usize) -> Vec<f64> {
        let mut out = vec![0.0; ues];
        for d in &self.subbands {
            for (&u, &r) in d.ues.iter().zip(&d.rates) {
                out[u] += r;
            }
        }
        out
    }
}

/// Instantaneous rates for each transmission format.
pub trait RateModel: Sync {
    fn single(&self, snr: f64) -> f64;
    /// MUST pair with `near_fraction` of the power on the stronger UE.
    fn must(&self, snr: [f64; 2], near_fraction: f64) -> [f64; 2];
    fn smust(&self, snr: [f64; 2], cpacs: &CpacSet) -> [f64; 2];
}

/// Quadrature mutual information with one legacy constellation for every UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiRateModel {
    pub constellation: LegacyConstellation,
    pub must_category: Category,
}

impl MiRateModel {
    pub fn new(constellation: LegacyConstellation) -> Self {
        MiRateModel { constellation, must_category: Category::MustCat1 }
    }

    fn pair(&self) -> [LegacyConstellation; 2] {
        [self.constellation; 2]
    }
}

impl RateModel for MiRateModel {
    fn single(&self, snr: f64) -> f64 {
        mi_single_quadrature(&self.constellation, snr).unwrap_or(0.0)
    }

    fn must(&self, snr: [f64; 2], near_fraction: f64) -> [f64; 2] {
        CompositeConstellation::must(self.must_category, near_fraction, &self.pair(), far_user(&snr), 1.0)
            .and_then(|a| alphabet_rates(&a, &snr))
            .map(|r| [r[0], r[1]])
            .unwrap_or([0.0; 2])
    }

    fn smust(&self, snr: [f64; 2], cpacs: &CpacSet) -> [f64; 2] {
        cat1_rates(cpacs, &self.pair(), &snr).map(|r| [r[0], r[1]]).unwrap_or([0.0; 2])
    }
}

/// Link parameters needed to turn CQI into SNR.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedulerConfig {
    pub power: f64,
    pub noise_var_per_dim: f64,
    pub alpha_grid: Vec<f64>,
}

impl Default for SchedulerConfig {
    fn default() -> Self {
        SchedulerConfig { power: 1.0, noise_var_per_dim: 0.5, alpha_grid: default_alpha_grid() }
    }
}

impl SchedulerConfig {
    pub fn snr(&self, cqi: f64) -> f64 {
        self.power * cqi / (2.0 * self.noise_var_per_dim)
    }

    fn validate(&self) -> Result<()> {
        if let Some(a) = self.alpha_grid.iter().find(|&&a| !(a > 0.025 && a <= 0.3)) {
            return Err(Error::InvalidInput(format!("power fraction {a} outside (0.025, 0.3]")));
        }
        if !(self.power > 0.0) || !(self.noise_var_per_dim > 0.0) {
            return Err(Error::InvalidInput("power and noise must be positive".into()));
        }
        Ok(())
    }
}

/// Mode constraints carried from one dynamic MA round to the next.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DynamicMaMemory {
    pub forced: BTreeMap<usize, TxMode>,
}

fn allowed(memory: &DynamicMaMemory, ue: usize, mode: TxMode) -> bool {
    memory.forced.get(&ue).is_none_or(|&m| m == mode)
}

/// One round of dynamic MA frequency-selective scheduling.
///
/// Passes: best single UE per subband (OMA); best near-far pair per subband
/// with the best power fraction (MUST); per-subband mode choice; then each UE
/// takes its majority mode and subbands where it was scheduled in the
/// minority mode are released. Released UEs are forced into their majority
/// mode in `memory` for the next round.
pub fn dynamic_ma_schedule(
    feedback: &Feedback,
    state: &PfState,
    config: &SchedulerConfig,
    model: &dyn RateModel,
    memory: &mut DynamicMaMemory,
) -> Result<ScheduleDecision> {
    config.validate()?;
    let mut ops = OpCount::default();
    let (n_ue, n_sb) = (feedback.ues(), feedback.subbands());
    let memory_in = std::mem::take(memory);

    let mut oma = Vec::with_capacity(n_sb);
    for sb in 0..n_sb {
        let mut best: Option<SubbandDecision> = None;
        for i in 0..n_ue {
            if !allowed(&memory_in, i, TxMode::Oma) {
                continue;
            }
            let r = model.single(config.snr(feedback.cqi(i, sb)));
            let pf = pf_metric(&[i], &[r], state);
            ops.pf_evals += 1;
            if best.as_ref().is_none_or(|b| pf > b.pf) {
                best = Some(SubbandDecision {
                    mode: Some(TxMode::Oma),
                    ues: vec![i],
                    rates: vec![r],
                    pf,
                    ..SubbandDecision::idle(sb)
                });
            }
        }
        oma.push(best);
    }

    let mut must = Vec::with_capacity(n_sb);
    for sb in 0..n_sb {
        let mut best: Option<SubbandDecision> = None;
        for j in 0..n_ue {
            for k in 0..n_ue {
                if j == k
                    || feedback.pmi(j, sb) != feedback.pmi(k, sb)
                    || !(feedback.cqi(j, sb) > feedback.cqi(k, sb))
                    || !allowed(&memory_in, j, TxMode::Must)
                    || !allowed(&memory_in, k, TxMode::Must)
                {
                    continue;
                }
                let snr = [config.snr(feedback.cqi(j, sb)), config.snr(feedback.cqi(k, sb))];
                let mut pair_best: Option<(f64, f64, [f64; 2])> = None;
                for &a in &config.alpha_grid {
                    ops.alpha_iters += 1;
                    ops.pf_evals += 1;
                    let r = model.must(snr, a);
                    let pf = pf_pair([j, k], r, state);
                    if pair_best.is_none_or(|b| pf > b.0) {
                        pair_best = Some((pf, a, r));
                    }
                }
                if let Some((pf, a, r)) = pair_best {
                    if best.as_ref().is_none_or(|b| pf > b.pf) {
                        best = Some(SubbandDecision {
                            mode: Some(TxMode::Must),
                            ues: vec![j, k],
                            rates: r.to_vec(),
                            pf,
                            near_fraction: Some(a),
                            ..SubbandDecision::idle(sb)
                        });
                    }
                }
            }
        }
        must.push(best);
    }

    let mut chosen: Vec<SubbandDecision> = Vec::with_capacity(n_sb);
    for sb in 0..n_sb {
        ops.tx_mode_iters += 1;
        let pick = match (&oma[sb], &must[sb]) {
            (Some(o), Some(m)) if m.pf > o.pf => m.clone(),
            (Some(o), _) => o.clone(),
            (None, Some(m)) => m.clone(),
            (None, None) => SubbandDecision::idle(sb),
        };
        chosen.push(pick);
    }

    for ue in 0..n_ue {
        ops.alignment_iters += 1;
        let count = |mode: TxMode| chosen.iter().filter(|d| d.mode == Some(mode) && d.ues.contains(&ue)).count();
        let (n_must, n_oma) = (count(TxMode::Must), count(TxMode::Oma));
        if n_must + n_oma == 0 {
            continue;
        }
        let best_mode = if n_must > n_oma { TxMode::Must } else { TxMode::Oma };
        let mut released = false;
        for d in chosen.iter_mut() {
            if d.ues.contains(&ue) && d.mode.is_some() && d.mode != Some(best_mode) {
                *d = SubbandDecision::idle(d.subband);
                released = true;
            }
        }
        if released {
            memory.forced.insert(ue, best_mode);
        }
    }
    Ok(ScheduleDecision { subbands: chosen, ops })
}

/// S-MUST pair selection on one subband among `ues` (indices into
/// `feedback`); one table lookup and one PF evaluation per admissible pair.
/// With `match_pmi` only pairs reporting the same PMI are admissible.
#[allow(clippy::too_many_arguments)]
pub fn smust_select_pair(
    ues: &[usize],
    subband: usize,
    feedback: &Feedback,
    state: &PfState,
    config: &SchedulerConfig,
    lut: &LutGrid,
    model: &dyn RateModel,
    match_pmi: bool,
    ops: &mut OpCount,
) -> Result<Option<SubbandDecision>> {
    let mut best: Option<SubbandDecision> = None;
    for (a, &j) in ues.iter().enumerate() {
        for &k in &ues[a + 1..] {
            if match_pmi && feedback.pmi(j, subband) != feedback.pmi(k, subband) {
                continue;
            }
            let snr = [config.snr(feedback.cqi(j, subband)), config.snr(feedback.cqi(k, subband))];
            let (cpacs, primes) = lut.lookup(&[linear_to_db(snr[0]), linear_to_db(snr[1])])?;
            ops.lut_lookups += 1;
            let r = model.smust(snr, &cpacs);
            let pf = pf_pair([j, k], r, state);
            ops.pf_evals += 1;
            if best.as_ref().is_none_or(|b| pf > b.pf) {
                best = Some(SubbandDecision {
                    mode: Some(TxMode::Smust),
                    ues: vec![j, k],
                    rates: r.to_vec(),
                    pf,
                    cpacs: Some(cpacs),
                    primes: Some(primes),
                    ..SubbandDecision::idle(subband)
                });
            }
        }
    }
    Ok(best)
}

/// S-MUST scheduling: every subband carries the PMI-matched pair with the
/// best PF under table CPACs. A subband without any PMI-matched pair is
/// left idle.
pub fn smust_schedule(
    feedback: &Feedback,
    state: &PfState,
    config: &SchedulerConfig,
    lut: &LutGrid,
    model: &dyn RateModel,
) -> Result<ScheduleDecision> {
    config.validate()?;
    let mut ops = OpCount::default();
    let ues: Vec<usize> = (0..feedback.ues()).collect();
    let mut subbands = Vec::with_capacity(feedback.subbands());
    for sb in 0..feedback.subbands() {
        let d = smust_select_pair(&ues, sb, feedback, state, config, lut, model, true, &mut ops)?;
        subbands.push(d.unwrap_or_else(|| SubbandDecision::idle(sb)));
    }
    Ok(ScheduleDecision { subbands, ops })
}
