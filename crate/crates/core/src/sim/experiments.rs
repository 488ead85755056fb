//! Experiment drivers: symmetric fairness sweeps, multi-antenna min-rate
//! distributions and a small system-level scheduling run.

use nalgebra::DVector;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{Cat3Decoder, LutLookup, MimoChannel, OmaMode, Scheme, SimConfig};
use super::emit::{Columns, ResultRecord};
use super::layout::Layout;
use crate::channel::{db_to_linear, linear_to_db, sample_rayleigh};
use crate::constellation::LegacyConstellation;
use crate::mimo::{effective_links, plan_clusters};
use crate::receiver::SicOrder;
use crate::power_alloc::{
    alphabet_rates, build_lut, cat1_rates, default_alpha_grid, default_decoder, mi_conditional, mi_single,
    mi_conditional_quadrature, mi_single_quadrature, optimize_cpacs, optimize_must, Decoder, LutGrid, MiEstimate,
};
use crate::scheduler::{
    dynamic_ma_schedule, pf_update, smust_schedule, DynamicMaMemory, Feedback, MiRateModel, OpCount, PfState,
    SchedulerConfig, SubbandDecision,
};
use crate::superposition::{quantize_cpacs, Category, CompositeConstellation, CpacSet, QUANTIZE_BUDGET};
use crate::{Error, Result};

pub const FAIRNESS_COLUMNS: Columns = Columns { axis: "snr_db", metric: "min_bpcu" };
pub const MIMO_COLUMNS: Columns = Columns { axis: "percentile", metric: "min_rate" };
pub const SCHED_COLUMNS: Columns = Columns { axis: "percentile", metric: "ue_throughput" };

/// Independent ChaCha stream `stream` under `seed`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// OMA constellation: twice the order of `c` when matched.
pub fn oma_constellation(c: &LegacyConstellation, mode: OmaMode) -> Result<LegacyConstellation> {
    match mode {
        OmaMode::Matched => LegacyConstellation::new(2 * c.bits_per_symbol()),
        OmaMode::Legacy => Ok(*c),
    }
}

fn record(scheme: Scheme, columns: Columns, x: f64, value: f64, std_error: f64, trials: usize, seed: u64) -> ResultRecord {
    ResultRecord {
        scheme: scheme.name().into(),
        axis: columns.axis.into(),
        x,
        metric: columns.metric.into(),
        value,
        std_error,
        trials: trials as u64,
        seed,
    }
}

fn snr_points(cfg: &SimConfig) -> Vec<f64> {
    let s = &cfg.sweep;
    let n = ((s.snr_db_stop - s.snr_db_start) / s.snr_db_step + 1e-9).floor() as usize;
    (0..=n).map(|k| s.snr_db_start + k as f64 * s.snr_db_step).collect()
}

/// Monte Carlo conditional MI of every user; the worst user's estimate.
/// User `u` draws from stream `base + u`, so alphabets evaluated at the
/// same point share noise samples.
fn min_user_mi(alphabet: &CompositeConstellation, snr: &[f64], trials: usize, seed: u64, base: u64) -> Result<MiEstimate> {
    let decoder = default_decoder(alphabet, snr);
    let mut worst: Option<MiEstimate> = None;
    for u in 0..alphabet.user_count() {
        let est = mi_conditional(alphabet, u, snr, &decoder, trials, &mut stream_rng(seed, base + u as u64))?;
        if worst.as_ref().is_none_or(|w| est.value < w.value) {
            worst = Some(est);
        }
    }
    worst.ok_or_else(|| Error::InvalidInput("alphabet without users".into()))
}

/// Dynamic MA on a symmetric pair: OMA or the best MUST Cat. 1 split,
/// whichever has the better worst user.
fn dynamic_ma_alphabet(
    snr: &[f64],
    users: &[LegacyConstellation],
    cfg: &SimConfig,
    oma: &LegacyConstellation,
) -> Result<Option<CompositeConstellation>> {
    let must = optimize_must(Category::MustCat1, snr, users, cfg.power, &default_alpha_grid())?;
    let oma_rate = snr.iter().map(|&s| mi_single_quadrature(oma, s).map(|r| r / 2.0)).collect::<Result<Vec<_>>>()?;
    if oma_rate.iter().cloned().fold(f64::INFINITY, f64::min) >= must.objective {
        return Ok(None);
    }
    let far = crate::power_alloc::far_user(snr);
    CompositeConstellation::must(Category::MustCat1, must.near_fraction, users, far, cfg.power).map(Some)
}

/// Min-user BPCU per scheme and SNR on the symmetric channel `h1 = h2 = 1`.
pub fn run_fairness_sweep(cfg: &SimConfig) -> Result<Vec<ResultRecord>> {
    let schemes = cfg.schemes()?;
    let c = cfg.constellation()?;
    let users = [c; 2];
    let oma = oma_constellation(&c, cfg.sweep.oma)?;
    let points = snr_points(cfg);
    let needs_opt = schemes.iter().any(|s| matches!(s, Scheme::SmustCat1 | Scheme::SmustCat2 | Scheme::SmustCat3));
    let per_point: Vec<Vec<ResultRecord>> = points
        .par_iter()
        .enumerate()
        .map(|(pi, &db)| -> Result<Vec<ResultRecord>> {
            let snr = [db_to_linear(db); 2];
            let base = pi as u64 * 64;
            let opt = if needs_opt { Some(optimize_cpacs(&snr, &users, cfg.power, &cfg.lut.grid)?) } else { None };
            let mut out = Vec::with_capacity(schemes.len());
            for &scheme in &schemes {
                let alphabet = match scheme {
                    Scheme::Oma => None,
                    Scheme::DynamicMa => dynamic_ma_alphabet(&snr, &users, cfg, &oma)?,
                    Scheme::MustCat1 | Scheme::MustCat2 | Scheme::MustCat3 => {
                        let cat = scheme.category().expect("MUST scheme has a category");
                        let choice = optimize_must(cat, &snr, &users, cfg.power, &default_alpha_grid())?;
                        let far = crate::power_alloc::far_user(&snr);
                        Some(CompositeConstellation::must(cat, choice.near_fraction, &users, far, cfg.power)?)
                    }
                    Scheme::SmustCat1 | Scheme::SmustCat2 | Scheme::SmustCat3 => {
                        let cpacs = &opt.as_ref().expect("optimized above").cpacs;
                        Some(match scheme {
                            Scheme::SmustCat1 => CompositeConstellation::cat1(cpacs, &users)?,
                            Scheme::SmustCat2 => cat2_alphabet(cpacs, &users)?,
                            _ => {
                                let primes = quantize_cpacs(cpacs, &users, QUANTIZE_BUDGET)?;
                                CompositeConstellation::cat3(&primes, &users, cfg.power)?
                            }
                        })
                    }
                };
                let est = match alphabet {
                    Some(a) => min_user_mi(&a, &snr, cfg.trials, cfg.seed, base)?,
                    None => {
                        let e = mi_single(&oma, snr[0], cfg.trials, &mut stream_rng(cfg.seed, base))?;
                        MiEstimate { value: e.value / 2.0, std_error: e.std_error / 2.0, sample_count: e.sample_count }
                    }
                };
                out.push(record(scheme, FAIRNESS_COLUMNS, db, est.value, est.std_error, cfg.trials, cfg.seed));
            }
            Ok(out)
        })
        .collect::<Result<_>>()?;
    let mut records = Vec::with_capacity(points.len() * schemes.len());
    for si in 0..schemes.len() {
        records.extend(per_point.iter().map(|p| p[si].clone()));
    }
    Ok(records)
}

/// Cat. 2 alphabet, or the Cat. 1 labelling when colliding levels leave
/// the Gray relabel undefined.
fn cat2_alphabet(cpacs: &CpacSet, users: &[LegacyConstellation]) -> Result<CompositeConstellation> {
    match CompositeConstellation::cat2(cpacs, users) {
        Err(Error::UnsupportedGeometry(_)) => CompositeConstellation::cat1(cpacs, users),
        other => other,
    }
}

/// Table over the sweep's configured range for two users.
pub fn build_config_lut(cfg: &SimConfig) -> Result<LutGrid> {
    let axis = cfg.lut.axis()?;
    let c = cfg.constellation()?;
    build_lut(vec![axis.clone(), axis], &[c, c], cfg.power, &cfg.lut.grid)
}

fn min_or_inf(v: &[f64]) -> f64 {
    v.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Per-user rates of one cluster under `scheme`, `snr` in cluster order
/// (head first).
pub fn cluster_rates(scheme: Scheme, snr: &[f64], cfg: &SimConfig, lut: &LutGrid) -> Result<Vec<f64>> {
    let c = cfg.constellation()?;
    let oma = oma_constellation(&c, cfg.sweep.oma)?;
    let share = snr.len() as f64;
    let oma_rates = || snr.iter().map(|&s| mi_single_quadrature(&oma, s).map(|r| r / share)).collect::<Result<Vec<_>>>();
    match snr.len() {
        0 => return Ok(Vec::new()),
        1 => return Ok(vec![mi_single_quadrature(&c, snr[0])?]),
        2 => {}
        n => return Err(Error::InvalidConfig(format!("clusters of {n} users are not supported"))),
    }
    let users = [c; 2];
    match scheme {
        Scheme::Oma => oma_rates(),
        Scheme::MustCat1 | Scheme::MustCat2 | Scheme::MustCat3 => {
            let cat = scheme.category().expect("MUST scheme has a category");
            Ok(optimize_must(cat, snr, &users, cfg.power, &default_alpha_grid())?.per_user)
        }
        Scheme::DynamicMa => {
            let must = optimize_must(Category::MustCat1, snr, &users, cfg.power, &default_alpha_grid())?.per_user;
            let oma = oma_rates()?;
            Ok(if min_or_inf(&oma) >= min_or_inf(&must) { oma } else { must })
        }
        Scheme::SmustCat1 | Scheme::SmustCat2 | Scheme::SmustCat3 => {
            let db: Vec<f64> = snr.iter().map(|&s| linear_to_db(s)).collect();
            let (cpacs, primes) = match cfg.lut.lookup {
                LutLookup::Nearest => lut.lookup(&db)?,
                LutLookup::Interpolated => lut.lookup_interpolated(&db)?,
            };
            match scheme {
                Scheme::SmustCat1 => cat1_rates(&cpacs, &users, snr),
                Scheme::SmustCat2 => alphabet_rates(&cat2_alphabet(&cpacs, &users)?, snr),
                _ => {
                    let alphabet = CompositeConstellation::cat3(&primes, &users, lut.power())?;
                    match cfg.mimo.cat3_decoder {
                        Cat3Decoder::Mpic => alphabet_rates(&alphabet, snr),
                        Cat3Decoder::Sic => {
                            let decoder = Decoder::Sic(SicOrder::by_layer_amplitude(&alphabet, Some(snr)));
                            (0..2).map(|u| mi_conditional_quadrature(&alphabet, u, snr, &decoder)).collect()
                        }
                    }
                }
            }
        }
    }
}

/// Channel vectors of one drop and the power-normalized noise variance.
pub fn mimo_drop_channels(cfg: &SimConfig, drop: u64) -> Result<(Vec<DVector<Complex64>>, f64)> {
    let m = &cfg.mimo;
    let mut rng = stream_rng(cfg.seed, drop);
    let gains: Vec<f64> = match m.channel {
        MimoChannel::Symmetric => vec![1.0; m.ues],
        MimoChannel::Layout => {
            let geo = Layout::new(&cfg.layout, &cfg.radio)?;
            geo.drop_in_cell(0, m.ues, &mut rng)?.iter().map(|u| u.mean_sinr()).collect()
        }
    };
    let channels = gains
        .iter()
        .map(|&g| {
            let s = Complex64::new(g.sqrt(), 0.0);
            DVector::from_iterator(m.tx_antennas, (0..m.tx_antennas).map(|_| sample_rayleigh(&mut rng) * s))
        })
        .collect();
    let noise = match m.channel {
        MimoChannel::Symmetric => cfg.power / (2.0 * db_to_linear(m.snr_db)),
        MimoChannel::Layout => cfg.power / 2.0,
    };
    Ok((channels, noise))
}

/// Worst-user rate of one drop for each scheme, in `schemes` order.
pub fn mimo_drop_min_rates(cfg: &SimConfig, lut: &LutGrid, schemes: &[Scheme], drop: u64) -> Result<Vec<f64>> {
    let (channels, noise) = mimo_drop_channels(cfg, drop)?;
    let (plan, beams) = plan_clusters(&channels, cfg.mimo.clusters, cfg.mimo.members)?;
    let links = effective_links(&channels, &plan, &beams);
    let sinr: Vec<Vec<f64>> =
        links.iter().map(|c| c.iter().map(|l| l.sinr(cfg.power, noise)).collect()).collect();
    schemes
        .iter()
        .map(|&scheme| {
            let mut worst = f64::INFINITY;
            for s in &sinr {
                worst = worst.min(min_or_inf(&cluster_rates(scheme, s, cfg, lut)?));
            }
            Ok(worst)
        })
        .collect()
}

/// Nearest-rank percentile of sorted data.
pub fn percentile(sorted: &[f64], p: f64) -> f64 {
    if sorted.is_empty() {
        return f64::NAN;
    }
    let n = sorted.len();
    let rank = (p / 100.0 * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Half-width of the order-statistic band `p ± sqrt(p(1-p)/n)`.
fn percentile_std_error(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len() as f64;
    let q = p / 100.0;
    let d = (q * (1.0 - q) / n).sqrt() * 100.0;
    (percentile(sorted, (p + d).min(100.0)) - percentile(sorted, (p - d).max(0.0))) / 2.0
}

/// Empirical CDF points `(x_i, (i+1)/n)` of the data.
pub fn empirical_cdf(values: &[f64]) -> Vec<(f64, f64)> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len() as f64;
    v.into_iter().enumerate().map(|(i, x)| (x, (i + 1) as f64 / n)).collect()
}

/// Raw per-drop worst-user rates, `[scheme][drop]`.
pub fn mimo_min_rates(cfg: &SimConfig, lut: &LutGrid) -> Result<Vec<Vec<f64>>> {
    let schemes = cfg.schemes()?;
    let per_drop: Vec<Vec<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|d| mimo_drop_min_rates(cfg, lut, &schemes, d))
        .collect::<Result<_>>()?;
    Ok((0..schemes.len()).map(|s| per_drop.iter().map(|d| d[s]).collect()).collect())
}

/// Percentile table of the worst-user rate over drops.
pub fn run_mimo_cdf(cfg: &SimConfig, lut: &LutGrid) -> Result<Vec<ResultRecord>> {
    let schemes = cfg.schemes()?;
    let rates = mimo_min_rates(cfg, lut)?;
    let mut out = Vec::new();
    for (scheme, mut v) in schemes.into_iter().zip(rates) {
        v.sort_by(f64::total_cmp);
        for &p in &cfg.mimo.percentiles {
            out.push(record(scheme, MIMO_COLUMNS, p, percentile(&v, p), percentile_std_error(&v, p), cfg.trials, cfg.seed));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedOutcome {
    pub records: Vec<ResultRecord>,
    /// Totals per scheme.
    pub ops: Vec<(String, OpCount)>,
    /// Per-subframe decisions, scheme by scheme.
    pub rounds: Vec<SchedRound>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchedRound {
    pub scheme: String,
    pub round: usize,
    pub subbands: Vec<SubbandDecision>,
    pub ops: OpCount,
}

/// Center-cell UEs scheduled over independent feedback rounds; dynamic MA
/// and S-MUST see identical feedback.
pub fn run_sched(cfg: &SimConfig, lut: &LutGrid) -> Result<SchedOutcome> {
    let schemes = cfg.schemes()?;
    if let Some(bad) = schemes.iter().find(|s| !matches!(s, Scheme::DynamicMa | Scheme::SmustCat1)) {
        return Err(Error::UnsupportedScheme(format!("{} in a scheduling run", bad.name())));
    }
    let s = &cfg.sched;
    let geo = Layout::new(&cfg.layout, &cfg.radio)?;
    let mean: Vec<f64> = geo.drop_in_cell(0, s.ues, &mut stream_rng(cfg.seed, 0))?.iter().map(|u| u.mean_sinr()).collect();
    let sc = SchedulerConfig { power: 1.0, noise_var_per_dim: 0.5, alpha_grid: s.alpha_grid.clone() };
    let model = MiRateModel::new(cfg.constellation()?);
    let mut records = Vec::new();
    let mut ops = Vec::new();
    let mut rounds = Vec::with_capacity(schemes.len() * s.rounds);
    for &scheme in &schemes {
        let mut state = PfState::new(s.ues, s.t_c)?;
        let mut memory = DynamicMaMemory::default();
        let mut total = vec![0.0; s.ues];
        let mut count = OpCount::default();
        for round in 0..s.rounds {
            let fb = Feedback::random(&mean, s.subbands, s.pmis, &mut stream_rng(cfg.seed, 1 + round as u64))?;
            let decision = match scheme {
                Scheme::DynamicMa => dynamic_ma_schedule(&fb, &state, &sc, &model, &mut memory)?,
                _ => smust_schedule(&fb, &state, &sc, lut, &model)?,
            };
            count.add(&decision.ops);
            let served = decision.served(s.ues);
            total.iter_mut().zip(&served).for_each(|(t, r)| *t += r);
            state = pf_update(&state, &served)?;
            rounds.push(SchedRound {
                scheme: scheme.name().to_string(),
                round,
                subbands: decision.subbands,
                ops: decision.ops,
            });
        }
        let mut avg: Vec<f64> = total.iter().map(|t| t / (s.rounds * s.subbands) as f64).collect();
        avg.sort_by(f64::total_cmp);
        for p in [5.0, 50.0, 95.0] {
            records.push(record(scheme, SCHED_COLUMNS, p, percentile(&avg, p), percentile_std_error(&avg, p), s.rounds, cfg.seed));
        }
        ops.push((scheme.name().to_string(), count));
    }
    Ok(SchedOutcome { records, ops, rounds })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_rank_percentiles() {
        let v: Vec<f64> = (1..=20).map(f64::from).collect();
        assert_eq!(percentile(&v, 5.0), 1.0);
        assert_eq!(percentile(&v, 50.0), 10.0);
        assert_eq!(percentile(&v, 100.0), 20.0);
        assert_eq!(percentile(&v, 0.0), 1.0);
    }

    #[test]
    fn cdf_is_monotone() {
        let cdf = empirical_cdf(&[3.0, 1.0, 2.0, 2.0]);
        assert!(cdf.windows(2).all(|w| w[0].0 <= w[1].0 && w[0].1 <= w[1].1));
        assert_eq!(cdf.last().unwrap().1, 1.0);
    }

    #[test]
    fn sweep_points_include_stop() {
        let cfg = SimConfig::new(super::super::config::Experiment::Fairness);
        assert_eq!(snr_points(&cfg), vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0]);
    }
}
