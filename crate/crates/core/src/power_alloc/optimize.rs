//! Max-min fairness search over CPACs.
//!
//! CPACs are parameterized by a stick-breaking split of the power budget
//! (`L - 1` coordinates) and one I/Q angle per user, all mapped to `[0, 1]`.
//! A coarse grid is followed by rounds of local refinement around the
//! incumbent.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::mi::{mi_conditional_quadrature, Decoder};
use crate::constellation::LegacyConstellation;
use crate::receiver::SicOrder;
use crate::superposition::{Category, CompositeConstellation, CpacSet};
use crate::{Error, Result};

const TIE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub coarse_points: usize,
    pub refine_points: usize,
    pub refine_rounds: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { coarse_points: 9, refine_points: 7, refine_rounds: 3 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Optimized {
    pub cpacs: CpacSet,
    /// Smallest conditional MI over users with positive SNR.
    pub objective: f64,
    pub per_user: Vec<f64>,
    pub evaluations: usize,
}

/// Per-user conditional MI (quadrature) of a Cat. 1 alphabet under SIC.
pub fn cat1_rates(cpacs: &CpacSet, constellations: &[LegacyConstellation], snr: &[f64]) -> Result<Vec<f64>> {
    let alphabet = CompositeConstellation::cat1(cpacs, constellations)?;
    alphabet_rates(&alphabet, snr)
}

/// Per-user conditional MI (quadrature) of any additive alphabet under SIC
/// ordered by layer amplitude.
pub fn alphabet_rates(alphabet: &CompositeConstellation, snr: &[f64]) -> Result<Vec<f64>> {
    let decoder = default_decoder(alphabet, snr);
    (0..alphabet.user_count()).map(|u| mi_conditional_quadrature(alphabet, u, snr, &decoder)).collect()
}

/// M-PIC for modular alphabets, otherwise SIC by layer amplitude with
/// ties broken towards the weaker user.
pub fn default_decoder(alphabet: &CompositeConstellation, snr: &[f64]) -> Decoder {
    if alphabet.category().is_modular() {
        Decoder::Mpic
    } else {
        Decoder::Sic(SicOrder::by_layer_amplitude(alphabet, Some(snr)))
    }
}

fn min_live(rates: &[f64], snr: &[f64]) -> f64 {
    rates
        .iter()
        .zip(snr)
        .filter(|(_, &s)| s > 0.0)
        .map(|(&r, _)| r)
        .fold(f64::INFINITY, f64::min)
}

struct Problem<'a> {
    snr: &'a [f64],
    constellations: &'a [LegacyConstellation],
    power: f64,
}

#[derive(Clone)]
struct Candidate {
    x: Vec<f64>,
    objective: f64,
    live_power: f64,
    rates: Vec<f64>,
}

impl Problem<'_> {
    fn users(&self) -> usize {
        self.constellations.len()
    }

    fn dims(&self) -> usize {
        2 * self.users() - 1
    }

    fn cpacs(&self, x: &[f64]) -> Result<CpacSet> {
        let l = self.users();
        let mut rho = vec![0.0; l];
        let mut rest = 1.0;
        for u in 0..l - 1 {
            rho[u] = rest * x[u];
            rest -= rho[u];
        }
        rho[l - 1] = rest.max(0.0);
        let mut alpha = Vec::with_capacity(l);
        let mut beta = Vec::with_capacity(l);
        for u in 0..l {
            let amp = (rho[u] * self.power).sqrt();
            let theta = x[l - 1 + u] * std::f64::consts::FRAC_PI_2;
            alpha.push(amp * theta.cos());
            beta.push(amp * theta.sin());
        }
        let total: f64 = alpha.iter().chain(&beta).map(|c| c * c).sum();
        if total > self.power {
            let s = (self.power / total).sqrt() * (1.0 - 1e-15);
            alpha.iter_mut().chain(beta.iter_mut()).for_each(|c| *c *= s);
        }
        CpacSet::new(alpha, beta, self.power)
    }

    fn evaluate(&self, x: Vec<f64>) -> Result<Candidate> {
        let cpacs = self.cpacs(&x)?;
        let rates = cat1_rates(&cpacs, self.constellations, self.snr)?;
        let live_power = (0..self.users())
            .filter(|&u| self.snr[u] > 0.0)
            .map(|u| cpacs.alpha()[u].powi(2) + cpacs.beta()[u].powi(2))
            .sum();
        let objective = min_live(&rates, self.snr);
        Ok(Candidate { x, objective, live_power, rates })
    }

    /// Evaluates every candidate and keeps the best in candidate order.
    fn best_of(&self, points: Vec<Vec<f64>>, incumbent: Option<Candidate>) -> Result<Candidate> {
        let evaluated: Vec<Candidate> =
            points.into_par_iter().map(|x| self.evaluate(x)).collect::<Result<_>>()?;
        let mut best = incumbent;
        for c in evaluated {
            let better = match &best {
                None => true,
                Some(b) => {
                    c.objective > b.objective + TIE
                        || ((c.objective - b.objective).abs() <= TIE && c.live_power > b.live_power + TIE)
                }
            };
            if better {
                best = Some(c);
            }
        }
        best.ok_or_else(|| Error::InvalidInput("empty search grid".into()))
    }
}

fn lattice(axes: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for axis in axes {
        out = out
            .into_iter()
            .flat_map(|prefix| {
                axis.iter().map(move |&v| {
                    let mut p = prefix.clone();
                    p.push(v);
                    p
                })
            })
            .collect();
    }
    out
}

/// Max-min CPAC search for S-MUST with SIC. `snr` is linear per user.
pub fn optimize_cpacs(
    snr: &[f64],
    constellations: &[LegacyConstellation],
    power: f64,
    grid: &GridSpec,
) -> Result<Optimized> {
    if constellations.is_empty() || snr.len() != constellations.len() {
        return Err(Error::InvalidInput(format!(
            "{} SNR values for {} users",
            snr.len(),
            constellations.len()
        )));
    }
    if let Some(&bad) = snr.iter().find(|s| !(**s >= 0.0) || !s.is_finite()) {
        return Err(Error::InvalidSnr(bad));
    }
    if grid.coarse_points < 2 || grid.refine_points < 2 {
        return Err(Error::InvalidInput("grid needs at least two points per dimension".into()));
    }
    let problem = Problem { snr, constellations, power };
    let dims = problem.dims();
    let coarse: Vec<f64> =
        (0..grid.coarse_points).map(|k| k as f64 / (grid.coarse_points - 1) as f64).collect();
    let mut evaluations = coarse.len().pow(dims as u32);
    let mut best = problem.best_of(lattice(&vec![coarse; dims]), None)?;
    let mut step = 1.0 / (grid.coarse_points - 1) as f64;
    for _ in 0..grid.refine_rounds {
        let half = (grid.refine_points / 2) as f64;
        step /= 3.0;
        let axes: Vec<Vec<f64>> = best
            .x
            .iter()
            .map(|&c| {
                let mut a: Vec<f64> = (0..grid.refine_points)
                    .map(|k| (c + (k as f64 - half) * step).clamp(0.0, 1.0))
                    .collect();
                a.dedup();
                a
            })
            .collect();
        let points = lattice(&axes);
        evaluations += points.len();
        best = problem.best_of(points, Some(best))?;
    }
    Ok(Optimized { cpacs: problem.cpacs(&best.x)?, objective: best.objective, per_user: best.rates, evaluations })
}

/// Near-user power fractions for the MUST baselines: 12 points in `(0.025, 0.3]`.
pub fn default_alpha_grid() -> Vec<f64> {
    (1..=12).map(|k| 0.025 + k as f64 * (0.3 - 0.025) / 12.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MustChoice {
    pub near_fraction: f64,
    pub objective: f64,
    pub per_user: Vec<f64>,
}

/// Index of the far (weaker) user of a pair; ties make user 0 the far one.
pub fn far_user(snr: &[f64]) -> usize {
    usize::from(snr[1] < snr[0])
}

/// Best MUST configuration for two users. Cat. 3 has a fixed power split
/// and ignores the grid.
pub fn optimize_must(
    category: Category,
    snr: &[f64],
    constellations: &[LegacyConstellation],
    power: f64,
    alpha_grid: &[f64],
) -> Result<MustChoice> {
    if snr.len() != 2 {
        return Err(Error::InvalidInput("MUST baselines pair exactly two users".into()));
    }
    let far = far_user(snr);
    let grid: Vec<f64> = match category {
        Category::MustCat3 => vec![CompositeConstellation::must_cat3_near_fraction(
            &constellations[1 - far],
            &constellations[far],
        )],
        _ => alpha_grid.to_vec(),
    };
    let mut best: Option<MustChoice> = None;
    for a in grid {
        let alphabet = CompositeConstellation::must(category, a, constellations, far, power)?;
        let rates = alphabet_rates(&alphabet, snr)?;
        let objective = min_live(&rates, snr);
        if best.as_ref().is_none_or(|b| objective > b.objective + TIE) {
            best = Some(MustChoice { near_fraction: a, objective, per_user: rates });
        }
    }
    best.ok_or_else(|| Error::InvalidInput("empty power-fraction grid".into()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alpha_grid_range() {
        let g = default_alpha_grid();
        assert_eq!(g.len(), 12);
        assert!(g[0] > 0.025);
        assert!((g[11] - 0.3).abs() < 1e-15);
    }

    #[test]
    fn parameterization_is_feasible() {
        let users = [LegacyConstellation::qpsk(); 3];
        let p = Problem { snr: &[1.0, 1.0, 1.0], constellations: &users, power: 3.0 };
        for x in lattice(&vec![vec![0.0, 0.3, 1.0]; 5]) {
            let c = p.cpacs(&x).unwrap();
            assert!(c.total() <= 3.0);
        }
    }
}
