//! Multi-antenna S-MUST: two-phase user clustering, zero-forcing beams
//! towards the cluster heads, per-beam reception and per-cluster pair
//! scheduling.
//!
//! A user's channel `g` is a column vector; the received sample is
//! `gᴴ w x + noise`.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channel::sample_noise;
use crate::power_alloc::LutGrid;
use crate::scheduler::{smust_select_pair, Feedback, OpCount, PfState, RateModel, SchedulerConfig, SubbandDecision};
use crate::{Error, Result};

/// Relative singular-value threshold below which a head matrix is singular.
pub const RANK_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterPlan {
    /// User indices per cluster; the first entry is the head.
    pub clusters: Vec<Vec<usize>>,
}

impl ClusterPlan {
    pub fn heads(&self) -> Vec<usize> {
        self.clusters.iter().map(|c| c[0]).collect()
    }

    pub fn members(&self) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
        self.clusters
            .iter()
            .enumerate()
            .flat_map(|(n, c)| c.iter().enumerate().map(move |(m, &u)| (n, m, u)))
    }

    pub fn len(&self) -> usize {
        self.clusters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.clusters.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BeamSet {
    /// One unit-total-power beam per cluster.
    pub w: Vec<DVector<Complex64>>,
    /// `tr{(H Hᴴ)⁻¹}`.
    pub gamma: f64,
}

fn inner(a: &DVector<Complex64>, b: &DVector<Complex64>) -> Complex64 {
    a.dotc(b)
}

fn check_dims(channels: &[DVector<Complex64>]) -> Result<usize> {
    let nt = channels.first().map(|g| g.len()).ok_or_else(|| Error::InvalidInput("no channels".into()))?;
    if nt == 0 || channels.iter().any(|g| g.len() != nt) {
        return Err(Error::InvalidInput("channel vectors must share one nonzero length".into()));
    }
    Ok(nt)
}

/// Phase-1 result: heads in selection order with their orthogonal-component
/// norms.
#[derive(Debug, Clone, PartialEq)]
pub struct HeadSelection {
    pub heads: Vec<usize>,
    pub norms: Vec<f64>,
}

/// Greedy head selection. Each step picks the user whose channel has the
/// largest component orthogonal to the span of the heads chosen so far
/// (ties: lowest index). Users in `excluded` are never picked.
pub fn cluster_phase1(channels: &[DVector<Complex64>], n_c: usize, excluded: &[usize]) -> Result<HeadSelection> {
    check_dims(channels)?;
    let k = channels.len();
    if n_c == 0 || k < n_c {
        return Err(Error::InvalidInput(format!("{k} users cannot fill {n_c} clusters")));
    }
    let mut basis: Vec<DVector<Complex64>> = Vec::new();
    let mut heads = Vec::with_capacity(n_c);
    let mut norms = Vec::with_capacity(n_c);
    let mut taken = vec![false; k];
    for &e in excluded {
        if e < k {
            taken[e] = true;
        }
    }
    while heads.len() < n_c {
        let mut best: Option<(usize, f64, DVector<Complex64>)> = None;
        for (u, g) in channels.iter().enumerate() {
            if taken[u] {
                continue;
            }
            let mut r = g.clone();
            for e in &basis {
                r -= e * inner(e, &r);
            }
            let norm = r.norm();
            if best.as_ref().is_none_or(|b| norm > b.1) {
                best = Some((u, norm, r));
            }
        }
        let Some((u, norm, r)) = best else { break };
        taken[u] = true;
        heads.push(u);
        norms.push(norm);
        if norm > RANK_TOL * channels[u].norm().max(f64::MIN_POSITIVE) {
            basis.push(r / Complex64::new(norm, 0.0));
        }
    }
    if heads.len() < n_c {
        return Err(Error::InvalidInput(format!("only {} eligible users for {n_c} clusters", heads.len())));
    }
    Ok(HeadSelection { heads, norms })
}

/// `|hᴴ g| / (‖h‖ ‖g‖)`, zero when either vector vanishes.
pub fn correlation(h: &DVector<Complex64>, g: &DVector<Complex64>) -> f64 {
    let d = h.norm() * g.norm();
    if d == 0.0 {
        0.0
    } else {
        inner(h, g).norm() / d
    }
}

/// Round-robin fill: each cluster in turn takes the remaining user most
/// correlated with its head (ties: lowest index) until every cluster has
/// `m` members or users run out.
pub fn cluster_phase2(channels: &[DVector<Complex64>], heads: &[usize], m: usize) -> Result<ClusterPlan> {
    check_dims(channels)?;
    if m == 0 {
        return Err(Error::InvalidInput("clusters need at least one member".into()));
    }
    let mut clusters: Vec<Vec<usize>> = heads.iter().map(|&h| vec![h]).collect();
    let mut remaining: Vec<usize> = (0..channels.len()).filter(|u| !heads.contains(u)).collect();
    let corr: Vec<Vec<f64>> =
        channels.iter().map(|g| heads.iter().map(|&h| correlation(&channels[h], g)).collect()).collect();
    for _ in 1..m {
        for (n, cluster) in clusters.iter_mut().enumerate() {
            let Some(pos) = (0..remaining.len()).fold(None, |best: Option<usize>, i| match best {
                Some(b) if corr[remaining[b]][n] >= corr[remaining[i]][n] => Some(b),
                _ => Some(i),
            }) else {
                return Ok(ClusterPlan { clusters });
            };
            cluster.push(remaining.remove(pos));
        }
    }
    Ok(ClusterPlan { clusters })
}

fn head_matrix(heads: &[&DVector<Complex64>]) -> DMatrix<Complex64> {
    let nt = heads[0].len();
    DMatrix::from_fn(heads.len(), nt, |r, c| heads[r][c].conj())
}

/// Zero-forcing beams `w_n = Hᴴ (H Hᴴ)⁻¹ e_n / √γ` with `H` stacking `hᴴ`
/// of the heads.
pub fn zf_beams(heads: &[&DVector<Complex64>]) -> Result<BeamSet> {
    if heads.is_empty() {
        return Err(Error::InvalidInput("no cluster heads".into()));
    }
    let nt = heads[0].len();
    if heads.iter().any(|h| h.len() != nt) {
        return Err(Error::InvalidInput("head channels differ in length".into()));
    }
    if heads.len() > nt {
        return Err(Error::SingularMatrix(format!("{} heads exceed {nt} antennas", heads.len())));
    }
    let h = head_matrix(heads);
    let sv = h.clone().singular_values();
    let (smax, smin) = (sv.max(), sv.min());
    if !(smax > 0.0) || smin < RANK_TOL * smax {
        return Err(Error::SingularMatrix(format!("head matrix singular values {smin:e}..{smax:e}")));
    }
    let gram = &h * h.adjoint();
    let inv = gram
        .try_inverse()
        .ok_or_else(|| Error::SingularMatrix("head Gram matrix is not invertible".into()))?;
    let w0 = h.adjoint() * &inv;
    let gamma = inv.trace().re;
    let scale = Complex64::new(1.0 / gamma.sqrt(), 0.0);
    let w = (0..heads.len()).map(|n| w0.column(n).into_owned() * scale).collect();
    Ok(BeamSet { w, gamma })
}

/// Clusters users and computes beams. A singular head set excludes the
/// weakest offending head and reruns phase 1; when no replacement exists
/// the number of clusters shrinks.
pub fn plan_clusters(channels: &[DVector<Complex64>], n_c: usize, m: usize) -> Result<(ClusterPlan, BeamSet)> {
    let mut excluded: Vec<usize> = Vec::new();
    let mut n_c = n_c.min(channels.len());
    loop {
        if n_c == 0 {
            return Err(Error::SingularMatrix("no usable cluster head".into()));
        }
        let sel = match cluster_phase1(channels, n_c, &excluded) {
            Ok(sel) => sel,
            Err(_) => {
                excluded.clear();
                n_c -= 1;
                continue;
            }
        };
        let heads: Vec<&DVector<Complex64>> = sel.heads.iter().map(|&h| &channels[h]).collect();
        match zf_beams(&heads) {
            Ok(beams) => return Ok((cluster_phase2(channels, &sel.heads, m)?, beams)),
            Err(Error::SingularMatrix(_)) => {
                let worst = sel
                    .norms
                    .iter()
                    .enumerate()
                    .min_by(|a, b| a.1.total_cmp(b.1))
                    .map(|(i, _)| sel.heads[i])
                    .expect("at least one head");
                excluded.push(worst);
            }
            Err(e) => return Err(e),
        }
    }
}

/// Per-member link seen through the beams.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EffectiveLink {
    /// `gᴴ w_n` for the user's own cluster.
    pub gain: Complex64,
    /// `Σ_{j≠n} |gᴴ w_j|²`.
    pub leakage: f64,
}

impl EffectiveLink {
    /// Linear SINR with per-stream power `power` and per-dimension noise `σ²`.
    pub fn sinr(&self, power: f64, noise_var_per_dim: f64) -> f64 {
        power * self.gain.norm_sqr() / (2.0 * noise_var_per_dim + power * self.leakage)
    }
}

pub fn effective_links(channels: &[DVector<Complex64>], plan: &ClusterPlan, beams: &BeamSet) -> Vec<Vec<EffectiveLink>> {
    plan.clusters
        .iter()
        .enumerate()
        .map(|(n, cluster)| {
            cluster
                .iter()
                .map(|&u| {
                    let g = &channels[u];
                    let leakage =
                        beams.w.iter().enumerate().filter(|(j, _)| *j != n).map(|(_, w)| inner(g, w).norm_sqr()).sum();
                    EffectiveLink { gain: inner(g, &beams.w[n]), leakage }
                })
                .collect()
        })
        .collect()
}

/// Received samples `y_{n,m} = gᴴ Σ_j w_j x_j + z` per cluster member.
/// `noise_var_per_dim = 0` gives the noiseless samples.
pub fn mimo_receive<R: Rng + ?Sized>(
    x: &[Complex64],
    channels: &[DVector<Complex64>],
    plan: &ClusterPlan,
    beams: &BeamSet,
    noise_var_per_dim: f64,
    rng: &mut R,
) -> Result<Vec<Vec<Complex64>>> {
    if x.len() != beams.w.len() || plan.len() != beams.w.len() {
        return Err(Error::InvalidInput(format!(
            "{} streams, {} beams, {} clusters",
            x.len(),
            beams.w.len(),
            plan.len()
        )));
    }
    let nt = beams.w[0].len();
    let mut tx = DVector::<Complex64>::zeros(nt);
    for (w, &s) in beams.w.iter().zip(x) {
        tx += w * s;
    }
    Ok(plan
        .clusters
        .iter()
        .map(|cluster| {
            cluster
                .iter()
                .map(|&u| {
                    let y = inner(&channels[u], &tx);
                    if noise_var_per_dim > 0.0 {
                        y + sample_noise(noise_var_per_dim, rng)
                    } else {
                        y
                    }
                })
                .collect()
        })
        .collect())
}

/// Per-cluster S-MUST pair selection: every cluster, every subband, the
/// best PF pair among the cluster's members. No PMI matching is required
/// inside a cluster. Indexed `[cluster][subband]`.
pub fn mimo_schedule(
    plan: &ClusterPlan,
    feedback: &Feedback,
    state: &PfState,
    config: &SchedulerConfig,
    lut: &LutGrid,
    model: &dyn RateModel,
) -> Result<(Vec<Vec<Option<SubbandDecision>>>, OpCount)> {
    let mut ops = OpCount::default();
    let mut out = Vec::with_capacity(plan.len());
    for cluster in &plan.clusters {
        let mut per_sb = Vec::with_capacity(feedback.subbands());
        for sb in 0..feedback.subbands() {
            per_sb.push(smust_select_pair(cluster, sb, feedback, state, config, lut, model, false, &mut ops)?);
        }
        out.push(per_sb);
    }
    Ok((out, ops))
}
