use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smust::channel::sample_rayleigh;
use smust::constellation::LegacyConstellation;
use smust::mimo::{
    cluster_phase1, correlation, effective_links, mimo_receive, mimo_schedule, plan_clusters, zf_beams, ClusterPlan,
};
use smust::power_alloc::{build_lut, GridSpec};
use smust::scheduler::{smust_schedule, Feedback, MiRateModel, PfState, SchedulerConfig};

fn rayleigh(users: usize, nt: usize, rng: &mut ChaCha8Rng) -> Vec<DVector<Complex64>> {
    (0..users).map(|_| DVector::from_fn(nt, |_, _| sample_rayleigh(rng))).collect()
}

/// Greedy head choice with explicit projection matrices `A (Aᴴ A)⁻¹ Aᴴ`.
fn projection_oracle(channels: &[DVector<Complex64>], n_c: usize) -> (Vec<usize>, Vec<f64>) {
    let nt = channels[0].len();
    let (mut heads, mut norms) = (Vec::new(), Vec::new());
    for _ in 0..n_c {
        let proj = if heads.is_empty() {
            DMatrix::<Complex64>::zeros(nt, nt)
        } else {
            let a = DMatrix::from_columns(&heads.iter().map(|&h: &usize| channels[h].clone()).collect::<Vec<_>>());
            let gram_inv = (a.adjoint() * &a).try_inverse().expect("heads are independent");
            &a * gram_inv * a.adjoint()
        };
        let mut best = (usize::MAX, -1.0);
        for (u, g) in channels.iter().enumerate() {
            if heads.contains(&u) {
                continue;
            }
            let r = (g - &proj * g).norm();
            if r > best.1 {
                best = (u, r);
            }
        }
        heads.push(best.0);
        norms.push(best.1);
    }
    (heads, norms)
}

#[test]
fn phase1_agrees_with_projection_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for trial in 0..200 {
        let nt = [2, 4][trial % 2];
        let channels = rayleigh(10, nt, &mut rng);
        let sel = cluster_phase1(&channels, nt, &[]).unwrap();
        let (heads, norms) = projection_oracle(&channels, nt);
        assert_eq!(sel.heads, heads);
        for (a, b) in sel.norms.iter().zip(&norms) {
            assert!((a - b).abs() < 1e-9 * b.max(1.0));
        }
    }
}

#[test]
fn members_correlate_with_their_own_head() {
    let (nt, groups, per_group) = (4, 4, 5);
    let mut good = 0;
    let seeds = 100;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let centers = rayleigh(groups, nt, &mut rng);
        let channels: Vec<DVector<Complex64>> = (0..groups * per_group)
            .map(|u| {
                let c = &centers[u % groups];
                let scale = Complex64::new(rng.random_range(0.3..1.5), 0.0);
                c * scale + DVector::from_fn(nt, |_, _| sample_rayleigh(&mut rng) * 0.15)
            })
            .collect();
        let (plan, _) = plan_clusters(&channels, groups, per_group).unwrap();
        let heads = plan.heads();
        let (mut intra, mut inter, mut n_intra, mut n_inter) = (0.0, 0.0, 0.0, 0.0);
        for (n, _, u) in plan.members() {
            if heads.contains(&u) {
                continue;
            }
            for (k, &h) in heads.iter().enumerate() {
                let c = correlation(&channels[h], &channels[u]);
                if k == n {
                    intra += c;
                    n_intra += 1.0;
                } else {
                    inter += c;
                    n_inter += 1.0;
                }
            }
        }
        if intra / n_intra > inter / n_inter {
            good += 1;
        }
    }
    assert!(good as f64 >= 0.95 * seeds as f64, "{good}/{seeds}");
}

#[test]
fn leakage_matches_simulated_interference() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let channels = rayleigh(6, 2, &mut rng);
    let (plan, beams) = plan_clusters(&channels, 2, 3).unwrap();
    let links = effective_links(&channels, &plan, &beams);
    let trials = 10_000;
    let mut acc = vec![vec![0.0; 3]; 2];
    for _ in 0..trials {
        // unit-power QPSK streams
        let x: Vec<Complex64> = (0..2)
            .map(|_| {
                let s = |b: bool| if b { 1.0 } else { -1.0 };
                Complex64::new(s(rng.random()), s(rng.random())) / 2f64.sqrt()
            })
            .collect();
        let y = mimo_receive(&x, &channels, &plan, &beams, 0.0, &mut rng).unwrap();
        for (n, m, _) in plan.members() {
            acc[n][m] += (y[n][m] - links[n][m].gain * x[n]).norm_sqr() / trials as f64;
        }
    }
    for (n, m, u) in plan.members() {
        let leak = links[n][m].leakage;
        assert!((acc[n][m] - leak).abs() <= 0.03 * leak + 1e-12, "user {u}: {} vs {leak}", acc[n][m]);
        if m == 0 {
            assert!(leak < 1e-20);
        }
    }
}

#[test]
fn beams_carry_unit_total_power() {
    let mut rng = ChaCha8Rng::seed_from_u64(43);
    for _ in 0..50 {
        let heads = rayleigh(3, 4, &mut rng);
        let refs: Vec<_> = heads.iter().collect();
        let b = zf_beams(&refs).unwrap();
        let total: f64 = b.w.iter().map(|w| w.norm_squared()).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
    let one = rayleigh(2, 2, &mut rng);
    assert!(zf_beams(&[&one[0], &one[0]]).is_err());
}

#[test]
fn relabelling_users_relabels_the_plan() {
    let mut rng = ChaCha8Rng::seed_from_u64(47);
    for _ in 0..50 {
        let channels = rayleigh(8, 2, &mut rng);
        let (plan, _) = plan_clusters(&channels, 2, 4).unwrap();
        let mut perm: Vec<usize> = (0..8).collect();
        for i in (1..8).rev() {
            perm.swap(i, rng.random_range(0..=i));
        }
        // user `u` moves to position `perm[u]`
        let mut shuffled = channels.clone();
        for (u, &p) in perm.iter().enumerate() {
            shuffled[p] = channels[u].clone();
        }
        let (moved, _) = plan_clusters(&shuffled, 2, 4).unwrap();
        let mapped: Vec<Vec<usize>> = plan.clusters.iter().map(|c| c.iter().map(|&u| perm[u]).collect()).collect();
        assert_eq!(moved.clusters, mapped);
    }
}

#[test]
fn single_cluster_schedule_matches_plain_smust() {
    let q = LegacyConstellation::qpsk();
    let axis: Vec<f64> = (0..=4).map(|k| -10.0 + 10.0 * k as f64).collect();
    let lut = build_lut(vec![axis.clone(), axis], &[q, q], 1.0, &GridSpec::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(53);
    let gains = [0.5, 1.0, 3.0, 10.0, 30.0];
    let random = Feedback::random(&gains, 6, 1, &mut rng).unwrap();
    let cqi: Vec<Vec<f64>> = (0..5).map(|u| (0..6).map(|sb| random.cqi(u, sb)).collect()).collect();
    let feedback = Feedback::new(cqi, vec![vec![0; 6]; 5]).unwrap();
    let state = PfState::with_rates(vec![0.3, 0.5, 0.9, 1.2, 1.5], 100.0).unwrap();
    let config = SchedulerConfig::default();
    let model = MiRateModel::new(q);
    let plan = ClusterPlan { clusters: vec![(0..5).collect()] };
    let (per_cluster, ops) = mimo_schedule(&plan, &feedback, &state, &config, &lut, &model).unwrap();
    let plain = smust_schedule(&feedback, &state, &config, &lut, &model).unwrap();
    assert_eq!(ops, plain.ops);
    for (got, want) in per_cluster[0].iter().zip(&plain.subbands) {
        assert_eq!(got.as_ref().unwrap(), want);
    }
}

#[test]
fn plan_regression_pin() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let channels = rayleigh(4, 2, &mut rng);
    let (plan, beams) = plan_clusters(&channels, 2, 2).unwrap();
    assert_eq!(plan.clusters, PINNED_CLUSTERS);
    assert!((beams.gamma - PINNED_GAMMA).abs() < 1e-9, "gamma {:.12}", beams.gamma);
}

const PINNED_CLUSTERS: [[usize; 2]; 2] = [[2, 0], [1, 3]];
const PINNED_GAMMA: f64 = 1.699973320510;
