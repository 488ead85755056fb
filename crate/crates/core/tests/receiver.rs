use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use smust::channel::{sample_noise, ChannelRealization};
use smust::constellation::LegacyConstellation;
use smust::receiver::{
    equalize, mpic_detect, sic_detect, sic_llr, FoldedNoise, LlrMode, MlOracle, MpicParams, SicOrder, LLR_CLAMP,
};
use smust::superposition::{CompositeConstellation, CpacSet, PrimeCpacSet};

fn qpsk2() -> Vec<LegacyConstellation> {
    vec![LegacyConstellation::qpsk(); 2]
}

fn cat1() -> CompositeConstellation {
    let cpacs = CpacSet::new(vec![2.3, 3.01], vec![3.11, 2.18], 31.0).unwrap();
    CompositeConstellation::cat1(&cpacs, &qpsk2()).unwrap()
}

fn bits(word: u32, n: usize) -> Vec<u8> {
    (0..n).rev().map(|k| ((word >> k) & 1) as u8).collect()
}

#[test]
fn llr_signs_follow_sic_decisions() {
    let a = cat1();
    let order = SicOrder::by_layer_amplitude(&a, None);
    let noise_var = a.mean_power() / (2.0 * 100.0);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..5000 {
        let words: Vec<u32> = (0..2).map(|_| rng.random_range(0..4)).collect();
        let y = a.encode_words(&words).unwrap() + sample_noise(noise_var, &mut rng);
        let hard = sic_detect(y, &a, &order).unwrap();
        let llr = sic_llr(y, &a, &order, noise_var, LlrMode::MaxLog).unwrap();
        for (u, &word) in hard.iter().enumerate() {
            if llr.user(u).iter().all(|l| *l != 0.0) {
                assert_eq!(llr.hard_bits(u), bits(word, 2));
            }
            assert!(llr.user(u).iter().all(|l| l.abs() <= LLR_CLAMP));
        }
    }
}

#[test]
fn sum_exp_and_max_log_differ_by_a_bounded_amount() {
    // each log-sum-exp is within ln(terms) of its largest term
    let a = cat1();
    let order = SicOrder::by_layer_amplitude(&a, None);
    let bound = (a.size() as f64).ln();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for snr in [1.0, 10.0, 1000.0] {
        let noise_var = a.mean_power() / (2.0 * snr);
        let (mut gap, mut magnitude) = (0.0f64, 0.0);
        for _ in 0..500 {
            let words: Vec<u32> = (0..2).map(|_| rng.random_range(0..4)).collect();
            let y = a.encode_words(&words).unwrap() + sample_noise(noise_var, &mut rng);
            let m = sic_llr(y, &a, &order, noise_var, LlrMode::MaxLog).unwrap();
            let s = sic_llr(y, &a, &order, noise_var, LlrMode::SumExp).unwrap();
            for u in 0..2 {
                for (x, z) in m.user(u).iter().zip(s.user(u)) {
                    gap = gap.max((x - z).abs());
                    magnitude += x.abs() / 2000.0;
                }
            }
        }
        assert!(gap <= bound + 1e-9, "gap {gap} at SNR {snr}");
        if snr > 100.0 {
            assert!(magnitude > 5.0 * bound);
        }
    }
}

#[test]
fn ml_oracle_is_exhaustive_minimum_distance() {
    let a = cat1();
    let ml = MlOracle::new(&a);
    let pts = a.points();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for _ in 0..2000 {
        let y = Complex64::new(rng.random_range(-8.0..8.0), rng.random_range(-8.0..8.0));
        let d = ml.detect(y);
        let best = pts.iter().map(|p| (y - p.value).norm()).fold(f64::INFINITY, f64::min);
        let chosen = pts.iter().find(|p| p.words == d).unwrap();
        assert!((y - chosen.value).norm() <= best + 1e-12);
    }
}

#[test]
fn mpic_ignores_the_other_user_under_noise() {
    let primes = PrimeCpacSet::new(vec![2, 3], vec![3, 2]).unwrap();
    let a = CompositeConstellation::cat3(&primes, &qpsk2(), 31.0).unwrap();
    let noise_var = a.scale() * a.scale() * 0.01;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for user in 0..2 {
        let params = MpicParams::from_alphabet(&a, user).unwrap();
        for _ in 0..500 {
            let own: u32 = rng.random_range(0..4);
            let n = sample_noise(noise_var, &mut rng);
            let decisions: Vec<u32> = (0..4)
                .map(|other| {
                    let mut w = [0u32; 2];
                    w[user] = own;
                    w[1 - user] = other;
                    let y = a.encode_words(&w).unwrap() + n;
                    mpic_detect(y, &params, noise_var, FoldedNoise::Wrapped).unwrap().word
                })
                .collect();
            assert!(decisions.iter().all(|&d| d == decisions[0]), "user {user}: {decisions:?}");
        }
    }
}

#[test]
fn equalization_undoes_the_channel() {
    let h = Complex64::from_polar(0.3, -2.0);
    let ch = ChannelRealization::new(h, 0.01).unwrap();
    let x = Complex64::new(3.0, -1.0);
    let eq = equalize(h * x, &ch).unwrap();
    assert!((eq.y - x).norm() < 1e-12);
    assert!((eq.noise_var_per_dim - 0.01 / 0.09).abs() < 1e-12);
}
