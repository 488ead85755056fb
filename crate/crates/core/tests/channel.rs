use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use smust::channel::{pathloss_db, sample_noise, sample_rayleigh, transmit, ChannelRealization, LinkBudget};

#[test]
fn noise_moments_over_a_million_draws() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let sigma2 = 0.37;
    let n = 1_000_000;
    let (mut re2, mut im2, mut cross) = (0.0, 0.0, 0.0);
    for _ in 0..n {
        let z = sample_noise(sigma2, &mut rng);
        re2 += z.re * z.re;
        im2 += z.im * z.im;
        cross += z.re * z.im;
    }
    let n = n as f64;
    assert!((re2 / n / sigma2 - 1.0).abs() < 0.01);
    assert!((im2 / n / sigma2 - 1.0).abs() < 0.01);
    assert!((cross / n).abs() < 0.01 * sigma2);
}

#[test]
fn received_sample_is_h_x_plus_noise() {
    let h = Complex64::from_polar(0.8, 1.1);
    let ch = ChannelRealization::new(h, 0.05).unwrap();
    let x = Complex64::new(1.0, -1.0);
    let mut a = ChaCha8Rng::seed_from_u64(2);
    let mut b = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..100 {
        let y = transmit(x, &ch, &mut a);
        assert_eq!(y, h * x + sample_noise(0.05, &mut b));
    }
    assert!((ch.snr(2.0) - 2.0 * 0.64 / 0.1).abs() < 1e-12);
}

#[test]
fn rayleigh_gain_is_exponential_with_uniform_phase() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let n = 200_000;
    let draws: Vec<Complex64> = (0..n).map(|_| sample_rayleigh(&mut rng)).collect();
    let mean_gain = draws.iter().map(|h| h.norm_sqr()).sum::<f64>() / n as f64;
    assert!((mean_gain - 1.0).abs() < 0.01);

    // Kolmogorov-Smirnov against U(-π, π] and against Exp(1)
    let ks = |mut v: Vec<f64>, cdf: &dyn Fn(f64) -> f64| {
        v.sort_by(f64::total_cmp);
        let m = v.len() as f64;
        v.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = cdf(x);
                (f - i as f64 / m).abs().max(((i + 1) as f64 / m - f).abs())
            })
            .fold(0.0, f64::max)
    };
    let crit = 1.63 / (n as f64).sqrt();
    let phase = ks(draws.iter().map(|h| h.arg()).collect(), &|x| (x + std::f64::consts::PI) / std::f64::consts::TAU);
    assert!(phase < crit, "phase KS {phase}");
    let gain = ks(draws.iter().map(|h| h.norm_sqr()).collect(), &|x| 1.0 - (-x).exp());
    assert!(gain < crit, "gain KS {gain}");
}

#[test]
fn macro_link_budget() {
    assert!((pathloss_db(1.0).unwrap() - 128.1).abs() < 1e-12);
    assert!((pathloss_db(0.1).unwrap() - 90.5).abs() < 1e-12);
    assert!(pathloss_db(0.0).is_err());
    let link = LinkBudget::macro_cell(0.25).unwrap();
    // -174 + 70 + 5 = -99 dBm of noise
    assert!((link.noise_dbm() + 99.0).abs() < 1e-12);
    let expected = 46.0 - (128.1 + 37.6 * 0.25f64.log10()) + 99.0;
    assert!((link.snr_db() - expected).abs() < 1e-9);
}
