//! Broadcast channel models: AWGN, Rayleigh fading, path loss, SNR.
//!
//! Noise is parameterized by `σ²` per real dimension, so a complex noise
//! sample has total variance `2σ²`.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Scalar (or vector, for MIMO) channel seen by one UE.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChannelRealization {
    h: Complex64,
    noise_var_per_dim: f64,
    h_vec: Option<Vec<Complex64>>,
}

impl ChannelRealization {
    pub fn new(h: Complex64, noise_var_per_dim: f64) -> Result<Self> {
        if !(noise_var_per_dim > 0.0) || !noise_var_per_dim.is_finite() {
            return Err(Error::InvalidInput(format!(
                "noise variance {noise_var_per_dim} must be positive and finite"
            )));
        }
        if !h.re.is_finite() || !h.im.is_finite() {
            return Err(Error::InvalidInput(format!("channel gain {h} is not finite")));
        }
        Ok(ChannelRealization { h, noise_var_per_dim, h_vec: None })
    }

    /// MIMO channel vector; the scalar gain is left at zero until a beam is applied.
    pub fn vector(h_vec: Vec<Complex64>, noise_var_per_dim: f64) -> Result<Self> {
        if h_vec.iter().any(|h| !h.re.is_finite() || !h.im.is_finite()) {
            return Err(Error::InvalidInput("channel vector has non-finite entries".into()));
        }
        let mut ch = ChannelRealization::new(Complex64::new(0.0, 0.0), noise_var_per_dim)?;
        ch.h_vec = Some(h_vec);
        Ok(ch)
    }

    /// Two UEs with `h_1 = h_2 = 1` and equal noise.
    pub fn symmetric_pair(noise_var_per_dim: f64) -> Result<[Self; 2]> {
        let ch = ChannelRealization::new(Complex64::new(1.0, 0.0), noise_var_per_dim)?;
        Ok([ch.clone(), ch])
    }

    pub fn h(&self) -> Complex64 {
        self.h
    }

    pub fn noise_var_per_dim(&self) -> f64 {
        self.noise_var_per_dim
    }

    pub fn h_vec(&self) -> Option<&[Complex64]> {
        self.h_vec.as_deref()
    }

    pub fn gain(&self) -> f64 {
        self.h.norm_sqr()
    }

    /// Linear SNR `P |h|² / 2σ²`.
    pub fn snr(&self, power: f64) -> f64 {
        snr(self, power)
    }
}

/// Draws `n ~ CN(0, 2σ²)`.
pub fn sample_noise<R: Rng + ?Sized>(noise_var_per_dim: f64, rng: &mut R) -> Complex64 {
    let s = noise_var_per_dim.sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(s * re, s * im)
}

/// `y = h x + n`.
pub fn transmit<R: Rng + ?Sized>(x: Complex64, ch: &ChannelRealization, rng: &mut R) -> Complex64 {
    ch.h * x + sample_noise(ch.noise_var_per_dim, rng)
}

pub fn snr(ch: &ChannelRealization, power: f64) -> f64 {
    power * ch.gain() / (2.0 * ch.noise_var_per_dim)
}

/// Circularly symmetric Gaussian gain with `E|h|² = 1`.
pub fn sample_rayleigh<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    sample_noise(0.5, rng)
}

/// Macro-cell path loss `128.1 + 37.6 log10(d)` with `d` in km.
pub fn pathloss_db(d_km: f64) -> Result<f64> {
    if !(d_km > 0.0) || !d_km.is_finite() {
        return Err(Error::InvalidInput(format!("distance {d_km} km must be positive")));
    }
    Ok(128.1 + 37.6 * d_km.log10())
}

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinkBudget {
    pub tx_power_dbm: f64,
    pub noise_density_dbm_hz: f64,
    pub bandwidth_hz: f64,
    pub noise_figure_db: f64,
    pub distance_km: f64,
}

impl LinkBudget {
    pub fn new(
        tx_power_dbm: f64,
        noise_density_dbm_hz: f64,
        bandwidth_hz: f64,
        noise_figure_db: f64,
        distance_km: f64,
    ) -> Result<Self> {
        if !(distance_km > 0.0) {
            return Err(Error::InvalidInput(format!("distance {distance_km} km must be positive")));
        }
        if !(bandwidth_hz > 0.0) {
            return Err(Error::InvalidInput(format!("bandwidth {bandwidth_hz} Hz must be positive")));
        }
        Ok(LinkBudget { tx_power_dbm, noise_density_dbm_hz, bandwidth_hz, noise_figure_db, distance_km })
    }

    /// Macro-cell defaults: 46 dBm, −174 dBm/Hz, 10 MHz, 5 dB noise figure.
    pub fn macro_cell(distance_km: f64) -> Result<Self> {
        LinkBudget::new(46.0, -174.0, 10e6, 5.0, distance_km)
    }

    pub fn noise_dbm(&self) -> f64 {
        self.noise_density_dbm_hz + 10.0 * self.bandwidth_hz.log10() + self.noise_figure_db
    }

    pub fn pathloss_db(&self) -> f64 {
        pathloss_db(self.distance_km).expect("distance validated at construction")
    }

    pub fn rx_power_dbm(&self) -> f64 {
        self.tx_power_dbm - self.pathloss_db()
    }

    /// Large-scale SNR before fading, in dB.
    pub fn snr_db(&self) -> f64 {
        self.rx_power_dbm() - self.noise_dbm()
    }
}
