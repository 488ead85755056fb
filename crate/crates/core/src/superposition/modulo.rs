//! Centered modulo arithmetic and the CRT residue structure behind Cat. 3.

use serde::{Deserialize, Serialize};

use super::PrimeCpacSet;
use crate::constellation::LegacyConstellation;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    I,
    Q,
}

/// Reduction into the half-open interval `[-a, a)`, period `2a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CenteredModulus {
    half_period: f64,
}

impl CenteredModulus {
    pub fn new(half_period: f64) -> Result<Self> {
        if !(half_period > 0.0) || !half_period.is_finite() {
            return Err(Error::InvalidModulus(half_period));
        }
        Ok(CenteredModulus { half_period })
    }

    pub fn half_period(&self) -> f64 {
        self.half_period
    }

    pub fn reduce(&self, x: f64) -> f64 {
        let a = self.half_period;
        let period = 2.0 * a;
        let mut r = x - period * ((x + a) / period).floor();
        // floor() can land one period off when x + a is within an ulp of a multiple
        if r >= a {
            r -= period;
        } else if r < -a {
            r += period;
        }
        r
    }
}

pub fn centered_mod(x: f64, half_period: f64) -> Result<f64> {
    Ok(CenteredModulus::new(half_period)?.reduce(x))
}

/// Integer version of [`centered_mod`]. `half_period` must be positive.
pub fn centered_mod_int(x: i64, half_period: i64) -> i64 {
    assert!(half_period > 0, "half-period must be positive");
    let period = 2 * half_period;
    (x + half_period).rem_euclid(period) - half_period
}

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

pub fn is_square_free(n: u64) -> bool {
    let mut n = n;
    let mut d = 2u64;
    while d * d <= n {
        if n.is_multiple_of(d) {
            n /= d;
            if n.is_multiple_of(d) {
                return false;
            }
        }
        d += 1;
    }
    true
}

/// Residue of a noiseless composite coordinate at user `user` on `axis`.
pub fn crt_residue(w: i64, primes: &PrimeCpacSet, user: usize, axis: Axis) -> i64 {
    centered_mod_int(w, primes.modulus(user, axis) as i64)
}

/// Per-user affine structure of the residue: `residue = cmod(scaling·s + offset, modulus)`
/// for the user's own PAM level `s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EffectiveParams {
    pub scaling: i64,
    pub offset: i64,
    pub modulus: i64,
}

impl EffectiveParams {
    /// Expected residue for the user's PAM level `level`.
    pub fn target(&self, level: i64) -> i64 {
        centered_mod_int(self.scaling * level + self.offset, self.modulus)
    }

    /// Checks that distinct levels land on distinct residues.
    pub fn check_decodable(&self, levels: &[i64]) -> Result<()> {
        let mut targets: Vec<i64> = levels.iter().map(|&s| self.target(s)).collect();
        targets.sort_unstable();
        let before = targets.len();
        targets.dedup();
        if targets.len() != before {
            return Err(Error::NotSeparable(format!(
                "modulus {} with scaling {} folds {} levels onto {} residues",
                self.modulus,
                self.scaling,
                before,
                targets.len()
            )));
        }
        Ok(())
    }
}

/// Scaling `a = cmod(Π_{others} q, q_user)` and the constant interference
/// offset, found by enumerating every interferer symbol combination.
pub fn effective_params(
    primes: &PrimeCpacSet,
    users: &[LegacyConstellation],
    user: usize,
    axis: Axis,
) -> Result<EffectiveParams> {
    let moduli = primes.moduli(axis);
    if users.len() != moduli.len() {
        return Err(Error::InvalidInput(format!(
            "{} constellations for {} users",
            users.len(),
            moduli.len()
        )));
    }
    let own = moduli[user] as i64;
    let weights: Vec<i64> = (0..moduli.len()).map(|l| primes.weight(l, axis) as i64).collect();
    let scaling = centered_mod_int(weights[user], own);

    let interferers: Vec<usize> = (0..users.len()).filter(|&l| l != user).collect();
    let mut offset: Option<i64> = None;
    let mut combo = vec![0usize; interferers.len()];
    loop {
        let sum: i64 = interferers
            .iter()
            .zip(&combo)
            .map(|(&l, &idx)| users[l].pam_levels()[idx] * weights[l])
            .sum();
        let residue = centered_mod_int(sum, own);
        match offset {
            None => offset = Some(residue),
            Some(c) if c != residue => {
                return Err(Error::NotSeparable(format!(
                    "interference residue at user {user} takes values {c} and {residue}"
                )));
            }
            _ => {}
        }
        // odometer over interferer levels
        let mut pos = 0;
        loop {
            if pos == combo.len() {
                return Ok(EffectiveParams { scaling, offset: offset.unwrap_or(0), modulus: own });
            }
            combo[pos] += 1;
            if combo[pos] < users[interferers[pos]].pam_levels().len() {
                break;
            }
            combo[pos] = 0;
            pos += 1;
        }
    }
}
