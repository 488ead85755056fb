//! Mapping real CPACs to integer moduli for Cat. 3.

use super::{gcd, Axis, AxisAlphabet, CpacSet, PrimeCpacSet};
use crate::constellation::LegacyConstellation;
use crate::{Error, Result};

/// Largest modulus considered per user.
pub const QUANTIZE_BUDGET: u64 = 31;

/// Picks pairwise-coprime moduli `(q, p)` for a real CPAC set.
///
/// Each axis is handled separately. Among tuples with entries in
/// `2..=budget` that give an injective, per-user decodable Cat. 3 axis,
/// the smallest product wins; ties go to the tuple whose direction is closest
/// to the CPAC direction on that axis, then to the lexicographically smallest.
pub fn quantize_cpacs(
    cpacs: &CpacSet,
    users: &[LegacyConstellation],
    budget: u64,
) -> Result<PrimeCpacSet> {
    if users.len() != cpacs.users() {
        return Err(Error::InvalidInput(format!(
            "{} constellations for {} users",
            users.len(),
            cpacs.users()
        )));
    }
    let q = quantize_axis(cpacs.alpha(), users, budget, Axis::I)?;
    let p = quantize_axis(cpacs.beta(), users, budget, Axis::Q)?;
    PrimeCpacSet::new(q, p)
}

fn quantize_axis(
    weights: &[f64],
    users: &[LegacyConstellation],
    budget: u64,
    axis: Axis,
) -> Result<Vec<u64>> {
    let mut candidates = coprime_tuples(users.len(), budget);
    candidates.sort_by_key(|t| t.iter().product::<u64>());
    let mut best: Option<(f64, Vec<u64>)> = None;
    let mut current_product = None;
    for tuple in candidates {
        let product: u64 = tuple.iter().product();
        if best.is_some() && current_product != Some(product) {
            break;
        }
        current_product = Some(product);
        if !decodable(&tuple, users, axis) {
            continue;
        }
        let score = mismatch(&tuple, weights);
        let better = match &best {
            None => true,
            Some((s, t)) => score < *s - 1e-12 || ((score - *s).abs() <= 1e-12 && tuple < *t),
        };
        if better {
            best = Some((score, tuple));
        }
    }
    best.map(|(_, t)| t).ok_or(Error::QuantizationFailed { budget })
}

fn coprime_tuples(n: usize, budget: u64) -> Vec<Vec<u64>> {
    let mut out = Vec::new();
    let mut stack: Vec<u64> = Vec::with_capacity(n);
    fn rec(n: usize, budget: u64, stack: &mut Vec<u64>, out: &mut Vec<Vec<u64>>) {
        if stack.len() == n {
            out.push(stack.clone());
            return;
        }
        for v in 2..=budget {
            if stack.iter().all(|&s| gcd(s, v) == 1) {
                stack.push(v);
                rec(n, budget, stack, out);
                stack.pop();
            }
        }
    }
    rec(n, budget, &mut stack, &mut out);
    out
}

fn decodable(tuple: &[u64], users: &[LegacyConstellation], axis: Axis) -> bool {
    let Ok(primes) = PrimeCpacSet::new(tuple.to_vec(), tuple.to_vec()) else {
        return false;
    };
    if !AxisAlphabet::modular(&primes, users, axis).is_injective() {
        return false;
    }
    (0..users.len()).all(|u| {
        super::effective_params(&primes, users, u, axis)
            .and_then(|e| e.check_decodable(&users[u].pam_levels()))
            .is_ok()
    })
}

fn mismatch(tuple: &[u64], weights: &[f64]) -> f64 {
    let tn = tuple.iter().map(|&v| (v * v) as f64).sum::<f64>().sqrt();
    let wn = weights.iter().map(|w| w * w).sum::<f64>().sqrt();
    if wn == 0.0 {
        return 0.0;
    }
    tuple
        .iter()
        .zip(weights)
        .map(|(&t, &w)| (t as f64 / tn - w / wn).powi(2))
        .sum::<f64>()
        .sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paper_style_cpacs_map_to_two_three() {
        let cpacs = CpacSet::new(vec![2.3, 3.11], vec![3.01, 2.18], 30.0).unwrap();
        let primes = quantize_cpacs(&cpacs, &[LegacyConstellation::qpsk(); 2], QUANTIZE_BUDGET).unwrap();
        assert_eq!(primes.q(), &[2, 3]);
        assert_eq!(primes.p(), &[3, 2]);
    }

    #[test]
    fn single_user_picks_smallest_non_wrapping_modulus() {
        let cpacs = CpacSet::new(vec![1.0], vec![1.0], 2.0).unwrap();
        let primes = quantize_cpacs(&cpacs, &[LegacyConstellation::qpsk()], QUANTIZE_BUDGET).unwrap();
        assert_eq!(primes.q(), &[2]);
        let primes = quantize_cpacs(&cpacs, &[LegacyConstellation::qam16()], QUANTIZE_BUDGET).unwrap();
        assert_eq!(primes.q(), &[4]);
    }

    #[test]
    fn symmetric_cpacs_break_ties_lexicographically() {
        let cpacs = CpacSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 4.0).unwrap();
        let primes = quantize_cpacs(&cpacs, &[LegacyConstellation::qpsk(); 2], QUANTIZE_BUDGET).unwrap();
        assert_eq!(primes.q(), &[2, 3]);
    }

    #[test]
    fn tiny_budget_fails() {
        let cpacs = CpacSet::new(vec![1.0, 1.0], vec![1.0, 1.0], 4.0).unwrap();
        let r = quantize_cpacs(&cpacs, &[LegacyConstellation::qam16(); 2], 3);
        assert!(matches!(r, Err(Error::QuantizationFailed { budget: 3 })));
    }
}
