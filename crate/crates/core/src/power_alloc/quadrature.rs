//! Gauss-Hermite rules for `∫ f(x) exp(-x²) dx`.

use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

type Rule = (Vec<f64>, Vec<f64>);

/// Nodes and weights of the `n`-point rule (Golub-Welsch), cached per `n`.
pub fn gauss_hermite(n: usize) -> Rule {
    static CACHE: OnceLock<Mutex<HashMap<usize, Rule>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().expect("cache lock").get(&n) {
        return rule.clone();
    }
    let rule = compute(n);
    cache.lock().expect("cache lock").insert(n, rule.clone());
    rule
}

fn compute(n: usize) -> Rule {
    assert!(n >= 1, "rule needs at least one node");
    let mut jacobi = DMatrix::<f64>::zeros(n, n);
    for i in 1..n {
        let b = (i as f64 / 2.0).sqrt();
        jacobi[(i, i - 1)] = b;
        jacobi[(i - 1, i)] = b;
    }
    let eig = SymmetricEigen::new(jacobi);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let v0 = eig.eigenvectors[(0, k)];
            (eig.eigenvalues[k], std::f64::consts::PI.sqrt() * v0 * v0)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    pairs.into_iter().unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_gaussian_moments() {
        let (x, w) = gauss_hermite(20);
        let pi = std::f64::consts::PI;
        let m0: f64 = w.iter().sum();
        let m2: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        let m4: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((m0 - pi.sqrt()).abs() < 1e-12);
        assert!((m2 - pi.sqrt() / 2.0).abs() < 1e-12);
        assert!((m4 - 3.0 * pi.sqrt() / 4.0).abs() < 1e-11);
    }
}
