//! Spectral-norm estimation for skew-symmetric operators.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::diagnostics::{Category, CostLedger};
use crate::sparse::SparseOperator;
use crate::{dot, norm2};

/// Lanczos iteration cap (two SMVPs per iteration).
pub const MAX_ITERATIONS: usize = 400;
/// Relative change of the estimate over ten iterations that counts as converged.
pub const TOLERANCE: f64 = 1e-6;
const SEED: u64 = 0x5eed_2a11;

/// Estimate of `∥A∥₂`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    pub value: f64,
    /// The iteration did not converge and `value` is the row-sum bound.
    pub degraded: bool,
    pub iterations: usize,
}

/// Estimates `∥A∥₂ = sqrt(λ_max(AᵀA))` for skew `A` by Lanczos on `-A²`,
/// starting from a fixed pseudo-random vector.
///
/// Falls back to the Gershgorin row-sum bound when the iteration does not
/// settle within [`MAX_ITERATIONS`].
pub fn estimate_norm(a: &SparseOperator, ledger: &mut CostLedger) -> NormEstimate {
    let n = a.rows();
    if n == 0 || a.nnz() == 0 {
        return NormEstimate {
            value: 0.0,
            degraded: false,
            iterations: 0,
        };
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SEED);
    let mut q: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut q_prev = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut alphas = Vec::new();
    let mut betas: Vec<f64> = Vec::new();
    let mut history: Vec<f64> = Vec::new();
    let mut beta_prev = 0.0;

    for it in 1..=MAX_ITERATIONS {
        a.apply(&q, &mut tmp, ledger, Category::ExpmNorm);
        a.apply(&tmp, &mut z, ledger, Category::ExpmNorm);
        z.iter_mut().for_each(|v| *v = -*v);
        let alpha = dot(&q, &z);
        for ((zv, qv), pv) in z.iter_mut().zip(&q).zip(&q_prev) {
            *zv -= alpha * qv + beta_prev * pv;
        }
        alphas.push(alpha);
        let beta = norm2(&z);
        let lam = max_tridiagonal_eigenvalue(&alphas, &betas).max(0.0);
        history.push(lam);
        let scale = alphas.iter().fold(0.0f64, |m, a| m.max(a.abs())).max(f64::MIN_POSITIVE);
        if beta <= 1e-14 * scale {
            return NormEstimate {
                value: lam.sqrt(),
                degraded: false,
                iterations: it,
            };
        }
        if it > 10 {
            let old = history[it - 11];
            if (lam - old).abs() <= TOLERANCE * lam {
                return NormEstimate {
                    value: lam.sqrt(),
                    degraded: false,
                    iterations: it,
                };
            }
        }
        betas.push(beta);
        std::mem::swap(&mut q_prev, &mut q);
        for (qv, zv) in q.iter_mut().zip(&z) {
            *qv = zv / beta;
        }
        beta_prev = beta;
    }
    log::warn!("norm estimate did not converge; using the row-sum bound");
    NormEstimate {
        value: a.max_row_sum(),
        degraded: true,
        iterations: MAX_ITERATIONS,
    }
}

/// Largest eigenvalue of the symmetric tridiagonal matrix with diagonal
/// `alpha` and off-diagonal `beta` (`beta.len() + 1 == alpha.len()`), by
/// Sturm-sequence bisection.
pub(crate) fn max_tridiagonal_eigenvalue(alpha: &[f64], beta: &[f64]) -> f64 {
    let n = alpha.len();
    if n == 0 {
        return 0.0;
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = if i > 0 { beta[i - 1].abs() } else { 0.0 } + if i + 1 < n { beta[i].abs() } else { 0.0 };
        lo = lo.min(alpha[i] - r);
        hi = hi.max(alpha[i] + r);
    }
    // Number of eigenvalues strictly below x.
    let count_below = |x: f64| {
        let mut count = 0;
        let mut d = 1.0;
        for i in 0..n {
            let b2 = if i > 0 { beta[i - 1] * beta[i - 1] } else { 0.0 };
            d = alpha[i] - x - if i > 0 { b2 / d } else { 0.0 };
            if d == 0.0 {
                d = -f64::EPSILON * (x.abs() + 1.0);
            }
            if d < 0.0 {
                count += 1;
            }
        }
        count
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if count_below(mid) == n {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    #[test]
    fn zero_operator() {
        let a = SparseOperator::from_dense(3, 3, &[0.0; 9], Symmetry::Skew).unwrap();
        let mut l = CostLedger::new();
        assert_eq!(estimate_norm(&a, &mut l).value, 0.0);
        assert_eq!(l.total(), 0);
    }

    #[test]
    fn rotation_block() {
        let w = 3.7;
        let a = SparseOperator::from_dense(2, 2, &[0.0, -w, w, 0.0], Symmetry::Skew).unwrap();
        let mut l = CostLedger::new();
        let est = estimate_norm(&a, &mut l);
        assert!(!est.degraded);
        assert!((est.value - w).abs() < 1e-12 * w);
        assert_eq!(l.get(Category::ExpmNorm), 2 * est.iterations as u64);
    }

    #[test]
    fn tridiagonal_max() {
        // [[2, 1], [1, 2]] has eigenvalues 1 and 3.
        assert!((max_tridiagonal_eigenvalue(&[2.0, 2.0], &[1.0]) - 3.0).abs() < 1e-13);
        assert!((max_tridiagonal_eigenvalue(&[-1.0], &[]) + 1.0).abs() < 1e-13);
        // Path graph Laplacian-like: 2 - 2cos(kπ/(n+1)).
        let n = 30;
        let lam = max_tridiagonal_eigenvalue(&vec![2.0; n], &vec![-1.0; n - 1]);
        let exact = 2.0 - 2.0 * (n as f64 * std::f64::consts::PI / (n as f64 + 1.0)).cos();
        assert!((lam - exact).abs() < 1e-12);
    }
}
