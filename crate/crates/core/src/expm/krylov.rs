//! Polynomial Krylov reference for `exp(tA)·b`.

use nalgebra::DMatrix;

use crate::diagnostics::{Category, CostLedger};
use crate::sparse::SparseOperator;
use crate::{dot, norm2, Error, Result};

/// Largest supported subspace dimension.
pub const MAX_SUBSPACE: usize = 200;

/// Result of [`krylov_reference`].
#[derive(Debug, Clone, PartialEq)]
pub struct KrylovResult {
    pub w: Vec<f64>,
    /// Dimension actually built.
    pub dimension: usize,
    /// The subspace became invariant, so `w` is exact up to rounding.
    pub happy_breakdown: bool,
}

/// `w ≈ ∥b∥·V_l·exp(t·H_l)·e₁` from `l` Arnoldi steps on `K_l(A, b)`.
pub fn krylov_reference(
    a: &SparseOperator,
    b: &[f64],
    t: f64,
    l: usize,
    ledger: &mut CostLedger,
) -> Result<KrylovResult> {
    if l == 0 || l > MAX_SUBSPACE {
        return Err(Error::InvalidParameter(format!(
            "Krylov dimension must be in 1..={MAX_SUBSPACE}, got {l}"
        )));
    }
    if b.len() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: b.len(),
            context: "Krylov start vector",
        });
    }
    let beta = norm2(b);
    if beta == 0.0 || t == 0.0 {
        return Ok(KrylovResult {
            w: b.to_vec(),
            dimension: 0,
            happy_breakdown: true,
        });
    }
    let n = b.len();
    let l = l.min(n);
    let mut v: Vec<Vec<f64>> = vec![b.iter().map(|x| x / beta).collect()];
    let mut h = DMatrix::<f64>::zeros(l, l);
    let mut w = vec![0.0; n];
    let mut dim = l;
    let mut breakdown = false;
    let scale = a.max_row_sum().max(f64::MIN_POSITIVE);
    for j in 0..l {
        a.apply(&v[j], &mut w, ledger, Category::Krylov);
        for _pass in 0..2 {
            for (i, vi) in v.iter().enumerate() {
                let c = dot(vi, &w);
                h[(i, j)] += c;
                for (x, y) in w.iter_mut().zip(vi) {
                    *x -= c * y;
                }
            }
        }
        let nw = norm2(&w);
        if !nw.is_finite() {
            return Err(Error::ExpmOverflow { smvps: j as u64 + 1 });
        }
        if nw <= 1e-12 * scale {
            dim = j + 1;
            breakdown = true;
            break;
        }
        if j + 1 < l {
            h[(j + 1, j)] = nw;
            v.push(w.iter().map(|x| x / nw).collect());
        }
    }
    let hm = h.view((0, 0), (dim, dim)) * t;
    let e = hm.exp();
    let mut out = vec![0.0; n];
    for (i, vi) in v.iter().take(dim).enumerate() {
        let c = beta * e[(i, 0)];
        for (o, x) in out.iter_mut().zip(vi) {
            *o += c * x;
        }
    }
    Ok(KrylovResult {
        w: out,
        dimension: dim,
        happy_breakdown: breakdown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    #[test]
    fn rotation_is_exact() {
        let w = 2.0;
        let a = SparseOperator::from_dense(2, 2, &[0.0, -w, w, 0.0], Symmetry::Skew).unwrap();
        let mut l = CostLedger::new();
        let t = 0.3;
        let r = krylov_reference(&a, &[1.0, 0.0], t, 2, &mut l).unwrap();
        assert!((r.w[0] - (w * t).cos()).abs() < 1e-14);
        assert!((r.w[1] - (w * t).sin()).abs() < 1e-14);
        assert_eq!(l.get(Category::Krylov), r.dimension as u64);
    }

    #[test]
    fn rejects_bad_dimension() {
        let a = SparseOperator::from_dense(1, 1, &[0.0], Symmetry::Skew).unwrap();
        let mut l = CostLedger::new();
        assert!(krylov_reference(&a, &[1.0], 1.0, 0, &mut l).is_err());
        assert!(krylov_reference(&a, &[1.0], 1.0, 201, &mut l).is_err());
    }
}
