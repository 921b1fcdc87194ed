//! Truncated Taylor substepping.

use crate::diagnostics::{Category, CostLedger};
use crate::sparse::SparseOperator;
use crate::{norm2, Error, Result};

/// `b ← T_m(h·A)^s b` with optional early termination inside each substep.
///
/// A substep stops once two consecutive terms have norm at most
/// `tol·∥accumulated∥`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn taylor_substeps(
    a: &SparseOperator,
    b: &[f64],
    h: f64,
    m: usize,
    s: usize,
    tol: Option<f64>,
    ledger: &mut CostLedger,
    category: Category,
) -> Result<Vec<f64>> {
    let n = b.len();
    let mut acc = b.to_vec();
    let mut term = vec![0.0; n];
    let mut next = vec![0.0; n];
    let mut smvps = 0u64;
    for _ in 0..s {
        term.copy_from_slice(&acc);
        let mut small = 0;
        for k in 1..=m {
            a.apply(&term, &mut next, ledger, category);
            smvps += 1;
            let f = h / k as f64;
            for (t, x) in term.iter_mut().zip(&next) {
                *t = f * x;
            }
            for (y, t) in acc.iter_mut().zip(&term) {
                *y += t;
            }
            let tn = norm2(&term);
            let an = norm2(&acc);
            if !tn.is_finite() || !an.is_finite() {
                return Err(Error::ExpmOverflow { smvps });
            }
            if let Some(tol) = tol {
                if tn <= tol * an {
                    small += 1;
                    if small == 2 {
                        break;
                    }
                } else {
                    small = 0;
                }
            }
        }
    }
    Ok(acc)
}

/// `T_m(h·A)·b` with all `m` terms (no early termination).
pub fn taylor_polynomial_action(
    a: &SparseOperator,
    b: &[f64],
    h: f64,
    m: usize,
    ledger: &mut CostLedger,
) -> Result<Vec<f64>> {
    taylor_substeps(a, b, h, m, 1, None, ledger, Category::ExpmPoly)
}
