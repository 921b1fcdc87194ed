//! Action of the matrix exponential `exp(tA)·b` for skew-symmetric `A`.
//!
//! Two polynomial methods share one scaling scheme: `tA` is split into `s`
//! substeps and each substep applies a degree-`m` polynomial, either the
//! truncated Taylor series or the Newton interpolant on Leja points of the
//! imaginary interval `i·[-c, c]`. Parameters come from backward-error tables
//! so that `∥ΔA∥ ≤ eps·∥A∥`, minimizing the predicted cost `s·m`.

mod krylov;
mod leja;
mod norm;
mod table;
mod taylor;

pub use krylov::{krylov_reference, KrylovResult, MAX_SUBSPACE};
pub use leja::{
    candidate_grid, divided_differences, leja_polynomial_action, log_distance_product, LejaPoints, CANDIDATES,
    MAX_DEGREE,
};
pub use norm::{estimate_norm, NormEstimate};
pub use table::LEJA_MARGIN;
pub use taylor::taylor_polynomial_action;

use crate::diagnostics::{Category, CostLedger};
use crate::sparse::SparseOperator;
use crate::{norm2, Error, Result};

/// Smallest accepted tolerance; [`optimal_tolerance`] clamps to it.
pub const TOLERANCE_FLOOR: f64 = 1e-14;

/// Polynomial family used for `exp(tA)·b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExpmMethod {
    Taylor,
    Leja,
    /// Arnoldi reference; `m` is the subspace dimension per substep.
    KrylovRef,
}

/// Degree, scaling and interval chosen for one `(t, ∥A∥, eps)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExpmPlan {
    pub method: ExpmMethod,
    pub m: usize,
    pub s: usize,
    /// Leja half-interval for one substep; 0 for Taylor.
    pub c: f64,
    pub tolerance: f64,
    pub spectral_bound: f64,
    /// Largest `|t|` the plan covers.
    pub t: f64,
}

impl ExpmPlan {
    /// Predicted SMVPs `s·m`.
    pub fn predicted_cost(&self) -> u64 {
        (self.s * self.m) as u64
    }
}

/// Chooses `(m, s[, c])` minimizing `s·m` subject to the backward-error bound.
pub fn select_parameters(method: ExpmMethod, t: f64, spectral_bound: f64, tolerance: f64) -> Result<ExpmPlan> {
    if !(tolerance > 10.0 * f64::EPSILON && tolerance < 1.0) {
        return Err(Error::ToleranceTooSmall {
            requested: tolerance,
            floor: TOLERANCE_FLOOR,
        });
    }
    if !t.is_finite() || !(spectral_bound >= 0.0) || !spectral_bound.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need finite t and a non-negative spectral bound, got t = {t}, ∥A∥ = {spectral_bound}"
        )));
    }
    let norm = t.abs() * spectral_bound;
    let tab = match method {
        ExpmMethod::Leja => table::leja_table(),
        ExpmMethod::Taylor | ExpmMethod::KrylovRef => table::taylor_table(),
    };
    let mut best: Option<(usize, usize)> = None;
    if norm == 0.0 {
        best = Some((1, 1));
    } else {
        for (d, &m) in tab.degrees().iter().enumerate() {
            let theta = tab.theta_max(d, tolerance);
            if theta <= 0.0 {
                continue;
            }
            let s = ((norm / theta).ceil() as usize).max(1);
            if best.is_none_or(|(bm, bs)| s * m < bm * bs) {
                best = Some((m, s));
            }
        }
    }
    let (m, s) = best.ok_or(Error::ToleranceTooSmall {
        requested: tolerance,
        floor: TOLERANCE_FLOOR,
    })?;
    let (m, c) = match method {
        ExpmMethod::Taylor => (m, 0.0),
        ExpmMethod::Leja => (m, LEJA_MARGIN * norm / s as f64),
        ExpmMethod::KrylovRef => ((m + 1).min(MAX_SUBSPACE), 0.0),
    };
    Ok(ExpmPlan {
        method,
        m,
        s,
        c,
        tolerance,
        spectral_bound,
        t: t.abs(),
    })
}

/// `exp(tA)·b` following `plan`; `|t|` must not exceed `plan.t`.
///
/// SMVPs go to [`Category::ExpmPoly`] (or [`Category::Krylov`]).
pub fn expm_action(
    a: &SparseOperator,
    b: &[f64],
    t: f64,
    plan: &ExpmPlan,
    ledger: &mut CostLedger,
) -> Result<Vec<f64>> {
    if b.len() != a.cols() || a.rows() != a.cols() {
        return Err(Error::DimensionMismatch {
            expected: a.cols(),
            actual: b.len(),
            context: "exponential action operand",
        });
    }
    if t.abs() > plan.t * (1.0 + 1e-12) {
        return Err(Error::InvalidParameter(format!(
            "plan covers |t| ≤ {}, requested {}",
            plan.t, t
        )));
    }
    if t == 0.0 || norm2(b) == 0.0 {
        return Ok(b.to_vec());
    }
    let h = t / plan.s as f64;
    match plan.method {
        ExpmMethod::Taylor => taylor::taylor_substeps(
            a,
            b,
            h,
            plan.m,
            plan.s,
            Some(plan.tolerance),
            ledger,
            Category::ExpmPoly,
        ),
        ExpmMethod::Leja => leja::leja_substeps(
            a,
            b,
            h,
            plan.c,
            plan.m,
            plan.s,
            Some(plan.tolerance),
            ledger,
            Category::ExpmPoly,
        ),
        ExpmMethod::KrylovRef => {
            let mut w = b.to_vec();
            for _ in 0..plan.s {
                w = krylov_reference(a, &w, h, plan.m, ledger)?.w;
            }
            Ok(w)
        }
    }
}

/// Tolerance `β·Δt² / ∥A∥₂` that balances the exponential against the
/// Leapfrog error, clamped to `[TOLERANCE_FLOOR, 0.5]`.
pub fn optimal_tolerance(dt: f64, beta: f64, spectral_bound: f64) -> f64 {
    let eps = beta * dt * dt / spectral_bound;
    if eps < TOLERANCE_FLOOR || eps.is_nan() {
        log::warn!("optimal tolerance {eps:e} is below the floor; using {TOLERANCE_FLOOR:e}");
        TOLERANCE_FLOOR
    } else if eps > 0.5 {
        log::warn!("optimal tolerance {eps:e} is above 0.5; clamping");
        0.5
    } else {
        eps
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sparse::Symmetry;

    fn rotation(w: f64) -> SparseOperator {
        SparseOperator::from_dense(2, 2, &[0.0, -w, w, 0.0], Symmetry::Skew).unwrap()
    }

    #[test]
    fn zero_norm_plan() {
        for method in [ExpmMethod::Taylor, ExpmMethod::Leja] {
            let p = select_parameters(method, 1.0, 0.0, 1e-8).unwrap();
            assert_eq!((p.m, p.s), (1, 1));
            assert!(p.predicted_cost() <= 1);
        }
    }

    #[test]
    fn tolerance_floor_is_enforced() {
        assert!(select_parameters(ExpmMethod::Taylor, 1.0, 1.0, 1e-16).is_err());
        assert!(select_parameters(ExpmMethod::Taylor, 1.0, 1.0, 0.0).is_err());
        assert!(select_parameters(ExpmMethod::Taylor, 1.0, 1.0, 1.5).is_err());
        assert!(select_parameters(ExpmMethod::Taylor, 1.0, 1.0, TOLERANCE_FLOOR).is_ok());
    }

    #[test]
    fn taylor_plan_has_no_interval() {
        let p = select_parameters(ExpmMethod::Taylor, 2.0, 10.0, 1e-6).unwrap();
        assert_eq!(p.c, 0.0);
        assert!(p.m >= 1 && p.s >= 1);
    }

    #[test]
    fn doubling_t_roughly_doubles_cost() {
        for method in [ExpmMethod::Taylor, ExpmMethod::Leja] {
            for eps in [1e-2, 1e-6, 1e-10] {
                for tn in [50.0, 200.0, 1000.0] {
                    let c1 = select_parameters(method, tn, 1.0, eps).unwrap().predicted_cost() as f64;
                    let c2 = select_parameters(method, 2.0 * tn, 1.0, eps).unwrap().predicted_cost() as f64;
                    let r = c2 / c1;
                    assert!((1.5..=2.5).contains(&r), "{method:?} eps={eps} tρ={tn}: {r}");
                }
            }
        }
    }

    #[test]
    fn zero_time_returns_input() {
        let a = rotation(5.0);
        let p = select_parameters(ExpmMethod::Leja, 1.0, 5.0, 1e-8).unwrap();
        let mut l = CostLedger::new();
        let b = [0.3, -0.7];
        assert_eq!(expm_action(&a, &b, 0.0, &p, &mut l).unwrap(), b.to_vec());
        assert_eq!(l.total(), 0);
    }

    #[test]
    fn quarter_rotation() {
        let w = 3.0;
        let a = rotation(w);
        let t = std::f64::consts::FRAC_PI_2 / w;
        for method in [ExpmMethod::Taylor, ExpmMethod::Leja, ExpmMethod::KrylovRef] {
            for eps in [1e-4, 1e-8, 1e-12] {
                let p = select_parameters(method, t, w, eps).unwrap();
                let mut l = CostLedger::new();
                let y = expm_action(&a, &[1.0, 0.0], t, &p, &mut l).unwrap();
                let err = (y[0].powi(2) + (y[1] - 1.0).powi(2)).sqrt();
                assert!(err <= 10.0 * eps, "{method:?} eps={eps}: {err}");
                if method != ExpmMethod::KrylovRef {
                    assert!(l.n_leja() <= p.predicted_cost() + p.s as u64);
                }
            }
        }
    }

    #[test]
    fn plan_horizon_is_enforced() {
        let a = rotation(1.0);
        let p = select_parameters(ExpmMethod::Taylor, 1.0, 1.0, 1e-8).unwrap();
        let mut l = CostLedger::new();
        assert!(expm_action(&a, &[1.0, 0.0], 2.0, &p, &mut l).is_err());
        assert!(expm_action(&a, &[1.0, 0.0], -1.0, &p, &mut l).is_ok());
    }

    #[test]
    fn optimal_tolerance_scaling() {
        assert_eq!(optimal_tolerance(1e-9, 1.0, 1e9), TOLERANCE_FLOOR);
        let e1 = optimal_tolerance(1e-3, 1.0, 1.0);
        let e4 = optimal_tolerance(4e-3, 1.0, 1.0);
        assert!((e4 / e1 - 16.0).abs() < 1e-12);
        let h = optimal_tolerance(1e-3, 1.0, 0.5);
        assert!((h / e1 - 2.0).abs() < 1e-12);
    }
}
