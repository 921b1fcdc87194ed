//! Backward-error tables for degree selection.
//!
//! For a normal matrix `X` with spectrum in `i·[-θ, θ]` and a polynomial `p`
//! with `p(X) = exp(X + ΔX)`, `∥ΔX∥ ≤ max_{|y|≤θ} |log(e^{-iy} p(iy))|`.
//! The tables store that maximum together with the evaluation amplitude
//! `Σ_k |term_k|`, which bounds the rounding error of the recurrence.

use std::sync::OnceLock;

use num_complex::Complex64;

use super::leja::{divided_differences, LejaPoints, MAX_DEGREE};

const THETA_MIN: f64 = 1e-6;
const THETA_MAX: f64 = 200.0;
const THETA_RATIO: f64 = 1.03;
const LEJA_SAMPLES: usize = 8 * MAX_DEGREE + 64;
/// Interval half-width relative to the scaled spectral bound.
pub const LEJA_MARGIN: f64 = 1.05;

#[derive(Debug)]
pub(crate) struct ParamTable {
    thetas: Vec<f64>,
    degrees: Vec<usize>,
    /// `[degree][theta]`: `max |h(iy)|` over `0 ≤ y ≤ θ`.
    err: Vec<Vec<f64>>,
    /// `[degree][theta]`: max evaluation amplitude over the same range.
    amp: Vec<Vec<f64>>,
}

fn theta_grid() -> Vec<f64> {
    let mut v = Vec::new();
    let mut t = THETA_MIN;
    while t <= THETA_MAX {
        v.push(t);
        t *= THETA_RATIO;
    }
    v
}

/// `|log(1 + δ)|`, accurate for small `δ`; infinite once `|δ| ≥ 1`.
fn log1p_abs(delta: Complex64) -> f64 {
    let r = delta.norm();
    if !r.is_finite() || r >= 1.0 {
        f64::INFINITY
    } else if r < 1e-4 {
        (delta - delta * delta / 2.0 + delta * delta * delta / 3.0).norm()
    } else {
        (Complex64::new(1.0, 0.0) + delta).ln().norm()
    }
}

impl ParamTable {
    pub(crate) fn degrees(&self) -> &[usize] {
        &self.degrees
    }

    /// Largest `θ` such that every grid `θ' ≤ θ` meets the tolerance.
    pub(crate) fn theta_max(&self, degree_idx: usize, eps: f64) -> f64 {
        let u = f64::EPSILON / 2.0;
        // Summation of m + 1 terms and the final product, `γ_{m+3}`.
        let gamma = (self.degrees[degree_idx] + 3) as f64 * u;
        let mut best = 0.0;
        for (i, &theta) in self.thetas.iter().enumerate() {
            let e = self.err[degree_idx][i];
            let a = self.amp[degree_idx][i];
            let ok = e.is_finite() && a.is_finite() && e <= eps * theta + gamma * a && u * a <= 0.1 * eps;
            if !ok {
                break;
            }
            best = theta;
        }
        best
    }

    fn taylor() -> Self {
        let thetas = theta_grid();
        let degrees: Vec<usize> = (1..=MAX_DEGREE).collect();
        let nd = degrees.len();
        let mut err = vec![vec![0.0f64; thetas.len()]; nd];
        let mut amp = vec![vec![0.0f64; thetas.len()]; nd];
        let mut run_err = vec![0.0f64; nd];
        let mut run_amp = vec![0.0f64; nd];
        let mut prev = 0.0;
        for (i, &theta) in thetas.iter().enumerate() {
            for sub in 1..=4 {
                let y = prev + (theta - prev) * sub as f64 / 4.0;
                let (tails, amps) = taylor_tails(y);
                for d in 0..nd {
                    let m = degrees[d];
                    let delta = -Complex64::new(0.0, -y).exp() * tails[m];
                    run_err[d] = run_err[d].max(log1p_abs(delta));
                    run_amp[d] = run_amp[d].max(amps[m]);
                }
            }
            for d in 0..nd {
                err[d][i] = run_err[d];
                amp[d][i] = run_amp[d];
            }
            prev = theta;
        }
        Self {
            thetas,
            degrees,
            err,
            amp,
        }
    }

    fn leja() -> Self {
        let thetas = theta_grid();
        let degrees: Vec<usize> = (1..=MAX_DEGREE).filter(|&m| LejaPoints::admissible_degree(m)).collect();
        let nd = degrees.len();
        let mut slot = vec![usize::MAX; MAX_DEGREE + 1];
        for (d, &m) in degrees.iter().enumerate() {
            slot[m] = d;
        }
        let points = LejaPoints::new(MAX_DEGREE + 1);
        let mut err = vec![vec![0.0f64; thetas.len()]; nd];
        let mut amp = vec![vec![0.0f64; thetas.len()]; nd];
        for (i, &theta) in thetas.iter().enumerate() {
            let nodes = points.nodes(LEJA_MARGIN * theta);
            let dd = divided_differences(&nodes);
            for j in 0..=LEJA_SAMPLES {
                let y = theta * j as f64 / LEJA_SAMPLES as f64;
                let z = Complex64::new(0.0, y);
                let back = Complex64::new(0.0, -y).exp();
                let mut w = Complex64::new(1.0, 0.0);
                let mut p = Complex64::new(0.0, 0.0);
                let mut a = 0.0;
                for k in 0..=MAX_DEGREE {
                    let t = dd[k] * w;
                    p += t;
                    a += t.norm();
                    if slot[k] != usize::MAX {
                        let d = slot[k];
                        let e = log1p_abs(back * p - 1.0);
                        let e = if e.is_nan() { f64::INFINITY } else { e };
                        err[d][i] = err[d][i].max(e);
                        amp[d][i] = amp[d][i].max(if a.is_nan() { f64::INFINITY } else { a });
                    }
                    w *= z - nodes[k];
                }
            }
        }
        Self {
            thetas,
            degrees,
            err,
            amp,
        }
    }
}

/// Tails `Σ_{k>m} (iy)^k/k!` and amplitudes `Σ_{k≤m} y^k/k!` for
/// `m = 0..=MAX_DEGREE`, each summed from the small end.
fn taylor_tails(y: f64) -> (Vec<Complex64>, Vec<f64>) {
    let last = MAX_DEGREE.max(y.ceil() as usize + 80);
    let z = Complex64::new(0.0, y);
    let mut terms = Vec::with_capacity(last + 1);
    let mut t = Complex64::new(1.0, 0.0);
    terms.push(t);
    for k in 1..=last {
        t = t * z / k as f64;
        terms.push(t);
    }
    let mut tails = vec![Complex64::new(0.0, 0.0); MAX_DEGREE + 1];
    let mut acc = Complex64::new(0.0, 0.0);
    for k in (MAX_DEGREE + 1..=last).rev() {
        acc += terms[k];
    }
    tails[MAX_DEGREE] = acc;
    for m in (0..MAX_DEGREE).rev() {
        acc += terms[m + 1];
        tails[m] = acc;
    }
    let mut amps = vec![0.0; MAX_DEGREE + 1];
    let mut a = 0.0;
    for m in 0..=MAX_DEGREE {
        a += terms[m].norm();
        amps[m] = a;
    }
    (tails, amps)
}

pub(crate) fn taylor_table() -> &'static ParamTable {
    static T: OnceLock<ParamTable> = OnceLock::new();
    T.get_or_init(ParamTable::taylor)
}

pub(crate) fn leja_table() -> &'static ParamTable {
    static T: OnceLock<ParamTable> = OnceLock::new();
    T.get_or_init(ParamTable::leja)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn taylor_theta_grows_with_degree_and_tolerance() {
        let t = taylor_table();
        let th = |m: usize, eps: f64| t.theta_max(m - 1, eps);
        assert!(th(10, 1e-8) > th(5, 1e-8));
        assert!(th(30, 1e-4) > th(30, 1e-8));
        // Degree-1 Taylor: |h| ≈ y²/2, so θ ≈ 2·eps.
        let t1 = th(1, 1e-4);
        assert!(t1 > 1.5e-4 && t1 < 2.1e-4, "{t1}");
    }

    #[test]
    fn taylor_matches_known_thresholds() {
        // Double-precision thresholds for truncated Taylor (m = 20, 30: about 1.9 and 4.0
        // for eps = 2^-53 with the one-sided real bound); the skew bound is similar.
        let t = taylor_table();
        let th20 = t.theta_max(19, 1e-14);
        assert!(th20 > 1.0 && th20 < 3.0, "{th20}");
    }

    #[test]
    fn leja_beats_taylor_at_high_degree() {
        let lt = leja_table();
        let tt = taylor_table();
        let d = lt.degrees().iter().position(|&m| m == 60).unwrap();
        assert!(lt.theta_max(d, 1e-8) > 1.3 * tt.theta_max(59, 1e-8));
    }

    #[test]
    fn leja_reaches_tight_tolerances() {
        let lt = leja_table();
        let d = lt.degrees().iter().position(|&m| m == 20).unwrap();
        assert!(lt.theta_max(d, 1e-14) > 1.0);
    }

    #[test]
    fn tails_match_direct_sum() {
        let (tails, amps) = taylor_tails(0.5);
        let direct = Complex64::new(0.0, 0.5).exp() - Complex64::new(1.0, 0.5);
        assert!((tails[1] - direct).norm() < 1e-16);
        assert!((amps[1] - 1.5).abs() < 1e-16);
    }
}
