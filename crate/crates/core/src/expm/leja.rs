//! Leja interpolation of the exponential on a symmetric imaginary interval.
//!
//! Points come in conjugate pairs `±i·c·ζ` (plus the origin), so the Newton
//! form can be evaluated in real arithmetic: a pair contributes
//! `α·w + β·X·w` and advances `w ← (X² + c²ζ²)·w`.

use std::sync::OnceLock;

use num_complex::Complex64;

use crate::diagnostics::{Category, CostLedger};
use crate::sparse::SparseOperator;
use crate::{norm2, Error, Result};

/// Largest supported interpolation degree.
pub const MAX_DEGREE: usize = 100;
/// Size of the candidate grid on `[-1, 1]`.
pub const CANDIDATES: usize = 10_001;

/// Normalized Leja sequence `ζ_0, ζ_1, …` on `[-1, 1]`; the interpolation
/// nodes are `i·c·ζ_j`.
///
/// The order is `1, -1, 0` followed by pairs `(ζ, -ζ)`, where `ζ > 0`
/// maximizes the product of distances to all earlier points over the
/// candidate grid.
#[derive(Debug, Clone, PartialEq)]
pub struct LejaPoints {
    zeta: Vec<f64>,
}

impl LejaPoints {
    /// The first `count` points (at most `MAX_DEGREE + 1`).
    pub fn new(count: usize) -> Self {
        let all = standard();
        Self {
            zeta: all.zeta[..count.min(all.zeta.len())].to_vec(),
        }
    }

    pub fn magnitudes(&self) -> &[f64] {
        &self.zeta
    }

    pub fn len(&self) -> usize {
        self.zeta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.zeta.is_empty()
    }

    /// Nodes `i·c·ζ_j`.
    pub fn nodes(&self, c: f64) -> Vec<Complex64> {
        self.zeta.iter().map(|&z| Complex64::new(0.0, c * z)).collect()
    }

    /// Whether `degree` ends on a whole conjugate group (`1` or even).
    pub fn admissible_degree(degree: usize) -> bool {
        degree == 1 || (degree >= 2 && degree.is_multiple_of(2))
    }
}

/// Candidate grid `-1 + 2k/(CANDIDATES-1)`.
pub fn candidate_grid() -> Vec<f64> {
    (0..CANDIDATES)
        .map(|k| -1.0 + 2.0 * k as f64 / (CANDIDATES - 1) as f64)
        .collect()
}

/// `Σ_j ln|x - ζ_j|`.
pub fn log_distance_product(x: f64, points: &[f64]) -> f64 {
    points.iter().map(|z| (x - z).abs().ln()).sum()
}

fn standard() -> &'static LejaPoints {
    static POINTS: OnceLock<LejaPoints> = OnceLock::new();
    POINTS.get_or_init(|| {
        let grid = candidate_grid();
        let mut zeta = vec![1.0, -1.0, 0.0];
        // Running log-products over the candidate grid.
        let mut logp: Vec<f64> = grid.iter().map(|&x| log_distance_product(x, &zeta)).collect();
        while zeta.len() < MAX_DEGREE + 1 {
            let (best, _) = grid.iter().zip(&logp).filter(|(x, _)| **x > 0.0).fold(
                (0.0, f64::NEG_INFINITY),
                |(bx, bv), (&x, &v)| if v > bv { (x, v) } else { (bx, bv) },
            );
            for z in [best, -best] {
                zeta.push(z);
                for (lp, &x) in logp.iter_mut().zip(&grid) {
                    *lp += (x - z).abs().ln();
                }
            }
        }
        zeta.truncate(MAX_DEGREE + 1);
        LejaPoints { zeta }
    })
}

/// Newton divided differences of `exp` at `nodes`.
///
/// Computed as the first column of `exp(W)` for the bidiagonal matrix
/// `W = diag(nodes) + subdiag(1)`, applied to `e_0` through `r` scaled Taylor
/// steps so that `∥W/r∥ ≤ 1/2`.
pub fn divided_differences(nodes: &[Complex64]) -> Vec<Complex64> {
    let n = nodes.len();
    if n == 0 {
        return Vec::new();
    }
    let radius = nodes.iter().map(|z| z.norm()).fold(0.0, f64::max);
    let r = (2.0 * (radius + 1.0)).ceil().max(1.0) as usize;
    let inv_r = 1.0 / r as f64;
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[0] = Complex64::new(1.0, 0.0);
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = vec![Complex64::new(0.0, 0.0); n];
    for _ in 0..r {
        term.copy_from_slice(&v);
        for j in 1..60 {
            let f = inv_r / j as f64;
            next[0] = nodes[0] * term[0] * f;
            for k in 1..n {
                next[k] = (nodes[k] * term[k] + term[k - 1]) * f;
            }
            std::mem::swap(&mut term, &mut next);
            let mut big = 0.0f64;
            for (vk, tk) in v.iter_mut().zip(&term) {
                *vk += tk;
                big = big.max(tk.norm() / vk.norm().max(f64::MIN_POSITIVE));
            }
            if big < 1e-18 {
                break;
            }
        }
    }
    v
}

/// `b ← L_m(h·A)^s b` on nodes `i·c·ζ_j`, `j = 0..=m`, with optional early
/// termination inside each substep.
#[allow(clippy::too_many_arguments)]
pub(crate) fn leja_substeps(
    a: &SparseOperator,
    b: &[f64],
    h: f64,
    c: f64,
    m: usize,
    s: usize,
    tol: Option<f64>,
    ledger: &mut CostLedger,
    category: Category,
) -> Result<Vec<f64>> {
    if !LejaPoints::admissible_degree(m) {
        return Err(Error::InvalidParameter(format!(
            "Leja degree {m} splits a conjugate pair; use 1 or an even degree"
        )));
    }
    let points = LejaPoints::new(m + 1);
    let zeta = points.magnitudes();
    let dd = divided_differences(&points.nodes(c));

    let n = b.len();
    let mut acc = b.to_vec();
    let mut w = vec![0.0; n];
    let mut xw = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    let mut contrib = vec![0.0; n];
    let mut smvps = 0u64;

    let apply = |x: &[f64], y: &mut [f64], smvps: &mut u64, ledger: &mut CostLedger| {
        a.apply(x, y, ledger, category);
        *smvps += 1;
        for v in y.iter_mut() {
            *v *= h;
        }
    };

    for _ in 0..s {
        w.copy_from_slice(&acc);
        acc.fill(0.0);
        let mut small = 0;
        let mut k = 0;
        // Pending terms after the accumulator was reset: at least the first group.
        while k <= m {
            let single = zeta[k] == 0.0 && k != 0 && k != 1;
            if single {
                let d = dd[k].re;
                for (cv, wv) in contrib.iter_mut().zip(&w) {
                    *cv = d * wv;
                }
                k += 1;
                if k <= m {
                    let (w_ref, tmp_ref) = (&w, &mut tmp);
                    apply(w_ref, tmp_ref, &mut smvps, ledger);
                    std::mem::swap(&mut w, &mut tmp);
                }
            } else {
                let cz = c * zeta[k];
                let beta = dd[k + 1].re;
                let alpha = (dd[k] - Complex64::new(0.0, cz) * dd[k + 1]).re;
                apply(&w, &mut xw, &mut smvps, ledger);
                for ((cv, wv), xv) in contrib.iter_mut().zip(&w).zip(&xw) {
                    *cv = alpha * wv + beta * xv;
                }
                k += 2;
                if k <= m {
                    apply(&xw, &mut tmp, &mut smvps, ledger);
                    for (t, wv) in tmp.iter_mut().zip(&w) {
                        *t += cz * cz * wv;
                    }
                    std::mem::swap(&mut w, &mut tmp);
                }
            }
            for (y, cv) in acc.iter_mut().zip(&contrib) {
                *y += cv;
            }
            let cn = norm2(&contrib);
            let an = norm2(&acc);
            if !cn.is_finite() || !an.is_finite() {
                return Err(Error::ExpmOverflow { smvps });
            }
            if let Some(tol) = tol {
                if cn <= tol * an {
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

/// `L_m(h·A)·b` on the Leja nodes `i·c·ζ_j`, all `m + 1` terms.
///
/// With `c = 0` every node is the origin and this is the degree-`m` Taylor
/// polynomial.
pub fn leja_polynomial_action(
    a: &SparseOperator,
    b: &[f64],
    h: f64,
    c: f64,
    m: usize,
    ledger: &mut CostLedger,
) -> Result<Vec<f64>> {
    leja_substeps(a, b, h, c, m, 1, None, ledger, Category::ExpmPoly)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sequence_head() {
        let p = LejaPoints::new(7);
        let z = p.magnitudes();
        assert_eq!(&z[..3], &[1.0, -1.0, 0.0]);
        assert_eq!(z[3], -z[4]);
        assert_eq!(z[5], -z[6]);
        // Maximizer of |x|(1 - x²) is 1/√3, up to the candidate spacing.
        assert!((z[3] - 1.0 / 3f64.sqrt()).abs() < 2e-4);
    }

    #[test]
    fn points_are_distinct_and_bounded() {
        let p = LejaPoints::new(MAX_DEGREE + 1);
        assert_eq!(p.len(), MAX_DEGREE + 1);
        let mut z = p.magnitudes().to_vec();
        assert!(z.iter().all(|x| x.abs() <= 1.0));
        z.sort_by(f64::total_cmp);
        assert!(z.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn admissible_degrees() {
        assert!(LejaPoints::admissible_degree(1));
        assert!(LejaPoints::admissible_degree(2));
        assert!(!LejaPoints::admissible_degree(3));
        assert!(!LejaPoints::admissible_degree(0));
        assert!(LejaPoints::admissible_degree(100));
    }

    #[test]
    fn divided_differences_at_origin_are_factorials() {
        let nodes = vec![Complex64::new(0.0, 0.0); 12];
        let dd = divided_differences(&nodes);
        let mut f = 1.0;
        for (k, d) in dd.iter().enumerate() {
            if k > 0 {
                f *= k as f64;
            }
            assert!((d.re - 1.0 / f).abs() < 1e-15 / f, "k = {k}");
            assert!(d.im.abs() < 1e-300);
        }
    }

    #[test]
    fn divided_differences_two_points() {
        let (a, b) = (Complex64::new(0.0, 0.7), Complex64::new(0.0, -0.3));
        let dd = divided_differences(&[a, b]);
        let expected = (b.exp() - a.exp()) / (b - a);
        assert!((dd[0] - a.exp()).norm() < 1e-15);
        assert!((dd[1] - expected).norm() < 1e-14);
    }

    #[test]
    fn newton_form_interpolates() {
        let c = 3.0;
        let p = LejaPoints::new(9);
        let nodes = p.nodes(c);
        let dd = divided_differences(&nodes);
        for &x in &nodes {
            let mut w = Complex64::new(1.0, 0.0);
            let mut val = Complex64::new(0.0, 0.0);
            for (k, d) in dd.iter().enumerate() {
                val += d * w;
                w *= x - nodes[k];
            }
            assert!((val - x.exp()).norm() < 1e-12, "{x}");
        }
    }
}
