//! Semi-discrete wave system and its normalized skew-symmetric form.
//!
//! Unknowns are stacked magnetic block first: `ū = [h; e]`. With the diagonal
//! scaling `T = blkdiag(M_μ^{1/2}, M_ε^{1/2})` the system `M ū' + K ū = ḡ`
//! becomes `u' = A u + g` for `u = T ū`, where `A` is skew-symmetric.

use crate::diagnostics::{Category, CostLedger};
use crate::fitgrid::{
    build_curl_operators, build_material_matrices, Axis, Boundary, CurlOperators, Materials, StaggeredGrid,
};
use crate::sparse::{SparseOperator, Symmetry};
use crate::{Error, Result};

/// Time dependence of the impressed line current.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SourceKind {
    /// `i_max · exp(-4 ((t - σ_t)/σ_t)²)`.
    GaussianPulse {
        i_max: f64,
        sigma_t: f64,
    },
    /// `i_max · sin(2π f t)`.
    Sine {
        i_max: f64,
        frequency: f64,
    },
    Zero,
}

/// An impressed current: a scalar waveform distributed over signed edge weights.
#[derive(Debug, Clone, PartialEq)]
pub struct SourceSignal {
    pub kind: SourceKind,
    /// `(edge DOF, weight)` pairs.
    pub support: Vec<(usize, f64)>,
}

impl SourceSignal {
    pub fn zero() -> Self {
        Self {
            kind: SourceKind::Zero,
            support: Vec::new(),
        }
    }

    /// A z-directed line current through the grid centre: every z-edge at the
    /// central `(i, j)` with weight +1.
    pub fn center_line(grid: &StaggeredGrid, kind: SourceKind) -> Self {
        let (ic, jc) = (grid.nx() / 2, grid.ny() / 2);
        let support = (0..grid.nz() - 1)
            .map(|k| (grid.dof_index(Axis::Z, ic, jc, k), 1.0))
            .collect();
        Self { kind, support }
    }

    /// Scalar line current `i_L(t)` in amperes.
    pub fn current(&self, t: f64) -> f64 {
        match self.kind {
            SourceKind::GaussianPulse { i_max, sigma_t } => {
                let x = (t - sigma_t) / sigma_t;
                i_max * (-4.0 * x * x).exp()
            }
            SourceKind::Sine { i_max, frequency } => i_max * (2.0 * std::f64::consts::PI * frequency * t).sin(),
            SourceKind::Zero => 0.0,
        }
    }

    /// Analytic time derivative of [`current`](Self::current).
    pub fn current_derivative(&self, t: f64) -> f64 {
        match self.kind {
            SourceKind::GaussianPulse { sigma_t, .. } => {
                let x = (t - sigma_t) / sigma_t;
                self.current(t) * (-8.0 * x / sigma_t)
            }
            SourceKind::Sine { i_max, frequency } => {
                let w = 2.0 * std::f64::consts::PI * frequency;
                i_max * w * (w * t).cos()
            }
            SourceKind::Zero => 0.0,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SourceKind::Zero) || self.support.is_empty()
    }
}

/// Assembled FIT system shared read-only by all workers.
#[derive(Debug, Clone)]
pub struct DiscreteSystem {
    grid: StaggeredGrid,
    materials: Materials,
    curl: CurlOperators,
    m_eps: Vec<f64>,
    m_mu: Vec<f64>,
    inv_eps: Vec<f64>,
    inv_mu: Vec<f64>,
    sqrt_eps: Vec<f64>,
    sqrt_mu: Vec<f64>,
    a: SparseOperator,
    source: SourceSignal,
}

/// Assembles curls, material matrices and the normalized operator `A`.
pub fn assemble(grid: &StaggeredGrid, materials: &Materials, source: SourceSignal) -> Result<DiscreteSystem> {
    let curl = build_curl_operators(grid, Boundary::Pec)?;
    let mats = build_material_matrices(grid, materials)?;
    let n = grid.n_dof();
    for (op, name) in [(&curl.primal, "primal curl"), (&curl.dual, "dual curl")] {
        if op.rows() != n || op.cols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                actual: op.rows().max(op.cols()),
                context: name,
            });
        }
    }
    if let Some(&(dof, _)) = source.support.iter().find(|(d, _)| *d >= n) {
        return Err(Error::DimensionMismatch {
            expected: n,
            actual: dof,
            context: "source support index",
        });
    }
    let active = grid.active_edges();
    if source.support.iter().any(|&(d, _)| !active[d]) {
        log::warn!("source support touches PEC or virtual edges; those entries have no effect");
    }

    let m_eps = mats.eps.diagonal_entries();
    let m_mu = mats.mu.diagonal_entries();
    let sqrt_eps: Vec<f64> = m_eps.iter().map(|v| v.sqrt()).collect();
    let sqrt_mu: Vec<f64> = m_mu.iter().map(|v| v.sqrt()).collect();

    // A = [[0, -Mμ^-1/2 C Mε^-1/2], [Mε^-1/2 Cᵀ Mμ^-1/2, 0]]; the lower block is
    // written as the exact negated transpose of the upper one.
    let mut triplets = Vec::with_capacity(2 * curl.primal.nnz());
    for (facet, edge, c) in curl.primal.entries() {
        let v = c / (sqrt_mu[facet] * sqrt_eps[edge]);
        triplets.push((facet, n + edge, -v));
        triplets.push((n + edge, facet, v));
    }
    let a = SparseOperator::from_triplets(2 * n, 2 * n, triplets, Symmetry::Skew)?;

    Ok(DiscreteSystem {
        grid: grid.clone(),
        materials: materials.clone(),
        curl,
        inv_eps: m_eps.iter().map(|v| 1.0 / v).collect(),
        inv_mu: m_mu.iter().map(|v| 1.0 / v).collect(),
        m_eps,
        m_mu,
        sqrt_eps,
        sqrt_mu,
        a,
        source,
    })
}

impl DiscreteSystem {
    pub fn grid(&self) -> &StaggeredGrid {
        &self.grid
    }

    pub fn materials(&self) -> &Materials {
        &self.materials
    }

    pub fn curl(&self) -> &CurlOperators {
        &self.curl
    }

    /// Length of the electric (or magnetic) block.
    pub fn n_dof(&self) -> usize {
        self.grid.n_dof()
    }

    /// Length of the stacked state `[h; e]`.
    pub fn n_state(&self) -> usize {
        2 * self.grid.n_dof()
    }

    pub fn m_eps(&self) -> &[f64] {
        &self.m_eps
    }

    pub fn m_mu(&self) -> &[f64] {
        &self.m_mu
    }

    pub(crate) fn inv_eps(&self) -> &[f64] {
        &self.inv_eps
    }

    pub(crate) fn inv_mu(&self) -> &[f64] {
        &self.inv_mu
    }

    pub fn sqrt_eps(&self) -> &[f64] {
        &self.sqrt_eps
    }

    pub fn sqrt_mu(&self) -> &[f64] {
        &self.sqrt_mu
    }

    /// The normalized skew-symmetric operator.
    pub fn a(&self) -> &SparseOperator {
        &self.a
    }

    pub fn source(&self) -> &SourceSignal {
        &self.source
    }

    /// Block-diagonal `M = blkdiag(M_μ, M_ε)`.
    pub fn mass_matrix(&self) -> SparseOperator {
        let diag: Vec<f64> = self.m_mu.iter().chain(&self.m_eps).copied().collect();
        SparseOperator::diagonal(&diag)
    }

    /// `K = [[0, C], [-C̃, 0]]`.
    pub fn stiffness_matrix(&self) -> SparseOperator {
        let n = self.n_dof();
        let mut triplets: Vec<_> = self.curl.primal.entries().map(|(r, c, v)| (r, n + c, v)).collect();
        triplets.extend(self.curl.dual.entries().map(|(r, c, v)| (n + r, c, -v)));
        SparseOperator::from_triplets(2 * n, 2 * n, triplets, Symmetry::None).expect("block layout is in range")
    }

    /// Impressed edge currents `j_s(t)` (physical, length `n_dof`).
    pub fn current_density(&self, t: f64, out: &mut [f64]) {
        out.fill(0.0);
        if self.source.is_zero() {
            return;
        }
        let i = self.source.current(t);
        for &(d, w) in &self.source.support {
            out[d] += w * i;
        }
    }

    /// Normalized right-hand side `g(t) = T⁻¹ ḡ(t)` with `ḡ = -[0; j]`.
    pub fn evaluate_source(&self, t: f64) -> Vec<f64> {
        let n = self.n_dof();
        let mut g = vec![0.0; 2 * n];
        if self.source.is_zero() {
            return g;
        }
        let i = self.source.current(t);
        for &(d, w) in &self.source.support {
            g[n + d] -= w * i / self.sqrt_eps[d];
        }
        g
    }

    /// `u = T ū` for `ū = [h; e]`. Counted as one (diagonal) SMVP.
    pub fn transform_to_normalized(&self, h: &[f64], e: &[f64], ledger: &mut CostLedger) -> Vec<f64> {
        ledger.record(Category::Transform, 1);
        let mut u = Vec::with_capacity(self.n_state());
        u.extend(h.iter().zip(&self.sqrt_mu).map(|(x, s)| x * s));
        u.extend(e.iter().zip(&self.sqrt_eps).map(|(x, s)| x * s));
        u
    }

    /// `ū = T⁻¹ u`, returned as `(h, e)`. Counted as one (diagonal) SMVP.
    pub fn transform_from_normalized(&self, u: &[f64], ledger: &mut CostLedger) -> (Vec<f64>, Vec<f64>) {
        ledger.record(Category::Transform, 1);
        let n = self.n_dof();
        let h = u[..n].iter().zip(&self.sqrt_mu).map(|(x, s)| x / s).collect();
        let e = u[n..].iter().zip(&self.sqrt_eps).map(|(x, s)| x / s).collect();
        (h, e)
    }
}
