//! Staggered hexahedral grid and FIT topology.
//!
//! Points are numbered `p = i + j·nx + k·nx·ny`. Every point owns one edge and
//! one facet per axis, so edge- and facet-based vectors have the canonical
//! length `n_dof = 3n` (x block, then y, then z). Edges and facets that would
//! leave the grid are *virtual*: they exist in the index space but carry no
//! matrix entries.
//!
//! The primal curl maps electric grid voltages on primal edges to magnetic
//! fluxes on primal facets. The dual curl is its transpose. A PEC boundary is
//! imposed by removing the columns of every primal edge lying in a boundary
//! plane, so those voltages stay zero for all time.

use crate::sparse::{SparseOperator, Symmetry};
use crate::{Error, Result, EPS0, MU0};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    X = 0,
    Y = 1,
    Z = 2,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];

    fn index(self) -> usize {
        self as usize
    }

    /// The two axes spanning a facet normal to `self`, in right-handed order.
    fn cyclic(self) -> (Axis, Axis) {
        match self {
            Axis::X => (Axis::Y, Axis::Z),
            Axis::Y => (Axis::Z, Axis::X),
            Axis::Z => (Axis::X, Axis::Y),
        }
    }
}

/// Boundary condition on the outer grid surface.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Boundary {
    /// Perfect electric conductor; the only supported boundary.
    #[default]
    Pec,
}

/// Primal grid geometry. The dual grid is implied by cell midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct StaggeredGrid {
    nx: usize,
    ny: usize,
    nz: usize,
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    origin: [f64; 3],
}

impl StaggeredGrid {
    /// Builds a grid from per-axis edge lengths (one fewer than the point count).
    pub fn new(dx: Vec<f64>, dy: Vec<f64>, dz: Vec<f64>, origin: [f64; 3]) -> Result<Self> {
        for (name, d) in [("x", &dx), ("y", &dy), ("z", &dz)] {
            if d.is_empty() {
                return Err(Error::InvalidGrid(format!(
                    "{name}-direction needs at least 2 points (one cell)"
                )));
            }
            if let Some(bad) = d.iter().find(|&&v| !(v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidGrid(format!(
                    "{name}-spacing {bad} is not strictly positive"
                )));
            }
        }
        Ok(Self {
            nx: dx.len() + 1,
            ny: dy.len() + 1,
            nz: dz.len() + 1,
            dx,
            dy,
            dz,
            origin,
        })
    }

    /// Uniform grid with `counts` points per axis spanning `lengths` meters.
    pub fn uniform(counts: [usize; 3], lengths: [f64; 3]) -> Result<Self> {
        let spacing = |n: usize, l: f64| -> Result<Vec<f64>> {
            if n < 2 {
                return Err(Error::InvalidGrid(format!(
                    "point count {n} < 2 leaves no interior cell"
                )));
            }
            Ok(vec![l / (n - 1) as f64; n - 1])
        };
        Self::new(
            spacing(counts[0], lengths[0])?,
            spacing(counts[1], lengths[1])?,
            spacing(counts[2], lengths[2])?,
            [0.0; 3],
        )
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn ny(&self) -> usize {
        self.ny
    }

    pub fn nz(&self) -> usize {
        self.nz
    }

    pub fn counts(&self) -> [usize; 3] {
        [self.nx, self.ny, self.nz]
    }

    pub fn spacing(&self, axis: Axis) -> &[f64] {
        match axis {
            Axis::X => &self.dx,
            Axis::Y => &self.dy,
            Axis::Z => &self.dz,
        }
    }

    pub fn origin(&self) -> [f64; 3] {
        self.origin
    }

    /// Number of primal points `n`.
    pub fn n_points(&self) -> usize {
        self.nx * self.ny * self.nz
    }

    /// Canonical edge/facet vector length `3n`.
    pub fn n_dof(&self) -> usize {
        3 * self.n_points()
    }

    pub fn n_cells(&self) -> usize {
        (self.nx - 1) * (self.ny - 1) * (self.nz - 1)
    }

    pub fn point_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.nx * (j + self.ny * k)
    }

    pub fn point_coords(&self, p: usize) -> (usize, usize, usize) {
        (p % self.nx, (p / self.nx) % self.ny, p / (self.nx * self.ny))
    }

    /// Index of the cell whose lowest corner is `(i, j, k)`.
    pub fn cell_index(&self, i: usize, j: usize, k: usize) -> usize {
        i + (self.nx - 1) * (j + (self.ny - 1) * k)
    }

    /// Index of the edge (or facet, or dual quantity) of `axis` at point `(i, j, k)`.
    pub fn dof_index(&self, axis: Axis, i: usize, j: usize, k: usize) -> usize {
        axis.index() * self.n_points() + self.point_index(i, j, k)
    }

    pub fn dof_coords(&self, dof: usize) -> (Axis, usize, usize, usize) {
        let n = self.n_points();
        let axis = Axis::ALL[dof / n];
        let (i, j, k) = self.point_coords(dof % n);
        (axis, i, j, k)
    }

    fn extent(&self, axis: Axis) -> usize {
        self.counts()[axis.index()]
    }

    fn coord(&self, axis: Axis, i: usize, j: usize, k: usize) -> usize {
        [i, j, k][axis.index()]
    }

    /// Whether the primal edge of `axis` at `(i, j, k)` lies inside the grid.
    pub fn edge_exists(&self, axis: Axis, i: usize, j: usize, k: usize) -> bool {
        self.coord(axis, i, j, k) + 1 < self.extent(axis)
    }

    /// Whether an existing primal edge lies in a boundary plane (tangential to PEC).
    pub fn edge_on_boundary(&self, axis: Axis, i: usize, j: usize, k: usize) -> bool {
        let (a, b) = axis.cyclic();
        [a, b].into_iter().any(|t| {
            let c = self.coord(t, i, j, k);
            c == 0 || c + 1 == self.extent(t)
        })
    }

    /// Whether the primal facet normal to `axis` at `(i, j, k)` lies inside the grid.
    pub fn facet_exists(&self, axis: Axis, i: usize, j: usize, k: usize) -> bool {
        let (a, b) = axis.cyclic();
        self.coord(a, i, j, k) + 1 < self.extent(a) && self.coord(b, i, j, k) + 1 < self.extent(b)
    }

    /// Mask of electric DOFs free to evolve under PEC.
    pub fn active_edges(&self) -> Vec<bool> {
        (0..self.n_dof())
            .map(|d| {
                let (a, i, j, k) = self.dof_coords(d);
                self.edge_exists(a, i, j, k) && !self.edge_on_boundary(a, i, j, k)
            })
            .collect()
    }

    /// Mask of magnetic DOFs that belong to real primal facets.
    pub fn real_facets(&self) -> Vec<bool> {
        (0..self.n_dof())
            .map(|d| {
                let (a, i, j, k) = self.dof_coords(d);
                self.facet_exists(a, i, j, k)
            })
            .collect()
    }

    /// Position of point `(i, j, k)` in meters.
    pub fn position(&self, i: usize, j: usize, k: usize) -> [f64; 3] {
        let along = |d: &[f64], n: usize| d[..n].iter().sum::<f64>();
        [
            self.origin[0] + along(&self.dx, i),
            self.origin[1] + along(&self.dy, j),
            self.origin[2] + along(&self.dz, k),
        ]
    }

    /// Grid point closest to `x` (per-axis nearest node).
    pub fn nearest_point(&self, x: [f64; 3]) -> (usize, usize, usize) {
        let nearest = |axis: Axis| {
            let d = self.spacing(axis);
            let mut pos = self.origin[axis.index()];
            let mut best = (0, (x[axis.index()] - pos).abs());
            for (idx, h) in d.iter().enumerate() {
                pos += h;
                let dist = (x[axis.index()] - pos).abs();
                if dist < best.1 {
                    best = (idx + 1, dist);
                }
            }
            best.0
        };
        (nearest(Axis::X), nearest(Axis::Y), nearest(Axis::Z))
    }

    fn mean_spacing(&self) -> f64 {
        let all = self.dx.iter().chain(&self.dy).chain(&self.dz);
        let n = self.dx.len() + self.dy.len() + self.dz.len();
        all.sum::<f64>() / n as f64
    }
}

/// Cellwise material maps in absolute SI units.
#[derive(Debug, Clone, PartialEq)]
pub struct Materials {
    /// Permittivity per cell, F/m.
    pub eps: Vec<f64>,
    /// Permeability per cell, H/m.
    pub mu: Vec<f64>,
}

impl Materials {
    pub fn vacuum(grid: &StaggeredGrid) -> Self {
        Self::uniform(grid, 1.0, 1.0)
    }

    pub fn uniform(grid: &StaggeredGrid, eps_r: f64, mu_r: f64) -> Self {
        Self {
            eps: vec![EPS0 * eps_r; grid.n_cells()],
            mu: vec![MU0 * mu_r; grid.n_cells()],
        }
    }

    /// Sets relative permittivity on the cell box `lo..hi` (exclusive, cell indices).
    pub fn set_eps_r(&mut self, grid: &StaggeredGrid, lo: [usize; 3], hi: [usize; 3], eps_r: f64) {
        for k in lo[2]..hi[2].min(grid.nz - 1) {
            for j in lo[1]..hi[1].min(grid.ny - 1) {
                for i in lo[0]..hi[0].min(grid.nx - 1) {
                    self.eps[grid.cell_index(i, j, k)] = EPS0 * eps_r;
                }
            }
        }
    }

    pub fn validate(&self, grid: &StaggeredGrid) -> Result<()> {
        for (name, map) in [("permittivity", &self.eps), ("permeability", &self.mu)] {
            if map.len() != grid.n_cells() {
                return Err(Error::DimensionMismatch {
                    expected: grid.n_cells(),
                    actual: map.len(),
                    context: "cellwise material map",
                });
            }
            if let Some((c, v)) = map.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
                return Err(Error::InvalidMaterial(format!(
                    "{name} {v} in cell {c} is not strictly positive"
                )));
            }
        }
        Ok(())
    }
}

/// Primal curl `C` and dual curl `C̃ = Cᵀ`, both `n_dof × n_dof`.
#[derive(Debug, Clone)]
pub struct CurlOperators {
    pub primal: SparseOperator,
    pub dual: SparseOperator,
}

/// Discrete divergences, both `n × n_dof`.
#[derive(Debug, Clone)]
pub struct DivergenceOperators {
    /// Acts on primal-facet fluxes (magnetic flux `b`); one row per cell.
    pub primal: SparseOperator,
    /// Acts on dual-facet fluxes (electric flux `d`); rows for interior points only.
    pub dual: SparseOperator,
}

/// Diagonal FIT material matrices of size `n_dof`.
#[derive(Debug, Clone)]
pub struct MaterialMatrices {
    /// Permittivity on primal edges.
    pub eps: SparseOperator,
    /// Permeability on primal facets.
    pub mu: SparseOperator,
}

fn shifted(grid: &StaggeredGrid, axis: Axis, i: usize, j: usize, k: usize) -> Option<(usize, usize, usize)> {
    let mut c = [i, j, k];
    c[axis.index()] += 1;
    (c[axis.index()] < grid.extent(axis)).then_some((c[0], c[1], c[2]))
}

/// Primal curl incidence (before boundary elimination).
fn curl_incidence(grid: &StaggeredGrid) -> Vec<(usize, usize, f64)> {
    let mut triplets = Vec::with_capacity(4 * grid.n_dof());
    for normal in Axis::ALL {
        let (a, b) = normal.cyclic();
        for k in 0..grid.nz {
            for j in 0..grid.ny {
                for i in 0..grid.nx {
                    if !grid.facet_exists(normal, i, j, k) {
                        continue;
                    }
                    let row = grid.dof_index(normal, i, j, k);
                    // Circulation: +a(p) + b(p+a) - a(p+b) - b(p).
                    let (pa, pb) = (
                        shifted(grid, a, i, j, k).expect("facet exists"),
                        shifted(grid, b, i, j, k).expect("facet exists"),
                    );
                    triplets.push((row, grid.dof_index(a, i, j, k), 1.0));
                    triplets.push((row, grid.dof_index(b, pa.0, pa.1, pa.2), 1.0));
                    triplets.push((row, grid.dof_index(a, pb.0, pb.1, pb.2), -1.0));
                    triplets.push((row, grid.dof_index(b, i, j, k), -1.0));
                }
            }
        }
    }
    triplets
}

/// Builds the primal and dual curl with PEC columns removed.
pub fn build_curl_operators(grid: &StaggeredGrid, boundary: Boundary) -> Result<CurlOperators> {
    let Boundary::Pec = boundary;
    let active = grid.active_edges();
    let n = grid.n_dof();
    let triplets = curl_incidence(grid)
        .into_iter()
        .filter(|&(_, col, _)| active[col])
        .collect();
    let primal = SparseOperator::from_triplets(n, n, triplets, Symmetry::None)?;
    let dual = primal.transpose();
    Ok(CurlOperators { primal, dual })
}

/// Builds the primal (cell) and dual (interior point) divergence incidences.
pub fn build_divergence_operators(grid: &StaggeredGrid) -> Result<DivergenceOperators> {
    let (n, n_dof) = (grid.n_points(), grid.n_dof());
    let mut primal = Vec::new();
    let mut dual = Vec::new();
    let active = grid.active_edges();
    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let p = grid.point_index(i, j, k);
                let is_cell = i + 1 < grid.nx && j + 1 < grid.ny && k + 1 < grid.nz;
                let interior = i > 0 && j > 0 && k > 0 && i + 1 < grid.nx && j + 1 < grid.ny && k + 1 < grid.nz;
                for axis in Axis::ALL {
                    if is_cell {
                        let (si, sj, sk) = shifted(grid, axis, i, j, k).expect("cell interior");
                        primal.push((p, grid.dof_index(axis, si, sj, sk), 1.0));
                        primal.push((p, grid.dof_index(axis, i, j, k), -1.0));
                    }
                    if interior {
                        // Negative transposed gradient: outgoing edges count +1.
                        let out = grid.dof_index(axis, i, j, k);
                        if active[out] {
                            dual.push((p, out, 1.0));
                        }
                        let mut c = [i, j, k];
                        c[axis.index()] -= 1;
                        let inc = grid.dof_index(axis, c[0], c[1], c[2]);
                        if active[inc] {
                            dual.push((p, inc, -1.0));
                        }
                    }
                }
            }
        }
    }
    Ok(DivergenceOperators {
        primal: SparseOperator::from_triplets(n, n_dof, primal, Symmetry::None)?,
        dual: SparseOperator::from_triplets(n, n_dof, dual, Symmetry::None)?,
    })
}

/// Builds the diagonal permittivity (edge) and permeability (facet) matrices.
///
/// Edge entries average `ε` over the dual facet, weighted by the quarter areas
/// in each adjacent cell, and divide by the edge length. Facet entries take the
/// facet area over the series reluctance `Σ l/μ` of the two half dual edges.
/// Virtual DOFs receive a vacuum placeholder so every entry is invertible.
pub fn build_material_matrices(grid: &StaggeredGrid, materials: &Materials) -> Result<MaterialMatrices> {
    materials.validate(grid)?;
    let n_dof = grid.n_dof();
    let h_ref = grid.mean_spacing();
    let mut eps = vec![EPS0 * h_ref; n_dof];
    let mut mu = vec![MU0 * h_ref; n_dof];

    // Cells adjacent along `axis` at index c: the lower (c-1) and upper (c) ones.
    let neighbours = |axis: Axis, c: usize| -> Vec<(usize, f64)> {
        let d = grid.spacing(axis);
        let mut out = Vec::with_capacity(2);
        if c > 0 {
            out.push((c - 1, d[c - 1]));
        }
        if c < d.len() {
            out.push((c, d[c]));
        }
        out
    };

    for k in 0..grid.nz {
        for j in 0..grid.ny {
            for i in 0..grid.nx {
                let pos = [i, j, k];
                for axis in Axis::ALL {
                    let (a, b) = axis.cyclic();
                    let idx = grid.dof_index(axis, i, j, k);
                    if grid.edge_exists(axis, i, j, k) {
                        let along = pos[axis.index()];
                        let length = grid.spacing(axis)[along];
                        let mut acc = 0.0;
                        for (ca, la) in neighbours(a, pos[a.index()]) {
                            for (cb, lb) in neighbours(b, pos[b.index()]) {
                                let mut cell = pos;
                                cell[a.index()] = ca;
                                cell[b.index()] = cb;
                                let c = grid.cell_index(cell[0], cell[1], cell[2]);
                                acc += materials.eps[c] * 0.25 * la * lb;
                            }
                        }
                        eps[idx] = acc / length;
                    }
                    if grid.facet_exists(axis, i, j, k) {
                        let area = grid.spacing(a)[pos[a.index()]] * grid.spacing(b)[pos[b.index()]];
                        let mut reluctance = 0.0;
                        for (cn, ln) in neighbours(axis, pos[axis.index()]) {
                            let mut cell = pos;
                            cell[axis.index()] = cn;
                            let c = grid.cell_index(cell[0], cell[1], cell[2]);
                            reluctance += 0.5 * ln / materials.mu[c];
                        }
                        mu[idx] = area / reluctance;
                    }
                }
            }
        }
    }
    Ok(MaterialMatrices {
        eps: SparseOperator::diagonal(&eps),
        mu: SparseOperator::diagonal(&mu),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn grid(counts: [usize; 3], h: f64) -> StaggeredGrid {
        let l = counts.map(|n| (n - 1) as f64 * h);
        StaggeredGrid::uniform(counts, l).unwrap()
    }

    #[test]
    fn degenerate_grid_is_rejected() {
        assert!(StaggeredGrid::uniform([1, 3, 3], [1.0, 1.0, 1.0]).is_err());
        assert!(StaggeredGrid::new(vec![1.0], vec![0.0], vec![1.0], [0.0; 3]).is_err());
    }

    #[test]
    fn dof_count_is_three_per_point() {
        let g = grid([41, 41, 2], 0.5);
        assert_eq!(g.n_points(), 3362);
        // Electric plus magnetic DOFs of the 2-D wave setup.
        assert_eq!(2 * g.n_dof(), 20172);
    }

    #[test]
    fn constant_x_voltage_has_no_circulation_on_x_facets() {
        let g = grid([2, 2, 2], 1.0);
        let curl = build_curl_operators(&g, Boundary::Pec).unwrap();
        let mut e = vec![0.0; g.n_dof()];
        for (d, v) in e.iter_mut().enumerate() {
            let (a, i, j, k) = g.dof_coords(d);
            if a == Axis::X && g.edge_exists(a, i, j, k) {
                *v = 1.0;
            }
        }
        let mut b = vec![0.0; g.n_dof()];
        curl.primal.apply_uncounted(&e, &mut b);
        for (d, v) in b.iter().enumerate() {
            if g.dof_coords(d).0 == Axis::X {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn pec_columns_are_removed() {
        let g = grid([4, 4, 2], 1.0);
        let curl = build_curl_operators(&g, Boundary::Pec).unwrap();
        let active = g.active_edges();
        for (_, c, _) in curl.primal.entries() {
            assert!(active[c]);
        }
        // nz = 2 leaves only interior z-edges active.
        let n_active = active.iter().filter(|&&a| a).count();
        assert_eq!(n_active, 2 * 2);
    }

    #[test]
    fn materials_reject_non_positive() {
        let g = grid([3, 3, 2], 1.0);
        let mut m = Materials::vacuum(&g);
        m.mu[0] = 0.0;
        assert!(matches!(
            build_material_matrices(&g, &m),
            Err(Error::InvalidMaterial(_))
        ));
    }

    #[test]
    fn vacuum_metric_on_uniform_grid() {
        let h = 0.5;
        let g = grid([5, 5, 5], h);
        let mats = build_material_matrices(&g, &Materials::vacuum(&g)).unwrap();
        let eps = mats.eps.diagonal_entries();
        let mu = mats.mu.diagonal_entries();
        let active = g.active_edges();
        for d in 0..g.n_dof() {
            if active[d] {
                assert!((eps[d] - EPS0 * h).abs() <= 1e-15 * EPS0 * h, "edge {d}");
            }
            let (a, i, j, k) = g.dof_coords(d);
            let interior = [i, j, k][a as usize] > 0 && [i, j, k][a as usize] < 4;
            if g.facet_exists(a, i, j, k) && interior {
                assert!((mu[d] - MU0 * h).abs() <= 1e-15 * MU0 * h, "facet {d}");
            }
        }
        assert!(eps.iter().chain(&mu).all(|&v| v > 0.0));
    }

    #[test]
    fn doubling_permittivity_doubles_entries() {
        let g = grid([4, 4, 3], 0.3);
        let m1 = Materials::vacuum(&g);
        let m2 = Materials::uniform(&g, 2.0, 1.0);
        let e1 = build_material_matrices(&g, &m1).unwrap().eps.diagonal_entries();
        let e2 = build_material_matrices(&g, &m2).unwrap().eps.diagonal_entries();
        for (d, (a, b)) in e1.iter().zip(&e2).enumerate() {
            let (ax, i, j, k) = g.dof_coords(d);
            if g.edge_exists(ax, i, j, k) {
                assert!((b - 2.0 * a).abs() <= 1e-15 * b);
            }
        }
    }

    #[test]
    fn substrate_cells_scale_by_relative_permittivity() {
        let g = grid([6, 6, 6], 0.5);
        let mut m = Materials::vacuum(&g);
        m.set_eps_r(&g, [0, 0, 0], [5, 5, 2], 12.0);
        let eps = build_material_matrices(&g, &m).unwrap().eps.diagonal_entries();
        // z-edge from k=0 to k=1 at an interior (i, j): all four dual-facet cells are substrate.
        let inside = g.dof_index(Axis::Z, 2, 2, 0);
        let vacuum = g.dof_index(Axis::Z, 2, 2, 3);
        assert!((eps[inside] / eps[vacuum] - 12.0).abs() < 1e-12);
    }
}
