//! Time-parallel simulation of semi-discrete electromagnetic waves.
//!
//! The crate assembles Finite Integration Technique (FIT) operators on a
//! staggered hexahedral grid, integrates the resulting first-order system with
//! Leapfrog, and parallelises it in time with ParaExp: particular solutions on
//! sub-intervals are computed independently and glued together by homogeneous
//! solutions propagated with the action of the matrix exponential.
//!
//! Cost is measured in sparse matrix-vector products (SMVPs) and recorded in a
//! [`CostLedger`](diagnostics::CostLedger).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod error;
pub mod expm;
pub mod fitgrid;
pub mod leapfrog;
pub mod paraexp;
pub mod sparse;
pub mod system;

pub use error::{Error, Result};

/// Vacuum permittivity in F/m.
pub const EPS0: f64 = 8.854_187_812_8e-12;
/// Vacuum permeability in H/m.
pub const MU0: f64 = 1.256_637_062_12e-6;
/// Speed of light in vacuum, m/s.
pub const C0: f64 = 299_792_458.0;

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub(crate) fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
