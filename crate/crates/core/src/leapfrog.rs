//! Leapfrog (Yee-type) time stepping on staggered time grids.
//!
//! Electric voltages live at integer steps `t_m`, magnetic voltages at half
//! steps `t_{m+1/2}`. One step costs exactly two curl SMVPs.

use crate::diagnostics::{Category, CostLedger, Field, Probe, ProbeTrace};
use crate::fitgrid::{Axis, Materials, StaggeredGrid};
use crate::system::DiscreteSystem;
use crate::{Error, Result};

/// Leapfrog state: `e` at `t_m`, `h` at `t_{m+1/2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldState {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
    /// Step index `m`.
    pub step: usize,
    pub dt: f64,
    /// Time of step 0.
    pub t0: f64,
}

impl FieldState {
    /// All-zero fields (the particular-solution start).
    pub fn zeros(n_dof: usize, t0: f64, dt: f64) -> Self {
        Self {
            e: vec![0.0; n_dof],
            h: vec![0.0; n_dof],
            step: 0,
            dt,
            t0,
        }
    }

    /// Staggered start from `e(t0)` and `h(t0)`: `h_{1/2}` is produced by a
    /// source-free half step of the magnetic update. The extra curl product is
    /// recorded as a transform, outside the `2·n_t` stepping cost.
    pub fn from_collocated(
        sys: &DiscreteSystem,
        e0: Vec<f64>,
        h0: Vec<f64>,
        t0: f64,
        dt: f64,
        ledger: &mut CostLedger,
    ) -> Self {
        let mut ce = vec![0.0; sys.n_dof()];
        sys.curl().primal.apply(&e0, &mut ce, ledger, Category::Transform);
        let h = h0
            .iter()
            .zip(&ce)
            .zip(sys.inv_mu())
            .map(|((h, c), im)| h - 0.5 * dt * im * c)
            .collect();
        Self {
            e: e0,
            h,
            step: 0,
            dt,
            t0,
        }
    }

    pub fn time_e(&self) -> f64 {
        self.t0 + self.step as f64 * self.dt
    }

    pub fn time_h(&self) -> f64 {
        self.t0 + (self.step as f64 + 0.5) * self.dt
    }
}

/// Upper bound on the stable step from the per-cell CFL estimate.
pub fn cfl_timestep(grid: &StaggeredGrid, materials: &Materials) -> f64 {
    let (dx, dy, dz) = (grid.spacing(Axis::X), grid.spacing(Axis::Y), grid.spacing(Axis::Z));
    let mut best = f64::INFINITY;
    for (k, hz) in dz.iter().enumerate() {
        for (j, hy) in dy.iter().enumerate() {
            for (i, hx) in dx.iter().enumerate() {
                let c = grid.cell_index(i, j, k);
                let inv = 1.0 / (hx * hx) + 1.0 / (hy * hy) + 1.0 / (hz * hz);
                best = best.min((materials.eps[c] * materials.mu[c] / inv).sqrt());
            }
        }
    }
    best
}

/// Whether `step` evaluates the system source or runs source-free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Forcing {
    Source,
    Free,
}

/// Reusable stepping buffers bound to one system.
pub struct Stepper<'a> {
    sys: &'a DiscreteSystem,
    forcing: Forcing,
    scratch: Vec<f64>,
    current: Vec<f64>,
    warned: bool,
}

impl<'a> Stepper<'a> {
    pub fn new(sys: &'a DiscreteSystem, forcing: Forcing) -> Self {
        let n = sys.n_dof();
        Self {
            sys,
            forcing,
            scratch: vec![0.0; n],
            current: vec![0.0; n],
            warned: false,
        }
    }

    /// Advances `state` from `(e_m, h_{m+1/2})` to `(e_{m+1}, h_{m+3/2})`.
    pub fn step(&mut self, state: &mut FieldState, ledger: &mut CostLedger) -> Result<()> {
        let sys = self.sys;
        let dt = state.dt;
        if !self.warned {
            let limit = cfl_timestep(sys.grid(), sys.materials());
            if dt > limit {
                log::warn!("time step {dt:e} s exceeds the CFL estimate {limit:e} s");
            }
            self.warned = true;
        }

        sys.curl()
            .dual
            .apply(&state.h, &mut self.scratch, ledger, Category::LeapfrogCurl);
        match self.forcing {
            Forcing::Source if !sys.source().is_zero() => {
                sys.current_density(state.time_h(), &mut self.current);
                for (((e, c), j), ie) in state
                    .e
                    .iter_mut()
                    .zip(&self.scratch)
                    .zip(&self.current)
                    .zip(sys.inv_eps())
                {
                    *e += dt * ie * (c - j);
                }
            }
            _ => {
                for ((e, c), ie) in state.e.iter_mut().zip(&self.scratch).zip(sys.inv_eps()) {
                    *e += dt * ie * c;
                }
            }
        }

        sys.curl()
            .primal
            .apply(&state.e, &mut self.scratch, ledger, Category::LeapfrogCurl);
        for ((h, c), im) in state.h.iter_mut().zip(&self.scratch).zip(sys.inv_mu()) {
            *h -= dt * im * c;
        }
        state.step += 1;

        if !state.e.iter().chain(&state.h).all(|v| v.is_finite()) {
            return Err(Error::Diverged {
                step: state.step,
                time: state.time_e(),
            });
        }
        Ok(())
    }
}

/// One Leapfrog step with the system source.
pub fn step(sys: &DiscreteSystem, state: &mut FieldState, ledger: &mut CostLedger) -> Result<()> {
    Stepper::new(sys, Forcing::Source).step(state, ledger)
}

/// Discrete energies `(W_e^{m,m+1/2}, W_h^{m,m+1/2})` from `e_m`, `e_{m+1}`,
/// `h_{m-1/2}` and `h_{m+1/2}`, using the staggered averages
/// `e_{m+1/2} = (e_m + e_{m+1})/2` and `h_m = (h_{m-1/2} + h_{m+1/2})/2`.
///
/// Their sum is invariant under source-free steps for any `dt`.
pub fn energy(sys: &DiscreteSystem, e_m: &[f64], e_next: &[f64], h_prev: &[f64], h_next: &[f64]) -> (f64, f64) {
    let we = e_m
        .iter()
        .zip(e_next)
        .zip(sys.m_eps())
        .map(|((a, b), m)| a * m * 0.5 * (a + b))
        .sum();
    let wh = h_prev
        .iter()
        .zip(h_next)
        .zip(sys.m_mu())
        .map(|((a, b), m)| 0.5 * (a + b) * m * b)
        .sum();
    (we, wh)
}

/// Collocated energy `⟨e_m, e_m⟩_ε + ⟨h_m, h_m⟩_μ` with averaged `h_m`.
/// Positive definite for any `dt`.
pub fn averaged_energy(sys: &DiscreteSystem, e_m: &[f64], h_prev: &[f64], h_next: &[f64]) -> f64 {
    let we: f64 = e_m.iter().zip(sys.m_eps()).map(|(e, m)| e * m * e).sum();
    let wh: f64 = h_prev
        .iter()
        .zip(h_next)
        .zip(sys.m_mu())
        .map(|((a, b), m)| {
            let h = 0.5 * (a + b);
            h * m * h
        })
        .sum();
    we + wh
}

/// What [`integrate`] records along the way.
#[derive(Debug, Clone, Default)]
pub struct Recording {
    pub probes: Vec<Probe>,
    /// Record the invariant staggered energy.
    pub staggered_energy: bool,
    /// Record the collocated (averaged) energy.
    pub averaged_energy: bool,
}

/// Output of [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One trace per requested probe; electric probes at integer steps
    /// (including the start), magnetic probes at half steps.
    pub probes: Vec<ProbeTrace>,
    /// `(t_m, W_e + W_h)` for the staggered energy.
    pub staggered_energy: Vec<(f64, f64)>,
    /// `(t_m, E)` for the collocated energy.
    pub averaged_energy: Vec<(f64, f64)>,
    pub final_state: FieldState,
}

/// Runs `n_steps` steps from `state`, recording probes and energies.
pub fn integrate(
    sys: &DiscreteSystem,
    mut state: FieldState,
    n_steps: usize,
    forcing: Forcing,
    recording: &Recording,
    ledger: &mut CostLedger,
) -> Result<Trajectory> {
    let mut stepper = Stepper::new(sys, forcing);
    let mut traces: Vec<ProbeTrace> = recording.probes.iter().map(|p| ProbeTrace::new(*p)).collect();
    let sample_e = |traces: &mut Vec<ProbeTrace>, st: &FieldState| {
        for tr in traces.iter_mut().filter(|t| t.probe.field == Field::E) {
            tr.push(st.time_e(), st.e[tr.probe.dof]);
        }
    };
    let sample_h = |traces: &mut Vec<ProbeTrace>, st: &FieldState| {
        for tr in traces.iter_mut().filter(|t| t.probe.field == Field::H) {
            tr.push(st.time_h(), st.h[tr.probe.dof]);
        }
    };
    sample_e(&mut traces, &state);

    let want_energy = recording.staggered_energy || recording.averaged_energy;
    let mut staggered = Vec::new();
    let mut averaged = Vec::new();
    // (e_m, h_{m-1/2}) of the previous step, needed one step later.
    let mut lagged: Option<(Vec<f64>, Vec<f64>)> = None;

    for _ in 0..n_steps {
        sample_h(&mut traces, &state);
        let before = want_energy.then(|| (state.e.clone(), state.h.clone()));
        stepper.step(&mut state, ledger)?;
        sample_e(&mut traces, &state);
        if let Some((e_prev_step, h_half)) = before {
            // Now: e_m = e_prev_step, h_{m+1/2} = h_half, e_{m+1} = state.e.
            if let Some((e_m, h_minus)) = lagged.take() {
                debug_assert_eq!(e_m, e_prev_step);
                let t = state.time_e() - state.dt;
                if recording.staggered_energy {
                    let (we, wh) = energy(sys, &e_m, &state.e, &h_minus, &h_half);
                    staggered.push((t, we + wh));
                }
                if recording.averaged_energy {
                    averaged.push((t, averaged_energy(sys, &e_m, &h_minus, &h_half)));
                }
            }
            lagged = Some((state.e.clone(), h_half));
        }
    }

    Ok(Trajectory {
        probes: traces,
        staggered_energy: staggered,
        averaged_energy: averaged,
        final_state: state,
    })
}

/// Runs `n_steps` steps without recording anything.
pub fn advance(
    sys: &DiscreteSystem,
    state: &mut FieldState,
    n_steps: usize,
    forcing: Forcing,
    ledger: &mut CostLedger,
) -> Result<()> {
    let mut stepper = Stepper::new(sys, forcing);
    for _ in 0..n_steps {
        stepper.step(state, ledger)?;
    }
    Ok(())
}

/// `∥x∥²` weighted by a diagonal, e.g. `⟨e, e⟩_ε`.
pub fn weighted_norm_sq(x: &[f64], weight: &[f64]) -> f64 {
    x.iter().zip(weight).map(|(v, w)| v * w * v).sum()
}
