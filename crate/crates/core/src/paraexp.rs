//! ParaExp: time-parallel integration by superposition.
//!
//! The interval is split into `p` pieces. Worker `j` integrates the forced
//! problem on its piece from zero data with Leapfrog (the particular
//! solution `v_j`), then propagates the end state `v_j(T_j)` as a source-free
//! (homogeneous) track over the rest of the interval. The last worker also
//! carries the track of the initial value. The field at `t ∈ (T_{j-1}, T_j]`
//! is `v_j(t)` plus the sum of all tracks started at or before `T_{j-1}`.
//!
//! Tracks live in normalized variables `u = [M_μ^{1/2} h; M_ε^{1/2} e]` and
//! are advanced with the exponential action of the skew operator `A`.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;

use crate::diagnostics::{effective_cost, Category, CostLedger, Field, Probe, ProbeTrace, StaggeredSample};
use crate::expm::{
    estimate_norm, expm_action, optimal_tolerance, select_parameters, ExpmMethod, ExpmPlan, NormEstimate,
};
use crate::leapfrog::{FieldState, Forcing, Stepper};
use crate::system::DiscreteSystem;
use crate::{Error, Result};

/// Uniform split of `(t0, t_end]` into `p` intervals of whole steps.
#[derive(Debug, Clone, PartialEq)]
pub struct Partition {
    t0: f64,
    t_end: f64,
    dt: f64,
    steps: Vec<usize>,
}

impl Partition {
    pub fn p(&self) -> usize {
        self.steps.len()
    }

    /// Snapped step size `(t_end - t0) / n_t`.
    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t0(&self) -> f64 {
        self.t0
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    /// Steps per interval.
    pub fn steps(&self) -> &[usize] {
        &self.steps
    }

    /// Total number of steps `n_t`.
    pub fn total_steps(&self) -> usize {
        self.steps.iter().sum()
    }

    /// Cumulative step index of each boundary, `0 = S_0 < … < S_p = n_t`.
    pub fn boundary_steps(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.p() + 1);
        let mut s = 0;
        out.push(0);
        for n in &self.steps {
            s += n;
            out.push(s);
        }
        out
    }

    /// Boundary times `T_0 < … < T_p`.
    pub fn boundaries(&self) -> Vec<f64> {
        let n = self.total_steps();
        self.boundary_steps()
            .into_iter()
            .map(|s| {
                if s == n {
                    self.t_end
                } else {
                    self.t0 + s as f64 * self.dt
                }
            })
            .collect()
    }

    /// Interval (0-based) owning half-step index `k`, i.e. time `t0 + k·dt/2`.
    fn interval_of(&self, k: usize, bounds: &[usize]) -> usize {
        if k == 0 {
            return 0;
        }
        // First j with k ≤ 2·S_{j+1}.
        bounds[1..].partition_point(|&s| 2 * s < k)
    }
}

/// Splits `(t0, t_end]` into `p` intervals.
///
/// The step is snapped to `dt' = (t_end - t0)/n_t` with `n_t = ceil((t_end - t0)/dt)`
/// (a relative slack of `1e-9` absorbs rounding of exact divisors). Each
/// interval gets `⌊n_t/p⌋` steps and the last one also takes the remainder.
pub fn make_partition(t0: f64, t_end: f64, p: usize, dt: f64) -> Result<Partition> {
    if p == 0 {
        return Err(Error::InvalidParameter("need at least one interval".into()));
    }
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidParameter(format!("time step must be positive, got {dt}")));
    }
    if !(t_end > t0) || !t0.is_finite() || !t_end.is_finite() {
        return Err(Error::InvalidParameter(format!("empty interval ({t0}, {t_end}]")));
    }
    let ratio = (t_end - t0) / dt;
    let n = (ratio * (1.0 - 1e-9)).ceil().max(1.0) as usize;
    if n < p {
        return Err(Error::PartitionTooFine { steps: n, p });
    }
    let base = n / p;
    let mut steps = vec![base; p];
    steps[p - 1] += n - base * p;
    Ok(Partition {
        t0,
        t_end,
        dt: (t_end - t0) / n as f64,
        steps,
    })
}

/// How the exponential tolerance is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Tolerance {
    Fixed(f64),
    /// `β·Δt²/∥A∥₂`, clamped to the tolerance floor.
    Optimal {
        beta: f64,
    },
}

/// How homogeneous tracks are advanced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Propagator {
    Exponential {
        method: ExpmMethod,
        tolerance: Tolerance,
    },
    /// Source-free Leapfrog on the staggered seed; reproduces serial
    /// Leapfrog up to rounding.
    Leapfrog,
}

/// What a run records.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOptions {
    pub propagator: Propagator,
    /// Probes sampled at every integer (E) or half (H) step.
    pub probes: Vec<Probe>,
    /// Full-field snapshots every `stride` steps (for energy traces).
    pub snapshot_stride: Option<usize>,
    /// Worker threads; `None` uses the global pool.
    pub threads: Option<usize>,
}

impl RunOptions {
    pub fn new(propagator: Propagator) -> Self {
        Self {
            propagator,
            probes: Vec::new(),
            snapshot_stride: None,
            threads: None,
        }
    }
}

/// Initial fields `(e(t0), h(t0))` in physical variables.
#[derive(Debug, Clone, PartialEq)]
pub struct InitialValue {
    pub e: Vec<f64>,
    pub h: Vec<f64>,
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub partition: Partition,
    pub probes: Vec<ProbeTrace>,
    /// Reconstructed `(e_m, h_{m-1/2}, h_{m+1/2})` at snapshot steps.
    pub snapshots: Vec<StaggeredSample>,
    /// Per-worker ledgers, in interval order.
    pub worker_ledgers: Vec<CostLedger>,
    /// Coordinator work (norm estimation).
    pub coordinator_ledger: CostLedger,
    pub norm: Option<NormEstimate>,
    pub tolerance: Option<f64>,
}

impl RunOutput {
    /// All ledgers merged in interval order.
    pub fn total_ledger(&self) -> CostLedger {
        let mut total = self.coordinator_ledger;
        for l in &self.worker_ledgers {
            total += l;
        }
        total
    }

    /// Largest per-worker exponential cost.
    pub fn max_n_leja(&self) -> u64 {
        self.worker_ledgers.iter().map(|l| l.n_leja()).max().unwrap_or(0)
    }

    /// Per-processor cost `2·n_t/p + n_Leja + 2`.
    pub fn effective_cost(&self) -> f64 {
        effective_cost(self.partition.total_steps(), self.partition.p(), self.max_n_leja())
    }
}

/// Samples needed by reconstruction, keyed by half-step index.
struct Needs {
    /// Probes need every half-step.
    dense: bool,
    /// Half-step indices with a full-field snapshot.
    full: BTreeSet<usize>,
}

impl Needs {
    fn contains(&self, k: usize) -> bool {
        self.dense || self.full.contains(&k)
    }
}

/// Probe values and full fields recorded by a particular solve or a track.
#[derive(Default)]
struct Samples {
    /// `[probe][k - k_first]`.
    probe: Vec<Vec<f64>>,
    k_first: usize,
    full: BTreeMap<usize, Vec<f64>>,
}

impl Samples {
    fn new(n_probes: usize, k_first: usize) -> Self {
        Self {
            probe: vec![Vec::new(); n_probes],
            k_first,
            full: BTreeMap::new(),
        }
    }

    fn probe_value(&self, i: usize, k: usize) -> Result<f64> {
        k.checked_sub(self.k_first)
            .and_then(|off| self.probe[i].get(off).copied())
            .ok_or_else(|| Error::Invariant(format!("missing probe sample at half-step {k}")))
    }

    fn full_value(&self, k: usize) -> Result<&[f64]> {
        self.full
            .get(&k)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::Invariant(format!("missing field sample at half-step {k}")))
    }
}

struct WorkerOutput {
    ledger: CostLedger,
    particular: Samples,
    /// Track started at `T_{j}` (or the initial-value track for the last worker).
    track: Samples,
    track_index: usize,
}

/// Runs ParaExp over `partition`.
pub fn run(
    sys: &DiscreteSystem,
    initial: Option<&InitialValue>,
    partition: &Partition,
    options: &RunOptions,
) -> Result<RunOutput> {
    let n = sys.n_dof();
    if let Some(u0) = initial {
        for (v, ctx) in [(&u0.e, "initial e"), (&u0.h, "initial h")] {
            if v.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    actual: v.len(),
                    context: ctx,
                });
            }
        }
    }
    for p in &options.probes {
        if p.dof >= n {
            return Err(Error::InvalidParameter(format!("probe DOF {} out of range", p.dof)));
        }
    }
    let p = partition.p();
    let n_t = partition.total_steps();
    let bounds = partition.boundary_steps();

    let mut full = BTreeSet::new();
    if let Some(stride) = options.snapshot_stride {
        if stride == 0 {
            return Err(Error::InvalidParameter("snapshot stride must be positive".into()));
        }
        for m in (stride..n_t).step_by(stride) {
            full.extend([2 * m - 1, 2 * m, 2 * m + 1]);
        }
    }
    let needs = Needs {
        dense: !options.probes.is_empty(),
        full,
    };

    let mut coordinator = CostLedger::new();
    let (norm, tolerance) = match options.propagator {
        Propagator::Exponential { tolerance, .. } => {
            let est = estimate_norm(sys.a(), &mut coordinator);
            if est.degraded {
                log::warn!(
                    "spectral norm estimate is degraded; using the row-sum bound {}",
                    est.value
                );
            }
            let eps = match tolerance {
                Tolerance::Fixed(e) => e,
                Tolerance::Optimal { beta } => optimal_tolerance(partition.dt(), beta, est.value),
            };
            (Some(est), Some(eps))
        }
        Propagator::Leapfrog => (None, None),
    };

    let ctx = WorkerContext {
        sys,
        initial,
        partition,
        bounds: &bounds,
        options,
        needs: &needs,
        spectral_bound: norm.map(|e| e.value).unwrap_or(0.0),
        tolerance: tolerance.unwrap_or(0.0),
    };
    let work = |j: usize| {
        ctx.worker(j).map_err(|e| Error::Interval {
            interval: j + 1,
            source: Box::new(e),
        })
    };
    let results: Vec<Result<WorkerOutput>> = match options.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?
            .install(|| (0..p).into_par_iter().map(work).collect()),
        None => (0..p).into_par_iter().map(work).collect(),
    };
    let mut workers = Vec::with_capacity(p);
    for r in results {
        workers.push(r?);
    }

    // Tracks by index (track i starts at T_{i-1}, 0-based i).
    let mut tracks: Vec<Option<&Samples>> = vec![None; p];
    for w in &workers {
        tracks[w.track_index] = Some(&w.track);
    }
    let tracks: Vec<&Samples> = tracks
        .into_iter()
        .map(|t| t.ok_or_else(|| Error::Invariant("a homogeneous track is missing".into())))
        .collect::<Result<_>>()?;

    let normalized = matches!(options.propagator, Propagator::Exponential { .. });
    let recon = Reconstructor {
        sys,
        partition,
        bounds: &bounds,
        workers: &workers,
        tracks: &tracks,
        normalized,
    };

    let mut traces = Vec::with_capacity(options.probes.len());
    for (i, probe) in options.probes.iter().enumerate() {
        let mut trace = ProbeTrace::new(*probe);
        let (first, step) = match probe.field {
            Field::E => (0, 2),
            Field::H => (1, 2),
        };
        for k in (first..2 * n_t + first).step_by(step) {
            if probe.field == Field::E && k > 2 * n_t {
                break;
            }
            trace.push(recon.time(k), recon.probe(i, *probe, k)?);
        }
        if probe.field == Field::E {
            // Include the final integer step.
            let k = 2 * n_t;
            if trace.times().last().copied() != Some(recon.time(k)) {
                trace.push(recon.time(k), recon.probe(i, *probe, k)?);
            }
        }
        traces.push(trace);
    }

    let mut snapshots = Vec::new();
    if let Some(stride) = options.snapshot_stride {
        for m in (stride..n_t).step_by(stride) {
            let e = recon.full(Field::E, 2 * m)?;
            let h_prev = recon.full(Field::H, 2 * m - 1)?;
            let h_next = recon.full(Field::H, 2 * m + 1)?;
            snapshots.push(StaggeredSample {
                t: recon.time(2 * m),
                e,
                e_next: None,
                h_prev,
                h_next,
            });
        }
    }

    let mut worker_ledgers: Vec<CostLedger> = workers.iter().map(|w| w.ledger).collect();
    // One transform per interval for mapping the track sum back to physical variables.
    if normalized {
        for l in &mut worker_ledgers {
            l.record(Category::Transform, 1);
        }
    }

    Ok(RunOutput {
        partition: partition.clone(),
        probes: traces,
        snapshots,
        worker_ledgers,
        coordinator_ledger: coordinator,
        norm,
        tolerance,
    })
}

struct WorkerContext<'a> {
    sys: &'a DiscreteSystem,
    initial: Option<&'a InitialValue>,
    partition: &'a Partition,
    bounds: &'a [usize],
    options: &'a RunOptions,
    needs: &'a Needs,
    spectral_bound: f64,
    tolerance: f64,
}

impl WorkerContext<'_> {
    fn half_time(&self, k: usize) -> f64 {
        self.partition.t0 + k as f64 * 0.5 * self.partition.dt
    }

    fn worker(&self, j: usize) -> Result<WorkerOutput> {
        let sys = self.sys;
        let p = self.partition.p();
        let dt = self.partition.dt;
        let n = sys.n_dof();
        let mut ledger = CostLedger::new();
        let k0 = 2 * self.bounds[j];
        let k1 = 2 * self.bounds[j + 1];

        // Particular solution on (T_j, T_{j+1}] from zero data.
        let mut particular = Samples::new(self.options.probes.len(), k0);
        let mut state = FieldState::zeros(n, self.half_time(k0), dt);
        let mut stepper = Stepper::new(sys, Forcing::Source);
        let mut h_before = vec![0.0; n];
        let steps = self.partition.steps[j];
        for m in 0..=steps {
            let k = k0 + 2 * m;
            self.record(&mut particular, k, Field::E, &state.e);
            if m == steps {
                break;
            }
            self.record(&mut particular, k + 1, Field::H, &state.h);
            if m + 1 == steps {
                h_before.copy_from_slice(&state.h);
            }
            stepper.step(&mut state, &mut ledger)?;
        }

        let (track_index, track) = if j + 1 < p {
            (j + 1, self.track_from_particular(k1, &state, &h_before, &mut ledger)?)
        } else {
            (0, self.track_from_initial(&mut ledger)?)
        };
        Ok(WorkerOutput {
            ledger,
            particular,
            track,
            track_index,
        })
    }

    /// Records a particular or Leapfrog-track sample when reconstruction needs it.
    fn record(&self, samples: &mut Samples, k: usize, field: Field, values: &[f64]) {
        if k < samples.k_first {
            return;
        }
        for (i, probe) in self.options.probes.iter().enumerate() {
            let off = k - samples.k_first;
            let slot = &mut samples.probe[i];
            if slot.len() <= off {
                slot.resize(off + 1, f64::NAN);
            }
            if probe.field == field {
                slot[off] = values[probe.dof];
            }
        }
        if self.needs.full.contains(&k) {
            samples.full.insert(k, values.to_vec());
        }
    }

    fn track_from_particular(
        &self,
        k_start: usize,
        end: &FieldState,
        h_before: &[f64],
        ledger: &mut CostLedger,
    ) -> Result<Samples> {
        match self.options.propagator {
            Propagator::Leapfrog => self.leapfrog_track(k_start, end.clone(), ledger),
            Propagator::Exponential { method, .. } => {
                let h_mid: Vec<f64> = h_before.iter().zip(&end.h).map(|(a, b)| 0.5 * (a + b)).collect();
                let u = self.sys.transform_to_normalized(&h_mid, &end.e, ledger);
                self.exponential_track(method, k_start, u, ledger)
            }
        }
    }

    fn track_from_initial(&self, ledger: &mut CostLedger) -> Result<Samples> {
        let n = self.sys.n_dof();
        let zero = InitialValue {
            e: vec![0.0; n],
            h: vec![0.0; n],
        };
        let u0 = self.initial.unwrap_or(&zero);
        match self.options.propagator {
            Propagator::Leapfrog => {
                let state = FieldState::from_collocated(
                    self.sys,
                    u0.e.clone(),
                    u0.h.clone(),
                    self.partition.t0,
                    self.partition.dt,
                    ledger,
                );
                self.leapfrog_track(0, state, ledger)
            }
            Propagator::Exponential { method, .. } => {
                let u = self.sys.transform_to_normalized(&u0.h, &u0.e, ledger);
                self.exponential_track(method, 0, u, ledger)
            }
        }
    }

    fn leapfrog_track(&self, k_start: usize, mut state: FieldState, ledger: &mut CostLedger) -> Result<Samples> {
        let k_end = 2 * self.partition.total_steps();
        let mut out = Samples::new(self.options.probes.len(), k_start);
        state.step = 0;
        state.t0 = self.half_time(k_start);
        let mut stepper = Stepper::new(self.sys, Forcing::Free);
        let mut k = k_start;
        loop {
            self.record(&mut out, k, Field::E, &state.e);
            if k >= k_end {
                break;
            }
            self.record(&mut out, k + 1, Field::H, &state.h);
            stepper.step(&mut state, ledger)?;
            k += 2;
        }
        Ok(out)
    }

    fn exponential_track(
        &self,
        method: ExpmMethod,
        k_start: usize,
        mut u: Vec<f64>,
        ledger: &mut CostLedger,
    ) -> Result<Samples> {
        let n = self.sys.n_dof();
        let k_end = 2 * self.partition.total_steps();
        let half = 0.5 * self.partition.dt;
        let mut out = Samples::new(self.options.probes.len(), k_start);
        let mut stops: Vec<usize> = if self.needs.dense {
            (k_start..=k_end).collect()
        } else {
            self.needs.full.range(k_start..=k_end).copied().collect()
        };
        if stops.is_empty() {
            // Nothing to sample: one action over the whole remaining interval.
            stops = vec![k_start, k_end];
        } else if stops[0] != k_start {
            stops.insert(0, k_start);
        }

        let mut plans: HashMap<usize, ExpmPlan> = HashMap::new();
        let mut k = k_start;
        for &target in &stops {
            if target > k {
                let gap = target - k;
                let t = gap as f64 * half;
                let plan = match plans.get(&gap) {
                    Some(p) => *p,
                    None => {
                        let p = select_parameters(method, t, self.spectral_bound, self.tolerance)?;
                        plans.insert(gap, p);
                        p
                    }
                };
                u = expm_action(self.sys.a(), &u, t, &plan, ledger)?;
                k = target;
            }
            if self.needs.contains(k) {
                let field = if k.is_multiple_of(2) { Field::E } else { Field::H };
                let part = match field {
                    Field::E => &u[n..],
                    Field::H => &u[..n],
                };
                self.record(&mut out, k, field, part);
            }
        }
        Ok(out)
    }
}

struct Reconstructor<'a> {
    sys: &'a DiscreteSystem,
    partition: &'a Partition,
    bounds: &'a [usize],
    workers: &'a [WorkerOutput],
    tracks: &'a [&'a Samples],
    normalized: bool,
}

impl Reconstructor<'_> {
    fn time(&self, k: usize) -> f64 {
        let m = k / 2;
        if k.is_multiple_of(2) {
            self.partition.t0 + m as f64 * self.partition.dt
        } else {
            self.partition.t0 + (m as f64 + 0.5) * self.partition.dt
        }
    }

    fn scale(&self, field: Field, dof: usize) -> f64 {
        if !self.normalized {
            return 1.0;
        }
        match field {
            Field::E => 1.0 / self.sys.sqrt_eps()[dof],
            Field::H => 1.0 / self.sys.sqrt_mu()[dof],
        }
    }

    /// `v_j(t_k) + M^{-1/2}·Σ_{i≤j} w_i(t_k)` for one probe.
    fn probe(&self, i: usize, probe: Probe, k: usize) -> Result<f64> {
        let j = self.partition.interval_of(k, self.bounds);
        let base = self.workers[j].particular.probe_value(i, k)?;
        let mut sum = 0.0;
        for track in &self.tracks[..=j] {
            sum += track.probe_value(i, k)?;
        }
        Ok(base + self.scale(probe.field, probe.dof) * sum)
    }

    fn full(&self, field: Field, k: usize) -> Result<Vec<f64>> {
        let j = self.partition.interval_of(k, self.bounds);
        let mut sum = vec![0.0; self.sys.n_dof()];
        for track in &self.tracks[..=j] {
            for (s, v) in sum.iter_mut().zip(track.full_value(k)?) {
                *s += v;
            }
        }
        let base = self.workers[j].particular.full_value(k)?;
        Ok(base
            .iter()
            .zip(&sum)
            .enumerate()
            .map(|(d, (b, s))| b + self.scale(field, d) * s)
            .collect())
    }
}
