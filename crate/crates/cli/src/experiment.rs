//! Experiment pipelines behind the CLI verbs.

use std::path::{Path, PathBuf};

use paraexp::diagnostics::{energy_trace, spectrum, CostLedger, EnergyForm, Field, Probe, ProbeTrace};
use paraexp::expm::ExpmMethod;
use paraexp::fitgrid::{Axis, Materials, StaggeredGrid};
use paraexp::leapfrog::{cfl_timestep, integrate, FieldState, Forcing, Recording};
use paraexp::paraexp::{make_partition, run, Propagator, RunOptions, Tolerance};
use paraexp::system::{assemble, DiscreteSystem, SourceKind, SourceSignal};

use crate::config::{
    AxisKind, Experiment, ExperimentConfig, ExpmKind, FieldKind, MethodKind, SourceSpec, ToleranceSpec,
};
use crate::output::{write_csv, Cell};
use crate::CliError;

/// Energy growth after the excitation that counts as divergence.
pub const GROWTH_LIMIT: f64 = 10.0;

pub fn build_grid(cfg: &ExperimentConfig, counts: [usize; 3]) -> Result<StaggeredGrid, CliError> {
    let spacing = |axis: usize| vec![cfg.grid.lengths[axis] / (counts[axis] - 1) as f64; counts[axis] - 1];
    let (mut dx, mut dy, dz) = (spacing(0), spacing(1), spacing(2));
    if let Some(k) = cfg.grid.refine {
        let (cx, cy) = (counts[0] / 2, counts[1] / 2);
        if cx < dx.len() {
            dx[cx] /= k;
        }
        if cy < dy.len() {
            dy[cy] /= k;
        }
    }
    Ok(StaggeredGrid::new(dx, dy, dz, [0.0; 3])?)
}

pub fn build_system(cfg: &ExperimentConfig, counts: [usize; 3]) -> Result<DiscreteSystem, CliError> {
    let grid = build_grid(cfg, counts)?;
    let materials = Materials::uniform(&grid, cfg.materials.eps_r, cfg.materials.mu_r);
    let kind = match cfg.source {
        SourceSpec::Gaussian { i_max, sigma_t } => SourceKind::GaussianPulse { i_max, sigma_t },
        SourceSpec::Sine { i_max, frequency } => SourceKind::Sine { i_max, frequency },
        SourceSpec::None => SourceKind::Zero,
    };
    let source = SourceSignal::center_line(&grid, kind);
    Ok(assemble(&grid, &materials, source)?)
}

/// Requested step before snapping to the interval.
pub fn requested_dt(cfg: &ExperimentConfig, sys: &DiscreteSystem) -> f64 {
    cfg.time
        .dt
        .unwrap_or_else(|| cfg.time.cfl_fraction.unwrap_or(1.0) * cfl_timestep(sys.grid(), sys.materials()))
}

/// Maps probe specs to DOFs of `grid`.
pub fn probes(cfg: &ExperimentConfig, grid: &StaggeredGrid) -> Vec<Probe> {
    cfg.probes
        .iter()
        .map(|p| {
            let (mut i, mut j, mut k) = grid.nearest_point(p.position);
            let axis = match p.axis {
                AxisKind::X => Axis::X,
                AxisKind::Y => Axis::Y,
                AxisKind::Z => Axis::Z,
            };
            // Edges start at the point; clamp to the last existing one.
            match axis {
                Axis::X => i = i.min(grid.nx() - 2),
                Axis::Y => j = j.min(grid.ny() - 2),
                Axis::Z => k = k.min(grid.nz() - 2),
            }
            let dof = grid.dof_index(axis, i, j, k);
            match p.field {
                FieldKind::E => Probe::e(dof),
                FieldKind::H => Probe::h(dof),
            }
        })
        .collect()
}

fn propagator(cfg: &ExperimentConfig) -> Propagator {
    let method = match cfg.method.expm {
        ExpmKind::Leja => ExpmMethod::Leja,
        ExpmKind::Taylor => ExpmMethod::Taylor,
        ExpmKind::Krylov => ExpmMethod::KrylovRef,
    };
    let tolerance = match cfg.method.tolerance {
        ToleranceSpec::Value(v) => Tolerance::Fixed(v),
        ToleranceSpec::Keyword(_) => Tolerance::Optimal { beta: cfg.method.beta },
    };
    Propagator::Exponential { method, tolerance }
}

/// Result of a single simulation.
#[derive(Debug, Clone)]
pub struct RunData {
    pub dt: f64,
    pub n_t: usize,
    pub traces: Vec<ProbeTrace>,
    /// `(t, E)` with `E = ⟨e,e⟩_ε + ⟨h,h⟩_μ` (averaged `h`).
    pub energy: Vec<(f64, f64)>,
    pub ledger: CostLedger,
    /// Largest per-worker exponential cost (0 for Leapfrog).
    pub n_leja: u64,
    /// Per-processor cost `2·n_t/p + n_Leja + 2` (ParaExp only).
    pub effective_cost: Option<f64>,
    pub tolerance: Option<f64>,
}

/// Runs the configured method on `counts` with step `dt` (snapped to the interval).
pub fn simulate(
    cfg: &ExperimentConfig,
    method: MethodKind,
    counts: [usize; 3],
    dt: Option<f64>,
    record: bool,
    threads: Option<usize>,
) -> Result<RunData, CliError> {
    let sys = build_system(cfg, counts)?;
    let dt = dt.unwrap_or_else(|| requested_dt(cfg, &sys));
    let limit = cfl_timestep(sys.grid(), sys.materials());
    let probes = if record { probes(cfg, sys.grid()) } else { Vec::new() };
    let stride = cfg.output.energy_stride;
    let data = match method {
        MethodKind::Leapfrog => {
            let part = make_partition(cfg.time.t0, cfg.time.t_end, 1, dt)?;
            let mut ledger = CostLedger::new();
            let state = FieldState::zeros(sys.n_dof(), cfg.time.t0, part.dt());
            let rec = Recording {
                probes,
                staggered_energy: false,
                averaged_energy: record,
            };
            let traj = integrate(&sys, state, part.total_steps(), Forcing::Source, &rec, &mut ledger)?;
            let energy = traj
                .averaged_energy
                .iter()
                .enumerate()
                .filter(|(i, _)| (i + 1) % stride == 0)
                .map(|(_, e)| *e)
                .collect();
            RunData {
                dt: part.dt(),
                n_t: part.total_steps(),
                traces: traj.probes,
                energy,
                ledger,
                n_leja: 0,
                effective_cost: None,
                tolerance: None,
            }
        }
        MethodKind::Paraexp => {
            let part = make_partition(cfg.time.t0, cfg.time.t_end, cfg.method.p, dt)?;
            let mut opts = RunOptions::new(propagator(cfg));
            opts.probes = probes;
            opts.snapshot_stride = record.then_some(stride);
            opts.threads = threads;
            let out = run(&sys, None, &part, &opts)?;
            let energy = energy_trace(&sys, &out.snapshots, EnergyForm::Averaged)?;
            RunData {
                dt: part.dt(),
                n_t: part.total_steps(),
                traces: out.probes.clone(),
                energy,
                ledger: out.total_ledger(),
                n_leja: out.max_n_leja(),
                effective_cost: Some(out.effective_cost()),
                tolerance: out.tolerance,
            }
        }
    };
    if data.dt > limit * (1.0 + 1e-12) {
        if let Some(growth) = energy_growth(cfg, &data.energy) {
            if growth > GROWTH_LIMIT {
                return Err(CliError::Diverged(format!(
                    "energy grew by a factor {growth:.3e} after the excitation (dt = {:.6e} s exceeds the CFL limit {:.6e} s)",
                    data.dt, limit
                )));
            }
        }
    }
    Ok(data)
}

/// Time after which the source current stays below `1e-6·i_max`.
fn quiet_time(cfg: &ExperimentConfig) -> Option<f64> {
    match cfg.source {
        SourceSpec::Gaussian { sigma_t, .. } => Some(sigma_t * (1.0 + (1e6f64.ln() / 4.0).sqrt())),
        SourceSpec::None => Some(cfg.time.t0),
        SourceSpec::Sine { .. } => None,
    }
}

/// `max E / E(t_quiet)` over the source-free part of the trace.
pub fn energy_growth(cfg: &ExperimentConfig, energy: &[(f64, f64)]) -> Option<f64> {
    let tq = quiet_time(cfg)?;
    let mut after = energy.iter().filter(|(t, _)| *t >= tq);
    let (_, e0) = *after.next()?;
    let peak = after.fold(e0, |m, (_, e)| m.max(*e));
    if !peak.is_finite() {
        return Some(f64::INFINITY);
    }
    (e0 > 0.0).then(|| peak / e0)
}

/// Spectra of the first electric probe for the reference, Leapfrog and ParaExp runs.
#[derive(Debug, Clone)]
pub struct SpectrumData {
    pub frequency: Vec<f64>,
    pub reference: Vec<f64>,
    pub leapfrog: Vec<f64>,
    pub paraexp: Vec<f64>,
    pub dt: f64,
}

pub fn spectra(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<SpectrumData, CliError> {
    let spec = cfg
        .spectrum
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [spectrum] table".into()))?;
    let coarse = build_system(cfg, cfg.grid.counts)?;
    let dt = make_partition(cfg.time.t0, cfg.time.t_end, 1, requested_dt(cfg, &coarse))?.dt();

    let lf = simulate(cfg, MethodKind::Leapfrog, cfg.grid.counts, Some(dt), true, threads)?;
    let pe = simulate(cfg, MethodKind::Paraexp, cfg.grid.counts, Some(dt), true, threads)?;

    let fine = build_system(cfg, spec.reference_counts)?;
    let ratio = (dt / cfl_timestep(fine.grid(), fine.materials()) * (1.0 - 1e-12))
        .ceil()
        .max(1.0) as usize;
    let rf = simulate(
        cfg,
        MethodKind::Leapfrog,
        spec.reference_counts,
        Some(dt / ratio as f64),
        true,
        threads,
    )?;

    let pick = |traces: &[ProbeTrace]| -> Result<ProbeTrace, CliError> {
        traces
            .iter()
            .find(|t| t.probe.field == Field::E)
            .cloned()
            .ok_or_else(|| CliError::Config("spectrum needs an electric probe".into()))
    };
    let reference = pick(&rf.traces)?.subsample(ratio);
    let s_ref = spectrum(&reference, spec.hann)?;
    let s_lf = spectrum(&pick(&lf.traces)?, spec.hann)?;
    let s_pe = spectrum(&pick(&pe.traces)?, spec.hann)?;
    if s_ref.len() != s_lf.len() || s_pe.len() != s_lf.len() {
        return Err(CliError::Numerical(paraexp::Error::Invariant(
            "spectra of the three runs have different lengths".into(),
        )));
    }
    Ok(SpectrumData {
        frequency: s_lf.iter().map(|x| x.0).collect(),
        reference: s_ref.iter().map(|x| x.1).collect(),
        leapfrog: s_lf.iter().map(|x| x.1).collect(),
        paraexp: s_pe.iter().map(|x| x.1).collect(),
        dt,
    })
}

/// One row of a cost sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostRow {
    pub nx: usize,
    pub k: f64,
    pub n_t: usize,
    pub smvp_leapfrog: u64,
    pub smvp_leja: u64,
}

impl CostRow {
    pub fn ratio(&self) -> f64 {
        self.smvp_leja as f64 / self.smvp_leapfrog as f64
    }
}

/// Leapfrog and exponential cost for every stable `(n_x, n_t)` pair.
pub fn cost_uniform(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<CostRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep]".into()))?;
    let mut rows = Vec::new();
    for &nx in &sweep.nx {
        let counts = [nx, nx, cfg.grid.counts[2]];
        let sys = build_system(cfg, counts)?;
        let limit = cfl_timestep(sys.grid(), sys.materials());
        for &n_t in &sweep.n_t {
            let dt = (cfg.time.t_end - cfg.time.t0) / n_t as f64;
            if dt > limit * (1.0 + 1e-12) {
                log::warn!("skipping nx = {nx}, n_t = {n_t}: dt = {dt:e} s exceeds the CFL limit {limit:e} s");
                continue;
            }
            let data = simulate(cfg, MethodKind::Paraexp, counts, Some(dt), false, threads)?;
            rows.push(CostRow {
                nx,
                k: cfg.grid.refine.unwrap_or(1.0),
                n_t: data.n_t,
                smvp_leapfrog: data.ledger.c_lf(),
                smvp_leja: data.n_leja,
            });
        }
    }
    Ok(rows)
}

/// Cost ratio for each refinement factor at the configured CFL fraction.
pub fn cost_nonuniform(cfg: &ExperimentConfig, threads: Option<usize>) -> Result<Vec<CostRow>, CliError> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| CliError::Config("missing [sweep]".into()))?;
    let mut rows = Vec::new();
    for &k in &sweep.k {
        let mut c = cfg.clone();
        c.grid.refine = Some(k);
        let data = simulate(&c, MethodKind::Paraexp, c.grid.counts, None, false, threads)?;
        rows.push(CostRow {
            nx: c.grid.counts[0],
            k,
            n_t: data.n_t,
            smvp_leapfrog: data.ledger.c_lf(),
            smvp_leja: data.n_leja,
        });
    }
    Ok(rows)
}

/// Output directory: config, then `PARAEXP_OUTPUT_DIR`, then `.`.
pub fn output_dir(cfg: &ExperimentConfig, cli: Option<&Path>) -> PathBuf {
    cli.map(Path::to_path_buf)
        .or_else(|| cfg.output.dir.clone())
        .or_else(|| std::env::var_os("PARAEXP_OUTPUT_DIR").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

fn probe_label(p: &Probe, grid: &StaggeredGrid) -> String {
    let (axis, i, j, k) = grid.dof_coords(p.dof);
    let f = match p.field {
        Field::E => "e",
        Field::H => "h",
    };
    let a = match axis {
        Axis::X => "x",
        Axis::Y => "y",
        Axis::Z => "z",
    };
    format!("{f}{a}_{i}_{j}_{k}")
}

fn write_traces(path: &Path, traces: &[&ProbeTrace], grid: &StaggeredGrid) -> Result<(), CliError> {
    let mut header = vec!["t".to_string()];
    header.extend(traces.iter().map(|t| probe_label(&t.probe, grid)));
    let rows = (0..traces[0].len()).map(|r| {
        let mut row = vec![Cell::Float(traces[0].times()[r])];
        row.extend(traces.iter().map(|t| Cell::Float(t.values()[r])));
        row
    });
    write_csv(path, &header, rows)
}

/// Runs `cfg` and writes its CSV artifacts into `dir`; returns the files written.
pub fn run_experiment(cfg: &ExperimentConfig, dir: &Path, threads: Option<usize>) -> Result<Vec<PathBuf>, CliError> {
    std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let mut files = Vec::new();
    match cfg.experiment {
        Experiment::Run | Experiment::Energy => {
            let data = simulate(cfg, cfg.method.kind, cfg.grid.counts, None, true, threads)?;
            let grid = build_grid(cfg, cfg.grid.counts)?;
            if cfg.experiment == Experiment::Run {
                for (field, name) in [(Field::E, "probes_e.csv"), (Field::H, "probes_h.csv")] {
                    let sel: Vec<&ProbeTrace> = data.traces.iter().filter(|t| t.probe.field == field).collect();
                    if !sel.is_empty() {
                        let path = dir.join(name);
                        write_traces(&path, &sel, &grid)?;
                        files.push(path);
                    }
                }
                let path = dir.join("ledger.csv");
                let mut rows: Vec<Vec<Cell>> = data
                    .ledger
                    .iter()
                    .map(|(c, n)| vec![Cell::Text(c.name().into()), Cell::Int(n)])
                    .collect();
                rows.push(vec![Cell::Text("n_leja_max".into()), Cell::Int(data.n_leja)]);
                if let Some(c) = data.effective_cost {
                    rows.push(vec![Cell::Text("effective_cost".into()), Cell::Float(c)]);
                }
                write_csv(&path, &["quantity".into(), "value".into()], rows.into_iter())?;
                files.push(path);
            }
            let path = dir.join("energy.csv");
            write_csv(
                &path,
                &["t".into(), "E".into()],
                data.energy.iter().map(|(t, e)| vec![Cell::Float(*t), Cell::Float(*e)]),
            )?;
            files.push(path);
        }
        Experiment::Spectrum => {
            let s = spectra(cfg, threads)?;
            let path = dir.join("spectrum.csv");
            let header: Vec<String> = ["f", "magnitude_ref", "magnitude_leapfrog", "magnitude_paraexp"]
                .into_iter()
                .map(String::from)
                .collect();
            let rows = (0..s.frequency.len()).map(|i| {
                vec![
                    Cell::Float(s.frequency[i]),
                    Cell::Float(s.reference[i]),
                    Cell::Float(s.leapfrog[i]),
                    Cell::Float(s.paraexp[i]),
                ]
            });
            write_csv(&path, &header, rows)?;
            files.push(path);
        }
        Experiment::CostUniform => {
            let rows = cost_uniform(cfg, threads)?;
            let path = dir.join("cost_uniform.csv");
            let header: Vec<String> = ["nx", "nt", "smvp_leapfrog", "smvp_leja"]
                .into_iter()
                .map(String::from)
                .collect();
            write_csv(
                &path,
                &header,
                rows.iter().map(|r| {
                    vec![
                        Cell::Int(r.nx as u64),
                        Cell::Int(r.n_t as u64),
                        Cell::Int(r.smvp_leapfrog),
                        Cell::Int(r.smvp_leja),
                    ]
                }),
            )?;
            files.push(path);
        }
        Experiment::CostNonuniform => {
            let rows = cost_nonuniform(cfg, threads)?;
            let path = dir.join("cost_nonuniform.csv");
            let header: Vec<String> = ["k", "nt", "smvp_leapfrog", "smvp_leja", "ratio"]
                .into_iter()
                .map(String::from)
                .collect();
            write_csv(
                &path,
                &header,
                rows.iter().map(|r| {
                    vec![
                        Cell::Float(r.k),
                        Cell::Int(r.n_t as u64),
                        Cell::Int(r.smvp_leapfrog),
                        Cell::Int(r.smvp_leja),
                        Cell::Float(r.ratio()),
                    ]
                }),
            )?;
            files.push(path);
        }
    }
    Ok(files)
}
