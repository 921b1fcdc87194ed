//! Experiment configuration (TOML).
//!
//! All physical quantities are SI: metres, seconds, amperes, hertz.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which pipeline an experiment runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    /// One run; writes probe traces, the energy trace and the ledger.
    Run,
    /// Energy of the reconstructed fields over time.
    Energy,
    /// Probe spectra of a reference run, serial Leapfrog and ParaExp.
    Spectrum,
    /// Cost over a sweep of mesh sizes and step counts.
    CostUniform,
    /// Cost ratio over a sweep of single-cell refinements.
    CostNonuniform,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub grid: GridSpec,
    #[serde(default)]
    pub materials: MaterialSpec,
    pub source: SourceSpec,
    pub time: TimeSpec,
    #[serde(default)]
    pub method: MethodSpec,
    #[serde(default)]
    pub probes: Vec<ProbeSpec>,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spectrum: Option<SpectrumSpec>,
}

/// Box domain `[0, lengths]` with `counts` grid points per axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub counts: [usize; 3],
    pub lengths: [f64; 3],
    /// Shrink the central x- and y-spacing by this factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MaterialSpec {
    #[serde(default = "one")]
    pub eps_r: f64,
    #[serde(default = "one")]
    pub mu_r: f64,
}

impl Default for MaterialSpec {
    fn default() -> Self {
        Self { eps_r: 1.0, mu_r: 1.0 }
    }
}

/// Line current through the grid centre along z.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceSpec {
    Gaussian { i_max: f64, sigma_t: f64 },
    Sine { i_max: f64, frequency: f64 },
    None,
}

/// Interval `(t0, t_end]` and step; `dt` wins over `cfl_fraction`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default)]
    pub t0: f64,
    pub t_end: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dt: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_fraction: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MethodKind {
    Leapfrog,
    Paraexp,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExpmKind {
    Leja,
    Taylor,
    Krylov,
}

/// A fixed tolerance or `"auto"` for the Leapfrog-balanced choice.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ToleranceSpec {
    Value(f64),
    Keyword(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MethodSpec {
    #[serde(default = "default_kind")]
    pub kind: MethodKind,
    #[serde(default = "default_p")]
    pub p: usize,
    #[serde(default = "default_expm")]
    pub expm: ExpmKind,
    #[serde(default = "default_tolerance")]
    pub tolerance: ToleranceSpec,
    /// Leapfrog error constant used by `tolerance = "auto"`.
    #[serde(default = "one")]
    pub beta: f64,
}

impl Default for MethodSpec {
    fn default() -> Self {
        Self {
            kind: default_kind(),
            p: default_p(),
            expm: default_expm(),
            tolerance: default_tolerance(),
            beta: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FieldKind {
    E,
    H,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AxisKind {
    X,
    Y,
    Z,
}

/// Field component at the grid point nearest to `position`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub position: [f64; 3],
    pub field: FieldKind,
    pub axis: AxisKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    /// Falls back to `PARAEXP_OUTPUT_DIR`, then the working directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dir: Option<PathBuf>,
    /// Energy sample stride in steps.
    #[serde(default = "one_usize")]
    pub energy_stride: usize,
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self {
            dir: None,
            energy_stride: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Grid points along x and y (`cost-uniform`).
    #[serde(default)]
    pub nx: Vec<usize>,
    /// Step counts over the interval (`cost-uniform`).
    #[serde(default)]
    pub n_t: Vec<usize>,
    /// Refinement factors (`cost-nonuniform`).
    #[serde(default)]
    pub k: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpectrumSpec {
    /// Grid of the reference Leapfrog run.
    pub reference_counts: [usize; 3],
    #[serde(default)]
    pub hann: bool,
}

fn one() -> f64 {
    1.0
}

fn one_usize() -> usize {
    1
}

fn default_kind() -> MethodKind {
    MethodKind::Paraexp
}

fn default_p() -> usize {
    6
}

fn default_expm() -> ExpmKind {
    ExpmKind::Leja
}

fn default_tolerance() -> ToleranceSpec {
    ToleranceSpec::Value(1e-2)
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, CliError> {
        let cfg: Self = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))
    }

    /// Applies `path.key=value` overrides; values are parsed as TOML.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self, CliError> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).map_err(|e| CliError::Config(e.to_string()))?;
        for item in overrides {
            let (path, raw) = item
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("override `{item}` is not path.key=value")))?;
            let value = parse_value(raw.trim());
            set_path(&mut doc, path.trim(), value)?;
        }
        let cfg: Self = doc
            .try_into()
            .map_err(|e: toml::de::Error| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |msg: String| Err(CliError::Config(msg));
        if self.grid.counts.iter().any(|&n| n < 2) {
            return bad(format!("grid.counts must be ≥ 2 per axis, got {:?}", self.grid.counts));
        }
        if self.grid.lengths.iter().any(|&l| !(l > 0.0) || !l.is_finite()) {
            return bad(format!("grid.lengths must be positive, got {:?}", self.grid.lengths));
        }
        if let Some(k) = self.grid.refine {
            if !(k >= 1.0) || !k.is_finite() {
                return bad(format!("grid.refine must be ≥ 1, got {k}"));
            }
        }
        if !(self.materials.eps_r > 0.0) || !(self.materials.mu_r > 0.0) {
            return bad("materials.eps_r and materials.mu_r must be positive".into());
        }
        match self.source {
            SourceSpec::Gaussian { i_max, sigma_t } if !i_max.is_finite() || !(sigma_t > 0.0) => {
                return bad("source needs finite i_max and sigma_t > 0".into());
            }
            SourceSpec::Sine { i_max, frequency } if !i_max.is_finite() || !(frequency > 0.0) => {
                return bad("source needs finite i_max and frequency > 0".into());
            }
            _ => {}
        }
        if !(self.time.t_end > self.time.t0) {
            return bad(format!(
                "time.t_end ({}) must exceed time.t0 ({})",
                self.time.t_end, self.time.t0
            ));
        }
        if let Some(dt) = self.time.dt {
            if !(dt > 0.0) {
                return bad(format!("time.dt must be positive, got {dt}"));
            }
        }
        if let Some(f) = self.time.cfl_fraction {
            if !(f > 0.0) {
                return bad(format!("time.cfl_fraction must be positive, got {f}"));
            }
        }
        if self.method.p == 0 {
            return bad("method.p must be at least 1".into());
        }
        if let ToleranceSpec::Keyword(k) = &self.method.tolerance {
            if k != "auto" {
                return bad(format!("method.tolerance must be a number or \"auto\", got \"{k}\""));
            }
        }
        if let ToleranceSpec::Value(v) = self.method.tolerance {
            if !(v > 0.0 && v < 1.0) {
                return bad(format!("method.tolerance must lie in (0, 1), got {v}"));
            }
        }
        if !(self.method.beta > 0.0) {
            return bad("method.beta must be positive".into());
        }
        if self.output.energy_stride == 0 {
            return bad("output.energy_stride must be positive".into());
        }
        for p in &self.probes {
            for (x, l) in p.position.iter().zip(self.grid.lengths) {
                if !(*x >= 0.0 && *x <= l) {
                    return bad(format!("probe position {:?} lies outside the domain", p.position));
                }
            }
        }
        match self.experiment {
            Experiment::CostUniform => {
                let s = self.sweep.as_ref();
                if s.is_none_or(|s| s.nx.is_empty() || s.n_t.is_empty()) {
                    return bad("cost-uniform needs sweep.nx and sweep.n_t".into());
                }
            }
            Experiment::CostNonuniform => {
                if self.sweep.as_ref().is_none_or(|s| s.k.is_empty()) {
                    return bad("cost-nonuniform needs sweep.k".into());
                }
            }
            Experiment::Spectrum => {
                if self.probes.is_empty() || self.spectrum.is_none() {
                    return bad("spectrum needs at least one probe and a [spectrum] table".into());
                }
            }
            Experiment::Run | Experiment::Energy => {}
        }
        Ok(())
    }
}

fn parse_value(raw: &str) -> toml::Value {
    // Parse as a TOML value via a one-key document; bare words become strings.
    let doc = format!("v = {raw}");
    match doc.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").unwrap_or_else(|| toml::Value::String(raw.into())),
        Err(_) => toml::Value::String(raw.into()),
    }
}

fn set_path(doc: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), CliError> {
    let mut cur = doc;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        let table = cur
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("`{path}`: `{key}` is not inside a table")))?;
        if i + 1 == keys.len() {
            table.insert((*key).to_string(), value);
            return Ok(());
        }
        cur = table
            .entry((*key).to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(CliError::Config("empty override path".into()))
}
