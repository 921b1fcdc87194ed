//! Built-in experiment configurations.

use crate::config::{
    AxisKind, Experiment, ExperimentConfig, FieldKind, GridSpec, MaterialSpec, MethodKind, MethodSpec, OutputSpec,
    ProbeSpec, SourceSpec, SpectrumSpec, SweepSpec, TimeSpec, ToleranceSpec,
};
use crate::CliError;

pub const NAMES: [&str; 6] = [
    "wave2d",
    "wave2d-ref",
    "cost-uniform",
    "cost-nonuniform",
    "energy",
    "spectrum",
];

/// 20 m × 20 m × 1 m vacuum box, 41 × 41 × 2 points, Gaussian line current
/// of 1 A with `σ_t = 20 ns` over `(0, 200 ns]`, ParaExp with six intervals.
fn wave2d() -> ExperimentConfig {
    ExperimentConfig {
        experiment: Experiment::Run,
        preset: Some("wave2d".into()),
        grid: GridSpec {
            counts: [41, 41, 2],
            lengths: [20.0, 20.0, 1.0],
            refine: None,
        },
        materials: MaterialSpec::default(),
        source: SourceSpec::Gaussian {
            i_max: 1.0,
            sigma_t: 2e-8,
        },
        time: TimeSpec {
            t0: 0.0,
            t_end: 2e-7,
            dt: None,
            cfl_fraction: Some(1.0),
        },
        method: MethodSpec {
            kind: MethodKind::Paraexp,
            p: 6,
            tolerance: ToleranceSpec::Value(1e-2),
            ..MethodSpec::default()
        },
        probes: vec![ProbeSpec {
            position: [15.0, 10.0, 0.0],
            field: FieldKind::E,
            axis: AxisKind::Z,
        }],
        output: OutputSpec::default(),
        sweep: None,
        spectrum: None,
    }
}

pub fn preset(name: &str) -> Result<ExperimentConfig, CliError> {
    let mut cfg = wave2d();
    match name {
        "wave2d" => {}
        "wave2d-ref" => {
            cfg.grid.counts = [121, 121, 2];
            cfg.method.kind = MethodKind::Leapfrog;
        }
        "cost-uniform" => {
            cfg.experiment = Experiment::CostUniform;
            cfg.probes.clear();
            cfg.sweep = Some(SweepSpec {
                nx: vec![21, 31, 41, 51, 61, 81],
                n_t: vec![200, 300, 400, 500, 600, 700, 800],
                k: Vec::new(),
            });
        }
        "cost-nonuniform" => {
            cfg.experiment = Experiment::CostNonuniform;
            cfg.probes.clear();
            cfg.sweep = Some(SweepSpec {
                nx: Vec::new(),
                n_t: Vec::new(),
                k: vec![1.0, 2.0, 5.0, 10.0, 15.0, 20.0],
            });
        }
        "energy" => {
            cfg.experiment = Experiment::Energy;
            cfg.method.tolerance = ToleranceSpec::Keyword("auto".into());
        }
        "spectrum" => {
            cfg.experiment = Experiment::Spectrum;
            cfg.method.tolerance = ToleranceSpec::Keyword("auto".into());
            cfg.spectrum = Some(SpectrumSpec {
                reference_counts: [121, 121, 2],
                hann: false,
            });
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown preset `{other}`; available: {}",
                NAMES.join(", ")
            )))
        }
    }
    cfg.preset = Some(name.to_string());
    cfg.validate()?;
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_presets_validate() {
        for name in NAMES {
            let cfg = preset(name).unwrap();
            assert_eq!(cfg.preset.as_deref(), Some(name));
        }
        assert!(preset("nope").is_err());
    }

    #[test]
    fn wave2d_geometry() {
        let cfg = preset("wave2d").unwrap();
        assert_eq!(cfg.grid.counts, [41, 41, 2]);
        assert_eq!(cfg.grid.lengths, [20.0, 20.0, 1.0]);
        assert_eq!(cfg.time.t_end, 2e-7);
        assert_eq!(preset("wave2d-ref").unwrap().grid.counts, [121, 121, 2]);
    }
}
