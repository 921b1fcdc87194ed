use std::path::Path;
use std::process::{Command, Output};

use paraexp_cli::config::ExperimentConfig;
use paraexp_cli::presets::{preset, NAMES};

fn paraexp(args: &[&str], env: &[(&str, &Path)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_paraexp"));
    cmd.args(args).env_remove("PARAEXP_OUTPUT_DIR");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

/// Short Leapfrog run of the wave2d preset.
const QUICK: [&str; 2] = ["--set=method.kind=\"leapfrog\"", "--set=time.t_end=1e-7"];

#[test]
fn config_round_trips_through_toml() {
    for name in NAMES {
        let cfg = preset(name).unwrap();
        let text = cfg.to_toml().unwrap();
        let back = ExperimentConfig::from_toml(&text).unwrap();
        assert_eq!(back, cfg, "{name}");
        assert_eq!(back.to_toml().unwrap(), text);
    }
}

#[test]
fn overrides_are_typed() {
    let cfg = preset("wave2d")
        .unwrap()
        .with_overrides(&[
            "method.p=3".into(),
            "method.tolerance=\"auto\"".into(),
            "grid.refine=2.5".into(),
        ])
        .unwrap();
    assert_eq!(cfg.method.p, 3);
    assert_eq!(cfg.grid.refine, Some(2.5));
    assert!(preset("wave2d")
        .unwrap()
        .with_overrides(&["method.p=0".into()])
        .is_err());
    assert!(preset("wave2d").unwrap().with_overrides(&["nonsense".into()]).is_err());
    assert!(preset("wave2d")
        .unwrap()
        .with_overrides(&["method.colour=1".into()])
        .is_err());
}

#[test]
fn validate_reports_configuration_errors() {
    let dir = tempfile::tempdir().unwrap();
    let good = dir.path().join("good.toml");
    std::fs::write(&good, preset("wave2d").unwrap().to_toml().unwrap()).unwrap();
    let out = paraexp(&["validate", good.to_str().unwrap()], &[]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));

    let bad = dir.path().join("bad.toml");
    let text = preset("wave2d").unwrap().to_toml().unwrap().replace("p = 6", "p = 0");
    std::fs::write(&bad, text).unwrap();
    assert_eq!(code(&paraexp(&["validate", bad.to_str().unwrap()], &[])), 2);

    std::fs::write(&bad, "experiment = \"run\"\nunknown = 1\n").unwrap();
    assert_eq!(code(&paraexp(&["validate", bad.to_str().unwrap()], &[])), 2);

    assert_eq!(code(&paraexp(&["preset", "nope"], &[])), 2);
}

#[test]
fn missing_files_are_io_errors() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("absent.toml");
    assert_eq!(code(&paraexp(&["run", missing.to_str().unwrap()], &[])), 4);

    let blocker = dir.path().join("file");
    std::fs::write(&blocker, "x").unwrap();
    let target = blocker.join("sub");
    let mut args = vec!["preset", "wave2d", "--output", target.to_str().unwrap()];
    args.extend(QUICK);
    assert_eq!(code(&paraexp(&args, &[])), 4);
}

#[test]
fn unstable_step_is_reported_as_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "wave2d", "--output", dir.path().to_str().unwrap()];
    args.extend(QUICK);
    args.push("--set=time.cfl_fraction=1.2");
    let out = paraexp(&args, &[]);
    assert_eq!(code(&out), 3, "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("divergence"));
}

#[test]
fn output_directory_falls_back_to_environment() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "wave2d"];
    args.extend(QUICK);
    let out = paraexp(&args, &[("PARAEXP_OUTPUT_DIR", dir.path())]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for name in ["probes_e.csv", "ledger.csv", "energy.csv"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let probes = std::fs::read_to_string(dir.path().join("probes_e.csv")).unwrap();
    assert!(probes.starts_with("t,ez_30_20_0\n"), "{}", &probes[..40]);
    assert!(!probes.contains('\r'));
}

#[test]
fn printed_preset_runs_identically() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "wave2d", "--print"];
    args.extend(QUICK);
    let printed = paraexp(&args, &[]);
    assert_eq!(code(&printed), 0);
    let cfg_path = dir.path().join("cfg.toml");
    std::fs::write(&cfg_path, &printed.stdout).unwrap();

    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let mut from_preset = vec!["preset", "wave2d", "--output", a.to_str().unwrap()];
    from_preset.extend(QUICK);
    assert_eq!(code(&paraexp(&from_preset, &[])), 0);
    let from_file = [
        "--threads",
        "2",
        "run",
        cfg_path.to_str().unwrap(),
        "--output",
        b.to_str().unwrap(),
    ];
    assert_eq!(code(&paraexp(&from_file, &[])), 0);
    for name in ["probes_e.csv", "ledger.csv", "energy.csv"] {
        assert_eq!(
            std::fs::read(a.join(name)).unwrap(),
            std::fs::read(b.join(name)).unwrap(),
            "{name}"
        );
    }
}
