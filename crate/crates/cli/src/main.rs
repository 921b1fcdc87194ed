use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use paraexp_cli::config::ExperimentConfig;
use paraexp_cli::experiment::{output_dir, run_experiment};
use paraexp_cli::presets::preset;
use paraexp_cli::CliError;

/// Time-parallel FIT wave experiments.
#[derive(Parser)]
#[command(name = "paraexp", version)]
struct Cli {
    /// Worker threads for ParaExp intervals (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML file.
    Run {
        config: PathBuf,
        /// Override a key, e.g. `--set method.p=4`.
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        /// Output directory (else `output.dir`, `PARAEXP_OUTPUT_DIR`, `.`).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Run a built-in experiment.
    Preset {
        /// wave2d, wave2d-ref, cost-uniform, cost-nonuniform, energy or spectrum.
        name: String,
        #[arg(long = "set", value_name = "PATH=VALUE")]
        overrides: Vec<String>,
        #[arg(long)]
        output: Option<PathBuf>,
        /// Print the resolved configuration instead of running it.
        #[arg(long)]
        print: bool,
    },
    /// Check a configuration file without running it.
    Validate { config: PathBuf },
}

fn load(path: &PathBuf) -> Result<ExperimentConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    ExperimentConfig::from_toml(&text)
}

fn execute(cli: Cli) -> Result<(), CliError> {
    let (cfg, output) = match cli.command {
        Command::Validate { config } => {
            load(&config)?;
            println!("{}: ok", config.display());
            return Ok(());
        }
        Command::Run {
            config,
            overrides,
            output,
        } => (load(&config)?.with_overrides(&overrides)?, output),
        Command::Preset {
            name,
            overrides,
            output,
            print,
        } => {
            let cfg = preset(&name)?.with_overrides(&overrides)?;
            if print {
                print!("{}", cfg.to_toml()?);
                return Ok(());
            }
            (cfg, output)
        }
    };
    let dir = output_dir(&cfg, output.as_deref());
    for file in run_experiment(&cfg, &dir, cli.threads)? {
        println!("{}", file.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("paraexp: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
