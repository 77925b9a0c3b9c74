//! Pipeline command line: collect -> train -> benchmark -> report, plus
//! the plant calibration search. Driven by an optional TOML config file;
//! flags override file values.
//!
//! Exit codes: 0 success, 1 usage error, 2 I/O or file-format error,
//! 3 numerical failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;

/// Environment variable overriding the output directory for all files.
pub const OUT_DIR_ENV: &str = "TWOSEG_OUT_DIR";

#[derive(Parser)]
#[command(
    name = "twoseg",
    about = "Simulation and control benchmark for a two-segment tendon-driven continuum robot",
    version
)]
struct Cli {
    /// TOML run configuration; flags override file values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Global seed override.
    #[arg(long, global = true)]
    seed: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Collect a Monte Carlo dataset on the simulated plant.
    Collect {
        /// Collection duration in seconds (4080 reproduces the full-scale
        /// dataset; 408 is the desk-scale default).
        #[arg(long, default_value_t = 408.0)]
        duration: f64,
        /// Sample rate in Hz.
        #[arg(long, default_value_t = 5.0)]
        rate: f64,
        /// Output CSV path (a JSON sidecar is written next to it).
        #[arg(long, default_value = "dataset.csv")]
        out: PathBuf,
    },
    /// Train a controller network on a collected dataset.
    Train {
        /// Architecture: gru, lstm or fnn.
        #[arg(long, default_value = "gru")]
        arch: String,
        /// Stacked layer count (defaults to the config value).
        #[arg(long)]
        layers: Option<usize>,
        /// Hidden width (defaults to the config value).
        #[arg(long)]
        hidden: Option<usize>,
        /// Maximum training epochs (defaults to the config value).
        #[arg(long)]
        epochs: Option<usize>,
        /// Dataset CSV produced by `collect`.
        #[arg(long, default_value = "dataset.csv")]
        dataset: PathBuf,
        /// Output weight file (loss history CSV lands next to it).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Run the architecture ablation grid instead of a single model.
        #[arg(long)]
        grid: bool,
    },
    /// Run tracking/orientation benchmarks and emit the report files.
    Benchmark {
        /// Task selection: a (tracking), b (orientation cone) or all.
        #[arg(long, default_value = "all")]
        task: String,
        /// Comma-separated controllers (jacobian, mpc, fnn, lstm, gru).
        #[arg(long, default_value = "jacobian,mpc,fnn,lstm,gru")]
        controllers: String,
        /// Trials per controller and trajectory.
        #[arg(long)]
        trials: Option<usize>,
        /// Directory holding fnn.json / lstm.json / gru.json weights.
        #[arg(long, default_value = "models")]
        models_dir: PathBuf,
        /// Output directory for benchmark.json, task CSVs and error logs.
        #[arg(long, default_value = "results")]
        out: PathBuf,
    },
    /// Grid-search the transmission parameters against the reference
    /// cyclic-loading statistics and emit the characterization CSV.
    CalibratePlant {
        /// Output CSV path (a JSON metadata sidecar is written next to it).
        #[arg(long, default_value = "plant_characterization.csv")]
        out: PathBuf,
    },
}

/// Join the configured output directory override, if any.
pub fn resolve_out(path: &Path) -> PathBuf {
    match std::env::var_os(OUT_DIR_ENV) {
        Some(dir) if path.is_relative() => PathBuf::from(dir).join(path),
        _ => path.to_path_buf(),
    }
}

fn exit_for(err: &twoseg_core::Error) -> u8 {
    use twoseg_core::Error::*;
    match err {
        InvalidArgument(_) | InvalidState(_) | ShapeMismatch(_) => 1,
        Io(_) | Parse(_) | Checksum(_) | VersionMismatch { .. } => 2,
        Numerical(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // Help and version requests are not usage errors.
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };

    let config = match commands::load_config(cli.config.as_deref(), cli.seed) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_for(&e));
        }
    };

    let result = match cli.command {
        Command::Collect { duration, rate, out } => {
            commands::collect(&config, duration, rate, &resolve_out(&out))
        }
        Command::Train {
            arch,
            layers,
            hidden,
            epochs,
            dataset,
            out,
            grid,
        } => {
            let out = out.map(|p| resolve_out(&p));
            commands::train(
                &config,
                &arch,
                layers,
                hidden,
                epochs,
                &dataset,
                out.as_deref(),
                grid,
            )
        }
        Command::Benchmark {
            task,
            controllers,
            trials,
            models_dir,
            out,
        } => commands::benchmark(
            &config,
            &task,
            &controllers,
            trials,
            &models_dir,
            &resolve_out(&out),
        ),
        Command::CalibratePlant { out } => commands::calibrate_plant(&resolve_out(&out)),
    };

    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_for(&e))
        }
    }
}
