use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use dlbiht::harness::{
    run_convergence, run_sweep, run_trial, write_convergence_outputs, write_single_outputs,
    write_sweep_outputs, ExperimentConfig, SweepFigure, SweepParameter, SweepSpec,
    VariantSelection, DEFAULT_MU_VALUES,
};
use dlbiht::RngStream;

/// Experiments for blind one-bit compressed sensing with dictionary
/// learning (DL-BIHT-L1 / DL-BIHT-L2).
#[derive(Parser)]
#[command(name = "dlbiht", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct CommonArgs {
    /// Optional key=value config file; flags override file values.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed for all RNG streams.
    #[arg(long)]
    seed: u64,
    /// Output directory for CSVs and plot scripts.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Which learning variants to run.
    #[arg(long, default_value = "both")]
    variant: VariantSelection,
    /// Skip the no-learning baseline.
    #[arg(long)]
    no_baseline: bool,
}

impl CommonArgs {
    fn config(&self) -> dlbiht::Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::from_file(path)?,
            None => ExperimentConfig::default(),
        };
        cfg.seed = self.seed;
        cfg.variant = self.variant;
        if self.no_baseline {
            cfg.baseline = false;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Cost-versus-iteration traces for several step sizes (figure 1).
    Convergence {
        #[command(flatten)]
        common: CommonArgs,
        /// Step sizes to trace.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        mu_values: Option<Vec<f64>>,
    },
    /// NMSE versus training-signal count (figure 2).
    SweepT {
        #[command(flatten)]
        common: CommonArgs,
        /// Training-signal counts, strictly increasing.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
    /// NMSE versus sign-measurement count (figure 3).
    SweepN {
        #[command(flatten)]
        common: CommonArgs,
        /// Measurement counts, strictly increasing.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Option<Vec<f64>>,
    },
    /// One seeded trial with full per-variant results.
    Single {
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn default_grid(lo: usize, hi: usize, step: usize) -> Vec<f64> {
    (lo..=hi).step_by(step).map(|v| v as f64).collect()
}

fn run(cli: Cli) -> dlbiht::Result<()> {
    match cli.command {
        Command::Convergence { common, mu_values } => {
            let cfg = common.config()?;
            let mus = mu_values.unwrap_or_else(|| DEFAULT_MU_VALUES.to_vec());
            let traces = run_convergence(&cfg, &mus)?;
            for path in write_convergence_outputs(&common.out, &traces)? {
                println!("wrote {}", path.display());
            }
        }
        Command::SweepT { common, values } => {
            let cfg = common.config()?;
            let sweep = SweepSpec {
                parameter: SweepParameter::TrainingSignals,
                values: values.unwrap_or_else(|| default_grid(100, 1000, 100)),
            };
            let rows = run_sweep(&cfg, &sweep)?;
            for path in write_sweep_outputs(&common.out, SweepFigure::TrainingSignals, &rows)? {
                println!("wrote {}", path.display());
            }
        }
        Command::SweepN { common, values } => {
            let cfg = common.config()?;
            let sweep = SweepSpec {
                parameter: SweepParameter::Measurements,
                values: values.unwrap_or_else(|| default_grid(100, 500, 100)),
            };
            let rows = run_sweep(&cfg, &sweep)?;
            for path in write_sweep_outputs(&common.out, SweepFigure::Measurements, &rows)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Single { common } => {
            let cfg = common.config()?;
            let outcome = run_trial(&cfg, RngStream::new(cfg.seed))?;
            for path in write_single_outputs(&common.out, &outcome)? {
                println!("wrote {}", path.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    // Usage errors are parameter errors (exit 1); --help/--version exit 0.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = u8::from(e.use_stderr());
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
