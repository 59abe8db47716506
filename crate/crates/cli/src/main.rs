//! `tabsynth` command-line driver.

mod commands;
mod config;
mod error;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tabsynth::privacy::DpVariant;

use crate::config::Overrides;
use crate::error::CliError;

/// Default output directory when neither a flag nor the config sets one.
pub const OUT_ENV: &str = "TABSYNTH_OUT";

#[derive(Debug, Parser)]
#[command(name = "tabsynth", version, about = "Train, sample and audit conditional tabular GANs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Default)]
pub struct Common {
    /// JSON run config; flags override its values.
    #[arg(long, short)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub schema: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Output directory (default: config `output_dir`, then $TABSYNTH_OUT, then `tabsynth-out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            schema: self.schema.clone(),
            data: self.data.clone(),
            output_dir: self.out.clone(),
            seed: self.seed,
            ..Overrides::default()
        }
    }
}

#[derive(Debug, Args, Clone, Default)]
pub struct TrainFlags {
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Encoder sidecar from `fit`; fitted afresh when absent.
    #[arg(long)]
    pub encoder: Option<PathBuf>,
}

#[derive(Debug, Args, Clone, Default)]
pub struct PrivacyFlags {
    #[arg(long, value_parser = parse_variant)]
    pub variant: Option<DpVariant>,
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Batch size B used by the accountant.
    #[arg(long)]
    pub batch: Option<usize>,
    /// Training-set size N.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub delta: Option<f64>,
    /// Target epsilon; the iteration count is planned.
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Fixed iteration count; epsilon is reported.
    #[arg(long)]
    pub iterations: Option<u64>,
    #[arg(long)]
    pub clip: Option<f64>,
    #[arg(long)]
    pub n_discriminators: Option<usize>,
}

fn parse_variant(s: &str) -> Result<DpVariant, String> {
    match s {
        "d_dp" | "d-dp" => Ok(DpVariant::DDp),
        "g_dp" | "g-dp" => Ok(DpVariant::GDp),
        _ => Err(format!("unknown variant `{s}` (expected d_dp or g_dp)")),
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit the column encoders and write the sidecar and layout report.
    Fit {
        #[command(flatten)]
        common: Common,
    },
    /// Train the non-private model.
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
    },
    /// Train under differential privacy.
    TrainDp {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        train: TrainFlags,
        #[command(flatten)]
        privacy: PrivacyFlags,
    },
    /// Draw synthetic rows from a checkpoint.
    Sample {
        #[command(flatten)]
        common: Common,
        /// Checkpoint (default: <out>/model.json).
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        n: usize,
        /// Condition as `column=label`.
        #[arg(long)]
        condition: Option<String>,
        /// CSV destination (default: <out>/synthetic.csv).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Compare a synthetic table against the real data.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Synthetic CSV (default: <out>/synthetic.csv).
        #[arg(long)]
        synthetic: Option<PathBuf>,
    },
    /// Run the membership or attribute inference attack.
    Attack {
        #[command(flatten)]
        common: Common,
    },
    /// Plan iterations for a privacy budget or report epsilon for a run.
    Account {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        privacy: PrivacyFlags,
    },
}

fn default_out() -> PathBuf {
    std::env::var_os(OUT_ENV).map_or_else(|| PathBuf::from("tabsynth-out"), PathBuf::from)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Fit { common } => commands::fit(&common),
        Command::Train { common, train } => commands::train(&common, &train),
        Command::TrainDp { common, train, privacy } => commands::train_dp(&common, &train, &privacy),
        Command::Sample {
            common,
            model,
            n,
            condition,
            output,
        } => commands::sample(&common, model, n, condition.as_deref(), output),
        Command::Evaluate { common, synthetic } => commands::evaluate(&common, synthetic),
        Command::Attack { common } => commands::attack(&common),
        Command::Account { common, privacy } => commands::account(&common, &privacy),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tabsynth: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
