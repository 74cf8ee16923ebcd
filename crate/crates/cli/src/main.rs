mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tcsurv_core::calibrate::Rule;
use tcsurv_core::simgen::ExpParam;
use tcsurv_core::survival::{ModelKind, Role};

use crate::config::Overrides;
use crate::error::CliError;

/// Lower prediction bounds for right-censored survival times with
/// training-set conditional (APAC) or marginal coverage.
#[derive(Debug, Parser)]
#[command(name = "tcsurv", version)]
pub struct Cli {
    /// JSON file with defaults (alpha, beta, eta2, grid, c_prop, rule,
    /// event_model, censoring_model, bandwidth, seed, n_mc, jobs); flags take precedence.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    /// Log more to stderr (-v info, -vv debug). RUST_LOG also works.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw a synthetic dataset (columns w1..wp, t, c, y, delta).
    Simulate(SimulateArgs),
    /// Fit one conditional survival model and write it as JSON.
    Fit(FitArgs),
    /// Split data, fit both nuisances, sweep tau and select it; writes the
    /// per-tau report CSV and a JSON bundle for `predict`.
    Calibrate(CalibrateArgs),
    /// Evaluate a calibrated bound on covariate rows (one `lpb` per row).
    Predict(PredictArgs),
    /// Score a calibrated bound on records with known event times.
    Evaluate(EvaluateArgs),
    /// Run the replication study and write per-replicate, study and plot CSVs.
    Reproduce(ReproduceArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Simulation setting, 1 to 6.
    #[arg(long)]
    pub setting: u32,
    /// Number of records.
    #[arg(long)]
    pub n: usize,
    /// Random seed [default: config `seed`, else 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output CSV.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
    /// Read exponential censoring parameters as `rate` or `mean`.
    #[arg(long, default_value = "rate")]
    pub exp_param: ExpParam,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    /// Input CSV with columns w1..wp, y, delta.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// `event` fits S, `censoring` fits G with the indicator reversed.
    #[arg(long, default_value = "event")]
    pub role: Role,
    /// cox, weibull, km or beran [default: beran].
    #[arg(long)]
    pub model: Option<ModelKind>,
    /// Beran bandwidth [default: 0.5 sd(w) n^(-1/5)].
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Output JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct CalibrationFlags {
    /// apac or marginal [default: apac].
    #[arg(long)]
    pub rule: Option<Rule>,
    /// Miscoverage level [default: 0.1].
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Confidence level of the coverage lower bound [default: 0.05].
    #[arg(long)]
    pub beta: Option<f64>,
    /// Number of tau values, equally spaced on [0, 0.99] [default: 100].
    #[arg(long)]
    pub grid: Option<usize>,
    /// Censoring-survival level capping the bound [default: 0.001].
    #[arg(long)]
    pub eta2: Option<f64>,
    /// Random seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// Input CSV with columns w1..wp, y, delta.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    #[command(flatten)]
    pub calibration: CalibrationFlags,
    /// Share of records used for calibration [default: 0.5].
    #[arg(long)]
    pub c_prop: Option<f64>,
    /// Model for S: cox, weibull, km or beran [default: beran].
    #[arg(long)]
    pub event_model: Option<ModelKind>,
    /// Model for G: cox, weibull, km or beran [default: beran].
    #[arg(long)]
    pub censoring_model: Option<ModelKind>,
    /// Beran bandwidth [default: 0.5 sd(w) n^(-1/5)].
    #[arg(long)]
    pub bandwidth: Option<f64>,
    /// Per-tau report CSV (tau, psi_hat, plug_in, sigma_hat, clb, n_cal).
    #[arg(long, value_name = "FILE")]
    pub out_reports: PathBuf,
    /// Bundle JSON with both fitted models and the selected tau.
    #[arg(long, value_name = "FILE")]
    pub out_bundle: PathBuf,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    /// Bundle written by `calibrate`.
    #[arg(long, value_name = "FILE")]
    pub bundle: PathBuf,
    /// CSV with covariate columns w1..wp; other columns are ignored.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Output CSV with a single `lpb` column.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// Bundle written by `calibrate`.
    #[arg(long, value_name = "FILE")]
    pub bundle: PathBuf,
    /// CSV with columns w1..wp and the event time t.
    #[arg(long = "in", value_name = "FILE")]
    pub input: PathBuf,
    /// Also estimate the true coverage under this simulation setting.
    #[arg(long)]
    pub setting: Option<u32>,
    /// Monte-Carlo draws for the true coverage [default: 100000].
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Random seed for the Monte-Carlo draws [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output JSON [default: stdout].
    #[arg(long, value_name = "FILE")]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    /// Simulation setting, 1 to 6.
    #[arg(long)]
    pub setting: u32,
    /// Per-part sample sizes; repeat the flag or separate with commas.
    #[arg(long, value_delimiter = ',', num_args = 1.., required = true)]
    pub n: Vec<usize>,
    /// Replicates per sample size.
    #[arg(long, default_value_t = 100)]
    pub reps: usize,
    #[command(flatten)]
    pub calibration: CalibrationFlags,
    /// Monte-Carlo draws for each replicate's true coverage [default: 100000].
    #[arg(long)]
    pub n_mc: Option<usize>,
    /// Worker threads [default: all cores].
    #[arg(long, env = "TCSURV_JOBS")]
    pub jobs: Option<usize>,
    /// Output directory (created if missing).
    #[arg(long, value_name = "DIR")]
    pub out: PathBuf,
}

impl CalibrationFlags {
    fn overrides(&self) -> Overrides {
        Overrides {
            alpha: self.alpha,
            beta: self.beta,
            eta2: self.eta2,
            grid: self.grid,
            rule: self.rule,
            seed: self.seed,
            ..Overrides::default()
        }
    }
}

fn init_logging(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let _ = env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .try_init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            if code != 0 {
                eprintln!("{}", CliError::Usage(e.kind().to_string()).to_json_line());
            }
            return ExitCode::from(code);
        }
    };
    init_logging(cli.verbose);
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json_line());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
