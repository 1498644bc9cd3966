//! Command-line front end: `stats`, `fit`, `forecast`, `backtest`, `report`.
//!
//! Every subcommand reads the same layered configuration (flags over a
//! `--config` file over defaults), writes machine-readable files into the
//! output directory and prints a human table on stdout. Exit codes: 0
//! success, 1 input error, 2 estimation failure, 3 missing prerequisite.

mod commands;
pub mod config;
pub mod output;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use config::{Overrides, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 1;
pub const EXIT_ESTIMATION: i32 = 2;
pub const EXIT_MISSING: i32 = 3;

/// A failed command, classified by exit code.
#[derive(Debug, thiserror::Error)]
pub enum Failure {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Estimation(String),
    #[error("missing prerequisite: {0}")]
    Missing(String),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Input(_) => EXIT_INPUT,
            Failure::Estimation(_) => EXIT_ESTIMATION,
            Failure::Missing(_) => EXIT_MISSING,
        }
    }

    pub(crate) fn context(self, prefix: impl std::fmt::Display) -> Self {
        match self {
            Failure::Input(m) => Failure::Input(format!("{prefix}: {m}")),
            Failure::Estimation(m) => Failure::Estimation(format!("{prefix}: {m}")),
            Failure::Missing(m) => Failure::Missing(format!("{prefix}: {m}")),
        }
    }
}

impl From<crate::Error> for Failure {
    fn from(e: crate::Error) -> Self {
        use crate::Error as E;
        match e {
            E::ZeroVariance | E::NonConvergence { .. } | E::NonFiniteStart => {
                Failure::Estimation(e.to_string())
            }
            other => Failure::Input(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "ewmask",
    version,
    about = "Time-varying higher-moment VaR estimation and backtesting"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    #[command(flatten)]
    run: RunArgs,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Command {
    /// Descriptive statistics of the return series
    Stats,
    /// Estimate EWMA-SK and GARCH(1,1) on the in-sample period
    Fit,
    /// Out-of-sample VaR forecasts for every requested model and horizon
    Forecast,
    /// Forecast, then run the coverage, independence and Basel tests
    Backtest,
    /// Plot-ready CSVs from the outputs of `fit` and `backtest`
    Report,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// Flat `key = value` config file; flags override its entries
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Price CSV with header `date,price`
    #[arg(long, global = true, value_name = "PATH")]
    input: Option<PathBuf>,
    #[arg(long, global = true, value_name = "DIR")]
    output_dir: Option<PathBuf>,
    /// Number of trailing returns held out for forecasting
    #[arg(long, global = true, value_name = "N")]
    out_of_sample: Option<usize>,
    /// VaR tail probability
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Comma-separated horizons in days
    #[arg(long, global = true, value_name = "LIST")]
    horizons: Option<String>,
    /// Comma-separated subset of HS, FHS, RiskMetrics, EWMA-SK, GARCH-N
    #[arg(long, global = true, value_name = "LIST")]
    models: Option<String>,
    #[arg(long, global = true, value_name = "LAMBDA")]
    riskmetrics_lambda: Option<f64>,
    /// Use k/24 instead of (k-3)/24 in the Cornish-Fisher kurtosis term
    #[arg(long, global = true)]
    cf_raw_kurtosis: bool,
    /// Add the second-order skewness correction to the Cornish-Fisher quantile
    #[arg(long, global = true)]
    cf_full: bool,
    /// Limit HS/FHS to the most recent N observations
    #[arg(long, global = true, value_name = "N")]
    rolling_window: Option<usize>,
    /// Fix the EWMA-SK mean at the in-sample average
    #[arg(long, global = true)]
    pin_mu: bool,
    /// Credit-risk add-on in the market risk capital charge
    #[arg(long, global = true, value_name = "C")]
    credit_addon: Option<f64>,
}

impl RunArgs {
    fn overrides(&self) -> Result<Overrides, Failure> {
        let flag = |name: &'static str| move |e: String| Failure::Input(format!("--{name}: {e}"));
        Ok(Overrides {
            input: self.input.clone(),
            output_dir: self.output_dir.clone(),
            out_of_sample: self.out_of_sample,
            alpha: self.alpha,
            horizons: self
                .horizons
                .as_deref()
                .map(config::parse_horizons)
                .transpose()
                .map_err(flag("horizons"))?,
            models: self
                .models
                .as_deref()
                .map(config::parse_models)
                .transpose()
                .map_err(flag("models"))?,
            riskmetrics_lambda: self.riskmetrics_lambda,
            cf_raw_kurtosis: self.cf_raw_kurtosis.then_some(true),
            cf_full: self.cf_full.then_some(true),
            rolling_window: self.rolling_window,
            pin_mu: self.pin_mu.then_some(true),
            credit_addon: self.credit_addon,
        })
    }
}

fn resolve(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut cfg = RunConfig::default();
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::Input(format!("cannot read config {}: {e}", path.display())))?;
        cfg.apply(config::parse_config_file(&text, path)?);
    }
    cfg.apply(args.overrides()?);
    cfg.validate()?;
    Ok(cfg)
}

/// Parses `args` (including the program name), runs the subcommand and
/// returns the process exit code.
pub fn run_from_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
        }
    };
    let result = resolve(&cli.run).and_then(|cfg| match cli.command {
        Command::Stats => commands::stats(&cfg),
        Command::Fit => commands::fit(&cfg),
        Command::Forecast => commands::forecast(&cfg),
        Command::Backtest => commands::backtest(&cfg),
        Command::Report => commands::report(&cfg),
    });
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
