mod commands;
mod config;
mod inputs;
mod output;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use varx_core::evaluation::Scale;
use varx_core::model::Variant;

use config::{RunConfig, UsageError};

#[derive(Parser)]
#[command(name = "varx", version, about = "Sparse VAR-X forecasting of weekly regional series")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Validate, fit and test each variant; write the RMSE report and forecasts.
    Evaluate(Flags),
    /// Choose the penalty by validation, then fit one variant on every week.
    Fit(Flags),
    /// Write validation scores along the penalty grid.
    Cv(Flags),
    /// Forecast the weeks after the data with a saved model.
    Forecast(Flags),
    /// Write per-lag coefficient magnitudes of a saved model.
    Sparsity(Flags),
    /// Write a synthetic input bundle with known coefficients.
    Synth(Flags),
}

#[derive(Args, Debug, Default)]
struct Flags {
    /// Key-value config file; flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Weekly claims CSV (state or division level).
    #[arg(long)]
    claims: Option<PathBuf>,
    /// Weekly query volume CSV, one series per state and term.
    #[arg(long)]
    queries: Option<PathBuf>,
    /// Weekly URL click CSV, one series per state and URL.
    #[arg(long)]
    clicks: Option<PathBuf>,
    /// Weekly search totals CSV, one series per division.
    #[arg(long)]
    totals: Option<PathBuf>,
    /// `state,region` CSV replacing the standard census divisions.
    #[arg(long)]
    region_map: Option<PathBuf>,
    /// Saved model (forecast, sparsity).
    #[arg(long)]
    model: Option<PathBuf>,
    /// Autoregressive lag order.
    #[arg(long)]
    p: Option<usize>,
    /// Exogenous lag order.
    #[arg(long)]
    s: Option<usize>,
    /// Seasonal differencing period in weeks.
    #[arg(long)]
    period: Option<usize>,
    /// Number of penalties on the validation grid.
    #[arg(long)]
    grid_size: Option<usize>,
    /// Smallest penalty as a fraction of lambda_max.
    #[arg(long)]
    grid_ratio: Option<f64>,
    /// Comma-separated variants among A, B, C, D.
    #[arg(long, value_delimiter = ',')]
    variants: Option<Vec<Variant>>,
    /// Variant to fit.
    #[arg(long)]
    variant: Option<Variant>,
    /// Offset added to counts before taking log ratios.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Scale of reported errors and forecasts.
    #[arg(long, value_parser = ["diff", "level"])]
    scale: Option<String>,
    /// Seed of the synthetic generator.
    #[arg(long)]
    seed: Option<u64>,
    /// Refit before every validation week.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    refit_each_week: Option<bool>,
    /// Scale predictors to unit variance before fitting.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    standardize: Option<bool>,
    /// Relative objective-change tolerance of the solver.
    #[arg(long)]
    tol: Option<f64>,
    /// Iteration cap per penalty.
    #[arg(long)]
    max_iter: Option<usize>,
    /// Step size rule of the solver.
    #[arg(long, value_parser = ["lipschitz", "backtracking"])]
    step: Option<String>,
    /// Weeks to forecast.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    horizon: Option<u64>,
    /// Magnitudes below this are written as zero (sparsity).
    #[arg(long)]
    threshold: Option<f64>,
    /// Also render an SVG heatmap (sparsity).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    svg: Option<bool>,
    /// Synthetic series length.
    #[arg(long)]
    weeks: Option<usize>,
    /// Synthetic coefficient density.
    #[arg(long)]
    sparsity: Option<f64>,
    /// Spectral radius of the synthetic companion matrix.
    #[arg(long)]
    spectral_radius: Option<f64>,
    /// Standard deviation of synthetic innovations.
    #[arg(long)]
    noise_std: Option<f64>,
    /// Multiplier on synthetic exogenous coefficients.
    #[arg(long)]
    exogenous_scale: Option<f64>,
}

macro_rules! override_fields {
    ($config:ident, $flags:ident; $($field:ident),* $(,)?) => {
        $(if let Some(v) = $flags.$field.clone() {
            $config.$field = v;
        })*
    };
}

macro_rules! override_paths {
    ($config:ident, $flags:ident; $($field:ident),* $(,)?) => {
        $(if $flags.$field.is_some() {
            $config.$field = $flags.$field.clone();
        })*
    };
}

fn resolve(flags: &Flags) -> Result<RunConfig, UsageError> {
    let mut config = RunConfig::default();
    if let Some(path) = &flags.config {
        config.apply_file(path)?;
    }
    override_paths!(config, flags; claims, queries, clicks, totals, region_map, model);
    override_fields!(
        config, flags;
        out, p, s, period, grid_size, grid_ratio, variants, variant, epsilon, seed,
        refit_each_week, standardize, tol, max_iter, threshold, svg, weeks, sparsity,
        spectral_radius, noise_std, exogenous_scale,
    );
    let here = Path::new(".");
    if let Some(scale) = &flags.scale {
        config.scale = scale.parse::<Scale>().map_err(|e| UsageError(e.to_string()))?;
    }
    if let Some(step) = &flags.step {
        config.set("step", step, here)?;
    }
    if let Some(h) = flags.horizon {
        config.horizon = h as usize;
    }
    config.validate()?;
    Ok(config)
}

/// A subcommand body; returns the paths it wrote.
type Action = fn(&RunConfig) -> Result<Vec<PathBuf>>;

fn run(command: Command) -> Result<()> {
    let (flags, action): (Flags, Action) = match command {
        Command::Evaluate(f) => (f, commands::evaluate),
        Command::Fit(f) => (f, commands::fit),
        Command::Cv(f) => (f, commands::cv),
        Command::Forecast(f) => (f, commands::forecast),
        Command::Sparsity(f) => (f, commands::sparsity),
        Command::Synth(f) => (f, commands::synth),
    };
    let config = resolve(&flags)?;
    for path in action(&config)? {
        println!("{}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
