//! Rolling one-step validation of the penalty, rolling test forecasts, RMSE,
//! and the four-variant comparison.

mod cv;
mod report;
mod rolling;
mod variants;

pub use cv::{rolling_one_step_cv, CvResult};
pub use report::{lambda_log_csv, EvaluationReport, VariantOutcome};
pub use rolling::{rmse, rolling_test_forecast};
pub use variants::{
    fit_at, fit_variant, run_variants, select_exogenous, validate_variant, FittedVariant,
};

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::design::{DesignOptions, Lags};
use crate::error::VarxError;
use crate::solver::SolverSettings;
use crate::timeseries::WEEKS_PER_YEAR;

/// Scale on which forecast errors are reported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// Seasonally differenced values, the scale the model is fitted on.
    #[default]
    Diff,
    /// Original values, recovered by undoing the seasonal difference.
    Level,
}

impl fmt::Display for Scale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scale::Diff => "diff",
            Scale::Level => "level",
        })
    }
}

impl FromStr for Scale {
    type Err = VarxError;

    fn from_str(s: &str) -> Result<Self, VarxError> {
        match s {
            "diff" => Ok(Scale::Diff),
            "level" => Ok(Scale::Level),
            other => Err(VarxError::InvalidSpec(format!("unknown scale `{other}`"))),
        }
    }
}

/// How a single model is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    pub lags: Lags,
    pub design: DesignOptions,
    pub solver: SolverSettings,
    /// Refit on all data before each validation week instead of fitting once on train.
    pub refit_each_week: bool,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            lags: Lags::default(),
            design: DesignOptions::centered(),
            solver: SolverSettings::default(),
            refit_each_week: false,
        }
    }
}

/// Everything that determines an evaluation run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationConfig {
    pub fit: FitOptions,
    pub period: usize,
    pub grid_size: usize,
    pub grid_ratio: f64,
    pub scale: Scale,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self {
            fit: FitOptions::default(),
            period: WEEKS_PER_YEAR,
            grid_size: 20,
            grid_ratio: 0.01,
            scale: Scale::Diff,
        }
    }
}
