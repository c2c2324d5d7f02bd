//! Run configuration: defaults, then a `key = value` file, then command-line flags.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use varx_core::design::{DesignOptions, Lags};
use varx_core::evaluation::{EvaluationConfig, FitOptions, Scale};
use varx_core::ingestion::SyntheticSpec;
use varx_core::model::Variant;
use varx_core::solver::{SolverSettings, StepRule};

/// Invalid flags or configuration values; reported with exit status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T, UsageError> {
    Err(UsageError(msg.into()))
}

/// Effective settings of one invocation. Serialized verbatim into every artifact.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub claims: Option<PathBuf>,
    pub queries: Option<PathBuf>,
    pub clicks: Option<PathBuf>,
    pub totals: Option<PathBuf>,
    pub region_map: Option<PathBuf>,
    pub model: Option<PathBuf>,
    /// Output directory. Not embedded in artifacts so that runs into
    /// different directories produce identical files.
    #[serde(skip)]
    pub out: PathBuf,
    pub p: usize,
    pub s: usize,
    pub period: usize,
    pub grid_size: usize,
    pub grid_ratio: f64,
    pub variants: Vec<Variant>,
    pub variant: Variant,
    pub epsilon: f64,
    pub scale: Scale,
    pub seed: u64,
    pub refit_each_week: bool,
    pub standardize: bool,
    pub tol: f64,
    pub max_iter: usize,
    pub step: StepRule,
    pub horizon: usize,
    pub threshold: f64,
    pub svg: bool,
    pub weeks: usize,
    pub sparsity: f64,
    pub spectral_radius: f64,
    pub noise_std: f64,
    pub exogenous_scale: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eval = EvaluationConfig::default();
        let synth = SyntheticSpec::default();
        Self {
            claims: None,
            queries: None,
            clicks: None,
            totals: None,
            region_map: None,
            model: None,
            out: PathBuf::from("out"),
            p: eval.fit.lags.p,
            s: eval.fit.lags.s,
            period: eval.period,
            grid_size: eval.grid_size,
            grid_ratio: eval.grid_ratio,
            variants: Variant::ALL.to_vec(),
            variant: Variant::C,
            epsilon: 0.5,
            scale: eval.scale,
            seed: synth.seed,
            refit_each_week: eval.fit.refit_each_week,
            standardize: eval.fit.design.standardize,
            tol: eval.fit.solver.tol,
            max_iter: eval.fit.solver.max_iter,
            step: eval.fit.solver.step,
            horizon: 2,
            threshold: 0.0,
            svg: false,
            weeks: synth.weeks,
            sparsity: synth.sparsity,
            spectral_radius: synth.spectral_radius,
            noise_std: synth.noise_std,
            exogenous_scale: synth.exogenous_scale,
        }
    }
}

fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, UsageError>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| UsageError(format!("bad value `{value}` for `{key}`: {e}")))
}

pub fn parse_variants(value: &str) -> Result<Vec<Variant>, UsageError> {
    value
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| parse("variants", v))
        .collect()
}

fn parse_step(value: &str) -> Result<StepRule, UsageError> {
    match value {
        "lipschitz" => Ok(StepRule::Lipschitz),
        "backtracking" => Ok(StepRule::Backtracking),
        other => usage(format!("bad value `{other}` for `step` (lipschitz or backtracking)")),
    }
}

impl RunConfig {
    /// Set one option by name. Relative paths are resolved against `base`.
    pub fn set(&mut self, key: &str, value: &str, base: &Path) -> Result<(), UsageError> {
        let key = key.trim().replace('-', "_");
        let value = value.trim();
        let path = || Some(base.join(value));
        match key.as_str() {
            "claims" => self.claims = path(),
            "queries" => self.queries = path(),
            "clicks" => self.clicks = path(),
            "totals" => self.totals = path(),
            "region_map" => self.region_map = path(),
            "model" => self.model = path(),
            "out" => self.out = base.join(value),
            "p" => self.p = parse(&key, value)?,
            "s" => self.s = parse(&key, value)?,
            "period" => self.period = parse(&key, value)?,
            "grid_size" => self.grid_size = parse(&key, value)?,
            "grid_ratio" => self.grid_ratio = parse(&key, value)?,
            "variants" => self.variants = parse_variants(value)?,
            "variant" => self.variant = parse(&key, value)?,
            "epsilon" => self.epsilon = parse(&key, value)?,
            "scale" => self.scale = parse(&key, value)?,
            "seed" => self.seed = parse(&key, value)?,
            "refit_each_week" => self.refit_each_week = parse(&key, value)?,
            "standardize" => self.standardize = parse(&key, value)?,
            "tol" => self.tol = parse(&key, value)?,
            "max_iter" => self.max_iter = parse(&key, value)?,
            "step" => self.step = parse_step(value)?,
            "horizon" => self.horizon = parse(&key, value)?,
            "threshold" => self.threshold = parse(&key, value)?,
            "svg" => self.svg = parse(&key, value)?,
            "weeks" => self.weeks = parse(&key, value)?,
            "sparsity" => self.sparsity = parse(&key, value)?,
            "spectral_radius" => self.spectral_radius = parse(&key, value)?,
            "noise_std" => self.noise_std = parse(&key, value)?,
            "exogenous_scale" => self.exogenous_scale = parse(&key, value)?,
            other => return usage(format!("unknown config key `{other}`")),
        }
        Ok(())
    }

    /// Apply a `key = value` file. Blank lines and lines starting with `#`
    /// are ignored; paths are relative to the file's directory.
    pub fn apply_file(&mut self, path: &Path) -> Result<(), UsageError> {
        let text = fs::read_to_string(path)
            .map_err(|e| UsageError(format!("cannot read config file `{}`: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for (n, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                UsageError(format!("{}:{}: expected `key = value`", path.display(), n + 1))
            })?;
            self.set(key, value, base)
                .map_err(|e| UsageError(format!("{}:{}: {e}", path.display(), n + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), UsageError> {
        if self.p == 0 {
            return usage("p must be >= 1");
        }
        if self.period == 0 {
            return usage("period must be >= 1");
        }
        if self.grid_size < 2 {
            return usage("grid-size must be >= 2");
        }
        if !(self.grid_ratio > 0.0 && self.grid_ratio < 1.0) {
            return usage("grid-ratio must be in (0, 1)");
        }
        if self.variants.is_empty() {
            return usage("at least one variant is required");
        }
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return usage("epsilon must be > 0");
        }
        if self.tol.is_nan() || self.tol <= 0.0 || self.max_iter == 0 {
            return usage("tol must be > 0 and max-iter >= 1");
        }
        if self.horizon == 0 {
            return usage("horizon must be >= 1");
        }
        if self.threshold.is_nan() || self.threshold < 0.0 {
            return usage("threshold must be >= 0");
        }
        Ok(())
    }

    pub fn lags(&self) -> Lags {
        Lags::new(self.p, self.s)
    }

    pub fn evaluation(&self) -> EvaluationConfig {
        EvaluationConfig {
            fit: FitOptions {
                lags: self.lags(),
                design: DesignOptions {
                    center: true,
                    standardize: self.standardize,
                },
                solver: SolverSettings {
                    tol: self.tol,
                    max_iter: self.max_iter,
                    step: self.step,
                    ..SolverSettings::default()
                },
                refit_each_week: self.refit_each_week,
            },
            period: self.period,
            grid_size: self.grid_size,
            grid_ratio: self.grid_ratio,
            scale: self.scale,
        }
    }

    pub fn synthetic_spec(&self) -> SyntheticSpec {
        SyntheticSpec {
            weeks: self.weeks,
            p: self.p,
            s: self.s,
            sparsity: self.sparsity,
            spectral_radius: self.spectral_radius,
            noise_std: self.noise_std,
            exogenous_scale: self.exogenous_scale,
            seed: self.seed,
            ..SyntheticSpec::default()
        }
    }

    /// The effective configuration tagged with the command that ran.
    pub fn record(&self, command: &str) -> serde_json::Value {
        let mut value = serde_json::to_value(self).expect("config serializes");
        value
            .as_object_mut()
            .expect("config is an object")
            .insert("command".into(), command.into());
        value
    }
}
