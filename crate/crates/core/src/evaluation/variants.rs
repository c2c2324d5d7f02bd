use ndarray::Array2;

use super::cv::{rolling_one_step_cv, CvResult};
use super::report::{EvaluationReport, VariantOutcome};
use super::rolling::{rmse, rolling_test_forecast};
use super::{EvaluationConfig, FitOptions};
use crate::design::{build_design, Lags};
use crate::error::{Result, VarxError};
use crate::ingestion::ExogenousKind;
use crate::model::{ModelContext, Variant, VarxModel};
use crate::solver::{fit, lambda_grid};
use crate::timeseries::{seasonal_difference, split_thirds, MultivariateSeries, SeasonalTransform};

/// Exogenous rows used by `variant`, or `None` for the pure VAR.
///
/// Variant C keeps every row. A and B keep rows whose label carries the
/// matching kind suffix and fail if there are none.
pub fn select_exogenous(x: &MultivariateSeries, variant: Variant) -> Result<Option<MultivariateSeries>> {
    match variant {
        Variant::D => Ok(None),
        Variant::C => Ok(Some(x.clone())),
        Variant::A | Variant::B => {
            let kinds = variant.kinds();
            let keep: Vec<&String> = x
                .labels()
                .iter()
                .filter(|l| ExogenousKind::of_label(l).is_some_and(|k| kinds.contains(&k)))
                .collect();
            if keep.is_empty() {
                return Err(VarxError::InvalidSpec(format!(
                    "variant {variant} selects no exogenous series"
                )));
            }
            x.select(&keep).map(Some)
        }
    }
}

/// A model chosen by rolling validation and refit on train plus validation.
#[derive(Debug, Clone)]
pub struct FittedVariant {
    pub variant: Variant,
    pub lags: Lags,
    pub cv: CvResult,
    pub model: VarxModel,
}

fn effective_options(options: &FitOptions, has_x: bool) -> FitOptions {
    let mut out = *options;
    if !has_x {
        out.lags = Lags::new(options.lags.p, 0);
    }
    out
}

/// Fit `y` (and `x`) at a fixed penalty and wrap the result as a model.
pub fn fit_at(
    y: &MultivariateSeries,
    x: Option<&MultivariateSeries>,
    variant: Variant,
    lambda: f64,
    options: &FitOptions,
    seasonal: Option<SeasonalTransform>,
) -> Result<VarxModel> {
    let x = x.filter(|_| variant.uses_exogenous());
    let options = effective_options(options, x.is_some());
    let x = x.map(|x| x.restrict_to(y.index())).transpose()?;
    let problem = build_design(y, x.as_ref(), options.lags, options.design)?;
    let result = fit(&problem, lambda, &options.solver, None)?;
    if !result.converged {
        log::warn!("solver did not converge at lambda={lambda} (variant {variant})");
    }
    let context = ModelContext {
        response_labels: y.labels().to_vec(),
        exogenous_labels: x.map(|x| x.labels().to_vec()).unwrap_or_default(),
        seasonal,
        variant,
    };
    VarxModel::from_solution(&result, problem.layout().expect("built from series"), context)
}

/// Choose the penalty for `variant` by rolling one-step validation.
///
/// The grid runs from the train problem's `lambda_max` down by
/// `config.grid_ratio`. Returns the lag orders actually used (no exogenous lag
/// without exogenous data) and the validation scores.
pub fn validate_variant(
    train: &MultivariateSeries,
    validation: &MultivariateSeries,
    x: Option<&MultivariateSeries>,
    variant: Variant,
    config: &EvaluationConfig,
) -> Result<(Lags, CvResult)> {
    let x = x.filter(|_| variant.uses_exogenous());
    if variant.uses_exogenous() && x.is_none() {
        return Err(VarxError::InvalidSpec(format!("variant {variant} needs exogenous data")));
    }
    let options = effective_options(&config.fit, x.is_some());
    let x_train = x.map(|x| x.restrict_to(train.index())).transpose()?;
    let train_problem = build_design(train, x_train.as_ref(), options.lags, options.design)?;
    let grid = lambda_grid(&train_problem, config.grid_size, config.grid_ratio)?;
    let cv = rolling_one_step_cv(train, validation, x, &grid, &options)?;
    log::info!(
        "variant {variant}: selected lambda={} (index {} of {})",
        cv.selected_lambda,
        cv.selected_index,
        grid.len()
    );
    Ok((options.lags, cv))
}

/// Select the penalty on `validation`, then refit on train plus validation.
///
/// `x` must already be restricted to the rows of `variant` (see
/// [`select_exogenous`]) and cover both periods; it is ignored for variant D.
pub fn fit_variant(
    train: &MultivariateSeries,
    validation: &MultivariateSeries,
    x: Option<&MultivariateSeries>,
    variant: Variant,
    config: &EvaluationConfig,
    seasonal: Option<SeasonalTransform>,
) -> Result<FittedVariant> {
    let (lags, cv) = validate_variant(train, validation, x, variant, config)?;
    let history = MultivariateSeries::concat_time(&[train, validation])?;
    let model = fit_at(&history, x, variant, cv.selected_lambda, &config.fit, seasonal)?;
    Ok(FittedVariant {
        variant,
        lags,
        cv,
        model,
    })
}

/// Full comparison: seasonal differencing, thirds split, validation of the
/// penalty, refit, and rolling one-step test forecasts for each variant.
///
/// `x_raw` must cover every week of `y_raw`. Duplicate variants are dropped.
pub fn run_variants(
    y_raw: &MultivariateSeries,
    x_raw: Option<&MultivariateSeries>,
    variants: &[Variant],
    config: &EvaluationConfig,
) -> Result<EvaluationReport> {
    let mut unique = variants.to_vec();
    unique.sort();
    unique.dedup();
    if unique.len() != variants.len() {
        log::warn!("duplicate variants ignored");
    }
    if unique.is_empty() {
        return Err(VarxError::InvalidSpec("no variants requested".into()));
    }

    let (dy, seasonal) = seasonal_difference(y_raw, config.period)?;
    let dx = match x_raw {
        Some(x) => Some(seasonal_difference(&x.restrict_to(y_raw.index())?, config.period)?.0),
        None => None,
    };
    let split = split_thirds(&dy)?;
    let test_index = *split.test.index();
    let level_actual = y_raw.restrict_to(&test_index)?;

    let mut outcomes = Vec::with_capacity(unique.len());
    for &variant in &unique {
        let xs = match &dx {
            Some(dx) => select_exogenous(dx, variant)?,
            None if variant.uses_exogenous() => {
                return Err(VarxError::InvalidSpec(format!("variant {variant} needs exogenous data")))
            }
            None => None,
        };
        let fitted = fit_variant(
            &split.train,
            &split.validation,
            xs.as_ref(),
            variant,
            config,
            Some(seasonal.clone()),
        )?;
        let predicted = rolling_test_forecast(&fitted.model, &dy, xs.as_ref(), &test_index)?;
        let rmse_diff = rmse(&predicted, &split.test)?;

        let mut level = Array2::zeros(predicted.values().dim());
        for t in 0..test_index.len() {
            let offset = y_raw
                .index()
                .position(test_index.week(t))
                .expect("test weeks lie inside the raw series");
            let value = fitted
                .model
                .forecast_level(predicted.values().column(t), offset, y_raw)?;
            level.column_mut(t).assign(&value);
        }
        let level_predicted = MultivariateSeries::new(y_raw.labels().to_vec(), test_index, level)?;
        let rmse_level = rmse(&level_predicted, &level_actual)?;

        outcomes.push(VariantOutcome {
            variant,
            lags: fitted.lags,
            cv: fitted.cv,
            model: fitted.model,
            predicted,
            actual: split.test.clone(),
            level_predicted,
            level_actual: level_actual.clone(),
            rmse_diff,
            rmse_level,
        });
    }
    Ok(EvaluationReport {
        config: *config,
        labels: y_raw.labels().to_vec(),
        outcomes,
    })
}
