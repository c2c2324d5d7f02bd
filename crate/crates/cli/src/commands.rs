use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use chrono::Duration;
use ndarray::Array2;
use serde_json::json;
use varx_core::evaluation::{fit_at, lambda_log_csv, run_variants, select_exogenous, validate_variant};
use varx_core::ingestion::{
    census_order, format_week, generate_synthetic_varx, write_weekly_csv, ExogenousKind, RegionMap,
    CENSUS_REGIONS,
};
use varx_core::model::{ExogenousPolicy, Variant, VarxModel};
use varx_core::timeseries::{seasonal_difference, split_thirds, MultivariateSeries, SeasonalTransform};

use crate::config::RunConfig;
use crate::inputs::{self, Inputs};
use crate::output::Staging;
use crate::svg;

/// Constant added to synthetic claims so every state count is positive.
const SYNTH_BASELINE: f64 = 1000.0;
/// Weekly search total of every synthetic region.
const SYNTH_TOTAL: f64 = 1.0e6;

struct Differenced {
    claims: MultivariateSeries,
    seasonal: SeasonalTransform,
    exogenous: Option<MultivariateSeries>,
}

fn difference(inputs: &Inputs, period: usize) -> Result<Differenced> {
    let (claims, seasonal) = seasonal_difference(&inputs.claims, period).context("seasonal differencing of claims")?;
    let exogenous = match &inputs.exogenous {
        Some(x) => Some(seasonal_difference(x, period).context("seasonal differencing of signals")?.0),
        None => None,
    };
    Ok(Differenced {
        claims,
        seasonal,
        exogenous,
    })
}

fn variant_exogenous(data: &Differenced, variant: Variant) -> Result<Option<MultivariateSeries>> {
    match &data.exogenous {
        Some(x) => Ok(select_exogenous(x, variant)?),
        None if variant.uses_exogenous() => bail!("variant {variant} needs exogenous signals"),
        None => Ok(None),
    }
}

fn csv_table(header: Vec<String>, rows: impl IntoIterator<Item = Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    writer.write_record(&header)?;
    for row in rows {
        writer.write_record(&row)?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

fn load_model(config: &RunConfig) -> Result<VarxModel> {
    let path = config
        .model
        .as_deref()
        .context("MissingModel: no model file given (--model)")?;
    let text = fs::read_to_string(path)
        .with_context(|| format!("MissingModel: cannot read model file `{}`", path.display()))?;
    VarxModel::from_json(&text)
        .with_context(|| format!("MissingModel: `{}` is not a usable model file", path.display()))
}

pub fn evaluate(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let need_exogenous = config.variants.iter().any(|v| v.uses_exogenous());
    let inputs = inputs::load(config, need_exogenous).context("loading inputs")?;
    let report = run_variants(
        &inputs.claims,
        inputs.exogenous.as_ref(),
        &config.variants,
        &config.evaluation(),
    )
    .context("evaluation")?;

    let record = config.record("evaluate");
    let mut staging = Staging::new(&config.out)?;
    staging.write_csv("report.csv", &record, &report.to_csv(config.scale)?)?;
    staging.write_json("report.json", &report.to_json(config.scale, record.clone()))?;
    staging.write_csv("lambda_selection.csv", &record, &report.lambda_log_csv()?)?;
    for outcome in &report.outcomes {
        let v = outcome.variant;
        let forecasts = report.forecasts_csv(v, config.scale).expect("variant was evaluated")?;
        staging.write_csv(&format!("forecasts_{v}.csv"), &record, &forecasts)?;
        staging.write(&format!("model_{v}.json"), outcome.model.to_json(record.clone())? + "\n")?;
    }
    staging.commit()
}

pub fn cv(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let need_exogenous = config.variants.iter().any(|v| v.uses_exogenous());
    let inputs = inputs::load(config, need_exogenous).context("loading inputs")?;
    let data = difference(&inputs, config.period)?;
    let split = split_thirds(&data.claims).context("splitting weeks")?;
    let eval = config.evaluation();

    let mut variants = config.variants.clone();
    variants.sort();
    variants.dedup();
    let mut results = Vec::with_capacity(variants.len());
    for &variant in &variants {
        let x = variant_exogenous(&data, variant)?;
        let (lags, cv) = validate_variant(&split.train, &split.validation, x.as_ref(), variant, &eval)
            .with_context(|| format!("validating variant {variant}"))?;
        results.push((variant, lags, cv));
    }

    let record = config.record("cv");
    let summary: serde_json::Map<String, serde_json::Value> = results
        .iter()
        .map(|(v, lags, cv)| {
            (
                v.to_string(),
                json!({
                    "p": lags.p,
                    "s": lags.s,
                    "selected_lambda": cv.selected_lambda,
                    "selected_index": cv.selected_index,
                    "grid": cv.grid,
                    "scores": cv.scores,
                    "nonzeros": cv.nonzeros,
                }),
            )
        })
        .collect();
    let mut staging = Staging::new(&config.out)?;
    let log = lambda_log_csv(results.iter().map(|(v, _, cv)| (*v, cv)))?;
    staging.write_csv("lambda_selection.csv", &record, &log)?;
    staging.write_json("cv.json", &json!({ "variants": summary, "config": record }))?;
    staging.commit()
}

pub fn fit(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let variant = config.variant;
    let inputs = inputs::load(config, variant.uses_exogenous()).context("loading inputs")?;
    let data = difference(&inputs, config.period)?;
    let split = split_thirds(&data.claims).context("splitting weeks")?;
    let eval = config.evaluation();
    let x = variant_exogenous(&data, variant)?;
    let (_, cv) = validate_variant(&split.train, &split.validation, x.as_ref(), variant, &eval)
        .context("validating the penalty")?;
    let model = fit_at(
        &data.claims,
        x.as_ref(),
        variant,
        cv.selected_lambda,
        &eval.fit,
        Some(data.seasonal.clone()),
    )
    .context("fitting on all weeks")?;

    let record = config.record("fit");
    let mut staging = Staging::new(&config.out)?;
    staging.write("model.json", model.to_json(record.clone())? + "\n")?;
    staging.write_csv("lambda_selection.csv", &record, &lambda_log_csv([(variant, &cv)])?)?;
    staging.commit()
}

pub fn forecast(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = load_model(config)?;
    let uses_x = model.lags().s > 0;
    let inputs = inputs::load(config, uses_x).context("loading inputs")?;
    if inputs.claims.labels() != model.response_labels() {
        bail!("claims regions do not match the model's response series");
    }
    let seasonal = model.seasonal().context("model has no seasonal head; cannot forecast raw data")?;
    let data = difference(&inputs, seasonal.period())?;
    let x = match (&data.exogenous, uses_x) {
        (Some(x), true) => Some(x.select(model.exogenous_labels()).context("selecting the model's signals")?),
        _ => None,
    };
    let diff = model
        .forecast_h_step(
            data.claims.values(),
            x.as_ref().map(MultivariateSeries::values),
            config.horizon,
            &ExogenousPolicy::HoldLast,
        )
        .context("forecasting")?;

    let head_index = seasonal.head().index();
    // first week after the data
    let next = inputs.claims.index().end();
    let mut level = Array2::zeros(diff.dim());
    let mut weeks = Vec::with_capacity(config.horizon);
    for step in 0..config.horizon {
        let week = next + Duration::weeks(step as i64);
        let offset = head_index
            .offset_of(week)
            .filter(|&o| o >= 0)
            .context("forecast week precedes the model's seasonal head")? as usize;
        let value = model
            .forecast_level(diff.column(step), offset, &inputs.claims)
            .with_context(|| format!("undoing the seasonal difference for {week}"))?;
        level.column_mut(step).assign(&value);
        weeks.push(week);
    }

    let labels = model.response_labels();
    let order = census_order(labels);
    let rows = weeks.iter().enumerate().flat_map(|(step, week)| {
        let (diff, level) = (&diff, &level);
        order.iter().map(move |&i| {
            vec![
                format_week(*week),
                labels[i].clone(),
                (step + 1).to_string(),
                diff[[i, step]].to_string(),
                level[[i, step]].to_string(),
            ]
        })
    });
    let header = ["week", "region", "step", "diff", "level"].map(String::from).to_vec();
    let body = csv_table(header, rows)?;

    let record = config.record("forecast");
    let mut staging = Staging::new(&config.out)?;
    staging.write_csv("forecast.csv", &record, &body)?;
    staging.commit()
}

fn matrix_csv(row_labels: &[String], col_labels: &[String], m: &Array2<f64>) -> Result<String> {
    let header = std::iter::once("region".to_string()).chain(col_labels.iter().cloned()).collect();
    let rows = row_labels.iter().zip(m.rows()).map(|(label, row)| {
        std::iter::once(label.clone())
            .chain(row.iter().map(|v| v.to_string()))
            .collect()
    });
    csv_table(header, rows)
}

pub fn sparsity(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let model = load_model(config)?;
    let pattern = model.sparsity_pattern(config.threshold);
    let record = config.record("sparsity");
    let mut staging = Staging::new(&config.out)?;
    for (i, m) in pattern.theta.iter().enumerate() {
        let body = matrix_csv(&pattern.row_labels, &pattern.theta_labels, m)?;
        staging.write_csv(&format!("theta_lag{}.csv", i + 1), &record, &body)?;
    }
    for (j, m) in pattern.beta.iter().enumerate() {
        let body = matrix_csv(&pattern.row_labels, &pattern.beta_labels, m)?;
        staging.write_csv(&format!("beta_lag{}.csv", j + 1), &record, &body)?;
    }
    if config.svg {
        let panels: Vec<(String, &Array2<f64>, &[String])> = pattern
            .theta
            .iter()
            .enumerate()
            .map(|(i, m)| (format!("theta lag {}", i + 1), m, pattern.theta_labels.as_slice()))
            .chain(
                pattern
                    .beta
                    .iter()
                    .enumerate()
                    .map(|(j, m)| (format!("beta lag {}", j + 1), m, pattern.beta_labels.as_slice())),
            )
            .collect();
        staging.write("sparsity.svg", svg::heatmap(&panels, &pattern.row_labels, &format!("config={record}")))?;
    }
    staging.write_json(
        "sparsity.json",
        &json!({
            "lambda": model.lambda(),
            "threshold": config.threshold,
            "theta_nonzeros": pattern.theta_nonzeros,
            "beta_nonzeros": pattern.beta_nonzeros,
            "total_nonzeros": pattern.total_nonzeros(),
            "config": record,
        }),
    )?;
    staging.commit()
}

fn to_csv_string(series: &MultivariateSeries) -> Result<String> {
    let mut buf = Vec::new();
    write_weekly_csv(series, &mut buf)?;
    Ok(String::from_utf8(buf)?)
}

/// State-level rows built from regional rows by `per_state(region_row_value, n_members)`.
fn spread_to_states(
    regional: &MultivariateSeries,
    members: &[Vec<String>],
    suffix: Option<&str>,
    per_state: impl Fn(f64, usize) -> f64,
) -> Result<MultivariateSeries> {
    let mut labels = Vec::new();
    let mut rows = Vec::new();
    for (r, states) in members.iter().enumerate() {
        let values = regional.values();
        let row = values.row(r);
        for state in states {
            labels.push(match suffix {
                Some(s) => format!("{state}:{s}"),
                None => state.clone(),
            });
            rows.push(row.iter().map(|&v| per_state(v, states.len())).collect::<Vec<f64>>());
        }
    }
    Ok(MultivariateSeries::from_rows(labels, regional.index().start(), &rows)?)
}

pub fn synth(config: &RunConfig) -> Result<Vec<PathBuf>> {
    let spec = config.synthetic_spec();
    let data = generate_synthetic_varx(&spec).context("generating synthetic data")?;
    let epsilon = config.epsilon;

    let map = RegionMap::census_default();
    let members: Vec<Vec<String>> = CENSUS_REGIONS
        .iter()
        .map(|region| {
            map.states()
                .filter(|(s, r)| r == region && s.len() == 2)
                .map(|(s, _)| s.to_string())
                .collect()
        })
        .collect();

    let claims = spread_to_states(&data.y, &members, None, |v, n| (v + SYNTH_BASELINE) / n as f64)?;
    let kind_rows = |kind: ExogenousKind| -> Result<MultivariateSeries> {
        let labels: Vec<&String> = data
            .x
            .labels()
            .iter()
            .filter(|l| ExogenousKind::of_label(l) == Some(kind))
            .collect();
        let rows = data.x.select(&labels)?;
        spread_to_states(&rows, &members, Some(&format!("synthetic {}", kind.suffix())), |v, _| {
            v.exp() * SYNTH_TOTAL - epsilon
        })
    };
    let queries = kind_rows(ExogenousKind::Query)?;
    let clicks = kind_rows(ExogenousKind::Url)?;
    let totals = MultivariateSeries::from_rows(
        CENSUS_REGIONS.to_vec(),
        data.y.index().start(),
        &vec![vec![SYNTH_TOTAL; data.y.len()]; CENSUS_REGIONS.len()],
    )?;

    let record = config.record("synth");
    let matrices = |ms: &[Array2<f64>]| -> Vec<Vec<Vec<f64>>> {
        ms.iter().map(|m| m.rows().into_iter().map(|r| r.to_vec()).collect()).collect()
    };
    let truth = json!({
        "response_labels": data.y.labels(),
        "exogenous_labels": data.x.labels(),
        "theta": matrices(&data.theta),
        "beta": matrices(&data.beta),
        "claims_baseline": SYNTH_BASELINE,
        "search_total": SYNTH_TOTAL,
        "spec": spec,
        "config": record,
    });

    let mut staging = Staging::new(&config.out)?;
    staging.write_csv("claims.csv", &record, &to_csv_string(&claims)?)?;
    staging.write_csv("queries.csv", &record, &to_csv_string(&queries)?)?;
    staging.write_csv("clicks.csv", &record, &to_csv_string(&clicks)?)?;
    staging.write_csv("totals.csv", &record, &to_csv_string(&totals)?)?;
    staging.write_json("truth.json", &truth)?;
    staging.commit()
}
