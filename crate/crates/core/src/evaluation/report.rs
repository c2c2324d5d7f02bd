use ndarray::Array1;
use serde_json::{json, Map, Value};

use super::cv::CvResult;
use super::{EvaluationConfig, Scale};
use crate::design::Lags;
use crate::error::Result;
use crate::ingestion::{census_order, format_week};
use crate::model::{Variant, VarxModel};
use crate::timeseries::MultivariateSeries;

/// Everything produced for one variant.
#[derive(Debug, Clone)]
pub struct VariantOutcome {
    pub variant: Variant,
    pub lags: Lags,
    pub cv: CvResult,
    pub model: VarxModel,
    /// One-step test forecasts on the differenced scale.
    pub predicted: MultivariateSeries,
    pub actual: MultivariateSeries,
    pub level_predicted: MultivariateSeries,
    pub level_actual: MultivariateSeries,
    pub rmse_diff: Array1<f64>,
    pub rmse_level: Array1<f64>,
}

impl VariantOutcome {
    pub fn rmse(&self, scale: Scale) -> &Array1<f64> {
        match scale {
            Scale::Diff => &self.rmse_diff,
            Scale::Level => &self.rmse_level,
        }
    }

    fn series(&self, scale: Scale) -> (&MultivariateSeries, &MultivariateSeries) {
        match scale {
            Scale::Diff => (&self.actual, &self.predicted),
            Scale::Level => (&self.level_actual, &self.level_predicted),
        }
    }
}

/// Results of a multi-variant run, one outcome per variant in A..D order.
#[derive(Debug, Clone)]
pub struct EvaluationReport {
    pub config: EvaluationConfig,
    /// Response labels in the order of every RMSE vector.
    pub labels: Vec<String>,
    pub outcomes: Vec<VariantOutcome>,
}

fn csv_string(rows: Vec<Vec<String>>) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.write_record(&row).map_err(std::io::Error::from)?;
    }
    let bytes = writer.into_inner().map_err(|e| e.into_error())?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// One row per (variant, grid point): penalty, validation score, train-fit
/// nonzeros, and whether it was selected.
pub fn lambda_log_csv<'a>(results: impl IntoIterator<Item = (Variant, &'a CvResult)>) -> Result<String> {
    let mut rows = vec![["variant", "index", "lambda", "score", "nonzeros", "selected"]
        .map(String::from)
        .to_vec()];
    for (variant, cv) in results {
        for (i, (lambda, score)) in cv.grid.iter().zip(&cv.scores).enumerate() {
            rows.push(vec![
                variant.to_string(),
                i.to_string(),
                lambda.to_string(),
                score.to_string(),
                cv.nonzeros[i].to_string(),
                (i == cv.selected_index).to_string(),
            ]);
        }
    }
    csv_string(rows)
}

impl EvaluationReport {
    pub fn outcome(&self, variant: Variant) -> Option<&VariantOutcome> {
        self.outcomes.iter().find(|o| o.variant == variant)
    }

    pub fn variants(&self) -> Vec<Variant> {
        self.outcomes.iter().map(|o| o.variant).collect()
    }

    /// Row order for tables: canonical division order when applicable.
    pub fn row_order(&self) -> Vec<usize> {
        census_order(&self.labels)
    }

    /// RMSE table: one row per region, one column per variant.
    pub fn to_csv(&self, scale: Scale) -> Result<String> {
        let mut rows = vec![std::iter::once("region".to_string())
            .chain(self.outcomes.iter().map(|o| o.variant.to_string()))
            .collect()];
        for i in self.row_order() {
            let mut row = vec![self.labels[i].clone()];
            row.extend(self.outcomes.iter().map(|o| o.rmse(scale)[i].to_string()));
            rows.push(row);
        }
        csv_string(rows)
    }

    /// Test forecasts of one variant in long form.
    pub fn forecasts_csv(&self, variant: Variant, scale: Scale) -> Option<Result<String>> {
        let outcome = self.outcome(variant)?;
        let (actual, predicted) = outcome.series(scale);
        let mut rows = vec![vec!["week".into(), "region".into(), "actual".into(), "predicted".into()]];
        for t in 0..actual.len() {
            let week = format_week(actual.index().week(t));
            for i in self.row_order() {
                rows.push(vec![
                    week.clone(),
                    self.labels[i].clone(),
                    actual.values()[[i, t]].to_string(),
                    predicted.values()[[i, t]].to_string(),
                ]);
            }
        }
        Some(csv_string(rows))
    }

    /// Validation score along the penalty grid for every variant.
    pub fn lambda_log_csv(&self) -> Result<String> {
        lambda_log_csv(self.outcomes.iter().map(|o| (o.variant, &o.cv)))
    }

    /// Structured summary; `config` is embedded verbatim.
    pub fn to_json(&self, scale: Scale, config: Value) -> Value {
        let order = self.row_order();
        let mut variants = Map::new();
        for o in &self.outcomes {
            let mut per_region = Map::new();
            for &i in &order {
                per_region.insert(self.labels[i].clone(), json!(o.rmse(scale)[i]));
            }
            variants.insert(
                o.variant.to_string(),
                json!({
                    "description": o.variant.description(),
                    "p": o.lags.p,
                    "s": o.lags.s,
                    "lambda": o.cv.selected_lambda,
                    "lambda_index": o.cv.selected_index,
                    "validation_mse": o.cv.scores[o.cv.selected_index],
                    "nonzeros": o.model.nonzeros(),
                    "rmse": Value::Object(per_region),
                }),
            );
        }
        json!({
            "scale": scale.to_string(),
            "regions": order.iter().map(|&i| self.labels[i].clone()).collect::<Vec<_>>(),
            "test_weeks": self.outcomes.first().map(|o| o.actual.len()).unwrap_or(0),
            "variants": Value::Object(variants),
            "config": config,
        })
    }
}
