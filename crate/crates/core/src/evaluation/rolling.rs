use ndarray::{s, Array1, Array2};

use crate::error::{Result, VarxError};
use crate::model::VarxModel;
use crate::timeseries::{MultivariateSeries, TimeIndex};

/// One-step forecasts for every week of `test` with the model held fixed.
///
/// `y` (and `x`, when the model uses exogenous lags) must cover the weeks
/// before `test` as well as `test` itself. Each forecast only sees columns
/// strictly before its target week.
pub fn rolling_test_forecast(
    model: &VarxModel,
    y: &MultivariateSeries,
    x: Option<&MultivariateSeries>,
    test: &TimeIndex,
) -> Result<MultivariateSeries> {
    if test.is_empty() {
        return Err(VarxError::InsufficientHistory("empty test period".into()));
    }
    if y.labels() != model.response_labels() {
        return Err(VarxError::IndexMismatch("response labels differ from the model".into()));
    }
    let first = y
        .index()
        .position(test.start())
        .ok_or_else(|| VarxError::IndexMismatch(format!("test week {} not in history", test.start())))?;
    if first + test.len() > y.len() {
        return Err(VarxError::IndexMismatch("test period runs past the response history".into()));
    }
    let lags = model.lags();
    if first < lags.max() {
        return Err(VarxError::InsufficientHistory(format!(
            "{first} weeks before the test period, need {}",
            lags.max()
        )));
    }
    let x = match (x, lags.s) {
        (_, 0) => None,
        (Some(x), _) => {
            if x.labels() != model.exogenous_labels() {
                return Err(VarxError::IndexMismatch("exogenous labels differ from the model".into()));
            }
            Some(x.restrict_to(y.index())?)
        }
        (None, _) => return Err(VarxError::InsufficientHistory("exogenous history required".into())),
    };

    let mut out = Array2::zeros((model.k(), test.len()));
    for (col, w) in (first..first + test.len()).enumerate() {
        let y_past = y.values().slice_move(s![.., ..w]);
        let x_past = x.as_ref().map(|x| x.values().slice_move(s![.., ..w]));
        out.column_mut(col).assign(&model.forecast_one_step(y_past, x_past)?);
    }
    MultivariateSeries::new(y.labels().to_vec(), *test, out)
}

/// Root mean squared error per series over the shared weeks.
pub fn rmse(predicted: &MultivariateSeries, actual: &MultivariateSeries) -> Result<Array1<f64>> {
    if predicted.labels() != actual.labels() || predicted.index() != actual.index() {
        return Err(VarxError::IndexMismatch("predictions and actuals are not aligned".into()));
    }
    if predicted.is_empty() {
        return Err(VarxError::IndexMismatch("no weeks to score".into()));
    }
    let diff = &predicted.values() - &actual.values();
    Ok(diff.map_axis(ndarray::Axis(1), |row| {
        (row.iter().map(|e| e * e).sum::<f64>() / row.len() as f64).sqrt()
    }))
}
