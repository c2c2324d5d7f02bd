use ndarray::{concatenate, Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::VarxModel;
use crate::design::predictor_row;
use crate::error::{Result, VarxError};
use crate::timeseries::{invert_seasonal_difference, MultivariateSeries};

/// How exogenous inputs are filled in beyond the last observed week.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum ExogenousPolicy {
    /// Repeat the last observed exogenous week.
    #[default]
    HoldLast,
    /// Use zeros (no change, on the differenced scale).
    Zeros,
    /// Use the given future weeks, m × (h − 1) or wider.
    Provided(Array2<f64>),
}

impl VarxModel {
    fn check_history(&self, y: &ArrayView2<'_, f64>, x: Option<&ArrayView2<'_, f64>>) -> Result<()> {
        if y.nrows() != self.k() {
            return Err(VarxError::ShapeMismatch(format!(
                "response history has {} series, model has {}",
                y.nrows(),
                self.k()
            )));
        }
        if self.lags().s > 0 {
            match x {
                Some(x) if x.nrows() != self.m() => Err(VarxError::ShapeMismatch(format!(
                    "exogenous history has {} series, model has {}",
                    x.nrows(),
                    self.m()
                ))),
                Some(_) => Ok(()),
                None => Err(VarxError::InsufficientHistory("exogenous history required".into())),
            }
        } else {
            Ok(())
        }
    }

    /// Forecast the week after the histories end.
    ///
    /// Histories are chronological (last column = most recent) on the scale
    /// the model was fitted on and must hold at least `p` (and `s`) weeks.
    pub fn forecast_one_step(
        &self,
        y_history: ArrayView2<'_, f64>,
        x_history: Option<ArrayView2<'_, f64>>,
    ) -> Result<Array1<f64>> {
        self.check_history(&y_history, x_history.as_ref())?;
        let x = if self.lags().s > 0 { x_history } else { None };
        let row = predictor_row(y_history, x, self.lags())?;
        let centered = &row - self.predictor_means();
        Ok(self.response_means() + &self.stacked().t().dot(&centered))
    }

    /// Recursive `h`-week forecast; predictions are fed back as observations.
    /// Returns a k × h matrix.
    pub fn forecast_h_step(
        &self,
        y_history: ArrayView2<'_, f64>,
        x_history: Option<ArrayView2<'_, f64>>,
        h: usize,
        policy: &ExogenousPolicy,
    ) -> Result<Array2<f64>> {
        if h == 0 {
            return Err(VarxError::InsufficientHistory("horizon must be >= 1".into()));
        }
        self.check_history(&y_history, x_history.as_ref())?;
        let uses_x = self.lags().s > 0;
        if uses_x && h > 1 {
            if let ExogenousPolicy::Provided(f) = policy {
                if f.nrows() != self.m() || f.ncols() < h - 1 {
                    return Err(VarxError::MissingFutures);
                }
            }
        }
        let mut y = y_history.to_owned();
        let mut x = x_history.filter(|_| uses_x).map(|x| x.to_owned());
        let mut out = Array2::zeros((self.k(), h));
        for step in 0..h {
            let next = self.forecast_one_step(y.view(), x.as_ref().map(|x| x.view()))?;
            out.column_mut(step).assign(&next);
            if step + 1 == h {
                break;
            }
            y = append_column(&y, next.view());
            if let Some(xs) = x.as_mut() {
                let future = match policy {
                    ExogenousPolicy::HoldLast => xs.column(xs.ncols() - 1).to_owned(),
                    ExogenousPolicy::Zeros => Array1::zeros(self.m()),
                    ExogenousPolicy::Provided(f) => f.column(step).to_owned(),
                };
                *xs = append_column(xs, future.view());
            }
        }
        Ok(out)
    }

    /// Convert a differenced forecast for week `week_offset` (counted from the
    /// start of the raw series the model's seasonal head came from) back to the
    /// original scale.
    pub fn forecast_level(
        &self,
        diff_forecast: ArrayView1<'_, f64>,
        week_offset: usize,
        raw_history: &MultivariateSeries,
    ) -> Result<Array1<f64>> {
        let seasonal = self
            .seasonal()
            .ok_or_else(|| VarxError::MissingHistory("model has no seasonal head".into()))?;
        invert_seasonal_difference(diff_forecast, week_offset, seasonal, raw_history)
    }
}

fn append_column(m: &Array2<f64>, col: ArrayView1<'_, f64>) -> Array2<f64> {
    let col = col.insert_axis(Axis(1));
    concatenate(Axis(1), &[m.view(), col]).expect("row counts match")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::Lags;
    use crate::ingestion::{generate_synthetic_varx, SyntheticSpec};
    use crate::model::Variant;
    use crate::timeseries::{seasonal_difference, MultivariateSeries};
    use chrono::NaiveDate;
    use ndarray::{array, s};
    use proptest::prelude::*;

    fn ar1(theta: f64) -> VarxModel {
        VarxModel::from_coefficients(vec![array![[theta]]], vec![], vec!["y".into()], vec![], Variant::D).unwrap()
    }

    fn noise_free() -> (crate::ingestion::SyntheticData, VarxModel) {
        let d = generate_synthetic_varx(&SyntheticSpec {
            k: 3,
            m: 2,
            weeks: 60,
            noise_std: 0.0,
            sparsity: 0.6,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let model = VarxModel::from_coefficients(
            d.theta.clone(),
            d.beta.clone(),
            d.y.labels().to_vec(),
            d.x.labels().to_vec(),
            Variant::C,
        )
        .unwrap();
        (d, model)
    }

    #[test]
    fn scalar_multiply() {
        let f = ar1(0.5).forecast_one_step(array![[4.0]].view(), None).unwrap();
        assert_eq!(f[0], 2.0);
    }

    #[test]
    fn zero_model_forecasts_the_mean() {
        let model = ar1(0.0)
            .with_means(array![3.5], array![1.0])
            .unwrap();
        let f = model.forecast_one_step(array![[10.0, -4.0]].view(), None).unwrap();
        assert_eq!(f[0], 3.5);
        let h = model
            .forecast_h_step(array![[10.0]].view(), None, 2, &ExogenousPolicy::HoldLast)
            .unwrap();
        assert_eq!(h, array![[3.5, 3.5]]);
    }

    #[test]
    fn too_little_history() {
        let model = VarxModel::from_coefficients(
            vec![array![[0.1]], array![[0.1]]],
            vec![],
            vec!["y".into()],
            vec![],
            Variant::D,
        )
        .unwrap();
        assert!(matches!(
            model.forecast_one_step(array![[1.0]].view(), None),
            Err(VarxError::InsufficientHistory(_))
        ));
    }

    #[test]
    fn true_model_reproduces_noise_free_data() {
        let (d, model) = noise_free();
        let (y, x) = (d.y.values(), d.x.values());
        for t in 2..60 {
            let f = model
                .forecast_one_step(y.slice(s![.., ..t]), Some(x.slice(s![.., ..t])))
                .unwrap();
            let err = (&f - &y.column(t)).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err <= 1e-8, "week {t}: {err}");
        }
    }

    #[test]
    fn two_step_with_provided_futures() {
        let (d, model) = noise_free();
        let (y, x) = (d.y.values(), d.x.values());
        for t in [10, 30, 57] {
            let futures = x.slice(s![.., t..t + 1]).to_owned();
            let h = model
                .forecast_h_step(
                    y.slice(s![.., ..t]),
                    Some(x.slice(s![.., ..t])),
                    2,
                    &ExogenousPolicy::Provided(futures),
                )
                .unwrap();
            let err = (&h - &y.slice(s![.., t..t + 2])).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err <= 1e-8, "{err}");
        }
        assert!(matches!(
            model.forecast_h_step(y.slice(s![.., ..10]), Some(x.slice(s![.., ..10])), 3, &ExogenousPolicy::Provided(Array2::zeros((2, 1)))),
            Err(VarxError::MissingFutures)
        ));
    }

    #[test]
    fn one_step_horizon_matches_one_step() {
        let (d, model) = noise_free();
        let (y, x) = (d.y.values(), d.x.values());
        let one = model.forecast_one_step(y.slice(s![.., ..20]), Some(x.slice(s![.., ..20]))).unwrap();
        let h = model
            .forecast_h_step(y.slice(s![.., ..20]), Some(x.slice(s![.., ..20])), 1, &ExogenousPolicy::Zeros)
            .unwrap();
        assert_eq!(h.column(0), one);
    }

    #[test]
    fn level_forecast() {
        let start = NaiveDate::from_ymd_opt(2013, 1, 5).unwrap();
        let raw = MultivariateSeries::from_rows(vec!["y"], start, &[vec![10.0, 20.0, 13.0, 26.0, 16.0]]).unwrap();
        let (_, tr) = seasonal_difference(&raw, 2).unwrap();
        let model = ar1(0.5).with_seasonal(tr).unwrap();
        // zero change: same week one period ago
        let level = model.forecast_level(array![0.0].view(), 5, &raw).unwrap();
        assert_eq!(level[0], 26.0);
        // 16 + 2.5 by hand
        let level = model.forecast_level(array![2.5].view(), 6, &raw).unwrap();
        assert_eq!(level[0], 18.5);
        assert!(matches!(
            model.forecast_level(array![0.0].view(), 1, &raw),
            Err(VarxError::MissingHistory(_))
        ));
        assert!(matches!(
            ar1(0.5).forecast_level(array![0.0].view(), 5, &raw),
            Err(VarxError::MissingHistory(_))
        ));
    }

    proptest! {
        #[test]
        fn forecast_is_linear_without_means(alpha in -5.0f64..5.0, seed in 0u64..100) {
            let d = generate_synthetic_varx(&SyntheticSpec { k: 3, m: 2, weeks: 10, seed, ..SyntheticSpec::default() }).unwrap();
            let model = VarxModel::from_coefficients(d.theta.clone(), d.beta.clone(), d.y.labels().to_vec(), d.x.labels().to_vec(), Variant::C).unwrap();
            prop_assert_eq!(model.lags(), Lags::new(2, 1));
            let (y, x) = (d.y.values(), d.x.values());
            let base = model.forecast_one_step(y, Some(x)).unwrap();
            let scaled = model.forecast_one_step((&y * alpha).view(), Some((&x * alpha).view())).unwrap();
            for (a, b) in scaled.iter().zip(base.iter()) {
                prop_assert!((a - alpha * b).abs() <= 1e-12 * (1.0 + b.abs() * alpha.abs()));
            }
        }
    }
}
