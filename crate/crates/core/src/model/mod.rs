//! The fitted VAR-X model.

mod forecast;
mod io;
mod sparsity;

pub use forecast::ExogenousPolicy;
pub use io::{ModelFile, MODEL_SCHEMA_VERSION};
pub use sparsity::SparsityPattern;

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, Axis};
use serde::{Deserialize, Serialize};

use crate::design::{ColumnLayout, Lags};
use crate::error::{Result, VarxError};
use crate::ingestion::ExogenousKind;
use crate::solver::SolverResult;
use crate::timeseries::SeasonalTransform;

/// Which exogenous signals a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variant {
    /// URL click signals only.
    A,
    /// Query volume signals only.
    B,
    /// Both signal kinds.
    C,
    /// No exogenous inputs (pure VAR).
    D,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::A, Variant::B, Variant::C, Variant::D];

    /// Kinds of exogenous rows this variant keeps; empty for the pure VAR.
    pub fn kinds(self) -> &'static [ExogenousKind] {
        match self {
            Variant::A => &[ExogenousKind::Url],
            Variant::B => &[ExogenousKind::Query],
            Variant::C => &[ExogenousKind::Query, ExogenousKind::Url],
            Variant::D => &[],
        }
    }

    pub fn uses_exogenous(self) -> bool {
        self != Variant::D
    }

    pub fn description(self) -> &'static str {
        match self {
            Variant::A => "URL exogenous only (VAR-X)",
            Variant::B => "Query exogenous only (VAR-X)",
            Variant::C => "All (VAR-X)",
            Variant::D => "No exogenous (VAR only)",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let id = match self {
            Variant::A => "A",
            Variant::B => "B",
            Variant::C => "C",
            Variant::D => "D",
        };
        f.write_str(id)
    }
}

impl FromStr for Variant {
    type Err = VarxError;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "A" => Ok(Variant::A),
            "B" => Ok(Variant::B),
            "C" => Ok(Variant::C),
            "D" => Ok(Variant::D),
            other => Err(VarxError::InvalidSpec(format!("unknown variant `{other}`"))),
        }
    }
}

/// Labels and provenance attached to a solver result when it becomes a model.
#[derive(Debug, Clone)]
pub struct ModelContext {
    pub response_labels: Vec<String>,
    pub exogenous_labels: Vec<String>,
    pub seasonal: Option<SeasonalTransform>,
    pub variant: Variant,
}

/// Fitted coefficients plus everything needed to forecast on the differenced
/// and original scales.
#[derive(Debug, Clone, PartialEq)]
pub struct VarxModel {
    theta: Vec<Array2<f64>>,
    beta: Vec<Array2<f64>>,
    response_labels: Vec<String>,
    exogenous_labels: Vec<String>,
    lambda: f64,
    response_means: Array1<f64>,
    predictor_means: Array1<f64>,
    seasonal: Option<SeasonalTransform>,
    variant: Variant,
    layout: ColumnLayout,
    stacked: Array2<f64>,
}

impl VarxModel {
    /// Model with the given coefficients and no centering.
    ///
    /// `theta[i]` is k×k and multiplies `y(t-1-i)`; `beta[j]` is k×m and
    /// multiplies `x(t-1-j)`.
    pub fn from_coefficients(
        theta: Vec<Array2<f64>>,
        beta: Vec<Array2<f64>>,
        response_labels: Vec<String>,
        exogenous_labels: Vec<String>,
        variant: Variant,
    ) -> Result<Self> {
        let k = response_labels.len();
        let m = exogenous_labels.len();
        let layout = ColumnLayout::new(k, m, Lags::new(theta.len(), beta.len()));
        let stacked = layout.restack(&theta, &beta)?;
        let model = Self {
            theta,
            beta,
            response_labels,
            exogenous_labels,
            lambda: 0.0,
            response_means: Array1::zeros(k),
            predictor_means: Array1::zeros(layout.n_columns()),
            seasonal: None,
            variant,
            layout,
            stacked,
        };
        model.validate()?;
        Ok(model)
    }

    /// Unstack a solver result into per-lag matrices, undoing any predictor
    /// standardization recorded in `layout`.
    pub fn from_solution(result: &SolverResult, layout: &ColumnLayout, context: ModelContext) -> Result<Self> {
        if context.response_labels.len() != layout.k || context.exogenous_labels.len() != layout.m {
            return Err(VarxError::ShapeMismatch(format!(
                "layout is k={}, m={} but context has {} response and {} exogenous labels",
                layout.k,
                layout.m,
                context.response_labels.len(),
                context.exogenous_labels.len()
            )));
        }
        let mut b = result.coefficients.clone();
        if b.nrows() != layout.n_columns() {
            return Err(VarxError::ShapeMismatch(format!(
                "solution has {} rows, layout has {} columns",
                b.nrows(),
                layout.n_columns()
            )));
        }
        for (mut row, &scale) in b.axis_iter_mut(Axis(0)).zip(layout.predictor_scales.iter()) {
            row.mapv_inplace(|v| v / scale);
        }
        let (theta, beta) = layout.unstack(b.view())?;
        let plain = ColumnLayout::new(layout.k, layout.m, layout.lags);
        let model = Self {
            theta,
            beta,
            response_labels: context.response_labels,
            exogenous_labels: context.exogenous_labels,
            lambda: result.lambda,
            response_means: layout.response_means.clone(),
            predictor_means: layout.predictor_means.clone(),
            seasonal: context.seasonal,
            variant: context.variant,
            layout: plain,
            stacked: b,
        };
        model.validate()?;
        Ok(model)
    }

    fn validate(&self) -> Result<()> {
        let k = self.k();
        let m = self.m();
        if self.theta.is_empty() {
            return Err(VarxError::BadLag("model needs at least one autoregressive lag".into()));
        }
        if self.theta.iter().any(|t| t.dim() != (k, k)) || self.beta.iter().any(|b| b.dim() != (k, m)) {
            return Err(VarxError::ShapeMismatch("coefficient matrices disagree with labels".into()));
        }
        if self.response_means.len() != k || self.predictor_means.len() != self.layout.n_columns() {
            return Err(VarxError::ShapeMismatch("centering means disagree with layout".into()));
        }
        if let Some(seasonal) = &self.seasonal {
            if seasonal.head().labels() != self.response_labels.as_slice() {
                return Err(VarxError::ShapeMismatch(
                    "seasonal head labels differ from response labels".into(),
                ));
            }
        }
        let kinds = self.variant.kinds();
        let structural = if self.variant.uses_exogenous() {
            !self.beta.is_empty()
                && (self.variant == Variant::C
                    || self
                        .exogenous_labels
                        .iter()
                        .all(|l| ExogenousKind::of_label(l).is_some_and(|kind| kinds.contains(&kind))))
        } else {
            self.beta.is_empty() && self.exogenous_labels.is_empty()
        };
        if !structural {
            return Err(VarxError::ShapeMismatch(format!(
                "exogenous inputs inconsistent with variant {}",
                self.variant
            )));
        }
        Ok(())
    }

    pub fn with_means(mut self, response_means: Array1<f64>, predictor_means: Array1<f64>) -> Result<Self> {
        self.response_means = response_means;
        self.predictor_means = predictor_means;
        self.validate()?;
        Ok(self)
    }

    pub fn with_seasonal(mut self, seasonal: SeasonalTransform) -> Result<Self> {
        self.seasonal = Some(seasonal);
        self.validate()?;
        Ok(self)
    }

    pub fn with_lambda(mut self, lambda: f64) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn theta(&self) -> &[Array2<f64>] {
        &self.theta
    }

    pub fn beta(&self) -> &[Array2<f64>] {
        &self.beta
    }

    pub fn k(&self) -> usize {
        self.response_labels.len()
    }

    pub fn m(&self) -> usize {
        self.exogenous_labels.len()
    }

    pub fn lags(&self) -> Lags {
        Lags::new(self.theta.len(), self.beta.len())
    }

    pub fn response_labels(&self) -> &[String] {
        &self.response_labels
    }

    pub fn exogenous_labels(&self) -> &[String] {
        &self.exogenous_labels
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn response_means(&self) -> &Array1<f64> {
        &self.response_means
    }

    pub fn predictor_means(&self) -> &Array1<f64> {
        &self.predictor_means
    }

    pub fn seasonal(&self) -> Option<&SeasonalTransform> {
        self.seasonal.as_ref()
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Coefficients in stacked `(k*p + m*s) x k` form.
    pub fn stacked(&self) -> &Array2<f64> {
        &self.stacked
    }

    pub fn nonzeros(&self) -> usize {
        self.stacked.iter().filter(|&&v| v != 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::design::{build_design, DesignOptions};
    use crate::ingestion::{generate_synthetic_varx, SyntheticSpec};
    use crate::solver::{fit, lambda_max, SolverSettings};

    fn labels(prefix: &str, n: usize) -> Vec<String> {
        (0..n).map(|i| format!("{prefix}{i}")).collect()
    }

    #[test]
    fn unstacks_nine_region_dimensions() {
        let d = generate_synthetic_varx(&SyntheticSpec::default()).unwrap();
        let prob = build_design(&d.y, Some(&d.x), Lags::new(2, 1), DesignOptions::centered()).unwrap();
        let res = fit(&prob, 0.1 * lambda_max(&prob), &SolverSettings::default(), None).unwrap();
        let ctx = ModelContext {
            response_labels: d.y.labels().to_vec(),
            exogenous_labels: d.x.labels().to_vec(),
            seasonal: None,
            variant: Variant::C,
        };
        let model = VarxModel::from_solution(&res, prob.layout().unwrap(), ctx).unwrap();
        assert_eq!(model.theta().len(), 2);
        assert!(model.theta().iter().all(|t| t.dim() == (9, 9)));
        assert_eq!(model.beta().len(), 1);
        assert_eq!(model.beta()[0].dim(), (9, 18));
        let restacked = prob.layout().unwrap().restack(model.theta(), model.beta()).unwrap();
        assert_eq!(restacked, res.coefficients);
    }

    #[test]
    fn pure_var_has_no_beta() {
        let d = generate_synthetic_varx(&SyntheticSpec::default()).unwrap();
        let prob = build_design(&d.y, None, Lags::new(2, 0), DesignOptions::centered()).unwrap();
        let res = fit(&prob, 0.1 * lambda_max(&prob), &SolverSettings::default(), None).unwrap();
        let ctx = ModelContext {
            response_labels: d.y.labels().to_vec(),
            exogenous_labels: vec![],
            seasonal: None,
            variant: Variant::D,
        };
        let model = VarxModel::from_solution(&res, prob.layout().unwrap(), ctx).unwrap();
        assert!(model.beta().is_empty());
        assert_eq!(model.stacked().dim(), (18, 9));
    }

    #[test]
    fn standardized_fit_reports_original_units() {
        let d = generate_synthetic_varx(&SyntheticSpec {
            k: 3,
            m: 2,
            weeks: 120,
            noise_std: 0.0,
            sparsity: 0.6,
            ..SyntheticSpec::default()
        })
        .unwrap();
        let opts = DesignOptions {
            center: false,
            standardize: true,
        };
        let prob = build_design(&d.y, Some(&d.x), Lags::new(2, 1), opts).unwrap();
        let res = fit(&prob, 0.0, &SolverSettings::default(), None).unwrap();
        let ctx = ModelContext {
            response_labels: d.y.labels().to_vec(),
            exogenous_labels: d.x.labels().to_vec(),
            seasonal: None,
            variant: Variant::C,
        };
        let model = VarxModel::from_solution(&res, prob.layout().unwrap(), ctx).unwrap();
        for (est, truth) in model.theta().iter().zip(&d.theta) {
            let err = (est - truth).iter().fold(0.0f64, |a, v| a.max(v.abs()));
            assert!(err < 1e-4, "{err}");
        }
    }

    #[test]
    fn variant_structure_is_enforced() {
        let theta = vec![Array2::zeros((2, 2))];
        let beta = vec![Array2::zeros((2, 1))];
        let url = vec!["Pacific:url".to_string()];
        assert!(VarxModel::from_coefficients(theta.clone(), beta.clone(), labels("y", 2), url.clone(), Variant::A).is_ok());
        assert!(VarxModel::from_coefficients(theta.clone(), beta.clone(), labels("y", 2), url.clone(), Variant::B).is_err());
        assert!(VarxModel::from_coefficients(theta.clone(), beta.clone(), labels("y", 2), url, Variant::D).is_err());
        assert!(VarxModel::from_coefficients(theta.clone(), vec![], labels("y", 2), vec![], Variant::D).is_ok());
        assert!(VarxModel::from_coefficients(theta, vec![], labels("y", 2), vec![], Variant::C).is_err());
    }

    #[test]
    fn variant_parsing() {
        assert_eq!("c".parse::<Variant>().unwrap(), Variant::C);
        assert!("E".parse::<Variant>().is_err());
        assert_eq!(Variant::D.to_string(), "D");
    }
}
