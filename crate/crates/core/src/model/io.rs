use chrono::NaiveDate;
use ndarray::{Array1, Array2};
use serde::{Deserialize, Serialize};

use super::{Variant, VarxModel};
use crate::error::{Result, VarxError};
use crate::timeseries::{MultivariateSeries, SeasonalTransform, TimeIndex};

pub const MODEL_SCHEMA_VERSION: u32 = 1;

/// Scaling of the squared-error term the penalty is measured against.
const LOSS_SCALING: &str = "1/(2N)";

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixRecord {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl MatrixRecord {
    fn from_array(m: &Array2<f64>) -> Self {
        Self {
            rows: m.nrows(),
            cols: m.ncols(),
            data: m.iter().copied().collect(),
        }
    }

    fn to_array(&self) -> Result<Array2<f64>> {
        Array2::from_shape_vec((self.rows, self.cols), self.data.clone())
            .map_err(|e| VarxError::InvalidModel(format!("matrix: {e}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeasonalRecord {
    pub period: usize,
    /// Week-ending date of the first raw week.
    pub start: NaiveDate,
    pub head: MatrixRecord,
}

/// On-disk JSON form of a [`VarxModel`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub schema_version: u32,
    pub variant: Variant,
    pub p: usize,
    pub s: usize,
    pub lambda: f64,
    pub loss_scaling: String,
    pub response_labels: Vec<String>,
    pub exogenous_labels: Vec<String>,
    pub response_means: Vec<f64>,
    pub predictor_means: Vec<f64>,
    /// `theta[i]` is k×k for lag i+1, rows = responses.
    pub theta: Vec<MatrixRecord>,
    /// `beta[j]` is k×m for lag j+1, rows = responses.
    pub beta: Vec<MatrixRecord>,
    pub seasonal: Option<SeasonalRecord>,
    /// Free-form record of how the model was produced.
    #[serde(default)]
    pub config: serde_json::Value,
}

impl VarxModel {
    pub fn to_file(&self, config: serde_json::Value) -> ModelFile {
        ModelFile {
            schema_version: MODEL_SCHEMA_VERSION,
            variant: self.variant(),
            p: self.lags().p,
            s: self.lags().s,
            lambda: self.lambda(),
            loss_scaling: LOSS_SCALING.into(),
            response_labels: self.response_labels().to_vec(),
            exogenous_labels: self.exogenous_labels().to_vec(),
            response_means: self.response_means().to_vec(),
            predictor_means: self.predictor_means().to_vec(),
            theta: self.theta().iter().map(MatrixRecord::from_array).collect(),
            beta: self.beta().iter().map(MatrixRecord::from_array).collect(),
            seasonal: self.seasonal().map(|s| SeasonalRecord {
                period: s.period(),
                start: s.head().index().start(),
                head: MatrixRecord::from_array(&s.head().values().to_owned()),
            }),
            config,
        }
    }

    pub fn from_file(file: &ModelFile) -> Result<Self> {
        if file.schema_version != MODEL_SCHEMA_VERSION {
            return Err(VarxError::InvalidModel(format!(
                "schema version {} (expected {MODEL_SCHEMA_VERSION})",
                file.schema_version
            )));
        }
        if file.loss_scaling != LOSS_SCALING {
            return Err(VarxError::InvalidModel(format!(
                "unsupported loss scaling `{}`",
                file.loss_scaling
            )));
        }
        if file.theta.len() != file.p || file.beta.len() != file.s {
            return Err(VarxError::InvalidModel("lag orders disagree with coefficient lists".into()));
        }
        let theta = file.theta.iter().map(MatrixRecord::to_array).collect::<Result<Vec<_>>>()?;
        let beta = file.beta.iter().map(MatrixRecord::to_array).collect::<Result<Vec<_>>>()?;
        let mut model = VarxModel::from_coefficients(
            theta,
            beta,
            file.response_labels.clone(),
            file.exogenous_labels.clone(),
            file.variant,
        )?
        .with_means(
            Array1::from(file.response_means.clone()),
            Array1::from(file.predictor_means.clone()),
        )?
        .with_lambda(file.lambda);
        if let Some(record) = &file.seasonal {
            let head = MultivariateSeries::new(
                file.response_labels.clone(),
                TimeIndex::new(record.start, record.period),
                record.head.to_array()?,
            )?;
            model = model.with_seasonal(SeasonalTransform::new(record.period, head)?)?;
        }
        Ok(model)
    }

    pub fn to_json(&self, config: serde_json::Value) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.to_file(config))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(text).map_err(|e| VarxError::InvalidModel(e.to_string()))?;
        Self::from_file(&file)
    }
}
