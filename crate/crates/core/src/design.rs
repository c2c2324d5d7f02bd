//! Stacking lagged response and exogenous observations into one penalized
//! least-squares problem.
//!
//! Row `r` of the problem targets week `max(p, s) + r` of the input. Its
//! predictors are `[y(t-1), .., y(t-p), x(t-1), .., x(t-s)]`, each a full
//! cross-section in label order, response lags first and most recent first.
//! A coefficient matrix `B` has one row per predictor column and one column
//! per response series, so fitted values are `Z * B`.

use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};
use crate::timeseries::{MultivariateSeries, TimeIndex};

/// Autoregressive and exogenous lag orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lags {
    pub p: usize,
    pub s: usize,
}

impl Lags {
    pub fn new(p: usize, s: usize) -> Self {
        Self { p, s }
    }

    pub fn max(&self) -> usize {
        self.p.max(self.s)
    }
}

impl Default for Lags {
    fn default() -> Self {
        Self { p: 2, s: 1 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Response,
    Exogenous,
}

/// A contiguous run of predictor columns holding one lag of one source.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColumnBlock {
    pub source: Source,
    /// 1-based lag.
    pub lag: usize,
    pub start: usize,
    pub len: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct DesignOptions {
    /// Subtract column means from predictors and responses.
    pub center: bool,
    /// Divide predictors by their standard deviation before fitting.
    pub standardize: bool,
}

impl DesignOptions {
    pub fn centered() -> Self {
        Self {
            center: true,
            standardize: false,
        }
    }
}

/// How predictor columns map back to lags and series, plus the centering and
/// scaling applied when the problem was built.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnLayout {
    pub k: usize,
    pub m: usize,
    pub lags: Lags,
    pub blocks: Vec<ColumnBlock>,
    pub predictor_means: Array1<f64>,
    pub predictor_scales: Array1<f64>,
    pub response_means: Array1<f64>,
}

/// Per-lag autoregressive and exogenous coefficient matrices.
pub type LagBlocks = (Vec<Array2<f64>>, Vec<Array2<f64>>);

impl ColumnLayout {
    /// Uncentered, unscaled layout for the given dimensions.
    pub fn new(k: usize, m: usize, lags: Lags) -> Self {
        let mut blocks = Vec::with_capacity(lags.p + lags.s);
        let mut start = 0;
        for lag in 1..=lags.p {
            blocks.push(ColumnBlock {
                source: Source::Response,
                lag,
                start,
                len: k,
            });
            start += k;
        }
        for lag in 1..=lags.s {
            blocks.push(ColumnBlock {
                source: Source::Exogenous,
                lag,
                start,
                len: m,
            });
            start += m;
        }
        Self {
            k,
            m,
            lags,
            blocks,
            predictor_means: Array1::zeros(start),
            predictor_scales: Array1::ones(start),
            response_means: Array1::zeros(k),
        }
    }

    pub fn n_columns(&self) -> usize {
        self.k * self.lags.p + self.m * self.lags.s
    }

    /// Source, 1-based lag and series position of column `j`.
    pub fn column(&self, j: usize) -> Option<(Source, usize, usize)> {
        self.blocks
            .iter()
            .find(|b| j >= b.start && j < b.start + b.len)
            .map(|b| (b.source, b.lag, j - b.start))
    }

    /// Split a stacked `(k*p + m*s) x k` coefficient matrix into per-lag
    /// matrices oriented as in the model equation: `theta[i]` is k×k and
    /// `beta[j]` is k×m, with rows indexed by response.
    pub fn unstack(&self, b: ArrayView2<'_, f64>) -> Result<LagBlocks> {
        if b.dim() != (self.n_columns(), self.k) {
            return Err(VarxError::ShapeMismatch(format!(
                "coefficients are {:?}, layout expects ({}, {})",
                b.dim(),
                self.n_columns(),
                self.k
            )));
        }
        let mut theta = Vec::with_capacity(self.lags.p);
        let mut beta = Vec::with_capacity(self.lags.s);
        for block in &self.blocks {
            let part = b.slice(s![block.start..block.start + block.len, ..]).t().to_owned();
            match block.source {
                Source::Response => theta.push(part),
                Source::Exogenous => beta.push(part),
            }
        }
        Ok((theta, beta))
    }

    /// Inverse of [`ColumnLayout::unstack`].
    pub fn restack(&self, theta: &[Array2<f64>], beta: &[Array2<f64>]) -> Result<Array2<f64>> {
        if theta.len() != self.lags.p || beta.len() != self.lags.s {
            return Err(VarxError::ShapeMismatch(format!(
                "{} theta and {} beta lags for layout with p={}, s={}",
                theta.len(),
                beta.len(),
                self.lags.p,
                self.lags.s
            )));
        }
        let mut b = Array2::zeros((self.n_columns(), self.k));
        let (mut ti, mut bi) = (theta.iter(), beta.iter());
        for block in &self.blocks {
            let part = match block.source {
                Source::Response => ti.next(),
                Source::Exogenous => bi.next(),
            }
            .expect("counts checked");
            if part.dim() != (self.k, block.len) {
                return Err(VarxError::ShapeMismatch(format!(
                    "lag {} matrix is {:?}, expected ({}, {})",
                    block.lag,
                    part.dim(),
                    self.k,
                    block.len
                )));
            }
            b.slice_mut(s![block.start..block.start + block.len, ..])
                .assign(&part.t());
        }
        Ok(b)
    }
}

/// The stacked regression `response ≈ design * B`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoProblem {
    design: Array2<f64>,
    response: Array2<f64>,
    layout: Option<ColumnLayout>,
    response_labels: Vec<String>,
    exogenous_labels: Vec<String>,
    targets: Option<TimeIndex>,
}

impl LassoProblem {
    /// A bare problem with no lag structure attached.
    pub fn from_matrices(design: Array2<f64>, response: Array2<f64>) -> Result<Self> {
        if design.nrows() != response.nrows() {
            return Err(VarxError::ShapeMismatch(format!(
                "design has {} rows, response has {}",
                design.nrows(),
                response.nrows()
            )));
        }
        if design.nrows() == 0 {
            return Err(VarxError::TooFewRows("problem has no rows".into()));
        }
        if design.iter().chain(response.iter()).any(|v| !v.is_finite()) {
            return Err(VarxError::NonFinite("problem data".into()));
        }
        Ok(Self {
            design,
            response,
            layout: None,
            response_labels: Vec::new(),
            exogenous_labels: Vec::new(),
            targets: None,
        })
    }

    pub fn design(&self) -> ArrayView2<'_, f64> {
        self.design.view()
    }

    pub fn response(&self) -> ArrayView2<'_, f64> {
        self.response.view()
    }

    pub fn n_rows(&self) -> usize {
        self.design.nrows()
    }

    pub fn n_columns(&self) -> usize {
        self.design.ncols()
    }

    pub fn n_responses(&self) -> usize {
        self.response.ncols()
    }

    pub fn layout(&self) -> Option<&ColumnLayout> {
        self.layout.as_ref()
    }

    pub fn response_labels(&self) -> &[String] {
        &self.response_labels
    }

    pub fn exogenous_labels(&self) -> &[String] {
        &self.exogenous_labels
    }

    /// Weeks targeted by the response rows.
    pub fn targets(&self) -> Option<&TimeIndex> {
        self.targets.as_ref()
    }

    /// Human-readable name of predictor column `j`, e.g. `"Pacific:url@1"`.
    pub fn column_label(&self, j: usize) -> Option<String> {
        let (source, lag, series) = self.layout.as_ref()?.column(j)?;
        let name = match source {
            Source::Response => &self.response_labels[series],
            Source::Exogenous => &self.exogenous_labels[series],
        };
        Some(format!("{name}@{lag}"))
    }
}

/// Stack `y` (k series) and optional `x` (m series) into a lasso problem.
pub fn build_design(
    y: &MultivariateSeries,
    x: Option<&MultivariateSeries>,
    lags: Lags,
    options: DesignOptions,
) -> Result<LassoProblem> {
    if lags.p == 0 {
        return Err(VarxError::BadLag("p must be >= 1".into()));
    }
    match x {
        Some(x) => {
            if lags.s == 0 {
                return Err(VarxError::BadLag("s must be >= 1 with exogenous series".into()));
            }
            if x.index() != y.index() {
                return Err(VarxError::NotAligned);
            }
        }
        None if lags.s != 0 => {
            return Err(VarxError::BadLag("s must be 0 without exogenous series".into()));
        }
        None => {}
    }
    let (k, t_len) = (y.n_series(), y.len());
    let m = x.map_or(0, MultivariateSeries::n_series);
    let offset = lags.max();
    if t_len <= offset {
        return Err(VarxError::TooFewRows(format!(
            "{t_len} weeks leave no rows after {offset} lags"
        )));
    }
    let n = t_len - offset;
    let mut layout = ColumnLayout::new(k, m, lags);
    let mut design = Array2::zeros((n, layout.n_columns()));
    for r in 0..n {
        let t = r + offset;
        let row = predictor_row(
            y.values().slice(s![.., ..t]),
            x.map(|x| x.values().slice_move(s![.., ..t])),
            lags,
        )?;
        design.row_mut(r).assign(&row);
    }
    let mut response = y.values().slice(s![.., offset..]).t().to_owned();

    if options.center {
        let means = design.mean_axis(Axis(0)).expect("n >= 1");
        design -= &means;
        layout.predictor_means = means;
        let rmeans = response.mean_axis(Axis(0)).expect("n >= 1");
        response -= &rmeans;
        layout.response_means = rmeans;
    }
    if options.standardize {
        let means = design.mean_axis(Axis(0)).expect("n >= 1");
        let scales = design
            .axis_iter(Axis(1))
            .zip(means.iter())
            .map(|(col, &mu)| {
                let sd = (col.iter().map(|v| (v - mu).powi(2)).sum::<f64>() / n as f64).sqrt();
                if sd > 0.0 {
                    sd
                } else {
                    1.0
                }
            })
            .collect::<Array1<f64>>();
        design /= &scales;
        layout.predictor_scales = scales;
    }

    Ok(LassoProblem {
        design,
        response,
        layout: Some(layout),
        response_labels: y.labels().to_vec(),
        exogenous_labels: x.map(|x| x.labels().to_vec()).unwrap_or_default(),
        targets: Some(y.index().slice(offset..t_len)),
    })
}

/// Predictor vector for the week following the given histories (columns are
/// chronological, the last column is the most recent week).
pub fn predictor_row(
    y_history: ArrayView2<'_, f64>,
    x_history: Option<ArrayView2<'_, f64>>,
    lags: Lags,
) -> Result<Array1<f64>> {
    let k = y_history.nrows();
    let m = x_history.map_or(0, |x| x.nrows());
    if y_history.ncols() < lags.p {
        return Err(VarxError::InsufficientHistory(format!(
            "need {} response weeks, have {}",
            lags.p,
            y_history.ncols()
        )));
    }
    let mut row = Array1::zeros(k * lags.p + m * lags.s);
    let ty = y_history.ncols();
    for i in 0..lags.p {
        row.slice_mut(s![i * k..(i + 1) * k])
            .assign(&y_history.column(ty - 1 - i));
    }
    if lags.s > 0 {
        let x = x_history.ok_or_else(|| {
            VarxError::InsufficientHistory("exogenous history required".into())
        })?;
        let tx = x.ncols();
        if tx < lags.s {
            return Err(VarxError::InsufficientHistory(format!(
                "need {} exogenous weeks, have {tx}",
                lags.s
            )));
        }
        let base = k * lags.p;
        for j in 0..lags.s {
            row.slice_mut(s![base + j * m..base + (j + 1) * m])
                .assign(&x.column(tx - 1 - j));
        }
    }
    Ok(row)
}

/// Apply the centering and scaling recorded in `layout` to a raw predictor row.
pub fn transform_row(layout: &ColumnLayout, raw: ArrayView1<'_, f64>) -> Array1<f64> {
    (&raw - &layout.predictor_means) / &layout.predictor_scales
}
