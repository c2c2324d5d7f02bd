//! Weekly multivariate series and the preprocessing applied before modeling:
//! seasonal differencing, log-ratio normalization, chronological splitting and
//! alignment of two series onto a shared calendar.

use std::collections::HashSet;
use std::ops::Range;

use chrono::{Datelike, Duration, NaiveDate};
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Result, VarxError};

/// Default seasonal period for weekly data.
pub const WEEKS_PER_YEAR: usize = 52;

/// A run of consecutive weeks identified by the week-ending date of the first one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimeIndex {
    start: NaiveDate,
    len: usize,
}

impl TimeIndex {
    pub fn new(start: NaiveDate, len: usize) -> Self {
        Self { start, len }
    }

    pub fn start(&self) -> NaiveDate {
        self.start
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Week-ending date of position `t` (which may lie past the end).
    pub fn week(&self, t: usize) -> NaiveDate {
        self.start + Duration::weeks(t as i64)
    }

    /// One past the last week.
    pub fn end(&self) -> NaiveDate {
        self.week(self.len)
    }

    /// ISO year and week number of position `t`.
    pub fn iso_week(&self, t: usize) -> (i32, u32) {
        let w = self.week(t).iso_week();
        (w.year(), w.week())
    }

    /// Position of `date` in this index, if it is one of its weeks.
    pub fn position(&self, date: NaiveDate) -> Option<usize> {
        let days = (date - self.start).num_days();
        if days < 0 || days % 7 != 0 {
            return None;
        }
        let t = (days / 7) as usize;
        (t < self.len).then_some(t)
    }

    /// Signed week offset of `date` relative to `start`, if it falls on the same weekday.
    pub fn offset_of(&self, date: NaiveDate) -> Option<i64> {
        let days = (date - self.start).num_days();
        (days % 7 == 0).then_some(days / 7)
    }

    pub fn slice(&self, range: Range<usize>) -> Self {
        assert!(range.start <= range.end && range.end <= self.len);
        Self::new(self.week(range.start), range.end - range.start)
    }

    pub fn shifted(&self, weeks: usize) -> Self {
        Self::new(self.week(weeks), self.len.saturating_sub(weeks))
    }
}

/// Labeled k-variate weekly series. Rows are series, columns are weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct MultivariateSeries {
    labels: Vec<String>,
    index: TimeIndex,
    values: Array2<f64>,
}

impl MultivariateSeries {
    pub fn new(labels: Vec<String>, index: TimeIndex, values: Array2<f64>) -> Result<Self> {
        if values.nrows() != labels.len() || values.ncols() != index.len() {
            return Err(VarxError::InvalidSeries(format!(
                "values are {}x{} but there are {} labels and {} weeks",
                values.nrows(),
                values.ncols(),
                labels.len(),
                index.len()
            )));
        }
        let mut seen = HashSet::with_capacity(labels.len());
        for label in &labels {
            if !seen.insert(label.as_str()) {
                return Err(VarxError::InvalidSeries(format!("duplicate label `{label}`")));
            }
        }
        if let Some(((r, c), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(VarxError::InvalidSeries(format!(
                "non-finite value in `{}` at week {}",
                labels[r],
                index.week(c)
            )));
        }
        Ok(Self {
            labels,
            index,
            values,
        })
    }

    /// Convenience constructor from row vectors.
    pub fn from_rows<S: Into<String>>(
        labels: Vec<S>,
        start: NaiveDate,
        rows: &[Vec<f64>],
    ) -> Result<Self> {
        let len = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != len) {
            return Err(VarxError::InvalidSeries("ragged rows".into()));
        }
        let flat: Vec<f64> = rows.iter().flatten().copied().collect();
        let values = Array2::from_shape_vec((rows.len(), len), flat)
            .map_err(|e| VarxError::InvalidSeries(e.to_string()))?;
        Self::new(
            labels.into_iter().map(Into::into).collect(),
            TimeIndex::new(start, len),
            values,
        )
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn index(&self) -> &TimeIndex {
        &self.index
    }

    pub fn values(&self) -> ArrayView2<'_, f64> {
        self.values.view()
    }

    pub fn into_values(self) -> Array2<f64> {
        self.values
    }

    pub fn n_series(&self) -> usize {
        self.labels.len()
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn position(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn row(&self, label: &str) -> Option<ArrayView1<'_, f64>> {
        self.position(label).map(|i| self.values.row(i))
    }

    /// Values of every series at week `t`.
    pub fn column(&self, t: usize) -> ArrayView1<'_, f64> {
        self.values.column(t)
    }

    /// Subset of rows, in the order given.
    pub fn select<S: AsRef<str>>(&self, labels: &[S]) -> Result<Self> {
        let rows = labels
            .iter()
            .map(|l| {
                self.position(l.as_ref()).ok_or_else(|| {
                    VarxError::InvalidSeries(format!("no series labeled `{}`", l.as_ref()))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let values = self.values.select(Axis(0), &rows);
        Self::new(
            labels.iter().map(|l| l.as_ref().to_string()).collect(),
            self.index,
            values,
        )
    }

    /// Contiguous range of weeks.
    pub fn slice_weeks(&self, range: Range<usize>) -> Self {
        let index = self.index.slice(range.clone());
        Self {
            labels: self.labels.clone(),
            index,
            values: self.values.slice(s![.., range]).to_owned(),
        }
    }

    /// Restrict to the given calendar range, which must lie inside this series.
    pub fn restrict_to(&self, index: &TimeIndex) -> Result<Self> {
        let start = self.index.position(index.start()).ok_or_else(|| {
            VarxError::IndexMismatch(format!("week {} not covered", index.start()))
        })?;
        if start + index.len() > self.len() {
            return Err(VarxError::IndexMismatch(format!(
                "range ending {} not covered",
                index.end()
            )));
        }
        Ok(self.slice_weeks(start..start + index.len()))
    }

    /// Join series that follow one another in time.
    pub fn concat_time(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| VarxError::InvalidSeries("nothing to concatenate".into()))?;
        let mut len = 0;
        for part in parts {
            if part.labels != first.labels {
                return Err(VarxError::IndexMismatch("labels differ".into()));
            }
            if part.index.start() != first.index.week(len) {
                return Err(VarxError::IndexMismatch(format!(
                    "part starting {} does not follow {}",
                    part.index.start(),
                    first.index.week(len)
                )));
            }
            len += part.len();
        }
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = concatenate(Axis(1), &views).expect("row counts checked");
        Ok(Self {
            labels: first.labels.clone(),
            index: TimeIndex::new(first.index.start(), len),
            values,
        })
    }

    /// Stack series sharing one time index on top of each other.
    pub fn stack_rows(parts: &[&Self]) -> Result<Self> {
        let first = parts
            .first()
            .ok_or_else(|| VarxError::InvalidSeries("nothing to stack".into()))?;
        if parts.iter().any(|p| p.index != first.index) {
            return Err(VarxError::IndexMismatch("time indexes differ".into()));
        }
        let labels = parts.iter().flat_map(|p| p.labels.iter().cloned()).collect();
        let views: Vec<_> = parts.iter().map(|p| p.values.view()).collect();
        let values = concatenate(Axis(0), &views).expect("column counts checked");
        Self::new(labels, first.index, values)
    }
}

/// What is needed to undo a seasonal difference: the first `period` raw weeks.
#[derive(Debug, Clone, PartialEq)]
pub struct SeasonalTransform {
    period: usize,
    head: MultivariateSeries,
}

impl SeasonalTransform {
    pub fn new(period: usize, head: MultivariateSeries) -> Result<Self> {
        if period == 0 || head.len() != period {
            return Err(VarxError::InvalidSeries(format!(
                "seasonal head has {} weeks, period is {period}",
                head.len()
            )));
        }
        Ok(Self { period, head })
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn head(&self) -> &MultivariateSeries {
        &self.head
    }
}

/// `out[t] = x[t + period] - x[t]`, shifted to start `period` weeks later.
pub fn seasonal_difference(
    series: &MultivariateSeries,
    period: usize,
) -> Result<(MultivariateSeries, SeasonalTransform)> {
    if period == 0 {
        return Err(VarxError::InvalidSeries("seasonal period must be >= 1".into()));
    }
    let n = series.len();
    if n <= period {
        return Err(VarxError::SeriesTooShort {
            needed: period,
            actual: n,
        });
    }
    let v = series.values();
    let diff = &v.slice(s![.., period..]) - &v.slice(s![.., ..n - period]);
    let out = MultivariateSeries {
        labels: series.labels.clone(),
        index: series.index.shifted(period),
        values: diff,
    };
    let transform = SeasonalTransform::new(period, series.slice_weeks(0..period))?;
    Ok((out, transform))
}

/// Recover raw values at `target_week_offset` (weeks after the start of the raw
/// series the transform was built from) by adding back the value one period earlier.
///
/// The lagged value is looked up in `observed_raw` when it covers that week and
/// falls back to the transform head otherwise.
pub fn invert_seasonal_difference(
    diff_value: ArrayView1<'_, f64>,
    target_week_offset: usize,
    transform: &SeasonalTransform,
    observed_raw: &MultivariateSeries,
) -> Result<Array1<f64>> {
    let head = transform.head();
    if diff_value.len() != head.n_series() {
        return Err(VarxError::ShapeMismatch(format!(
            "difference has {} entries, transform covers {} series",
            diff_value.len(),
            head.n_series()
        )));
    }
    let lag = target_week_offset
        .checked_sub(transform.period())
        .ok_or_else(|| {
            VarxError::MissingHistory(format!(
                "offset {target_week_offset} precedes the first full period"
            ))
        })?;
    let lag_week = head.index().week(lag);
    let base = if let Some(t) = observed_raw.index().position(lag_week) {
        if observed_raw.labels() != head.labels() {
            return Err(VarxError::IndexMismatch(
                "raw history labels differ from the transform".into(),
            ));
        }
        observed_raw.column(t)
    } else if lag < transform.period() {
        head.column(lag)
    } else {
        return Err(VarxError::MissingHistory(format!(
            "no raw observation for week {lag_week}"
        )));
    };
    Ok(&diff_value + &base)
}

/// `ln((count + epsilon) / total)` applied entrywise with a per-week total.
pub fn log_ratio_normalize(
    counts: &MultivariateSeries,
    totals: &MultivariateSeries,
    epsilon: f64,
) -> Result<MultivariateSeries> {
    if totals.n_series() != 1 {
        return Err(VarxError::InvalidSeries(format!(
            "totals must be a single series, got {}",
            totals.n_series()
        )));
    }
    if counts.index() != totals.index() {
        return Err(VarxError::IndexMismatch(
            "counts and totals cover different weeks".into(),
        ));
    }
    if epsilon.is_nan() || epsilon <= 0.0 {
        return Err(VarxError::InvalidSeries(format!("epsilon must be > 0, got {epsilon}")));
    }
    let total = totals.values().row(0).to_owned();
    if let Some(t) = total.iter().position(|&v| v <= 0.0) {
        return Err(VarxError::NonPositiveTotal {
            label: totals.labels()[0].clone(),
            week: totals.index().week(t).to_string(),
        });
    }
    if let Some(((r, c), _)) = counts.values().indexed_iter().find(|(_, &v)| v < 0.0) {
        return Err(VarxError::InvalidSeries(format!(
            "negative count in `{}` at week {}",
            counts.labels()[r],
            counts.index().week(c)
        )));
    }
    let mut out = counts.values().to_owned();
    for mut row in out.rows_mut() {
        row.zip_mut_with(&total, |v, &tot| *v = ((*v + epsilon) / tot).ln());
    }
    MultivariateSeries::new(counts.labels().to_vec(), *counts.index(), out)
}

/// Chronological train / validation / test partition.
#[derive(Debug, Clone, PartialEq)]
pub struct ThreeWaySplit {
    pub train: MultivariateSeries,
    pub validation: MultivariateSeries,
    pub test: MultivariateSeries,
}

/// Train and validation get `floor(T/3)` weeks each; test gets the rest.
pub fn split_thirds(series: &MultivariateSeries) -> Result<ThreeWaySplit> {
    let n = series.len();
    if n < 3 {
        return Err(VarxError::SeriesTooShort {
            needed: 2,
            actual: n,
        });
    }
    let third = n / 3;
    Ok(ThreeWaySplit {
        train: series.slice_weeks(0..third),
        validation: series.slice_weeks(third..2 * third),
        test: series.slice_weeks(2 * third..n),
    })
}

/// Restrict both series to the weeks they have in common.
pub fn align(
    a: &MultivariateSeries,
    b: &MultivariateSeries,
) -> Result<(MultivariateSeries, MultivariateSeries)> {
    let b_offset = a
        .index()
        .offset_of(b.index().start())
        .ok_or_else(|| VarxError::IndexMismatch("series end on different weekdays".into()))?;
    let start = b_offset.max(0);
    let end = (a.len() as i64).min(b_offset + b.len() as i64);
    if end <= start {
        return Err(VarxError::NoOverlap);
    }
    let common = a.index().slice(start as usize..end as usize);
    Ok((a.restrict_to(&common)?, b.restrict_to(&common)?))
}
