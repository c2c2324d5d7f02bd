use ndarray::Array2;

use super::regions::{RegionMap, CENSUS_REGIONS};
use crate::error::{Result, VarxError};
use crate::timeseries::{log_ratio_normalize, MultivariateSeries};

/// The two kinds of regional search signal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ExogenousKind {
    Query,
    Url,
}

impl ExogenousKind {
    pub fn suffix(self) -> &'static str {
        match self {
            ExogenousKind::Query => "query",
            ExogenousKind::Url => "url",
        }
    }

    /// Which kind a label built by [`exogenous_label`] belongs to.
    pub fn of_label(label: &str) -> Option<Self> {
        match label.rsplit_once(':').map(|(_, s)| s) {
            Some("query") => Some(ExogenousKind::Query),
            Some("url") => Some(ExogenousKind::Url),
            _ => None,
        }
    }
}

/// Label of a regional exogenous row, e.g. `"Pacific:url"`.
pub fn exogenous_label(region: &str, kind: ExogenousKind) -> String {
    format!("{region}:{}", kind.suffix())
}

fn regional_mean(series: &MultivariateSeries, map: &RegionMap, what: &str) -> Result<Array2<f64>> {
    let mut sums = Array2::<f64>::zeros((CENSUS_REGIONS.len(), series.len()));
    let mut counts = [0usize; 9];
    for (label, row) in series.labels().iter().zip(series.values().rows()) {
        let region = map.region_index(label)?;
        let mut target = sums.row_mut(region);
        target += &row;
        counts[region] += 1;
    }
    for (region, &n) in counts.iter().enumerate() {
        if n == 0 {
            return Err(VarxError::InvalidSeries(format!(
                "no {what} series for {}",
                CENSUS_REGIONS[region]
            )));
        }
        sums.row_mut(region).mapv_inplace(|v| v / n as f64);
    }
    Ok(sums)
}

/// Build the 18 regional exogenous rows: nine region-averaged query series
/// followed by nine region-averaged URL click series, each log-ratio normalized
/// by the region's weekly search total.
///
/// `search_totals` holds one row per census division, labeled by division name.
pub fn build_exogenous(
    query_volumes: &MultivariateSeries,
    url_clicks: &MultivariateSeries,
    search_totals: &MultivariateSeries,
    map: &RegionMap,
    epsilon: f64,
) -> Result<MultivariateSeries> {
    let index = *query_volumes.index();
    if url_clicks.index() != &index || search_totals.index() != &index {
        return Err(VarxError::IndexMismatch(
            "query, click and total series must cover the same weeks".into(),
        ));
    }
    let means = [
        (ExogenousKind::Query, regional_mean(query_volumes, map, "query")?),
        (ExogenousKind::Url, regional_mean(url_clicks, map, "url")?),
    ];
    let mut parts = Vec::with_capacity(18);
    for (kind, mean) in &means {
        for (r, region) in CENSUS_REGIONS.iter().enumerate() {
            let totals = search_totals.select(&[*region]).map_err(|_| {
                VarxError::InvalidSeries(format!("no search total for {region}"))
            })?;
            let counts = MultivariateSeries::new(
                vec![exogenous_label(region, *kind)],
                index,
                mean.slice(ndarray::s![r..r + 1, ..]).to_owned(),
            )?;
            parts.push(log_ratio_normalize(&counts, &totals, epsilon)?);
        }
    }
    MultivariateSeries::stack_rows(&parts.iter().collect::<Vec<_>>())
}
