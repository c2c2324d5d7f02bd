use std::collections::{BTreeMap, BTreeSet};
use std::io::Read;

use ndarray::Array2;

use crate::error::{Result, VarxError};
use crate::timeseries::MultivariateSeries;

/// The nine census divisions, in the order used for every report and heatmap.
pub const CENSUS_REGIONS: [&str; 9] = [
    "Mid-Atlantic",
    "New England",
    "East North Central",
    "West North Central",
    "West South Central",
    "East South Central",
    "Mountain",
    "Pacific",
    "South Atlantic",
];

/// Positions of `labels` in canonical division order when they are exactly
/// the nine divisions, otherwise the identity permutation.
pub fn census_order<S: AsRef<str>>(labels: &[S]) -> Vec<usize> {
    let find = |r: &str| labels.iter().position(|l| l.as_ref() == r);
    if labels.len() == CENSUS_REGIONS.len() && CENSUS_REGIONS.iter().all(|r| find(r).is_some()) {
        CENSUS_REGIONS.iter().filter_map(|r| find(r)).collect()
    } else {
        (0..labels.len()).collect()
    }
}

// (postal code, name, division)
const STATES: [(&str, &str, usize); 51] = [
    ("NJ", "New Jersey", 0),
    ("NY", "New York", 0),
    ("PA", "Pennsylvania", 0),
    ("CT", "Connecticut", 1),
    ("ME", "Maine", 1),
    ("MA", "Massachusetts", 1),
    ("NH", "New Hampshire", 1),
    ("RI", "Rhode Island", 1),
    ("VT", "Vermont", 1),
    ("IL", "Illinois", 2),
    ("IN", "Indiana", 2),
    ("MI", "Michigan", 2),
    ("OH", "Ohio", 2),
    ("WI", "Wisconsin", 2),
    ("IA", "Iowa", 3),
    ("KS", "Kansas", 3),
    ("MN", "Minnesota", 3),
    ("MO", "Missouri", 3),
    ("NE", "Nebraska", 3),
    ("ND", "North Dakota", 3),
    ("SD", "South Dakota", 3),
    ("AR", "Arkansas", 4),
    ("LA", "Louisiana", 4),
    ("OK", "Oklahoma", 4),
    ("TX", "Texas", 4),
    ("AL", "Alabama", 5),
    ("KY", "Kentucky", 5),
    ("MS", "Mississippi", 5),
    ("TN", "Tennessee", 5),
    ("AZ", "Arizona", 6),
    ("CO", "Colorado", 6),
    ("ID", "Idaho", 6),
    ("MT", "Montana", 6),
    ("NV", "Nevada", 6),
    ("NM", "New Mexico", 6),
    ("UT", "Utah", 6),
    ("WY", "Wyoming", 6),
    ("AK", "Alaska", 7),
    ("CA", "California", 7),
    ("HI", "Hawaii", 7),
    ("OR", "Oregon", 7),
    ("WA", "Washington", 7),
    ("DE", "Delaware", 8),
    ("DC", "District of Columbia", 8),
    ("FL", "Florida", 8),
    ("GA", "Georgia", 8),
    ("MD", "Maryland", 8),
    ("NC", "North Carolina", 8),
    ("SC", "South Carolina", 8),
    ("VA", "Virginia", 8),
    ("WV", "West Virginia", 8),
];

/// State identifier part of a series label: `"CA"` and `"CA:file for unemployment"`
/// both belong to `"CA"`.
pub fn state_of(label: &str) -> &str {
    label.split_once(':').map_or(label, |(state, _)| state).trim()
}

/// Assignment of states to the nine census divisions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionMap {
    mapping: BTreeMap<String, String>,
}

impl RegionMap {
    /// Standard Census Bureau divisions, keyed by both postal code and full name.
    pub fn census_default() -> Self {
        let mapping = STATES
            .iter()
            .flat_map(|&(code, name, region)| {
                [
                    (code.to_string(), CENSUS_REGIONS[region].to_string()),
                    (name.to_string(), CENSUS_REGIONS[region].to_string()),
                ]
            })
            .collect();
        Self { mapping }
    }

    pub fn from_pairs<I, S, R>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (S, R)>,
        S: Into<String>,
        R: Into<String>,
    {
        let mut mapping = BTreeMap::new();
        for (state, region) in pairs {
            let (state, region) = (state.into(), region.into());
            if !CENSUS_REGIONS.contains(&region.as_str()) {
                return Err(VarxError::InvalidRegionMap(format!(
                    "`{region}` is not a census division"
                )));
            }
            if let Some(prev) = mapping.insert(state.clone(), region.clone()) {
                if prev != region {
                    return Err(VarxError::InvalidRegionMap(format!(
                        "`{state}` assigned to both `{prev}` and `{region}`"
                    )));
                }
            }
        }
        let used: BTreeSet<&str> = mapping.values().map(String::as_str).collect();
        if used.len() != CENSUS_REGIONS.len() {
            let missing: Vec<_> = CENSUS_REGIONS.iter().filter(|r| !used.contains(*r)).collect();
            return Err(VarxError::InvalidRegionMap(format!(
                "no states assigned to {missing:?}"
            )));
        }
        Ok(Self { mapping })
    }

    /// Two-column CSV with header `state,region`.
    pub fn from_csv<R: Read>(source: R) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(source);
        let headers = reader.headers().map_err(|e| VarxError::Parse {
            line: 1,
            message: e.to_string(),
        })?;
        if headers.iter().collect::<Vec<_>>() != ["state", "region"] {
            return Err(VarxError::Parse {
                line: 1,
                message: "region map header must be `state,region`".into(),
            });
        }
        let mut pairs = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| VarxError::Parse {
                line: e.position().map_or(0, |p| p.line()),
                message: e.to_string(),
            })?;
            pairs.push((record[0].to_string(), record[1].to_string()));
        }
        Self::from_pairs(pairs)
    }

    pub fn region_of(&self, state: &str) -> Option<&str> {
        self.mapping.get(state).map(String::as_str)
    }

    /// Canonical index (0..9) of the region a series label belongs to.
    pub(crate) fn region_index(&self, label: &str) -> Result<usize> {
        let state = state_of(label);
        let region = self
            .region_of(state)
            .ok_or_else(|| VarxError::UnknownState(state.to_string()))?;
        Ok(CENSUS_REGIONS
            .iter()
            .position(|r| *r == region)
            .expect("validated on construction"))
    }

    pub fn states(&self) -> impl Iterator<Item = (&str, &str)> {
        self.mapping.iter().map(|(s, r)| (s.as_str(), r.as_str()))
    }
}

impl Default for RegionMap {
    fn default() -> Self {
        Self::census_default()
    }
}

/// Sum state rows into the nine divisions (canonical order). Divisions with no
/// member rows are zero.
pub fn aggregate_to_regions(states: &MultivariateSeries, map: &RegionMap) -> Result<MultivariateSeries> {
    let mut out = Array2::zeros((CENSUS_REGIONS.len(), states.len()));
    for (label, row) in states.labels().iter().zip(states.values().rows()) {
        let region = map.region_index(label)?;
        let mut target = out.row_mut(region);
        target += &row;
    }
    MultivariateSeries::new(
        CENSUS_REGIONS.iter().map(|r| r.to_string()).collect(),
        *states.index(),
        out,
    )
}
