use std::fs::File;
use std::path::Path;

use anyhow::{bail, Context, Result};
use varx_core::ingestion::{
    aggregate_to_regions, build_exogenous, parse_weekly_csv, CsvSchema, RegionMap, CENSUS_REGIONS,
};
use varx_core::timeseries::{align, MultivariateSeries};

use crate::config::RunConfig;

/// Regional claims and, when available, the 18 exogenous rows on the same weeks.
pub struct Inputs {
    pub claims: MultivariateSeries,
    pub exogenous: Option<MultivariateSeries>,
}

fn read_series(path: &Path, what: &str) -> Result<MultivariateSeries> {
    let file = File::open(path).with_context(|| format!("cannot open {what} file `{}`", path.display()))?;
    parse_weekly_csv(file, &CsvSchema::default()).with_context(|| format!("reading {what} file `{}`", path.display()))
}

fn region_map(config: &RunConfig) -> Result<RegionMap> {
    match &config.region_map {
        Some(path) => {
            let file =
                File::open(path).with_context(|| format!("cannot open region map `{}`", path.display()))?;
            RegionMap::from_csv(file).with_context(|| format!("reading region map `{}`", path.display()))
        }
        None => Ok(RegionMap::census_default()),
    }
}

/// Claims labeled by division are used as is; state-level claims are summed.
fn regional_claims(states: MultivariateSeries, map: &RegionMap) -> Result<MultivariateSeries> {
    if states.labels().iter().all(|l| CENSUS_REGIONS.contains(&l.as_str())) {
        if states.n_series() != CENSUS_REGIONS.len() {
            bail!("claims file names only {} of the 9 census divisions", states.n_series());
        }
        return Ok(states.select(&CENSUS_REGIONS)?);
    }
    Ok(aggregate_to_regions(&states, map)?)
}

/// Load claims and, if `need_exogenous` or all three signal files are given,
/// the exogenous rows. Both are trimmed to the weeks they share.
pub fn load(config: &RunConfig, need_exogenous: bool) -> Result<Inputs> {
    let map = region_map(config)?;
    let claims_path = config.claims.as_deref().context("no claims file given (--claims)")?;
    let claims = regional_claims(read_series(claims_path, "claims")?, &map)
        .with_context(|| format!("aggregating claims from `{}`", claims_path.display()))?;

    let paths = [
        ("queries", config.queries.as_deref()),
        ("clicks", config.clicks.as_deref()),
        ("totals", config.totals.as_deref()),
    ];
    let missing: Vec<&str> = paths.iter().filter(|(_, p)| p.is_none()).map(|(n, _)| *n).collect();
    if !missing.is_empty() {
        if need_exogenous {
            bail!("exogenous variants need --{}", missing.join(", --"));
        }
        return Ok(Inputs {
            claims,
            exogenous: None,
        });
    }
    let [q, c, t] = paths.map(|(name, p)| read_series(p.expect("checked above"), name));
    let exogenous = build_exogenous(&q?, &c?, &t?, &map, config.epsilon).context("building exogenous signals")?;
    let (claims_common, exogenous) = align(&claims, &exogenous).context("aligning claims with exogenous signals")?;
    if claims_common.len() < claims.len() {
        log::warn!(
            "using the {} weeks covered by both claims and signals (claims had {})",
            claims_common.len(),
            claims.len()
        );
    }
    Ok(Inputs {
        claims: claims_common,
        exogenous: Some(exogenous),
    })
}
