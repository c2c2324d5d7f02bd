//! Reading weekly CSV exports, rolling states up to census regions, building
//! the regional exogenous signals, and generating synthetic VAR-X data.

mod exogenous;
mod regions;
mod synthetic;
mod weekly_csv;

pub use exogenous::{build_exogenous, exogenous_label, ExogenousKind};
pub use regions::{aggregate_to_regions, census_order, state_of, RegionMap, CENSUS_REGIONS};
pub use synthetic::{
    companion_spectral_radius, generate_synthetic_varx, simulate_varx, SyntheticData,
    SyntheticSpec,
};
pub use weekly_csv::{format_week, parse_week, parse_weekly_csv, write_weekly_csv, CsvSchema};
