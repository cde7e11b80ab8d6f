//! Case ingestion, run configuration and artifact writing.

mod case;
mod config;
mod run;

pub use case::{bundled_case, load_case, parse_case, BUNDLED_CASES, CASE_HEADER};
pub use config::{Mode, RunConfig, DIST_ETA, TRANS_ETA};
pub use run::{resolve_case, run, sub_seed, RunReport, MANIFEST_FILE, MANIFEST_SCHEMA, WIND_FORECAST_FRACTION};
