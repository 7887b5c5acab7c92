//! Configuration, seeding, Monte Carlo orchestration, and export.

mod config;
mod export;
mod montecarlo;
mod seed;
mod trial;

pub use config::{
    config_to_toml, parse_config, FileConfig, HarnessOptions, ParsedConfig, RunSection, DEFAULT_D,
    DEFAULT_DELTA, DEFAULT_HORIZON, DEFAULT_SIGMA, DEFAULT_TRIALS, THETA_NORMALIZE_TOL,
};
pub use export::{
    format_f64, from_json_str, read_json, to_json_string, write_clt_csv, write_clt_file,
    write_json, write_timeseries_csv, write_timeseries_file, TIMESERIES_COLUMNS,
};
pub use montecarlo::{
    mean_series, outcome_of, quantile_sorted, run_montecarlo, run_outcomes, summarize,
    CoordinateNormality, McSummary, TrialOutcome,
};
pub use seed::{splitmix64, trial_rng, trial_seed};
pub use trial::{run_trial, run_trial_with};
