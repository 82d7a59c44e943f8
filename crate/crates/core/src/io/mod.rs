//! Configuration, run orchestration and CSV/JSON artifacts.

pub mod config;
pub mod export;
pub mod pipeline;

pub use config::{parse_config, parse_config_str, PlanMode, RunConfig};
pub use export::{
    load_bundle_csv, load_funnel_csv, load_net_csv, load_words_csv, write_bundle_csv,
    write_distance_csv, write_funnel_csv, write_net_csv, write_words_csv, BundleRow, DistanceRow,
};
pub use pipeline::{
    error_record, run_pipeline, write_error_record, DeriveReport, Pipeline, RunSummary,
};
