//! Coverage experiments: configuration, the replication driver and output files.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, ExperimentKind, KvFile};
pub use experiment::{
    bootstrap_key, path_seed, run_ecf_coverage, run_experiment, run_rv_coverage, with_threads,
    Cell, CoverageReport, CoverageRow, FailedReplication, SkippedCell,
};
pub use output::{emit_outputs, parse_csv, render_svg, summary, to_csv, CsvRow};
