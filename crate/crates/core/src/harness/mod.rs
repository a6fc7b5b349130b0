//! Config-driven Monte Carlo runner.

pub mod config;
pub mod designs;
pub mod report;
pub mod run;

pub use config::{
    DeltaScheme, DesignData, DesignSpec, ExperimentConfig, ExperimentKind, MuScale, SizePattern,
    SuiteConfig, TestKind,
};
pub use designs::CellDesign;
pub use report::{summarize, CellReport, ExperimentReport, Format, Metric, Provenance, CSV_HEADER};
pub use run::{cell_seed, config_hash, env_seed, run_experiment, run_suite, RunOptions};
