//! Experiment orchestration: configs, run matrices, CSV results, reports,
//! weight search and feature ablation.

pub mod ablation;
pub mod config;
pub mod dse;
pub mod oracle;
pub mod results;
pub mod run;

pub use ablation::{ablation_configs, ablation_run};
pub use config::{RunConfig, TraceSpec};
pub use dse::{grid_search_dse, linspace, DseMode, DseResult, SearchSpace};
pub use oracle::{near_best, PhaseOracle};
pub use results::{csv_string, geomean, geomean_report, read_csv, write_csv, Report, ResultRow};
pub use run::{run_configs, run_matrix, run_one, Grid, RunResult};
