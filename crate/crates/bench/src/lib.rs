//! Experiment harness around `cagraph`: CSV datasets, synthetic blobs,
//! seeded repeated trials, the `(α, β)` grid search, rank-sum comparisons
//! and CSV/JSON summary reports.

pub mod dataset;
pub mod error;
pub mod experiment;
pub mod report;

pub use dataset::{load_csv, make_blobs, parse_csv, to_csv, write_csv, Dataset, LabelMode};
pub use error::{HarnessError, Result};
pub use experiment::{
    aggregate, compare_methods, grid_search, run_trials, Comparison, ExperimentSpec, GridCell,
    GridOutcome, Method, Metric, Summary, TrialResult, Verdict, DEFAULT_GRID,
};
pub use report::{emit_report, read_csv_report, read_json_report, records, render, Format, ReportRecord};
