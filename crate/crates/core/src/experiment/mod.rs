//! Training runs, grids of runs, and their summaries.

mod config;
mod run;
mod summary;
mod sweep;

pub use config::{Method, RunConfig, Task};
pub use run::{
    load_task_data, metrics_csv, read_metrics, run_experiment, run_with_data, train, write_metrics,
    MetricsRecord, TrainOutcome, CSV_HEADER, CSV_SCHEMA,
};
pub use summary::{format_table, summarize, summary_csv, write_summary, SummaryRow, SUMMARY_FILE, SUMMARY_HEADER};
pub use sweep::{
    manifest_csv, sweep, sweep_with_data, write_manifest, ManifestEntry, RunStatus, SweepSpec,
    MANIFEST_FILE, MANIFEST_HEADER,
};
