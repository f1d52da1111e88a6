//! Experiment configuration, single runs, resumable sweeps and reports.

pub mod config;
pub mod report;
pub mod run;
pub mod sweep;

pub use config::{EvalSection, ExperimentConfig, SweepSpec};
pub use report::{
    correlation_report, emit_report, format_mean_std, load_summary_csv, metric_vs_d, metric_vs_gamma, table1_markdown,
    table1_rows, write_correlation_csv, write_summary_csv, CorrelationEntry, ReportFiles, SummaryRow,
    DISENTANGLEMENT_METRICS, GENERALIZATION_METRICS,
};
pub use run::{curve_path, evaluate_model, run_experiment, write_loss_curve, RunRecord, RunSpec, RunStatus};
pub use sweep::{expand_sweep, latest_by_hash, load_records, run_sweep, ResultsStore, RESULTS_FILE};
