//! Trial simulation, ensembles and operating-characteristic metrics.

pub mod ensemble;
pub mod metrics;
pub mod output;
pub mod trial;

pub use ensemble::{perfect_threshold_set, permutation, run_ensemble, run_permutation_ensemble, RunRecord};
pub use metrics::{
    compute_metrics, settled_level, summarize_ensemble, EnsembleReport, RunMetrics, SettlingCell, SettlingStage,
    SummaryOptions, SETTLING_WINDOW,
};
pub use output::{write_histogram_csv, write_runs_csv};
pub use trial::{run_trial, Trajectory, TrialPlan};

use crate::error::Result;

/// Summarizes a set of run records (all from one design).
pub fn summarize_runs(runs: &[RunRecord], opts: SummaryOptions) -> Result<EnsembleReport> {
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| r.metrics).collect();
    let mtd: Vec<_> = runs.iter().map(|r| r.true_mtd).collect();
    let settled: Vec<_> = runs.iter().map(|r| r.settled_level).collect();
    summarize_ensemble(&metrics, &mtd, &settled, opts)
}
