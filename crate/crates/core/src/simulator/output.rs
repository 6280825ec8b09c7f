//! Per-run CSV and histogram CSV writers.

use std::io::Write;

use super::ensemble::RunRecord;
use super::metrics::EnsembleReport;

fn level_cell(l: Option<crate::model::Level>) -> String {
    l.map(|l| l.number().to_string()).unwrap_or_default()
}

/// Columns: run_id, scenario_id, design, n_star, settling_cohort,
/// incoherent, dlts, selected_half, selected_full, correct_half,
/// correct_full. Missing values are empty cells.
pub fn write_runs_csv<W: Write>(out: W, runs: &[RunRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "run_id",
        "scenario_id",
        "design",
        "n_star",
        "settling_cohort",
        "incoherent",
        "dlts",
        "selected_half",
        "selected_full",
        "correct_half",
        "correct_full",
    ])?;
    for r in runs {
        let m = &r.metrics;
        w.write_record([
            r.run_id.to_string(),
            r.scenario_id.to_string(),
            r.design.clone(),
            m.n_star.to_string(),
            m.settling_cohort.map(|c| c.to_string()).unwrap_or_default(),
            m.incoherent.to_string(),
            m.total_dlts.to_string(),
            level_cell(m.selected_half),
            level_cell(m.selected_full),
            m.correct_half.to_string(),
            m.correct_full.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns: n_star_value, count.
pub fn write_histogram_csv<W: Write>(out: W, report: &EnsembleReport) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["n_star_value", "count"])?;
    for (v, c) in report.n_star_hist.iter().enumerate() {
        w.write_record([v.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
