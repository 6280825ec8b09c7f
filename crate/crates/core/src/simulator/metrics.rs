use serde::{Deserialize, Serialize};

use super::trial::Trajectory;
use crate::error::{Error, Result};
use crate::model::Level;

/// Identical consecutive assignments that count as settling.
pub const SETTLING_WINDOW: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct RunMetrics {
    /// Cohorts after the first treated at the true MTD.
    pub n_star: u32,
    /// One-based cohort index completing the first run of
    /// [`SETTLING_WINDOW`] identical assignments, not counting cohort 1.
    pub settling_cohort: Option<u32>,
    /// Escalations right after a cohort with a DLT plus de-escalations right
    /// after a cohort without one.
    pub incoherent: u32,
    pub total_dlts: u32,
    /// DLTs excluding the first cohort.
    pub dlts_after_first: u32,
    pub cohorts: u32,
    pub selected_half: Option<Level>,
    pub selected_full: Option<Level>,
    pub correct_half: bool,
    pub correct_full: bool,
    pub overrides: u32,
}

pub fn compute_metrics(traj: &Trajectory, true_mtd: Level) -> RunMetrics {
    let levels: Vec<Level> = traj.levels().collect();
    let n_star = levels.iter().skip(1).filter(|&&l| l == true_mtd).count() as u32;
    let settling_cohort = levels
        .get(1..)
        .and_then(|rest| rest.windows(SETTLING_WINDOW).position(|w| w.iter().all(|&l| l == w[0])))
        .map(|i| (i + 1 + SETTLING_WINDOW) as u32);
    let incoherent = traj
        .cohorts
        .windows(2)
        .filter(|w| (w[1].level > w[0].level && w[0].dlts >= 1) || (w[1].level < w[0].level && w[0].dlts == 0))
        .count() as u32;
    let total_dlts = traj.cohorts.iter().map(|c| c.dlts).sum();
    let dlts_after_first = traj.cohorts.iter().skip(1).map(|c| c.dlts).sum();
    RunMetrics {
        n_star,
        settling_cohort,
        incoherent,
        total_dlts,
        dlts_after_first,
        cohorts: levels.len() as u32,
        selected_half: traj.selected_half,
        selected_full: traj.selected,
        correct_half: traj.selected_half == Some(true_mtd),
        correct_full: traj.selected == Some(true_mtd),
        overrides: traj.overrides,
    }
}

/// Settling-time bins, by the cohort at which settling completed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SettlingStage {
    ByCohort8,
    Cohorts9To12,
    Cohorts13To16,
    Later,
    Never,
}

impl SettlingStage {
    pub const ALL: [SettlingStage; 5] = [
        SettlingStage::ByCohort8,
        SettlingStage::Cohorts9To12,
        SettlingStage::Cohorts13To16,
        SettlingStage::Later,
        SettlingStage::Never,
    ];

    pub fn of(settling: Option<u32>) -> Self {
        match settling {
            None => SettlingStage::Never,
            Some(c) if c <= 8 => SettlingStage::ByCohort8,
            Some(c) if c <= 12 => SettlingStage::Cohorts9To12,
            Some(c) if c <= 16 => SettlingStage::Cohorts13To16,
            Some(_) => SettlingStage::Later,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlingCell {
    pub stage: SettlingStage,
    pub runs: u64,
    /// Runs in this stage that settled on the true MTD.
    pub settled_on_mtd: u64,
    /// Runs in this stage whose final selection was correct.
    pub correct_full: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SummaryOptions {
    /// Planned cohorts per run.
    pub cohorts: u32,
    pub levels: usize,
    /// A run is high-toxicity when DLTs after the first cohort exceed this.
    pub high_tox_threshold: Option<u32>,
}

impl SummaryOptions {
    /// Thresholds used for the 25-patient random-scenario comparison: more
    /// than 9 DLTs with 7 levels, more than 10 with 4.
    pub fn new(cohorts: u32, levels: usize) -> Self {
        let high_tox_threshold = match levels {
            7 => Some(9),
            4 => Some(10),
            _ => None,
        };
        SummaryOptions { cohorts, levels, high_tox_threshold }
    }
}

/// Ensemble summary. Rates are fractions in `[0, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnsembleReport {
    pub runs: u64,
    pub success_half: f64,
    pub success_full: f64,
    /// At least half of cohorts `2..=N` at the true MTD.
    pub high_n_star: f64,
    /// Fewer than `(N - 1) / l` cohorts at the true MTD.
    pub low_n_star: f64,
    pub high_toxicity: Option<f64>,
    /// Runs with at least one incoherent transition.
    pub incoherent_runs: f64,
    pub mean_n_star: f64,
    pub var_n_star: f64,
    /// `n_star_hist[v]` runs had `n_star == v`.
    pub n_star_hist: Vec<u64>,
    pub settled_by_8: f64,
    pub settled_by_12: f64,
    pub settling: Vec<SettlingCell>,
    pub mean_dlts: f64,
}

/// `settled_level[i]` is the level run `i` settled on, if any.
pub fn summarize_ensemble(
    metrics: &[RunMetrics],
    true_mtd: &[Level],
    settled_level: &[Option<Level>],
    opts: SummaryOptions,
) -> Result<EnsembleReport> {
    if metrics.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if metrics.len() != true_mtd.len() || metrics.len() != settled_level.len() {
        return Err(Error::LengthMismatch(metrics.len(), true_mtd.len().min(settled_level.len())));
    }
    let m = metrics.len() as f64;
    let frac = |pred: &dyn Fn(&RunMetrics) -> bool| metrics.iter().filter(|r| pred(r)).count() as f64 / m;
    let after_first = opts.cohorts.saturating_sub(1);
    let high_bar = after_first.div_ceil(2);
    let mut hist = vec![0u64; opts.cohorts as usize];
    for r in metrics {
        let v = r.n_star as usize;
        if v >= hist.len() {
            hist.resize(v + 1, 0);
        }
        hist[v] += 1;
    }
    let mean = metrics.iter().map(|r| f64::from(r.n_star)).sum::<f64>() / m;
    let var = if metrics.len() > 1 {
        metrics.iter().map(|r| (f64::from(r.n_star) - mean).powi(2)).sum::<f64>() / (m - 1.0)
    } else {
        0.0
    };
    let settling = SettlingStage::ALL
        .iter()
        .map(|&stage| {
            let mut cell = SettlingCell { stage, runs: 0, settled_on_mtd: 0, correct_full: 0 };
            for ((r, mtd), settled) in metrics.iter().zip(true_mtd).zip(settled_level) {
                if SettlingStage::of(r.settling_cohort) == stage {
                    cell.runs += 1;
                    cell.settled_on_mtd += u64::from(*settled == Some(*mtd));
                    cell.correct_full += u64::from(r.correct_full);
                }
            }
            cell
        })
        .collect();
    Ok(EnsembleReport {
        runs: metrics.len() as u64,
        success_half: frac(&|r| r.correct_half),
        success_full: frac(&|r| r.correct_full),
        high_n_star: frac(&|r| r.n_star >= high_bar),
        low_n_star: frac(&|r| (r.n_star as usize) * opts.levels < after_first as usize),
        high_toxicity: opts.high_tox_threshold.map(|t| frac(&|r| r.dlts_after_first > t)),
        incoherent_runs: frac(&|r| r.incoherent > 0),
        mean_n_star: mean,
        var_n_star: var,
        n_star_hist: hist,
        settled_by_8: frac(&|r| r.settling_cohort.is_some_and(|c| c <= 8)),
        settled_by_12: frac(&|r| r.settling_cohort.is_some_and(|c| c <= 12)),
        settling,
        mean_dlts: metrics.iter().map(|r| f64::from(r.total_dlts)).sum::<f64>() / m,
    })
}

/// Level on which a trajectory settled, if it did.
pub fn settled_level(traj: &Trajectory, metrics: &RunMetrics) -> Option<Level> {
    metrics.settling_cohort.map(|c| traj.cohorts[c as usize - 1].level)
}
