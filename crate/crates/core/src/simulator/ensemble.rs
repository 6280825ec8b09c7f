use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::metrics::{compute_metrics, settled_level, RunMetrics};
use super::trial::{run_trial, Trajectory, TrialPlan};
use crate::designs::Design;
use crate::error::{Error, Result};
use crate::model::{Level, Provenance, Scenario, ThresholdStream};
use crate::seed::{stream, StreamKind};

/// Quantile thresholds `i / (n + 1)`, `i = 1..=n`, with the two nearest
/// values bracketing `p` (largest below, smallest above) replaced by second
/// copies of the extreme values `1 / (n + 1)` and `n / (n + 1)`.
pub fn perfect_threshold_set(n: usize, p: f64) -> Result<ThresholdStream<f64>> {
    let m = (n + 1) as f64;
    if n < 4 || !(p > 1.0 / m && p < n as f64 / m) {
        return Err(Error::InvalidTarget(p));
    }
    let q: Vec<f64> = (1..=n).map(|i| i as f64 / m).collect();
    let below = q.iter().rposition(|&v| v < p).expect("p above the lowest value");
    let above = q.iter().position(|&v| v > p).expect("p below the highest value");
    let mut out: Vec<f64> = q.iter().enumerate().filter(|&(i, _)| i != below && i != above).map(|(_, &v)| v).collect();
    out.push(q[0]);
    out.push(q[n - 1]);
    ThresholdStream::new(out, Provenance::PermutedFixedSet)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunRecord {
    pub run_id: u64,
    pub scenario_id: usize,
    pub design: String,
    pub true_mtd: Level,
    pub settled_level: Option<Level>,
    pub metrics: RunMetrics,
}

fn record(run_id: u64, scenario_id: usize, design: &str, traj: &Trajectory, mtd: Level) -> RunRecord {
    let metrics = compute_metrics(traj, mtd);
    RunRecord {
        run_id,
        scenario_id,
        design: design.to_string(),
        true_mtd: mtd,
        settled_level: settled_level(traj, &metrics),
        metrics,
    }
}

/// Runs `design` once per (scenario, replicate). Run `r` draws its
/// thresholds from stream `r` of the master seed, so every design run with
/// the same seed sees the same patients. Results come back in run order
/// whatever the thread count.
pub fn run_ensemble(
    name: &str,
    design: &Design<f64>,
    scenarios: &[Scenario<f64>],
    replicates: usize,
    plan: TrialPlan,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let n_patients = plan.patients(design);
    let total = (scenarios.len() * replicates) as u64;
    (0..total)
        .into_par_iter()
        .map(|run_id| {
            let sid = (run_id / replicates as u64) as usize;
            let scenario = &scenarios[sid];
            let thresholds = ThresholdStream::draw(&mut stream(seed, StreamKind::Thresholds, run_id), n_patients);
            let mut rng = stream(seed, StreamKind::DesignDraws, run_id);
            let traj = run_trial(design, scenario, &thresholds, plan, &mut rng)?;
            Ok(record(run_id, sid, name, &traj, scenario.true_mtd()))
        })
        .collect()
}

/// `m` runs on random orderings of one fixed threshold set. Run `r`
/// shuffles with permutation stream `r`.
pub fn run_permutation_ensemble(
    name: &str,
    design: &Design<f64>,
    scenario: &Scenario<f64>,
    base: &ThresholdStream<f64>,
    m: usize,
    plan: TrialPlan,
    seed: u64,
) -> Result<Vec<RunRecord>> {
    let needed = plan.patients(design);
    if base.len() < needed {
        return Err(Error::StreamExhausted { needed, available: base.len() });
    }
    (0..m as u64)
        .into_par_iter()
        .map(|run_id| {
            let order = permutation(base.len(), seed, run_id);
            let thresholds = base.permuted(&order);
            let mut rng = stream(seed, StreamKind::DesignDraws, run_id);
            let traj = run_trial(design, scenario, &thresholds, plan, &mut rng)?;
            Ok(record(run_id, 0, name, &traj, scenario.true_mtd()))
        })
        .collect()
}

/// Permutation used by run `run_id` of a permutation ensemble.
pub fn permutation(n: usize, seed: u64, run_id: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream(seed, StreamKind::Permutation, run_id));
    order
}
