use rand::Rng;
use serde::Serialize;

use crate::designs::{DecisionDetail, Design, DesignAction};
use crate::error::{Error, Result};
use crate::model::{CohortRecord, Level, Scenario, ThresholdStream, TrialState};
use crate::num::Real;

/// Length and start of a simulated trial.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct TrialPlan {
    pub cohorts: usize,
    /// Cohort size for designs that do not fix their own.
    pub cohort_size: u32,
    pub start: Level,
}

impl TrialPlan {
    pub fn new(cohorts: usize, cohort_size: u32, start: Level) -> Result<Self> {
        if cohorts == 0 || cohort_size == 0 {
            return Err(Error::InvalidConfig("a trial needs at least one cohort of at least one patient".into()));
        }
        Ok(TrialPlan { cohorts, cohort_size, start })
    }

    /// Patients needed by `design` when it runs the full plan.
    pub fn patients<T: Real>(&self, design: &Design<T>) -> usize {
        self.cohorts * design.cohort_size(self.cohort_size) as usize
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Trajectory {
    pub cohorts: Vec<CohortRecord>,
    /// Final MTD estimate.
    pub selected: Option<Level>,
    /// Estimate after half the planned cohorts (rounded down).
    pub selected_half: Option<Level>,
    /// True when the design's own stopping rule ended the trial.
    pub stopped_early: bool,
    /// Random substitutions or confidence overrides that changed the
    /// assignment.
    pub overrides: u32,
}

impl Trajectory {
    pub fn levels(&self) -> impl Iterator<Item = Level> + '_ {
        self.cohorts.iter().map(|c| c.level)
    }
}

/// Runs one trial. Thresholds are consumed in patient order whatever dose
/// each patient gets, so designs given the same stream face the same
/// patients.
pub fn run_trial<T: Real, R: Rng + ?Sized>(
    design: &Design<T>,
    scenario: &Scenario<T>,
    stream: &ThresholdStream<T>,
    plan: TrialPlan,
    rng: &mut R,
) -> Result<Trajectory> {
    scenario.grid().check(plan.start)?;
    let size = design.cohort_size(plan.cohort_size);
    let needed = plan.cohorts * size as usize;
    if stream.len() < needed {
        return Err(Error::StreamExhausted { needed, available: stream.len() });
    }
    let q = stream.as_slice();
    let mut state = TrialState::new(scenario.grid().clone(), scenario.target())?;
    let mut level = plan.start;
    let mut selected_half = None;
    let mut stopped_early = false;
    let mut overrides = 0;
    let half = plan.cohorts / 2;
    for c in 0..plan.cohorts {
        let f = scenario.tox(level);
        let patients = &q[c * size as usize..(c + 1) * size as usize];
        let dlts = patients.iter().filter(|&&t| t <= f).count() as u32;
        state.record(level, size, dlts)?;
        if c + 1 == half {
            selected_half = design.select_mtd(&state)?;
        }
        if c + 1 == plan.cohorts {
            break;
        }
        let decision = design.decide(&state, rng)?;
        match decision.detail {
            DecisionDetail::Rad(d) if d.substituted => overrides += 1,
            DecisionDetail::Hybrid(d) if d.overridden => overrides += 1,
            _ => {}
        }
        match decision.action {
            DesignAction::NextDose(l) => level = l,
            DesignAction::Stop(_) => {
                stopped_early = true;
                break;
            }
        }
    }
    let selected = design.select_mtd(&state)?;
    if half == 0 || state.cohorts().len() < half {
        selected_half = selected;
    }
    Ok(Trajectory { cohorts: state.cohorts().to_vec(), selected, selected_half, stopped_early, overrides })
}
