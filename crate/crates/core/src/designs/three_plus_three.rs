//! The conventional 3+3 protocol.

use super::DesignAction;
use crate::error::{Error, Result};
use crate::model::{Level, TrialState};
use crate::num::Real;

pub const COHORT: u32 = 3;

/// Highest observed level with observed rate below 1/3.
pub fn three_plus_three_estimate<T: Real>(state: &TrialState<T>) -> Option<Level> {
    state.grid().all().filter(|&u| state.n_at(u) > 0 && 3 * state.dlts_at(u) < state.n_at(u)).max()
}

/// First cohort at a level: escalate on 0 DLTs, repeat on 1, descend on 2+.
/// Second cohort: descend if the six patients had 2+ DLTs, else escalate.
/// Stops when the rule would give any level a third cohort, or calls for a
/// dose below `d1`.
pub fn three_plus_three_step<T: Real>(state: &TrialState<T>) -> Result<DesignAction> {
    let last = *state.last().ok_or(Error::EmptyHistory)?;
    if let Some(c) = state.cohorts().iter().find(|c| c.size != COHORT) {
        return Err(Error::CohortSizeMismatch { expected: COHORT, found: c.size });
    }
    let levels = state.levels();
    let counts: Vec<usize> = state.grid().all().map(|u| state.cohorts_at(u)).collect();
    if let Some(u) = counts.iter().position(|&c| c > 2) {
        return Err(Error::MalformedHistory(format!("{} cohorts at {}", counts[u], Level::from_index(u))));
    }
    let cur = last.level;
    let step: isize = match counts[cur.index()] {
        1 => match last.dlts {
            0 => 1,
            1 => 0,
            _ => -1,
        },
        _ => {
            if state.dlts_at(cur) >= 2 {
                -1
            } else {
                1
            }
        }
    };
    if step < 0 && cur.index() == 0 {
        return Ok(DesignAction::Stop(three_plus_three_estimate(state)));
    }
    let next = cur.shifted(step, levels);
    if counts[next.index()] >= 2 {
        return Ok(DesignAction::Stop(three_plus_three_estimate(state)));
    }
    Ok(DesignAction::NextDose(next))
}
