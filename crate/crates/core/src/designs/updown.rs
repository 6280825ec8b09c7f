//! Up-and-down rules: group U&D and k-in-a-row.

use serde::{Deserialize, Serialize};

use super::DesignAction;
use crate::error::{Error, Result};
use crate::model::TrialState;
use crate::num::Real;

/// GU&D(k, a, b): cohorts of `k`; escalate on at most `a` DLTs, descend on at
/// least `b`, otherwise stay.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GroupUdRaw")]
pub struct GroupUdRule {
    k: u32,
    a: u32,
    b: u32,
}

#[derive(Deserialize)]
struct GroupUdRaw {
    k: u32,
    a: u32,
    b: u32,
}

impl TryFrom<GroupUdRaw> for GroupUdRule {
    type Error = Error;
    fn try_from(r: GroupUdRaw) -> Result<Self> {
        GroupUdRule::new(r.k, r.a, r.b)
    }
}

impl GroupUdRule {
    pub fn new(k: u32, a: u32, b: u32) -> Result<Self> {
        if !(a < b && b <= k) {
            return Err(Error::InvalidConfig(format!("group up-and-down needs 0 <= a < b <= k, got ({k},{a},{b})")));
        }
        Ok(GroupUdRule { k, a, b })
    }

    pub fn k(&self) -> u32 {
        self.k
    }

    pub fn a(&self) -> u32 {
        self.a
    }

    pub fn b(&self) -> u32 {
        self.b
    }
}

pub fn group_ud_next<T: Real>(state: &TrialState<T>, rule: GroupUdRule) -> Result<DesignAction> {
    let last = state.last().ok_or(Error::EmptyHistory)?;
    if last.size != rule.k {
        return Err(Error::CohortSizeMismatch { expected: rule.k, found: last.size });
    }
    let level = if last.dlts <= rule.a {
        last.level.up(state.levels())
    } else if last.dlts >= rule.b {
        last.level.down()
    } else {
        last.level
    };
    Ok(DesignAction::NextDose(level))
}

/// k-in-a-row with single-patient cohorts: descend after a DLT, escalate
/// after `k` consecutive non-DLTs at the current dose, otherwise stay.
pub fn k_in_a_row_next<T: Real>(state: &TrialState<T>, k: u32) -> Result<DesignAction> {
    if k == 0 {
        return Err(Error::InvalidConfig("k-in-a-row needs k >= 1".into()));
    }
    let last = state.last().ok_or(Error::EmptyHistory)?;
    if let Some(c) = state.cohorts().iter().rev().take(k as usize).find(|c| c.size != 1) {
        return Err(Error::NonUnitCohort(c.size));
    }
    if last.dlts == 1 {
        return Ok(DesignAction::NextDose(last.level.down()));
    }
    let k = k as usize;
    let cohorts = state.cohorts();
    let run_complete =
        cohorts.len() >= k && cohorts[cohorts.len() - k..].iter().all(|c| c.level == last.level && c.dlts == 0);
    let level = if run_complete { last.level.up(state.levels()) } else { last.level };
    Ok(DesignAction::NextDose(level))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DoseGrid, Level};

    fn state(l: usize, cohorts: &[(usize, u32, u32)]) -> TrialState<f64> {
        let mut s = TrialState::new(DoseGrid::new(l).unwrap(), 0.3).unwrap();
        for &(lev, n, y) in cohorts {
            s.record(Level::from_number(lev).unwrap(), n, y).unwrap();
        }
        s
    }

    fn next_number(a: DesignAction) -> usize {
        match a {
            DesignAction::NextDose(l) => l.number(),
            DesignAction::Stop(_) => panic!("unexpected stop"),
        }
    }

    #[test]
    fn group_examples() {
        let r = GroupUdRule::new(2, 0, 1).unwrap();
        assert_eq!(next_number(group_ud_next(&state(6, &[(3, 2, 0)]), r).unwrap()), 4);
        assert_eq!(next_number(group_ud_next(&state(6, &[(1, 2, 2)]), r).unwrap()), 1);
        assert_eq!(next_number(group_ud_next(&state(6, &[(6, 2, 0)]), r).unwrap()), 6);
        let r = GroupUdRule::new(3, 0, 2).unwrap();
        assert_eq!(next_number(group_ud_next(&state(6, &[(2, 3, 1)]), r).unwrap()), 2);
        assert_eq!(group_ud_next(&state(6, &[(2, 2, 1)]), r), Err(Error::CohortSizeMismatch { expected: 3, found: 2 }));
    }

    #[test]
    fn group_rule_validation() {
        assert!(GroupUdRule::new(2, 1, 1).is_err());
        assert!(GroupUdRule::new(2, 0, 3).is_err());
        assert!(serde_json::from_str::<GroupUdRule>(r#"{"k":2,"a":2,"b":1}"#).is_err());
    }

    #[test]
    fn kinrow_examples() {
        assert_eq!(next_number(k_in_a_row_next(&state(6, &[(2, 1, 0), (2, 1, 0)]), 2).unwrap()), 3);
        assert_eq!(next_number(k_in_a_row_next(&state(6, &[(4, 1, 1)]), 2).unwrap()), 3);
        assert_eq!(next_number(k_in_a_row_next(&state(6, &[(2, 1, 0)]), 2).unwrap()), 2);
        // run broken by a level change
        assert_eq!(next_number(k_in_a_row_next(&state(6, &[(3, 1, 1), (2, 1, 0)]), 2).unwrap()), 2);
        assert_eq!(k_in_a_row_next(&state(6, &[(2, 2, 0)]), 2), Err(Error::NonUnitCohort(2)));
    }

    #[test]
    fn kinrow_run_resets_after_escalation() {
        let s = state(6, &[(2, 1, 0), (2, 1, 0), (3, 1, 0)]);
        assert_eq!(next_number(k_in_a_row_next(&s, 2).unwrap()), 3);
    }
}
