//! Cumulative cohort design.

use super::DesignAction;
use crate::error::{Error, Result};
use crate::model::TrialState;
use crate::num::Real;

/// Tolerance interval `[p - half_width, p + half_width]` around the target.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CcdRule<T> {
    target: T,
    half_width: T,
}

impl<T: Real> CcdRule<T> {
    pub fn new(target: T, half_width: T) -> Result<Self> {
        crate::model::check_target(target)?;
        if !(half_width > T::zero() && half_width < target.min(T::one() - target)) {
            return Err(Error::InvalidConfig(format!("CCD half-width must lie in (0, min(p, 1-p)), got {half_width}")));
        }
        Ok(CcdRule { target, half_width })
    }

    pub fn target(&self) -> T {
        self.target
    }

    pub fn half_width(&self) -> T {
        self.half_width
    }

    pub fn lower(&self) -> T {
        self.target - self.half_width
    }

    pub fn upper(&self) -> T {
        self.target + self.half_width
    }
}

/// Stay while the observed rate at the current dose is inside the interval
/// (endpoints included), escalate below it, descend above it.
pub fn ccd_next<T: Real>(state: &TrialState<T>, rule: CcdRule<T>) -> Result<DesignAction> {
    let cur = state.current_level().ok_or(Error::EmptyHistory)?;
    let rate = state.rate(cur).ok_or(Error::NoDataAtLevel(cur.number()))?;
    let tol = T::tie_tol();
    let level = if rate < rule.lower() - tol {
        cur.up(state.levels())
    } else if rate > rule.upper() + tol {
        cur.down()
    } else {
        cur
    };
    Ok(DesignAction::NextDose(level))
}
