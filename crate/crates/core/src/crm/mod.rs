//! One-parameter continual reassessment method.

mod curve;
mod posterior;

pub use curve::{chevret_backcalc, chevret_prob, power_curve, CurveModel, Skeleton};
pub use posterior::{mtd_weights, posterior_mean_theta, posterior_theta, LogNormalPrior, PosteriorSummary};

use crate::designs::DesignAction;
use crate::error::Result;
use crate::model::{Level, TrialState};
use crate::num::{closest_index, Real};

/// A CRM design: model curve, prior and the one-level step constraint.
#[derive(Clone, Debug, PartialEq)]
pub struct Crm<T: Real> {
    pub model: CurveModel<T>,
    pub prior: LogNormalPrior<T>,
    pub step_constraint: bool,
}

impl<T: Real> Crm<T> {
    pub fn new(model: CurveModel<T>, prior: LogNormalPrior<T>, step_constraint: bool) -> Self {
        Crm { model, prior, step_constraint }
    }

    /// Plug-in curve at the posterior mean.
    pub fn fitted_curve(&self, state: &TrialState<T>) -> Result<Vec<T>> {
        let theta = posterior_mean_theta(state, &self.model, self.prior)?;
        Ok(self.model.curve(theta))
    }

    pub fn posterior(&self, state: &TrialState<T>) -> Result<PosteriorSummary<T>> {
        posterior_theta(state, &self.model, self.prior)
    }

    pub fn next(&self, state: &TrialState<T>) -> Result<DesignAction> {
        crm_next(state, &self.model, self.prior, self.step_constraint)
    }

    pub fn estimate(&self, state: &TrialState<T>) -> Result<Level> {
        crm_mtd_estimate(state, &self.model, self.prior)
    }
}

/// Level minimizing `|G(d_u, theta_hat) - p|`; ties go to the lower level.
pub fn crm_mtd_estimate<T: Real>(
    state: &TrialState<T>,
    model: &CurveModel<T>,
    prior: LogNormalPrior<T>,
) -> Result<Level> {
    let theta = posterior_mean_theta(state, model, prior)?;
    let curve = model.curve(theta);
    Ok(Level::from_index(closest_index(&curve, state.target()).expect("non-empty model")))
}

/// Next allocation: the estimated MTD, moved at most one level away from the
/// current dose when `step_constraint` is set.
pub fn crm_next<T: Real>(
    state: &TrialState<T>,
    model: &CurveModel<T>,
    prior: LogNormalPrior<T>,
    step_constraint: bool,
) -> Result<DesignAction> {
    let candidate = crm_mtd_estimate(state, model, prior)?;
    let level = match (step_constraint, state.current_level()) {
        (true, Some(cur)) => constrain_step(cur, candidate),
        _ => candidate,
    };
    Ok(DesignAction::NextDose(level))
}

pub(crate) fn constrain_step(current: Level, candidate: Level) -> Level {
    let c = current.index();
    let lo = c.saturating_sub(1);
    Level::from_index(candidate.index().clamp(lo, c + 1))
}
