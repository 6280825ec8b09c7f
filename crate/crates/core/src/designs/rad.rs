//! Randomized isotonic design: the isotonic-regression allocation, with a
//! random substitution of the adjacent dose on the other side of target
//! whose probability shrinks as data accrue.

use rand::Rng;
use serde::Serialize;

use super::DesignAction;
use crate::error::{Error, Result};
use crate::estimation::pava;
use crate::model::{Level, TrialState};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RadDecision {
    /// Isotonic-regression choice before randomization.
    pub base: Level,
    /// Level actually returned.
    pub chosen: Level,
    /// Substitution probability that was in force.
    pub probability: f64,
    pub substituted: bool,
}

/// Isotonic fit of the observed rates, `(level, fitted rate)` for every
/// observed level.
pub fn isotonic_fit<T: Real>(state: &TrialState<T>) -> Result<Vec<(Level, T)>> {
    let (levels, rates, weights): (Vec<_>, Vec<_>, Vec<_>) = {
        let mut l = Vec::new();
        let mut y = Vec::new();
        let mut w = Vec::new();
        for u in state.grid().all() {
            if let Some(r) = state.rate(u) {
                l.push(u);
                y.push(r);
                w.push(T::from_u32(state.n_at(u)).unwrap());
            }
        }
        (l, y, w)
    };
    if levels.is_empty() {
        return Err(Error::NoObservations);
    }
    let fit = pava(&rates, &weights)?;
    Ok(levels.into_iter().zip(fit).collect())
}

/// Observed level whose isotonic estimate is closest to target. Within a
/// pooled block the highest level is taken when the estimate is at or below
/// target, the lowest when above.
pub fn isotonic_choice<T: Real>(state: &TrialState<T>) -> Result<(Level, T)> {
    let fit = isotonic_fit(state)?;
    let p = state.target();
    let best = fit.iter().map(|&(_, f)| (f - p).abs()).fold(T::infinity(), T::min);
    let near: Vec<(Level, T)> = fit.into_iter().filter(|&(_, f)| (f - p).abs() <= best + T::tie_tol()).collect();
    let below = near.iter().filter(|(_, f)| *f <= p).max_by_key(|(l, _)| *l);
    let pick = match below {
        Some(&b) => b,
        None => *near.iter().min_by_key(|(l, _)| *l).expect("non-empty"),
    };
    Ok(pick)
}

pub fn rad_decide<T: Real, R: Rng + ?Sized>(state: &TrialState<T>, rng: &mut R) -> Result<RadDecision> {
    let (base, fitted) = isotonic_choice(state)?;
    let p = state.target();
    let probability = 1.0 / (f64::from(state.patients()) + 1.0);
    // always consume one draw so the stream position does not depend on data
    let u: f64 = rng.random();
    let fires = u < probability;
    let chosen = if !fires || fitted == p {
        base
    } else if fitted < p {
        base.up(state.levels())
    } else {
        base.down()
    };
    Ok(RadDecision { base, chosen, probability, substituted: chosen != base })
}

pub fn rad_next<T: Real, R: Rng + ?Sized>(state: &TrialState<T>, rng: &mut R) -> Result<DesignAction> {
    rad_decide(state, rng).map(|d| DesignAction::NextDose(d.chosen))
}
