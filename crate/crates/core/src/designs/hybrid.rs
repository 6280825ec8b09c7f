//! Up-and-down rule with a confidence-gated long-memory override.

use serde::Serialize;

use super::updown::{group_ud_next, k_in_a_row_next, GroupUdRule};
use super::{ccd::ccd_next, CcdRule, DesignAction};
use crate::crm::{mtd_weights, Crm};
use crate::error::{Error, Result};
use crate::model::{Level, TrialState};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BaseRule {
    GroupUd(GroupUdRule),
    KInARow(u32),
}

impl BaseRule {
    pub fn next<T: Real>(&self, state: &TrialState<T>) -> Result<DesignAction> {
        match *self {
            BaseRule::GroupUd(r) => group_ud_next(state, r),
            BaseRule::KInARow(k) => k_in_a_row_next(state, k),
        }
    }

    pub fn cohort_size(&self) -> u32 {
        match self {
            BaseRule::GroupUd(r) => r.k(),
            BaseRule::KInARow(_) => 1,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Override<T: Real> {
    Crm(Crm<T>),
    Ccd(CcdRule<T>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct HybridRule<T: Real> {
    pub base: BaseRule,
    pub over: Override<T>,
    pub beta: T,
}

impl<T: Real> HybridRule<T> {
    pub fn new(base: BaseRule, over: Override<T>, beta: T) -> Result<Self> {
        if !(beta > T::zero() && beta < T::lit(0.5)) {
            return Err(Error::InvalidConfig(format!("confidence threshold must lie in (0, 0.5), got {beta}")));
        }
        Ok(HybridRule { base, over, beta })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct HybridDecision {
    /// Up-and-down assignment.
    pub base: Level,
    /// Long-memory design's assignment.
    pub proposal: Level,
    pub chosen: Level,
    /// Confidence statistic compared with the threshold; absent when the
    /// two rules agree.
    pub statistic: Option<f64>,
    pub overridden: bool,
}

fn binom_pmf<T: Real>(n: u32, p: T) -> Vec<T> {
    let q = T::one() - p;
    let mut c = T::one();
    let mut out = Vec::with_capacity(n as usize + 1);
    for j in 0..=n {
        if j > 0 {
            c = c * T::from_u32(n - j + 1).unwrap() / T::from_u32(j).unwrap();
        }
        out.push(c * p.powi(j as i32) * q.powi((n - j) as i32));
    }
    out
}

/// `P(X >= k)` for `X ~ Binomial(n, p)`.
pub fn binom_upper_tail<T: Real>(n: u32, k: u32, p: T) -> T {
    binom_pmf(n, p).into_iter().skip(k as usize).sum()
}

/// `P(X <= k)` for `X ~ Binomial(n, p)`.
pub fn binom_lower_tail<T: Real>(n: u32, k: u32, p: T) -> T {
    binom_pmf(n, p).into_iter().take(k as usize + 1).sum()
}

/// Follows the up-and-down rule unless the long-memory design disagrees and
/// the disagreement is supported with confidence:
///
/// * CRM: moving below the U&D dose `a` needs the posterior MTD weight of
///   levels at or above `a` under `beta`; moving above needs the weight at
///   or below `a` under `beta`.
/// * CCD: at the current dose, moving below the U&D dose needs
///   `P(X >= R | n, p - delta) < beta`; moving above needs
///   `P(X <= R | n, p + delta) < beta`.
pub fn hybrid_decide<T: Real>(state: &TrialState<T>, rule: &HybridRule<T>) -> Result<HybridDecision> {
    let base = match rule.base.next(state)? {
        DesignAction::NextDose(l) => l,
        DesignAction::Stop(_) => unreachable!("up-and-down rules never stop"),
    };
    let proposal = match &rule.over {
        Override::Crm(crm) => crm.next(state)?,
        Override::Ccd(ccd) => ccd_next(state, *ccd)?,
    };
    let DesignAction::NextDose(proposal) = proposal else { unreachable!("long-memory rules never stop") };
    if proposal == base {
        return Ok(HybridDecision { base, proposal, chosen: base, statistic: None, overridden: false });
    }
    let down = proposal < base;
    let stat = match &rule.over {
        Override::Crm(crm) => {
            let w = mtd_weights(state, &crm.model, crm.prior)?;
            let a = base.index();
            if down {
                w[a..].iter().copied().sum::<T>()
            } else {
                w[..=a].iter().copied().sum::<T>()
            }
        }
        Override::Ccd(ccd) => {
            let cur = state.current_level().ok_or(Error::EmptyHistory)?;
            let (n, r) = (state.n_at(cur), state.dlts_at(cur));
            if down {
                binom_upper_tail(n, r, ccd.lower())
            } else {
                binom_lower_tail(n, r, ccd.upper())
            }
        }
    };
    let accept = stat < rule.beta;
    Ok(HybridDecision {
        base,
        proposal,
        chosen: if accept { proposal } else { base },
        statistic: Some(stat.to_f64_lossy()),
        overridden: accept,
    })
}

pub fn hybrid_next<T: Real>(state: &TrialState<T>, rule: &HybridRule<T>) -> Result<DesignAction> {
    hybrid_decide(state, rule).map(|d| DesignAction::NextDose(d.chosen))
}
