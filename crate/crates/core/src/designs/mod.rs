//! Dose-transition rules and the serializable design configuration.

pub mod ccd;
mod fit;
pub mod hybrid;
pub mod rad;
pub mod three_plus_three;
pub mod updown;

pub use ccd::{ccd_next, CcdRule};
pub use fit::{CurvePoint, FitKind, FittedCurve};
pub use hybrid::{hybrid_decide, hybrid_next, BaseRule, HybridDecision, HybridRule, Override};
pub use rad::{rad_decide, rad_next, RadDecision};
pub use three_plus_three::{three_plus_three_estimate, three_plus_three_step};
pub use updown::{group_ud_next, k_in_a_row_next, GroupUdRule};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::crm::{Crm, CurveModel, LogNormalPrior, Skeleton};
use crate::error::{Error, Result};
use crate::estimation::cir_mtd_select;
use crate::model::{Level, TrialState};
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "action", content = "level", rename_all = "snake_case")]
pub enum DesignAction {
    NextDose(Level),
    /// Only designs with a built-in stopping rule emit this; carries the
    /// design's own MTD estimate if it has one.
    Stop(Option<Level>),
}

impl DesignAction {
    pub fn level(self) -> Option<Level> {
        match self {
            DesignAction::NextDose(l) => Some(l),
            DesignAction::Stop(_) => None,
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    Power,
    Chevret,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorConfig {
    pub mu: f64,
    pub sigma: f64,
}

fn default_beta0() -> f64 {
    3.0
}

fn default_theta0() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrmConfig {
    pub skeleton: Vec<f64>,
    pub prior: PriorConfig,
    #[serde(default)]
    pub model: ModelKind,
    #[serde(default = "default_beta0")]
    pub beta0: f64,
    #[serde(default = "default_theta0")]
    pub theta0: f64,
    #[serde(default = "yes")]
    pub step_constraint: bool,
}

impl CrmConfig {
    pub fn build<T: Real>(&self, levels: usize) -> Result<Crm<T>> {
        let sk = Skeleton::new(self.skeleton.iter().map(|&v| T::lit(v)).collect())?;
        if sk.len() != levels {
            return Err(Error::InvalidConfig(format!("skeleton has {} values for {levels} levels", sk.len())));
        }
        let model = match self.model {
            ModelKind::Power => CurveModel::power(sk),
            ModelKind::Chevret => CurveModel::chevret(sk, T::lit(self.beta0), T::lit(self.theta0))?,
        };
        let prior = LogNormalPrior::new(T::lit(self.prior.mu), T::lit(self.prior.sigma))?;
        Ok(Crm::new(model, prior, self.step_constraint))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseConfig {
    GroupUd { k: u32, a: u32, b: u32 },
    Kinrow { k: u32 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum OverrideConfig {
    Crm(CrmConfig),
    Ccd { half_width: f64 },
}

/// Serializable design choice, tagged by `"design"`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "design", rename_all = "snake_case")]
pub enum DesignConfig {
    GroupUd {
        k: u32,
        a: u32,
        b: u32,
    },
    Kinrow {
        k: u32,
    },
    Ccd {
        half_width: f64,
    },
    ThreePlusThree,
    Crm(CrmConfig),
    Rad,
    Hybrid {
        base: BaseConfig,
        #[serde(rename = "override")]
        over: OverrideConfig,
        beta: f64,
    },
}

impl DesignConfig {
    /// Short name used in reports.
    pub fn name(&self) -> &'static str {
        match self {
            DesignConfig::GroupUd { .. } => "group_ud",
            DesignConfig::Kinrow { .. } => "kinrow",
            DesignConfig::Ccd { .. } => "ccd",
            DesignConfig::ThreePlusThree => "three_plus_three",
            DesignConfig::Crm(_) => "crm",
            DesignConfig::Rad => "rad",
            DesignConfig::Hybrid { .. } => "hybrid",
        }
    }

    pub fn build<T: Real>(&self, levels: usize, target: T) -> Result<Design<T>> {
        crate::model::check_target(target)?;
        if levels < 2 {
            return Err(Error::TooFewLevels(levels));
        }
        Ok(match self {
            &DesignConfig::GroupUd { k, a, b } => Design::GroupUd(GroupUdRule::new(k, a, b)?),
            &DesignConfig::Kinrow { k } => {
                if k == 0 {
                    return Err(Error::InvalidConfig("k-in-a-row needs k >= 1".into()));
                }
                Design::KInARow(k)
            }
            &DesignConfig::Ccd { half_width } => Design::Ccd(CcdRule::new(target, T::lit(half_width))?),
            DesignConfig::ThreePlusThree => Design::ThreePlusThree,
            DesignConfig::Crm(c) => Design::Crm(c.build(levels)?),
            DesignConfig::Rad => Design::Rad,
            DesignConfig::Hybrid { base, over, beta } => {
                let base = match *base {
                    BaseConfig::GroupUd { k, a, b } => BaseRule::GroupUd(GroupUdRule::new(k, a, b)?),
                    BaseConfig::Kinrow { k } if k > 0 => BaseRule::KInARow(k),
                    BaseConfig::Kinrow { .. } => return Err(Error::InvalidConfig("k-in-a-row needs k >= 1".into())),
                };
                let over = match over {
                    OverrideConfig::Crm(c) => Override::Crm(c.build(levels)?),
                    OverrideConfig::Ccd { half_width } => Override::Ccd(CcdRule::new(target, T::lit(*half_width))?),
                };
                Design::Hybrid(HybridRule::new(base, over, T::lit(*beta))?)
            }
        })
    }
}

/// Extra detail about how a randomized or composite design decided.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DecisionDetail {
    Plain,
    Rad(RadDecision),
    Hybrid(HybridDecision),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Decision {
    pub action: DesignAction,
    pub detail: DecisionDetail,
}

/// A design ready to run on a given grid and target.
#[derive(Clone, Debug, PartialEq)]
pub enum Design<T: Real> {
    GroupUd(GroupUdRule),
    KInARow(u32),
    Ccd(CcdRule<T>),
    ThreePlusThree,
    Crm(Crm<T>),
    Rad,
    Hybrid(HybridRule<T>),
}

impl<T: Real> Design<T> {
    pub fn decide<R: Rng + ?Sized>(&self, state: &TrialState<T>, rng: &mut R) -> Result<Decision> {
        let plain = |action| Decision { action, detail: DecisionDetail::Plain };
        Ok(match self {
            Design::GroupUd(r) => plain(group_ud_next(state, *r)?),
            Design::KInARow(k) => plain(k_in_a_row_next(state, *k)?),
            Design::Ccd(r) => plain(ccd_next(state, *r)?),
            Design::ThreePlusThree => plain(three_plus_three_step(state)?),
            Design::Crm(c) => plain(c.next(state)?),
            Design::Rad => {
                let d = rad_decide(state, rng)?;
                Decision { action: DesignAction::NextDose(d.chosen), detail: DecisionDetail::Rad(d) }
            }
            Design::Hybrid(h) => {
                let d = hybrid_decide(state, h)?;
                Decision { action: DesignAction::NextDose(d.chosen), detail: DecisionDetail::Hybrid(d) }
            }
        })
    }

    pub fn next<R: Rng + ?Sized>(&self, state: &TrialState<T>, rng: &mut R) -> Result<DesignAction> {
        self.decide(state, rng).map(|d| d.action)
    }

    /// MTD estimate from the data so far: the unconstrained model choice for
    /// CRM, the protocol's own rule for 3+3, and centered isotonic
    /// regression for everything else.
    pub fn select_mtd(&self, state: &TrialState<T>) -> Result<Option<Level>> {
        match self {
            Design::Crm(c) => c.estimate(state).map(Some),
            Design::ThreePlusThree => Ok(three_plus_three_estimate(state)),
            _ => cir_mtd_select(state).map(Some),
        }
    }

    /// Patients per cohort; `default` is used by rules that do not fix it.
    pub fn cohort_size(&self, default: u32) -> u32 {
        match self {
            Design::GroupUd(r) => r.k(),
            Design::KInARow(_) => 1,
            Design::ThreePlusThree => three_plus_three::COHORT,
            Design::Hybrid(h) => h.base.cohort_size(),
            _ => default,
        }
    }

    pub fn is_randomized(&self) -> bool {
        matches!(self, Design::Rad)
    }

    /// Whether the design is built from an up-and-down rule, which makes it
    /// coherent by construction.
    pub fn is_up_and_down(&self) -> bool {
        matches!(self, Design::GroupUd(_) | Design::KInARow(_))
    }
}
