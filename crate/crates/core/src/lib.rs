//! Phase I dose-finding: designs, estimators, scenario generation and an
//! ensemble simulator.
//!
//! Numerical kernels are generic over the scalar type ([`num::Real`] for
//! `f32`/`f64`, [`num::Field`] for exact arithmetic in the isotonic
//! estimators). The random-scenario generator and the ensemble simulator
//! work in `f64`; the aliases below name the `f64` forms.

// `!(a > b)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod crm;
pub mod designs;
pub mod error;
pub mod estimation;
pub mod model;
pub mod num;
pub mod scenarios;
pub mod seed;
pub mod simulator;

pub use designs::{DesignAction, DesignConfig};
pub use error::{Error, Result};
pub use model::{CohortRecord, Level, Provenance};

pub type Scenario = model::Scenario<f64>;
pub type DoseGrid = model::DoseGrid<f64>;
pub type TrialState = model::TrialState<f64>;
pub type ThresholdStream = model::ThresholdStream<f64>;
pub type Design = designs::Design<f64>;
pub type Skeleton = crm::Skeleton<f64>;
pub type CurveModel = crm::CurveModel<f64>;
pub type LogNormalPrior = crm::LogNormalPrior<f64>;
pub type Crm = crm::Crm<f64>;
