//! Current dose-toxicity fit of a design, for display during live conduct.

use serde::Serialize;

use super::Design;
use crate::error::Result;
use crate::estimation::{cir, interpolate, CirOptions};
use crate::model::TrialState;
use crate::num::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum FitKind {
    /// Model curve at the posterior mean of theta.
    Model,
    /// Centered isotonic regression of the observed rates.
    Isotonic,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CurvePoint<T> {
    /// One-based, fractional between levels.
    pub level: T,
    pub dose: T,
    pub prob: T,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FittedCurve<T> {
    pub kind: FitKind,
    /// Fitted toxicity at each grid level.
    pub grid: Vec<T>,
    /// `extra` evenly spaced points from the lowest to the highest level.
    pub dense: Vec<CurvePoint<T>>,
    pub theta_mean: Option<T>,
    pub mtd_weights: Option<Vec<T>>,
}

impl<T: Real> Design<T> {
    /// The model curve for CRM; the CIR fit otherwise, or `None` before any
    /// data. `extra` is the number of interpolation points.
    pub fn fitted_curve(&self, state: &TrialState<T>, extra: usize) -> Result<Option<FittedCurve<T>>> {
        let grid = state.grid();
        let top = T::from_usize(grid.levels() - 1).unwrap();
        let positions: Vec<T> = match extra {
            0 => Vec::new(),
            1 => vec![T::zero()],
            n => (0..n).map(|i| top * T::from_usize(i).unwrap() / T::from_usize(n - 1).unwrap()).collect(),
        };
        let idx: Vec<T> = (0..grid.levels()).map(|u| T::from_usize(u).unwrap()).collect();
        let dose_at = |x: T| interpolate(&idx, grid.doses(), x);
        let point = |x: T, prob: T| CurvePoint { level: x + T::one(), dose: dose_at(x), prob };
        if let Design::Crm(c) = self {
            let post = c.posterior(state)?;
            let dense = positions.iter().map(|&x| point(x, c.model.prob_at(x, post.theta_mean))).collect();
            return Ok(Some(FittedCurve {
                kind: FitKind::Model,
                grid: post.curve,
                dense,
                theta_mean: Some(post.theta_mean),
                mtd_weights: Some(post.mtd_weights),
            }));
        }
        let (mut x, mut y, mut w) = (Vec::new(), Vec::new(), Vec::new());
        for u in grid.all() {
            if let Some(rate) = state.rate(u) {
                x.push(grid.dose(u));
                y.push(rate);
                w.push(T::from_u32(state.n_at(u)).unwrap());
            }
        }
        if x.is_empty() {
            return Ok(None);
        }
        let fit = cir(&x, &y, &w, CirOptions::default())?;
        let at = |d: T| interpolate(&fit.alg_x, &fit.alg_y, d);
        Ok(Some(FittedCurve {
            kind: FitKind::Isotonic,
            grid: grid.doses().iter().map(|&d| at(d)).collect(),
            dense: positions.iter().map(|&p| point(p, at(dose_at(p)))).collect(),
            theta_mean: None,
            mtd_weights: None,
        }))
    }
}
