//! Posterior of the single model parameter by deterministic quadrature.
//!
//! With `t = ln(theta)` the log-Normal prior becomes Gaussian, so every
//! integral is taken over `t` on a grid symmetric about `mu`. The range
//! starts at `mu +/- 8 sigma` and is doubled while the integrand at either
//! edge is not negligible relative to its peak. Each integral is computed by
//! Romberg integration (trapezoid rule plus Richardson extrapolation),
//! refining until successive extrapolated estimates agree to `1e-9`
//! relative.

use serde::{Deserialize, Serialize};

use super::curve::CurveModel;
use crate::error::{Error, Result};
use crate::model::TrialState;
use crate::num::{closest_index, Real};

/// Log-Normal prior on the model parameter: `ln(theta) ~ N(mu, sigma^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior<T> {
    pub mu: T,
    pub sigma: T,
}

impl<T: Real> LogNormalPrior<T> {
    pub fn new(mu: T, sigma: T) -> Result<Self> {
        if !(sigma > T::zero()) || !mu.is_finite() || !sigma.is_finite() {
            return Err(Error::InvalidConfig(format!("log-Normal prior needs sigma > 0, got {sigma}")));
        }
        Ok(LogNormalPrior { mu, sigma })
    }

    /// Prior mean of theta, `exp(mu + sigma^2 / 2)`.
    pub fn mean(&self) -> T {
        (self.mu + self.sigma * self.sigma / T::lit(2.0)).exp()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PosteriorSummary<T> {
    /// Posterior mean of theta.
    pub theta_mean: T,
    /// Plug-in curve `G(d_u, theta_mean)`.
    pub curve: Vec<T>,
    /// Posterior probability that each level minimizes `|G - p|`.
    pub mtd_weights: Vec<T>,
}

const INITIAL_HALF_WIDTH: f64 = 8.0;
const MAX_HALF_WIDTH: f64 = 128.0;
const RANGE_PROBES: usize = 129;
const ROMBERG_START: usize = 64;
const ROMBERG_MAX_LEVEL: usize = 15;
const BOUNDARY_SCAN_CELLS: usize = 512;
/// ln(1e-13): edge values below this (relative to the peak) are negligible.
const NEGLIGIBLE_LOG: f64 = -29.9;

fn rel_tol<T: Real>() -> T {
    T::lit(1e-9).max(T::epsilon() * T::lit(50.0))
}

/// Log of the unnormalized posterior density of `t = ln(theta)`.
pub(crate) struct LogPosterior<'a, T: Real> {
    model: &'a CurveModel<T>,
    prior: LogNormalPrior<T>,
    data: Vec<(usize, T, T)>,
}

impl<'a, T: Real> LogPosterior<'a, T> {
    pub(crate) fn new(state: &TrialState<T>, model: &'a CurveModel<T>, prior: LogNormalPrior<T>) -> Result<Self> {
        if model.levels() != state.levels() {
            return Err(Error::LengthMismatch(model.levels(), state.levels()));
        }
        let data = (0..state.levels())
            .filter(|&u| state.n()[u] > 0)
            .map(|u| {
                let r = state.r()[u];
                let n = state.n()[u];
                (u, T::from_u32(r).unwrap(), T::from_u32(n - r).unwrap())
            })
            .collect();
        Ok(LogPosterior { model, prior, data })
    }

    pub(crate) fn eval(&self, t: T) -> T {
        let z = (t - self.prior.mu) / self.prior.sigma;
        let mut ld = -z * z / T::lit(2.0);
        let theta = t.exp();
        for &(u, tox, non) in &self.data {
            let (lg, l1g) = self.model.log_probs(u, theta);
            if tox > T::zero() {
                ld = ld + tox * lg;
            }
            if non > T::zero() {
                ld = ld + non * l1g;
            }
        }
        ld
    }
}

/// Integration window and the log-scale shift that keeps the integrand
/// near 1 at its peak.
struct Window<T> {
    a: T,
    b: T,
    shift: T,
}

fn window<T: Real>(lp: &LogPosterior<'_, T>) -> Result<Window<T>> {
    let mu = lp.prior.mu;
    let sigma = lp.prior.sigma;
    let mut half = T::lit(INITIAL_HALF_WIDTH) * sigma;
    loop {
        let a = mu - half;
        let b = mu + half;
        let h = (b - a) / T::from_usize(RANGE_PROBES - 1).unwrap();
        let mut peak = T::neg_infinity();
        let mut peak_w = T::neg_infinity();
        for i in 0..RANGE_PROBES {
            let t = a + h * T::from_usize(i).unwrap();
            let v = lp.eval(t);
            peak = peak.max(v);
            peak_w = peak_w.max(v + t);
        }
        if !peak.is_finite() {
            return Err(Error::QuadratureNonConvergence("posterior density vanishes on the grid".into()));
        }
        let (ea, eb) = (lp.eval(a), lp.eval(b));
        let neg = T::lit(NEGLIGIBLE_LOG);
        let ok = ea - peak <= neg && eb - peak <= neg && ea + a - peak_w <= neg && eb + b - peak_w <= neg;
        if ok {
            return Ok(Window { a, b, shift: peak });
        }
        half = half + half;
        if half > T::lit(MAX_HALF_WIDTH) * sigma {
            return Err(Error::QuadratureNonConvergence(format!(
                "posterior mass not contained within {MAX_HALF_WIDTH} prior sd of mu"
            )));
        }
    }
}

/// Romberg integration of a vector-valued integrand over `[a, b]`.
pub(crate) fn romberg<T: Real, const K: usize, F>(f: F, a: T, b: T, tol: T) -> Result<[T; K]>
where
    F: Fn(T) -> [T; K],
{
    if b <= a {
        return Ok([T::zero(); K]);
    }
    let two = T::lit(2.0);
    let mut n = ROMBERG_START;
    let mut h = (b - a) / T::from_usize(n).unwrap();
    let mut sum = [T::zero(); K];
    let fa = f(a);
    let fb = f(b);
    for k in 0..K {
        sum[k] = (fa[k] + fb[k]) / two;
    }
    for i in 1..n {
        let v = f(a + h * T::from_usize(i).unwrap());
        for k in 0..K {
            sum[k] = sum[k] + v[k];
        }
    }
    let trap = |s: &[T; K], h: T| {
        let mut out = *s;
        for v in out.iter_mut() {
            *v = *v * h;
        }
        out
    };
    let mut prev_row: Vec<[T; K]> = vec![trap(&sum, h)];
    for level in 1..=ROMBERG_MAX_LEVEL {
        // add midpoints
        for i in 0..n {
            let v = f(a + h * (T::from_usize(i).unwrap() + T::lit(0.5)));
            for k in 0..K {
                sum[k] = sum[k] + v[k];
            }
        }
        n *= 2;
        h = h / two;
        let mut row = vec![trap(&sum, h)];
        let mut factor = T::one();
        for j in 1..=level {
            factor = factor * T::lit(4.0);
            let mut r = [T::zero(); K];
            for k in 0..K {
                r[k] = row[j - 1][k] + (row[j - 1][k] - prev_row[j - 1][k]) / (factor - T::one());
            }
            row.push(r);
        }
        if level >= 3 {
            let cur = row[level];
            let old = prev_row[level - 1];
            let converged = (0..K).all(|k| (cur[k] - old[k]).abs() <= tol * cur[k].abs() + T::min_positive_value());
            if converged {
                return Ok(cur);
            }
        }
        prev_row = row;
    }
    Err(Error::QuadratureNonConvergence(format!(
        "Romberg did not reach relative tolerance {tol} after {} points",
        n + 1
    )))
}

/// Posterior mean of theta.
pub fn posterior_mean_theta<T: Real>(
    state: &TrialState<T>,
    model: &CurveModel<T>,
    prior: LogNormalPrior<T>,
) -> Result<T> {
    let lp = LogPosterior::new(state, model, prior)?;
    let w = window(&lp)?;
    let [z, m] = romberg(
        |t| {
            let d = (lp.eval(t) - w.shift).exp();
            [d, d * t.exp()]
        },
        w.a,
        w.b,
        rel_tol(),
    )?;
    Ok(m / z)
}

/// Full posterior summary: mean, plug-in curve and predictive MTD weights.
pub fn posterior_theta<T: Real>(
    state: &TrialState<T>,
    model: &CurveModel<T>,
    prior: LogNormalPrior<T>,
) -> Result<PosteriorSummary<T>> {
    let theta_mean = posterior_mean_theta(state, model, prior)?;
    let mtd_weights = mtd_weights(state, model, prior)?;
    Ok(PosteriorSummary { theta_mean, curve: model.curve(theta_mean), mtd_weights })
}

fn argmin_at<T: Real>(model: &CurveModel<T>, p: T, t: T) -> usize {
    let curve = model.curve(t.exp());
    // in the far tails the curve rounds to all-0 or all-1; the true curve is
    // still increasing, so the answer is the level on the target's side
    if curve.iter().all(|&g| g < p) {
        return curve.len() - 1;
    }
    if curve.iter().all(|&g| g > p) {
        return 0;
    }
    closest_index(&curve, p).expect("non-empty model")
}

/// Points in `t` where the level minimizing `|G - p|` changes, located by
/// bisection to `1e-12`, with the level owning each resulting segment.
pub(crate) fn mtd_partition<T: Real>(model: &CurveModel<T>, p: T, a: T, b: T) -> (Vec<T>, Vec<usize>) {
    let cells = T::from_usize(BOUNDARY_SCAN_CELLS).unwrap();
    let node = |i: usize| a + (b - a) * T::from_usize(i).unwrap() / cells;
    let tol = T::lit(1e-12);
    let mut cuts = vec![a];
    let mut owners = Vec::new();
    let mut left_t = a;
    let mut left_u = argmin_at(model, p, a);
    for i in 1..=BOUNDARY_SCAN_CELLS {
        let right_t = node(i);
        let right_u = argmin_at(model, p, right_t);
        if right_u != left_u {
            let (mut lo, mut hi) = (left_t, right_t);
            while hi - lo > tol {
                let mid = (lo + hi) / T::lit(2.0);
                if mid <= lo || mid >= hi {
                    break;
                }
                if argmin_at(model, p, mid) == left_u {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let cut = (lo + hi) / T::lit(2.0);
            owners.push(left_u);
            cuts.push(cut);
            left_u = argmin_at(model, p, hi);
        }
        left_t = right_t;
    }
    owners.push(left_u);
    cuts.push(b);
    (cuts, owners)
}

/// Posterior predictive probability that each level is the MTD.
pub fn mtd_weights<T: Real>(state: &TrialState<T>, model: &CurveModel<T>, prior: LogNormalPrior<T>) -> Result<Vec<T>> {
    let lp = LogPosterior::new(state, model, prior)?;
    let w = window(&lp)?;
    let (cuts, owners) = mtd_partition(model, state.target(), w.a, w.b);
    let mut mass = vec![T::zero(); model.levels()];
    for (seg, &u) in cuts.windows(2).zip(&owners) {
        let [v] = romberg(|t| [(lp.eval(t) - w.shift).exp()], seg[0], seg[1], rel_tol())?;
        mass[u] = mass[u] + v;
    }
    let total: T = mass.iter().copied().sum();
    Ok(mass.into_iter().map(|m| m / total).collect())
}
