use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::{ln_1m_exp, softplus, Real};

/// Prior toxicity guesses at each level, strictly increasing in (0, 1).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Skeleton<T: Real>(Vec<T>);

impl<T: Real> Skeleton<T> {
    pub fn new(phi: Vec<T>) -> Result<Self> {
        if phi.len() < 2 {
            return Err(Error::DegenerateSkeleton(format!("{} values", phi.len())));
        }
        if let Some(v) = phi.iter().find(|&&v| !(v > T::zero() && v < T::one())) {
            return Err(Error::DegenerateSkeleton(format!("value {v} outside (0, 1)")));
        }
        if phi.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::DegenerateSkeleton("values not strictly increasing".into()));
        }
        Ok(Skeleton(phi))
    }

    pub fn values(&self) -> &[T] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl<T: Real> TryFrom<Vec<T>> for Skeleton<T> {
    type Error = Error;
    fn try_from(v: Vec<T>) -> Result<Self> {
        Skeleton::new(v)
    }
}

impl<T: Real> From<Skeleton<T>> for Vec<T> {
    fn from(s: Skeleton<T>) -> Vec<T> {
        s.0
    }
}

/// `G(d_u) = phi_u ^ theta`.
pub fn power_curve<T: Real>(skeleton: &Skeleton<T>, theta: T) -> Result<Vec<T>> {
    if !(theta > T::zero()) {
        return Err(Error::NonPositiveTheta(theta.to_f64_lossy()));
    }
    Ok(skeleton.values().iter().map(|&p| p.powf(theta)).collect())
}

/// Transformed doses of the one-parameter logistic model, chosen so the
/// curve at the prior mean `theta0` reproduces the skeleton:
/// `xi_u = (beta0 - ln(1/phi_u - 1)) / theta0`.
pub fn chevret_backcalc<T: Real>(skeleton: &Skeleton<T>, beta0: T, theta0: T) -> Result<Vec<T>> {
    if !(theta0 > T::zero()) {
        return Err(Error::NonPositiveTheta(theta0.to_f64_lossy()));
    }
    let xi: Vec<T> = skeleton.values().iter().map(|&p| (beta0 - (T::one() / p - T::one()).ln()) / theta0).collect();
    if xi.iter().any(|v| !v.is_finite()) {
        return Err(Error::DegenerateSkeleton("back-calculated dose is not finite".into()));
    }
    Ok(xi)
}

/// `Gamma(xi; theta) = 1 / (1 + exp(beta0 - theta * xi))`.
pub fn chevret_prob<T: Real>(xi: T, beta0: T, theta: T) -> T {
    T::one() / (T::one() + (beta0 - theta * xi).exp())
}

/// One-parameter dose-toxicity model evaluated at the grid levels.
#[derive(Clone, Debug, PartialEq)]
pub enum CurveModel<T: Real> {
    Power { skeleton: Skeleton<T>, ln_phi: Vec<T> },
    Chevret { skeleton: Skeleton<T>, beta0: T, theta0: T, xi: Vec<T> },
}

impl<T: Real> CurveModel<T> {
    pub fn power(skeleton: Skeleton<T>) -> Self {
        let ln_phi = skeleton.values().iter().map(|p| p.ln()).collect();
        CurveModel::Power { skeleton, ln_phi }
    }

    pub fn chevret(skeleton: Skeleton<T>, beta0: T, theta0: T) -> Result<Self> {
        let xi = chevret_backcalc(&skeleton, beta0, theta0)?;
        Ok(CurveModel::Chevret { skeleton, beta0, theta0, xi })
    }

    pub fn levels(&self) -> usize {
        self.skeleton().len()
    }

    pub fn skeleton(&self) -> &Skeleton<T> {
        match self {
            CurveModel::Power { skeleton, .. } | CurveModel::Chevret { skeleton, .. } => skeleton,
        }
    }

    /// Toxicity probability at level index `u`.
    pub fn prob(&self, u: usize, theta: T) -> T {
        match self {
            CurveModel::Power { ln_phi, .. } => (theta * ln_phi[u]).exp(),
            CurveModel::Chevret { beta0, xi, .. } => chevret_prob(xi[u], *beta0, theta),
        }
    }

    /// `(ln G, ln(1 - G))` at level index `u`.
    pub fn log_probs(&self, u: usize, theta: T) -> (T, T) {
        match self {
            CurveModel::Power { ln_phi, .. } => {
                let lg = theta * ln_phi[u];
                (lg, ln_1m_exp(lg))
            }
            CurveModel::Chevret { beta0, xi, .. } => {
                let z = theta * xi[u] - *beta0;
                (-softplus(-z), -softplus(z))
            }
        }
    }

    pub fn curve(&self, theta: T) -> Vec<T> {
        (0..self.levels()).map(|u| self.prob(u, theta)).collect()
    }

    /// Curve between levels: `x` is a zero-based fractional level index,
    /// clamped to the grid. The skeleton (power model) or the back-calculated
    /// dose (logistic model) is interpolated linearly between neighbors.
    pub fn prob_at(&self, x: T, theta: T) -> T {
        let top = self.levels() - 1;
        let x = x.max(T::zero()).min(T::from_usize(top).unwrap());
        let u = x.floor().to_usize().unwrap_or(0).min(top.saturating_sub(1));
        let w = x - T::from_usize(u).unwrap();
        let lerp = |v: &[T]| v[u] + w * (v[u + 1] - v[u]);
        match self {
            CurveModel::Power { skeleton, .. } => (theta * lerp(skeleton.values()).ln()).exp(),
            CurveModel::Chevret { beta0, xi, .. } => chevret_prob(lerp(xi), *beta0, theta),
        }
    }
}
