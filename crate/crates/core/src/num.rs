//! Scalar traits.
//!
//! [`Field`] is the minimum needed by algorithms that only add, multiply,
//! divide and compare (isotonic pooling, interpolation). It is satisfied by
//! exact rationals as well as floats. [`Real`] adds the transcendental
//! functions needed by the model-based parts of the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::Neg;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// Ordered field scalar.
pub trait Field: Num + Copy + PartialOrd + Neg<Output = Self> + Debug {}

impl<T> Field for T where T: Num + Copy + PartialOrd + Neg<Output = T> + Debug {}

/// Floating point scalar: `f32` or `f64`.
pub trait Real: Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static {
    /// Converts an `f64` literal. Never fails for `f32`/`f64`.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    /// Tolerance used to decide that two computed distances are equal.
    #[inline]
    fn tie_tol() -> Self {
        Self::epsilon() * Self::lit(64.0)
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `ln(1 - e^x)` for `x <= 0`, accurate on both tails.
pub fn ln_1m_exp<T: Real>(x: T) -> T {
    if x > -T::lit(std::f64::consts::LN_2) {
        (-x.exp_m1()).ln()
    } else {
        (-x.exp()).ln_1p()
    }
}

/// `ln(1 + e^x)` without overflow.
pub fn softplus<T: Real>(x: T) -> T {
    if x > T::zero() {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// Index of the value closest to `target`. Ties (within [`Real::tie_tol`])
/// go to the lower index. Returns `None` for an empty slice.
pub fn closest_index<T: Real>(values: &[T], target: T) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in values.iter().enumerate() {
        let d = (v - target).abs();
        match best {
            Some((_, bd)) if d >= bd - T::tie_tol() => {}
            _ => best = Some((i, d)),
        }
    }
    best.map(|(i, _)| i)
}
