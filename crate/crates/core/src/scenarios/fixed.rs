//! Parametric dose-toxicity curves calibrated so that a chosen level is the
//! MTD with toxicity exactly at target.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Gamma, LogNormal, Normal, Weibull};

use crate::error::{Error, Result};
use crate::model::{DoseGrid, Level, Scenario};

/// A curve family with its shape parameter fixed. Calibration solves for the
/// remaining location-like parameter (location, or scale for Gamma and
/// Weibull), on which the curve value at any dose is decreasing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ParametricFamily {
    /// Uniform on `[loc, loc + width]`.
    Uniform {
        width: f64,
    },
    /// Gamma with fixed shape; scale is solved.
    Gamma {
        shape: f64,
    },
    Normal {
        sd: f64,
    },
    Lognormal {
        sdlog: f64,
    },
    /// Weibull with fixed shape; scale is solved.
    Weibull {
        shape: f64,
    },
    Logistic {
        scale: f64,
    },
}

impl ParametricFamily {
    pub fn name(&self) -> &'static str {
        match self {
            ParametricFamily::Uniform { .. } => "uniform",
            ParametricFamily::Gamma { .. } => "gamma",
            ParametricFamily::Normal { .. } => "normal",
            ParametricFamily::Lognormal { .. } => "lognormal",
            ParametricFamily::Weibull { .. } => "weibull",
            ParametricFamily::Logistic { .. } => "logistic",
        }
    }

    fn is_scale(&self) -> bool {
        matches!(self, ParametricFamily::Gamma { .. } | ParametricFamily::Weibull { .. })
    }

    /// CDF at dose `x` given the free parameter.
    pub fn cdf(&self, free: f64, x: f64) -> Result<f64> {
        let bad = |e: statrs::distribution::GammaError| Error::Infeasible(e.to_string());
        Ok(match *self {
            ParametricFamily::Uniform { width } => ((x - free) / width).clamp(0.0, 1.0),
            ParametricFamily::Gamma { shape } => Gamma::new(shape, 1.0 / free).map_err(bad)?.cdf(x),
            ParametricFamily::Normal { sd } => {
                Normal::new(free, sd).map_err(|e| Error::Infeasible(e.to_string()))?.cdf(x)
            }
            ParametricFamily::Lognormal { sdlog } => {
                LogNormal::new(free, sdlog).map_err(|e| Error::Infeasible(e.to_string()))?.cdf(x)
            }
            ParametricFamily::Weibull { shape } => {
                Weibull::new(shape, free).map_err(|e| Error::Infeasible(e.to_string()))?.cdf(x)
            }
            ParametricFamily::Logistic { scale } => 1.0 / (1.0 + (-(x - free) / scale).exp()),
        })
    }

    fn bracket(&self, x: f64) -> (f64, f64) {
        if self.is_scale() {
            (1e-8, 1e4)
        } else {
            (x - 100.0, x + 100.0)
        }
    }
}

/// Bisection for the free parameter with `F(d_mtd) = p`, then checks that
/// the neighbors satisfy `F(d_{mtd-1}) <= 0.2` and `F(d_{mtd+1}) >= 0.4`.
pub fn calibrate_fixed_scenario(
    family: ParametricFamily,
    grid: &DoseGrid<f64>,
    p: f64,
    mtd: Level,
) -> Result<Scenario<f64>> {
    grid.check(mtd)?;
    let x = grid.dose(mtd);
    let (mut lo, mut hi) = family.bracket(x);
    // F(x; free) is decreasing in the free parameter
    if !(family.cdf(lo, x)? > p && family.cdf(hi, x)? < p) {
        return Err(Error::Infeasible(format!("{} cannot reach {p} at {mtd}", family.name())));
    }
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if family.cdf(mid, x)? > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let free = 0.5 * (lo + hi);
    let f: Vec<f64> = grid.doses().iter().map(|&d| family.cdf(free, d)).collect::<Result<_>>()?;
    if (f[mtd.index()] - p).abs() > 1e-10 {
        return Err(Error::Infeasible(format!("calibration missed target: {}", f[mtd.index()])));
    }
    let u = mtd.index();
    if u > 0 && f[u - 1] > 0.2 {
        return Err(Error::Infeasible(format!("{}: level below MTD at {:.4} > 0.2", family.name(), f[u - 1])));
    }
    if u + 1 < f.len() && f[u + 1] < 0.4 {
        return Err(Error::Infeasible(format!("{}: level above MTD at {:.4} < 0.4", family.name(), f[u + 1])));
    }
    let s = Scenario::on_grid(grid.clone(), f, p)?;
    if s.true_mtd() != mtd {
        return Err(Error::Infeasible(format!("{}: calibrated curve has MTD {}", family.name(), s.true_mtd())));
    }
    Ok(s.named(format!("{}/{}", family.name(), mtd)))
}

/// The six calibrated curves on the 6-level grid `d_u = u/6`, one per MTD
/// level, in MTD order. Shapes are set so that the tighter neighbor sits
/// just outside 0.2 or 0.4.
pub fn preset_families() -> [(ParametricFamily, usize); 6] {
    [
        (ParametricFamily::Uniform { width: 1.6 }, 1),
        (ParametricFamily::Gamma { shape: 1.0 }, 2),
        (ParametricFamily::Normal { sd: 0.5 }, 3),
        (ParametricFamily::Lognormal { sdlog: 0.8 }, 4),
        (ParametricFamily::Weibull { shape: 2.2 }, 5),
        (ParametricFamily::Logistic { scale: 0.3 }, 6),
    ]
}

pub fn fixed_scenarios(p: f64) -> Result<Vec<Scenario<f64>>> {
    let grid = DoseGrid::new(6)?;
    preset_families()
        .into_iter()
        .map(|(fam, mtd)| calibrate_fixed_scenario(fam, &grid, p, Level::from_number(mtd).expect("nonzero")))
        .collect()
}
