//! Centered isotonic regression and the MTD selection rule built on it.
//!
//! Pooling follows the classical forward loop: find the first adjacent pair
//! whose fitted values do not strictly increase, replace it by the
//! weighted average of both `y` *and* `x`, repeat. The pooled nodes are then
//! re-interpolated linearly back to the original design points.

use crate::error::{Error, Result};
use crate::model::{Level, TrialState};
use crate::num::{Field, Real};

/// Behaviour outside the span of the pooled nodes.
#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub enum Boundary<T> {
    /// Constant continuation of the outermost fitted values.
    #[default]
    Constant,
    /// Linear extrapolation from the outermost segment. With a single
    /// pooled node the bounds are used as pseudo-nodes instead.
    Linear { xbounds: (T, T), ybounds: (T, T) },
}

#[derive(Clone, Copy, Debug, PartialEq, Default)]
pub struct CirOptions<T> {
    pub boundary: Boundary<T>,
    /// Fit a non-increasing curve instead.
    pub decreasing: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CirResult<T> {
    /// Fitted values at the original `x`.
    pub output_y: Vec<T>,
    pub original_x: Vec<T>,
    pub original_y: Vec<T>,
    /// Pooled nodes; `alg_y` is strictly monotone.
    pub alg_x: Vec<T>,
    pub alg_y: Vec<T>,
    pub alg_wt: Vec<T>,
    /// For every original point, the pooled node it ended up in.
    pub block_of: Vec<usize>,
    pub boundary: Boundary<T>,
}

struct Pooled<T> {
    x: Vec<T>,
    y: Vec<T>,
    wt: Vec<T>,
    block_of: Vec<usize>,
}

fn pool<T: Field>(x: &[T], y: &[T], wt: &[T]) -> Pooled<T> {
    let mut xs = x.to_vec();
    let mut ys = y.to_vec();
    let mut ws = wt.to_vec();
    // members[j] = number of original points in node j
    let mut members = vec![1usize; x.len()];
    while ys.len() > 1 {
        let Some(i) = (0..ys.len() - 1).find(|&i| ys[i + 1] <= ys[i]) else { break };
        let w = ws[i] + ws[i + 1];
        ys[i] = (ys[i] * ws[i] + ys[i + 1] * ws[i + 1]) / w;
        xs[i] = (xs[i] * ws[i] + xs[i + 1] * ws[i + 1]) / w;
        ws[i] = w;
        members[i] += members[i + 1];
        ys.remove(i + 1);
        xs.remove(i + 1);
        ws.remove(i + 1);
        members.remove(i + 1);
    }
    let block_of = members.iter().enumerate().flat_map(|(j, &m)| std::iter::repeat_n(j, m)).collect();
    Pooled { x: xs, y: ys, wt: ws, block_of }
}

/// Piecewise-linear interpolation through `(nx, ny)`, constant outside.
pub fn interpolate<T: Field>(nx: &[T], ny: &[T], z: T) -> T {
    let n = nx.len();
    if n == 1 || z <= nx[0] {
        return ny[0];
    }
    if z >= nx[n - 1] {
        return ny[n - 1];
    }
    let j = (1..n).find(|&j| z <= nx[j]).unwrap();
    let t = (z - nx[j - 1]) / (nx[j] - nx[j - 1]);
    ny[j - 1] + t * (ny[j] - ny[j - 1])
}

/// Centered isotonic regression of `y` on strictly increasing `x`.
pub fn cir<T: Field>(x: &[T], y: &[T], wt: &[T], opts: CirOptions<T>) -> Result<CirResult<T>> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch(x.len(), y.len()));
    }
    if x.len() != wt.len() {
        return Err(Error::LengthMismatch(x.len(), wt.len()));
    }
    if x.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::NonIncreasingX);
    }
    if x.len() <= 1 {
        return Ok(CirResult {
            output_y: y.to_vec(),
            original_x: x.to_vec(),
            original_y: y.to_vec(),
            alg_x: x.to_vec(),
            alg_y: y.to_vec(),
            alg_wt: wt.to_vec(),
            block_of: vec![0; x.len()],
            boundary: opts.boundary,
        });
    }

    let signed: Vec<T> = if opts.decreasing { y.iter().map(|&v| -v).collect() } else { y.to_vec() };
    let Pooled { x: px, y: py, wt: pw, block_of } = pool(x, &signed, wt);

    let mut nx = px.clone();
    let mut ny = py.clone();
    if let Boundary::Linear { xbounds, ybounds } = opts.boundary {
        let (yb0, yb1) = if opts.decreasing { (-ybounds.0, -ybounds.1) } else { ybounds };
        if nx.len() == 1 {
            nx = vec![xbounds.0, nx[0], xbounds.1];
            ny = vec![yb0, ny[0], yb1];
        } else {
            let zmin = x[0];
            let zmax = x[x.len() - 1];
            let n = nx.len();
            if nx[n - 1] < zmax {
                let ext = ny[n - 1] + (ny[n - 1] - ny[n - 2]) * (zmax - nx[n - 1]) / (nx[n - 1] - nx[n - 2]);
                nx.push(zmax);
                ny.push(ext);
            }
            if nx[0] > zmin {
                let ext = ny[0] - (ny[1] - ny[0]) * (nx[0] - zmin) / (nx[1] - nx[0]);
                nx.insert(0, zmin);
                ny.insert(0, ext);
            }
        }
    }

    let unsign = |v: T| if opts.decreasing { -v } else { v };
    let output_y = x.iter().map(|&z| unsign(interpolate(&nx, &ny, z))).collect();
    Ok(CirResult {
        output_y,
        original_x: x.to_vec(),
        original_y: y.to_vec(),
        alg_x: px,
        alg_y: py.into_iter().map(unsign).collect(),
        alg_wt: pw,
        block_of,
        boundary: opts.boundary,
    })
}

fn from_count<T: Field>(n: u32) -> T {
    // binary expansion keeps this exact for rationals as well
    let two = T::one() + T::one();
    let mut acc = T::zero();
    for bit in (0..32).rev() {
        acc = acc * two;
        if n >> bit & 1 == 1 {
            acc = acc + T::one();
        }
    }
    acc
}

/// CIR on a yes-no table: `rows[i] = (yes, no)` at `x[i]`. Rows with no
/// observations are dropped; weights are the row totals.
pub fn cir_yes_no<T: Field>(x: &[T], rows: &[(u32, u32)], opts: CirOptions<T>) -> Result<CirResult<T>> {
    if x.len() != rows.len() {
        return Err(Error::LengthMismatch(x.len(), rows.len()));
    }
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let mut ws = Vec::new();
    for (&xi, &(yes, no)) in x.iter().zip(rows) {
        let n = yes + no;
        if n > 0 {
            let w = from_count::<T>(n);
            xs.push(xi);
            ys.push(from_count::<T>(yes) / w);
            ws.push(w);
        }
    }
    cir(&xs, &ys, &ws, opts)
}

/// Ordinary isotonic (PAVA) fitted values.
pub fn pava<T: Field>(y: &[T], wt: &[T]) -> Result<Vec<T>> {
    if y.len() != wt.len() {
        return Err(Error::LengthMismatch(y.len(), wt.len()));
    }
    if y.is_empty() {
        return Ok(Vec::new());
    }
    // x is irrelevant to the pooled y values; use positions
    let x: Vec<T> = (0..y.len() as u32).map(from_count).collect();
    let p = pool(&x, y, wt);
    Ok(p.block_of.iter().map(|&b| p.y[b]).collect())
}

/// MTD estimate for the nonparametric designs: fit CIR to the observed
/// rates (weights `n_u`), find where the fitted curve first reaches the
/// target scanning upward, and return the grid level nearest that dose.
/// When the target lies outside the fitted range the nearest end node is
/// used.
pub fn cir_mtd_select<T: Real>(state: &TrialState<T>) -> Result<Level> {
    let grid = state.grid();
    let p = state.target();
    let mut x = Vec::new();
    let mut y = Vec::new();
    let mut w = Vec::new();
    for u in grid.all() {
        if let Some(rate) = state.rate(u) {
            x.push(grid.dose(u));
            y.push(rate);
            w.push(T::from_u32(state.n_at(u)).unwrap());
        }
    }
    if x.is_empty() {
        return Err(Error::NoObservations);
    }
    let fit = cir(&x, &y, &w, CirOptions::default())?;
    let xs = crossing_dose(&fit.alg_x, &fit.alg_y, p);
    Ok(nearest_level(grid.doses(), xs))
}

/// Dose at which the piecewise-linear curve through the nodes first reaches
/// `p`, clamped to the end nodes.
pub fn crossing_dose<T: Real>(nx: &[T], ny: &[T], p: T) -> T {
    let n = nx.len();
    if p <= ny[0] {
        return nx[0];
    }
    for i in 0..n - 1 {
        if ny[i] <= p && p <= ny[i + 1] {
            return nx[i] + (p - ny[i]) / (ny[i + 1] - ny[i]) * (nx[i + 1] - nx[i]);
        }
    }
    nx[n - 1]
}

/// Grid level whose dose is nearest to `x`; ties go to the lower level.
pub fn nearest_level<T: Real>(doses: &[T], x: T) -> Level {
    Level::from_index(crate::num::closest_index(doses, x).expect("non-empty grid"))
}
