//! Bregman projection onto `Q̂_n` under the binary relative entropy.
//!
//! The projection preserves the order of its input, so only the `n − 1`
//! prefix constraints of the sorted point can bind. Working in sorted
//! coordinates, the output splits into consecutive blocks; inside block `k`
//! every coordinate is the input shifted by the same amount `δ_k` in link
//! space, with `δ_k` chosen so the block's prefix constraint is tight.
//!
//! Everything here runs in link space (`θ = link(q)`), so inputs that are
//! numerically on the cube boundary stay distinguishable.

use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::osmd::mirror::link;

/// Absolute tolerance on `δ`.
pub const DELTA_TOL: f64 = 1e-12;
pub const DELTA_MAX_ITER: usize = 200;

/// Shifts closer than this to the block maximum count as attaining it.
const TIE_TOL: f64 = 1e-12;

/// `atanh(1 − 1e−12)`: a shift this far past every entry drives the block to `±1` within `1e−12`.
fn saturation_shift() -> f64 {
    (1.0f64 - 1e-12).atanh()
}

/// Prefix bound `Σ_{j≤i} (2/(n−1))((n+1)/2 − j) = i(n−i)/(n−1)` of `Q̂_n`.
pub fn prefix_bound(n: usize, i: usize) -> f64 {
    (i * (n - i)) as f64 / (n as f64 - 1.0)
}

/// Largest violation of `Q̂_n` membership by `y`: the maximum over sorted
/// prefix sums of `Σ_{j≤i} y_(j) − B_i`, together with `|Σ y|`.
pub fn polytope_violation(y: &[f64]) -> f64 {
    let n = y.len();
    if n < 2 {
        return f64::INFINITY;
    }
    let mut sorted = y.to_vec();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut prefix = 0.0;
    let mut worst = 0.0f64;
    for (k, v) in sorted.iter().enumerate() {
        prefix += v;
        if k + 1 < n {
            worst = worst.max(prefix - prefix_bound(n, k + 1));
        }
    }
    worst.max(prefix.abs())
}

/// `δ` with `Σ_j link_inv(link(q_j) − δ) = bound`.
pub fn delta_solve(q_block: &[f64], bound: f64) -> Result<f64> {
    delta_solve_dual(&link(q_block)?, bound)
}

/// [`delta_solve`] for a block given in link space.
///
/// Returns `−∞` when `bound ≥ len` (the constraint can never bind) and `+∞`
/// when `bound ≤ −len`. The root is bracketed and refined by Newton's method,
/// falling back to bisection whenever a Newton step leaves the bracket or
/// fails to halve the step before last.
pub fn delta_solve_dual(theta: &[f64], bound: f64) -> Result<f64> {
    if theta.is_empty() {
        return Err(Error::InvalidParameter("empty projection block".into()));
    }
    if !bound.is_finite() || theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    let m = theta.len() as f64;
    if bound >= m {
        return Ok(f64::NEG_INFINITY);
    }
    if bound <= -m {
        return Ok(f64::INFINITY);
    }
    // residual and its derivative in δ; the residual is strictly decreasing
    let eval = |d: f64| {
        let mut s = 0.0;
        let mut ds = 0.0;
        for t in theta {
            let th = (t - d).tanh();
            s += th;
            ds += 1.0 - th * th;
        }
        (s - bound, -ds)
    };
    let (min, max) = theta
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &t| (a.min(t), b.max(t)));
    let shift = saturation_shift();
    let (mut lo, mut hi) = (min - shift, max + shift);
    let mut widen = shift;
    while eval(lo).0 < 0.0 {
        lo -= widen;
        widen *= 2.0;
        if widen > 1e6 {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: eval(lo).0,
            });
        }
    }
    widen = shift;
    while eval(hi).0 > 0.0 {
        hi += widen;
        widen *= 2.0;
        if widen > 1e6 {
            return Err(Error::NoConvergence {
                iterations: 0,
                residual: eval(hi).0,
            });
        }
    }

    let mut x = 0.5 * (lo + hi);
    let mut residual = f64::NAN;
    // the last two step lengths: Newton must at least halve the step before
    // last, otherwise bisect (this breaks Newton cycles inside the bracket)
    let mut dx = hi - lo;
    let mut dx_old = dx;
    for _ in 0..DELTA_MAX_ITER {
        let (fx, dfx) = eval(x);
        residual = fx;
        if fx == 0.0 {
            return Ok(x);
        }
        if fx > 0.0 {
            lo = x;
        } else {
            hi = x;
        }
        let mid = 0.5 * (lo + hi);
        if hi - lo <= DELTA_TOL || mid == lo || mid == hi {
            return Ok(mid);
        }
        let newton = x - fx / dfx;
        let slow = (fx / dfx).abs() > 0.5 * dx_old.abs();
        let next = if !slow && newton > lo && newton < hi { newton } else { mid };
        dx_old = dx;
        dx = next - x;
        if dx.abs() <= 0.1 * DELTA_TOL {
            return Ok(next);
        }
        x = next;
    }
    Err(Error::NoConvergence {
        iterations: DELTA_MAX_ITER,
        residual,
    })
}

/// Output of [`project_dual`], with the block structure exposed for KKT checks.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProjectionResult {
    pub point: Vec<f64>,
    /// Items sorted by decreasing input, ties by index.
    pub order: Vec<usize>,
    /// Consecutive ranges of sorted positions; every range but the last ends
    /// on a tight prefix constraint.
    pub blocks: Vec<Range<usize>>,
    /// Link-space shift applied to each block.
    pub deltas: Vec<f64>,
}

impl ProjectionResult {
    /// Multipliers of the tight prefix constraints closing each block but the
    /// last: `δ_k − δ_{k+1}`. Optimality requires them to be nonnegative.
    pub fn multipliers(&self) -> Vec<f64> {
        self.deltas.windows(2).map(|d| d[0] - d[1]).collect()
    }
}

/// Projects `q ∈ (−1, 1)ⁿ` onto `Q̂_n`.
pub fn project(q: &[f64]) -> Result<Vec<f64>> {
    Ok(project_dual(&link(q)?)?.point)
}

/// Projects the point whose link-space image is `theta`.
pub fn project_dual(theta: &[f64]) -> Result<ProjectionResult> {
    let n = theta.len();
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::NonFinite);
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| theta[b].total_cmp(&theta[a]));
    let sorted: Vec<f64> = order.iter().map(|&i| theta[i]).collect();

    let mut blocks = Vec::new();
    let mut deltas = Vec::new();
    let mut p_sorted = vec![0.0; n];
    let mut candidates = Vec::with_capacity(n);
    let mut start = 0;
    while start < n {
        candidates.clear();
        let base = prefix_bound(n, start);
        for end in start + 1..=n {
            let bound = prefix_bound(n, end) - base;
            candidates.push(delta_solve_dual(&sorted[start..end], bound)?);
        }
        let best = candidates.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        // the largest index among (near-)maximizers
        let pick = candidates
            .iter()
            .rposition(|&d| d == best || d >= best - TIE_TOL)
            .expect("at least one candidate");
        let end = start + pick + 1;
        let delta = candidates[pick];
        for j in start..end {
            p_sorted[j] = (sorted[j] - delta).tanh();
        }
        blocks.push(start..end);
        deltas.push(delta);
        start = end;
    }

    let mut point = vec![0.0; n];
    for (j, &item) in order.iter().enumerate() {
        point[item] = p_sorted[j];
    }
    Ok(ProjectionResult {
        point,
        order,
        blocks,
        deltas,
    })
}
