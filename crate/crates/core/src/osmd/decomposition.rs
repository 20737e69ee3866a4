//! Writing a point of `Q̂_n` as a convex combination of at most `n` vertices.
//!
//! Each round takes the vertex ordered like the current point and removes
//! as much of it as possible while the rescaled remainder stays in `Q̂_n`.
//! The remainder then gains a tight prefix constraint, so the peeling ends
//! after at most `n` vertices.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::osmd::projection::{polytope_violation, prefix_bound};
use crate::perm::{Permutation, ScaledVertex};
use crate::GameRng;

/// Inputs this far outside `Q̂_n` are still accepted.
pub const MEMBERSHIP_TOL: f64 = 1e-9;

const ROOT_TOL: f64 = 1e-13;
const MAX_NEWTON: usize = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvexCombination {
    pub vertices: Vec<ScaledVertex>,
    pub weights: Vec<f64>,
}

impl ConvexCombination {
    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// `Σ_k weight_k · vertex_k`
    pub fn mean(&self) -> Vec<f64> {
        let n = self.vertices.first().map_or(0, ScaledVertex::len);
        let mut out = vec![0.0; n];
        for (v, w) in self.vertices.iter().zip(&self.weights) {
            for (o, x) in out.iter_mut().zip(v.coords()) {
                *o += w * x;
            }
        }
        out
    }

    /// Draws one vertex with probability equal to its weight.
    pub fn sample(&self, rng: &mut GameRng) -> &ScaledVertex {
        let mut r = rng.random::<f64>();
        for (v, &w) in self.vertices.iter().zip(&self.weights) {
            if r < w {
                return v;
            }
            r -= w;
        }
        self.vertices.last().expect("nonempty combination")
    }
}

/// Items by decreasing value, ties by index.
fn descending_order(x: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..x.len()).collect();
    order.sort_by(|&a, &b| x[b].total_cmp(&x[a]));
    order
}

/// The vertex that gives the largest coordinate to the largest entry of `x`.
fn aligned_vertex(x: &[f64]) -> ScaledVertex {
    let n = x.len();
    let mut positions = vec![0; n];
    for (j, &item) in descending_order(x).iter().enumerate() {
        positions[item] = n - j;
    }
    let perm = Permutation::new(positions).expect("aligned positions are a bijection");
    ScaledVertex::from_permutation(&perm).expect("n >= 2")
}

/// `max_{1≤m<n} [top_m(x − λv) − (1−λ)B_m]` and the slope of its active piece.
fn gap(x: &[f64], v: &[f64], lambda: f64) -> (f64, f64) {
    let n = x.len();
    let z: Vec<f64> = x.iter().zip(v).map(|(a, b)| a - lambda * b).collect();
    let order = descending_order(&z);
    let mut top = 0.0;
    let mut v_top = 0.0;
    let mut best = (f64::NEG_INFINITY, 0.0);
    for (k, &item) in order.iter().take(n - 1).enumerate() {
        top += z[item];
        v_top += v[item];
        let b = prefix_bound(n, k + 1);
        let value = top - (1.0 - lambda) * b;
        if value > best.0 {
            best = (value, b - v_top);
        }
    }
    best
}

/// Largest `λ ∈ [0, 1]` with `(x − λv)/(1 − λ) ∈ Q̂_n`.
///
/// The gap is convex and piecewise linear in `λ`, so Newton's method started
/// at `λ = 1` decreases monotonically onto the largest root. `tol` is the
/// accepted constraint violation of the remainder.
fn max_step(x: &[f64], v: &[f64], tol: f64) -> f64 {
    let mut lambda = 1.0;
    for _ in 0..MAX_NEWTON {
        let (g, slope) = gap(x, v, lambda);
        if g <= tol {
            return lambda;
        }
        if slope <= 0.0 {
            return 0.0;
        }
        let next = (lambda - g / slope).max(0.0);
        if next >= lambda {
            return lambda;
        }
        lambda = next;
    }
    lambda
}

/// Decomposes `y ∈ Q̂_n` into at most `n` weighted vertices whose mean is `y`.
/// The result depends only on `y`.
pub fn decompose(y: &[f64]) -> Result<ConvexCombination> {
    let n = y.len();
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let violation = polytope_violation(y);
    if violation > MEMBERSHIP_TOL {
        return Err(Error::OutsidePolytope { violation });
    }

    let mut vertices = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let mut x = y.to_vec();
    let mut remaining = 1.0;
    loop {
        let v = aligned_vertex(&x);
        let lambda = if vertices.len() + 1 == n {
            1.0
        } else {
            // round-off in the remainder is scaled by 1/remaining, while its
            // effect on the recombined mean is scaled back down by remaining
            max_step(&x, v.coords(), (ROOT_TOL / remaining).min(1e-6))
        };
        if lambda >= 1.0 - 1e-12 {
            vertices.push(v);
            weights.push(remaining);
            break;
        }
        if lambda > 0.0 {
            for (xi, vi) in x.iter_mut().zip(v.coords()) {
                *xi = (*xi - lambda * vi) / (1.0 - lambda);
            }
            vertices.push(v);
            weights.push(remaining * lambda);
            remaining *= 1.0 - lambda;
        } else {
            // no progress possible: the remainder is numerically a vertex
            vertices.push(v);
            weights.push(remaining);
            break;
        }
    }
    Ok(ConvexCombination { vertices, weights })
}
