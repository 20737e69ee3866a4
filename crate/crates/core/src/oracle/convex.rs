//! A generic solver for the Bregman projection onto `Q̂_n`, written without
//! any of the structure the production projection relies on.
//!
//! The feasible set is described by all `2ⁿ − 2` subset constraints
//! `Σ_{i∈S} p_i ≤ B_{|S|}` plus `Σ p = 0`. A log-barrier path-following
//! method gets close to the optimum; the constraints it finds nearly tight
//! are then solved as equalities by Newton's method on the KKT system, and
//! the result is accepted only if it is feasible with nonnegative
//! multipliers.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::osmd::mirror::{bregman, link};
use crate::osmd::projection::prefix_bound;

/// Largest `n` accepted; the constraint count grows like `2ⁿ`.
pub const MAX_REFERENCE_N: usize = 8;

#[derive(Clone, Debug)]
pub struct ReferenceProjection {
    pub point: Vec<f64>,
    /// `true` when the active-set refinement was accepted.
    pub refined: bool,
    pub objective: f64,
}

struct Constraints {
    rows: Vec<Vec<f64>>,
    bounds: Vec<f64>,
}

fn subset_constraints(n: usize) -> Constraints {
    let mut rows = Vec::new();
    let mut bounds = Vec::new();
    for mask in 1u32..(1 << n) - 1 {
        let row: Vec<f64> = (0..n).map(|i| f64::from((mask >> i) & 1)).collect();
        bounds.push(prefix_bound(n, mask.count_ones() as usize));
        rows.push(row);
    }
    Constraints { rows, bounds }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Barrier objective `t·Δ_F(p, q) − Σ ln(slack)`, or `None` outside the domain.
fn barrier_value(p: &[f64], q: &[f64], t: f64, c: &Constraints) -> Option<f64> {
    if p.iter().any(|x| x.abs() >= 1.0) {
        return None;
    }
    let mut value = t * bregman(p, q).ok()?;
    for (row, b) in c.rows.iter().zip(&c.bounds) {
        let slack = b - dot(row, p);
        if slack <= 0.0 {
            return None;
        }
        value -= slack.ln();
    }
    Some(value)
}

/// Solves `[H 1; 1' 0][d; ν] = [−g; 0]` and returns `d`.
fn equality_newton(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    let n = g.len();
    let mut k = DMatrix::zeros(n + 1, n + 1);
    k.view_mut((0, 0), (n, n)).copy_from(h);
    for i in 0..n {
        k[(i, n)] = 1.0;
        k[(n, i)] = 1.0;
    }
    let mut rhs = DVector::zeros(n + 1);
    rhs.rows_mut(0, n).copy_from(&(-g));
    let sol = k.lu().solve(&rhs)?;
    Some(sol.rows(0, n).into_owned())
}

fn barrier_solve(q: &[f64], theta: &[f64], c: &Constraints) -> Vec<f64> {
    let n = q.len();
    let mut p: Vec<f64> = vec![0.0; n];
    let mut t = 1.0;
    while t < 1e9 {
        for _ in 0..200 {
            let mut g = DVector::from_iterator(n, p.iter().zip(theta).map(|(pi, th)| t * (pi.atanh() - th)));
            let mut h = DMatrix::from_diagonal(&DVector::from_iterator(n, p.iter().map(|pi| t / (1.0 - pi * pi))));
            for (row, b) in c.rows.iter().zip(&c.bounds) {
                let slack = b - dot(row, &p);
                let a = DVector::from_column_slice(row);
                g += &a / slack;
                h += &a * a.transpose() / (slack * slack);
            }
            let Some(d) = equality_newton(&h, &g) else { break };
            let decrement = -g.dot(&d);
            if decrement / 2.0 < 1e-14 {
                break;
            }
            let f0 = barrier_value(&p, q, t, c).expect("iterate stays interior");
            let mut step = 1.0;
            let mut moved = false;
            for _ in 0..60 {
                let trial: Vec<f64> = p.iter().zip(d.iter()).map(|(a, b)| a + step * b).collect();
                if let Some(f1) = barrier_value(&trial, q, t, c) {
                    if f1 <= f0 - 0.25 * step * decrement {
                        p = trial;
                        moved = true;
                        break;
                    }
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
        t *= 4.0;
    }
    p
}

/// Newton's method on `link(p) − θ + A'μ = 0`, `Ap = b` for the given active rows.
fn active_set_solve(theta: &[f64], start: &[f64], active: &[(Vec<f64>, f64)]) -> Option<(Vec<f64>, Vec<f64>)> {
    let n = theta.len();
    let m = active.len();
    let mut p = start.to_vec();
    let mut mu = vec![0.0; m];
    for _ in 0..100 {
        if p.iter().any(|x| x.abs() >= 1.0) {
            return None;
        }
        let mut k = DMatrix::zeros(n + m, n + m);
        let mut r = DVector::zeros(n + m);
        for i in 0..n {
            k[(i, i)] = 1.0 / (1.0 - p[i] * p[i]);
            r[i] = p[i].atanh() - theta[i];
        }
        for (j, (row, b)) in active.iter().enumerate() {
            for i in 0..n {
                k[(i, n + j)] = row[i];
                k[(n + j, i)] = row[i];
                r[i] += row[i] * mu[j];
            }
            r[n + j] = dot(row, &p) - b;
        }
        if r.amax() < 1e-15 {
            return Some((p, mu));
        }
        let step = k.svd(true, true).solve(&(-&r), 1e-12).ok()?;
        let mut scale = 1.0;
        while p.iter().enumerate().any(|(i, x)| (x + scale * step[i]).abs() >= 1.0) {
            scale *= 0.5;
            if scale < 1e-12 {
                return None;
            }
        }
        for i in 0..n {
            p[i] += scale * step[i];
        }
        for j in 0..m {
            mu[j] += scale * step[n + j];
        }
        if scale * step.amax() < 1e-16 {
            return Some((p, mu));
        }
    }
    Some((p, mu))
}

/// `argmin_{p ∈ Q̂_n} Δ_F(p, q)` by a method independent of the block algorithm.
pub fn reference_projection(q: &[f64]) -> Result<ReferenceProjection> {
    let n = q.len();
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    if n > MAX_REFERENCE_N {
        return Err(Error::EnumerationTooLarge {
            n,
            max: MAX_REFERENCE_N,
        });
    }
    let theta = link(q)?;
    let c = subset_constraints(n);
    let rough = barrier_solve(q, &theta, &c);

    // primal active-set iteration seeded by the constraints the barrier
    // iterate nearly saturates: add the most violated constraint, drop the
    // most negative multiplier, until the KKT conditions hold
    let mut active: Vec<usize> = (0..c.rows.len())
        .filter(|&k| c.bounds[k] - dot(&c.rows[k], &rough) < 1e-6)
        .collect();
    let mut start = rough.clone();
    let mut refined = None;
    for _ in 0..4 * c.rows.len() {
        let mut rows: Vec<(Vec<f64>, f64)> = active.iter().map(|&k| (c.rows[k].clone(), c.bounds[k])).collect();
        // the equality constraint goes last; its multiplier is free
        rows.push((vec![1.0; n], 0.0));
        let Some((p, mu)) = active_set_solve(&theta, &start, &rows) else {
            break;
        };
        let violated = (0..c.rows.len())
            .map(|k| (k, dot(&c.rows[k], &p) - c.bounds[k]))
            .filter(|&(_, v)| v > 1e-12)
            .max_by(|a, b| a.1.total_cmp(&b.1));
        let negative = mu[..active.len()]
            .iter()
            .enumerate()
            .filter(|(_, &m)| m < -1e-9)
            .min_by(|a, b| a.1.total_cmp(b.1))
            .map(|(j, _)| j);
        match (violated, negative) {
            (None, None) => {
                refined = Some(p);
                break;
            }
            (_, Some(j)) => {
                active.remove(j);
            }
            (Some((k, _)), None) => active.push(k),
        }
        if p.iter().all(|x| x.abs() < 1.0) {
            start = p;
        }
    }
    let (point, refined) = match refined {
        Some(p) => (p, true),
        None => (rough, false),
    };
    let objective = bregman(&point, q)?;
    Ok(ReferenceProjection {
        point,
        refined,
        objective,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_pair_goes_to_origin() {
        let r = reference_projection(&[0.5, 0.5]).unwrap();
        assert!(r.refined);
        assert!(r.point.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn interior_points_are_fixed() {
        let q = [0.2, -0.05, 0.1, -0.25];
        let r = reference_projection(&q).unwrap();
        for (a, b) in r.point.iter().zip(q) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
