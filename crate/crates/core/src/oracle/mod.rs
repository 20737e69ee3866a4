//! Brute-force ground truth at small `n`: exact enumeration over all
//! rankings, all tournaments and all hypercube points, to check the closed
//! forms used elsewhere in the crate.

pub mod convex;
pub mod verify;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

pub use convex::{reference_projection, ReferenceProjection};
pub use verify::{run_verify, VerifyCheck, VerifyOptions, VerifyReport, VerifyRow};

use crate::banditrank::BanditRank;
use crate::error::{Error, Result};
use crate::numerics::{pseudo_inverse, SymmetricMatrix, DEFAULT_RANK_TOL};
use crate::perm::{all_permutations, center, CenteredPermutation};
use crate::plackett_luce::{pl_prob, Tournament, WeightVector};

/// Largest `n` for ranking enumeration (`7! = 5040` rankings).
pub const MAX_RANKING_N: usize = 7;
/// Largest `n` for tournament and Lemma-1 enumeration (`2^15` tournaments).
pub const MAX_TOURNAMENT_N: usize = 6;
/// Largest `n` for hypercube enumeration.
pub const MAX_CUBE_N: usize = 12;

fn guard(n: usize, max: usize) -> Result<()> {
    if n > max {
        return Err(Error::EnumerationTooLarge { n, max });
    }
    Ok(())
}

/// Every ranking of `n` items with its probability.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExactDistribution {
    pub entries: Vec<(CenteredPermutation, f64)>,
}

impl ExactDistribution {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }

    pub fn expectation(&self, mut f: impl FnMut(&CenteredPermutation) -> f64) -> f64 {
        self.entries.iter().map(|(c, p)| p * f(c)).sum()
    }

    /// `P(u ≺ v)`.
    pub fn pair_marginal(&self, u: usize, v: usize) -> f64 {
        self.expectation(|c| f64::from(u8::from(c.permutation().beats(u, v))))
    }

    /// `E[π̂π̂']`
    pub fn second_moment(&self) -> SymmetricMatrix {
        let n = self.entries.first().map_or(0, |(c, _)| c.len());
        SymmetricMatrix::from_upper(n, |i, j| self.expectation(|c| c.coords()[i] * c.coords()[j]))
    }

    /// `γ·uniform + (1−γ)·self`
    pub fn mix_uniform(&self, gamma: f64) -> Self {
        let u = 1.0 / self.entries.len() as f64;
        Self {
            entries: self
                .entries
                .iter()
                .map(|(c, p)| (c.clone(), gamma * u + (1.0 - gamma) * p))
                .collect(),
        }
    }
}

/// `PL(w)` over all `n!` rankings by the chain rule.
pub fn enumerate_pl(w: &WeightVector) -> Result<ExactDistribution> {
    let n = w.len();
    guard(n, MAX_RANKING_N)?;
    let entries = all_permutations(n)
        .map(|p| {
            let c = center(&p);
            let prob = pl_prob(&c, w)?;
            Ok((c, prob))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExactDistribution { entries })
}

/// Chain-rule PL probability computed directly from exponentials, kept
/// separate from [`pl_prob`] so the two can be compared.
pub fn pl_prob_direct(order: &[usize], w: &[f64]) -> f64 {
    let mut prob = 1.0;
    for k in 0..order.len() {
        let z: f64 = order[k..].iter().map(|&j| w[j].exp()).sum();
        prob *= w[order[k]].exp() / z;
    }
    prob
}

/// `Σ_π̂ q(π̂|w)·π̂π̂'` for the `γ`-mixture of uniform and `PL(w)`.
pub fn exact_covariance(w: &WeightVector, gamma: f64) -> Result<SymmetricMatrix> {
    Ok(enumerate_pl(w)?.mix_uniform(gamma).second_moment())
}

/// All `2^{n(n−1)/2}` tournaments with their BTL probabilities.
pub fn enumerate_tournaments(w: &WeightVector) -> Result<Vec<(Tournament, f64)>> {
    let n = w.len();
    guard(n, MAX_TOURNAMENT_N)?;
    let pairs = n * n.saturating_sub(1) / 2;
    (0..1u64 << pairs)
        .map(|mask| {
            let bits = (0..pairs).map(|k| (mask >> k) & 1 == 1).collect();
            let t = Tournament::from_bits(n, bits)?;
            let p = t.log_prob(w).exp();
            Ok((t, p))
        })
        .collect()
}

/// `Σ_{u ≺ v} (s(v) − s(u))` over ordered pairs agreeing with `before`.
fn pair_statistic(n: usize, s: &[f64], before: impl Fn(usize, usize) -> bool) -> f64 {
    let mut x = 0.0;
    for u in 0..n {
        for v in 0..n {
            if u != v && before(u, v) {
                x += s[v] - s[u];
            }
        }
    }
    x
}

/// First and second moments of `X₁` (rankings from `PL(w)`) and `X₂`
/// (tournaments from `T(w)`), by exhaustive enumeration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Moments {
    pub mean_x1: f64,
    pub mean_x2: f64,
    pub second_x1: f64,
    pub second_x2: f64,
}

pub fn lemma1_moments(w: &WeightVector, s: &[f64]) -> Result<Lemma1Moments> {
    let n = w.len();
    guard(n, MAX_TOURNAMENT_N)?;
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let pl = enumerate_pl(w)?;
    let x1 = |c: &CenteredPermutation| pair_statistic(n, s, |u, v| c.permutation().beats(u, v));
    let mean_x1 = pl.expectation(x1);
    let second_x1 = pl.expectation(|c| x1(c).powi(2));
    let (mut mean_x2, mut second_x2) = (0.0, 0.0);
    for (t, p) in enumerate_tournaments(w)? {
        let x2 = pair_statistic(n, s, |u, v| t.beats(u, v));
        mean_x2 += p * x2;
        second_x2 += p * x2 * x2;
    }
    Ok(Lemma1Moments {
        mean_x1,
        mean_x2,
        second_x1,
        second_x2,
    })
}

/// `(E[X₂], E[X₂²])` from independence of the pair orientations: `X₂` is a
/// sum of independent `±|s(u) − s(v)|` terms.
pub fn tournament_moments_factorized(w: &WeightVector, s: &[f64]) -> (f64, f64) {
    let n = w.len();
    let ws = w.as_slice();
    let (mut mean, mut var) = (0.0, 0.0);
    for u in 0..n {
        for v in u + 1..n {
            let p = 1.0 / (1.0 + (ws[v] - ws[u]).exp());
            let d = s[v] - s[u];
            mean += d * (2.0 * p - 1.0);
            var += 4.0 * d * d * p * (1.0 - p);
        }
    }
    (mean, var + mean * mean)
}

/// `F₁ − F₂` on a three-item set, as a 3×3 symmetric coefficient matrix.
///
/// `F₁` sums `E[Z_e Z_f]` over the unordered pairs `{e, f}` of distinct item
/// pairs of the set under the ranking distribution, where `Z_{uv}` is
/// `s(later) − s(earlier)`; `F₂` is the same sum with independent pair
/// orientations. Coefficients are read off by evaluating the form at unit
/// vectors and their pairwise sums.
pub fn quadratic_form_coeffs(w: [f64; 3]) -> [[f64; 3]; 3] {
    let orders = [[0, 1, 2], [0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]];
    let pairs = [(0usize, 1usize), (0, 2), (1, 2)];
    let p_pair = |u: usize, v: usize| w[u].exp() / (w[u].exp() + w[v].exp());
    let form = |s: [f64; 3]| {
        // ranking side
        let mut f1 = 0.0;
        for order in &orders {
            let prob = pl_prob_direct(order, &w);
            let rank = |item: usize| order.iter().position(|&x| x == item).unwrap();
            let z: Vec<f64> = pairs
                .iter()
                .map(|&(u, v)| if rank(u) < rank(v) { s[v] - s[u] } else { s[u] - s[v] })
                .collect();
            f1 += prob * (z[0] * z[1] + z[0] * z[2] + z[1] * z[2]);
        }
        // independent orientations: E[Z_e Z_f] = E[Z_e]E[Z_f]
        let mean: Vec<f64> = pairs
            .iter()
            .map(|&(u, v)| {
                let p = p_pair(u, v);
                p * (s[v] - s[u]) + (1.0 - p) * (s[u] - s[v])
            })
            .collect();
        let f2 = mean[0] * mean[1] + mean[0] * mean[2] + mean[1] * mean[2];
        f1 - f2
    };
    let unit = |i: usize| {
        let mut e = [0.0; 3];
        e[i] = 1.0;
        e
    };
    let mut m = [[0.0; 3]; 3];
    for i in 0..3 {
        m[i][i] = form(unit(i));
    }
    for i in 0..3 {
        for j in i + 1..3 {
            let mut e = unit(i);
            e[j] = 1.0;
            let c = 0.5 * (form(e) - m[i][i] - m[j][j]);
            m[i][j] = c;
            m[j][i] = c;
        }
    }
    m
}

/// `Σ_π̂ q(π̂)·s̃(π̂)` with `s̃` from `learner.estimate_loss` and `q` the
/// enumerated action distribution of `learner`.
pub fn banditrank_estimator_mean(learner: &mut BanditRank, s: &[f64]) -> Result<Vec<f64>> {
    let n = learner.params().n;
    if s.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: s.len(),
        });
    }
    let q = enumerate_pl(learner.weights())?.mix_uniform(learner.params().gamma);
    let mut mean = vec![0.0; n];
    for (c, p) in &q.entries {
        let loss: f64 = c.coords().iter().zip(s).map(|(a, b)| a * b).sum();
        let est = learner.estimate_loss(c, loss)?;
        for (m, e) in mean.iter_mut().zip(est) {
            *m += p * e;
        }
    }
    Ok(mean)
}

/// The same estimator mean, built only from enumeration: the mixture
/// covariance is summed over rankings and pseudo-inverted directly.
pub fn estimator_mean_enumerated(w: &WeightVector, gamma: f64, s: &[f64]) -> Result<Vec<f64>> {
    let n = w.len();
    let q = enumerate_pl(w)?.mix_uniform(gamma);
    let pinv = pseudo_inverse(&q.second_moment(), DEFAULT_RANK_TOL)?;
    let mut mean = DVector::zeros(n);
    for (c, p) in &q.entries {
        let v = DVector::from_column_slice(c.coords());
        let loss = v.dot(&DVector::from_column_slice(s));
        mean += pinv.matrix() * &v * (p * loss);
    }
    Ok(mean.iter().copied().collect())
}

/// `(I − 11'/n)·s`: the target the estimator mean should hit.
pub fn centered_target(s: &[f64]) -> Vec<f64> {
    let avg = s.iter().sum::<f64>() / s.len() as f64;
    s.iter().map(|x| x - avg).collect()
}

/// `E[σσ']` for the OSMD exploration mixture, summed over all `2ⁿ` sign
/// vectors and all `2n` signed unit vectors.
pub fn hypercube_second_moment(x: &[f64], gamma: f64) -> Result<SymmetricMatrix> {
    let n = x.len();
    guard(n, MAX_CUBE_N)?;
    let mut acc = DMatrix::<f64>::zeros(n, n);
    for mask in 0u32..1 << n {
        let sigma: Vec<f64> = (0..n).map(|i| if (mask >> i) & 1 == 1 { 1.0 } else { -1.0 }).collect();
        let prob: f64 = sigma.iter().zip(x).map(|(s, xi)| (1.0 + s * xi) / 2.0).product();
        let v = DVector::from_vec(sigma);
        acc += &v * v.transpose() * ((1.0 - gamma) * prob);
    }
    for i in 0..n {
        // e_i and −e_i each with probability γ/(2n)
        acc[(i, i)] += gamma / n as f64;
    }
    SymmetricMatrix::new(acc)
}
