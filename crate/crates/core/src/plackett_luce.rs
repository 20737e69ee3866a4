//! Plackett-Luce rankings, Bradley-Terry-Luce tournaments and their exact
//! low-order marginals.
//!
//! Every probability here depends on weight differences only. Exponentials
//! are taken of differences (or after subtracting the largest exponent of
//! the expression), so weights that grow without bound never overflow.

use rand::distr::Open01;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SymmetricMatrix;
use crate::perm::{center, CenteredPermutation, Permutation};
use crate::GameRng;

/// Plackett-Luce log-weights. Larger weight means more likely to rank early.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightVector(Vec<f64>);

impl WeightVector {
    pub fn new(w: Vec<f64>) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self(w))
    }

    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// `w + c·1`; all distributions are invariant under this shift.
    pub fn shifted(&self, c: f64) -> Self {
        Self(self.0.iter().map(|x| x + c).collect())
    }

    /// `w += step·direction`
    pub fn add_scaled(&mut self, step: f64, direction: &[f64]) -> Result<()> {
        if direction.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                got: direction.len(),
            });
        }
        for (w, d) in self.0.iter_mut().zip(direction) {
            *w += step * d;
        }
        if self.0.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    fn check_items(&self, items: &[usize]) -> Result<()> {
        let n = self.len();
        for (k, &a) in items.iter().enumerate() {
            if a >= n {
                return Err(Error::ItemOutOfRange { item: a, n });
            }
            if items[..k].contains(&a) {
                return Err(Error::RepeatedItems);
            }
        }
        Ok(())
    }
}

impl AsRef<[f64]> for WeightVector {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[inline]
fn logistic_pair(wu: f64, wv: f64) -> f64 {
    1.0 / (1.0 + (wv - wu).exp())
}

/// Probability that the item with weight `wa` is chosen first among three.
#[inline]
fn first_of_three(wa: f64, wb: f64, wc: f64) -> f64 {
    1.0 / (1.0 + (wb - wa).exp() + (wc - wa).exp())
}

/// `p(u ≺ v | w) = e^{w(u)} / (e^{w(u)} + e^{w(v)})`.
pub fn pair_prob(u: usize, v: usize, w: &WeightVector) -> Result<f64> {
    w.check_items(&[u, v])?;
    Ok(logistic_pair(w.0[u], w.0[v]))
}

/// `p(a ≺ b ≺ c | w) = e^{w(a)+w(b)} / ((e^{w(a)}+e^{w(b)}+e^{w(c)})(e^{w(b)}+e^{w(c)}))`.
pub fn triple_order_prob(a: usize, b: usize, c: usize, w: &WeightVector) -> Result<f64> {
    w.check_items(&[a, b, c])?;
    let (wa, wb, wc) = (w.0[a], w.0[b], w.0[c]);
    let m = wa.max(wb).max(wc);
    let (ea, eb, ec) = ((wa - m).exp(), (wb - m).exp(), (wc - m).exp());
    Ok(ea / (ea + eb + ec) * (eb / (eb + ec)))
}

/// `p(u ≺ {v, z} | w)`: `u` precedes both others.
pub fn top_among_three(u: usize, v: usize, z: usize, w: &WeightVector) -> Result<f64> {
    w.check_items(&[u, v, z])?;
    Ok(first_of_three(w.0[u], w.0[v], w.0[z]))
}

/// `p({u, v} ≺ z | w)`: both `u` and `v` precede `z`.
pub fn top_pair_prob(u: usize, v: usize, z: usize, w: &WeightVector) -> Result<f64> {
    w.check_items(&[u, v, z])?;
    let (wu, wv, wz) = (w.0[u], w.0[v], w.0[z]);
    let m = wu.max(wv).max(wz);
    let (eu, ev, ez) = ((wu - m).exp(), (wv - m).exp(), (wz - m).exp());
    Ok(eu * ev / (eu + ev + ez) * (1.0 / (ev + ez) + 1.0 / (eu + ez)))
}

/// Probability of one complete ranking under `PL(w)`.
pub fn pl_prob(c: &CenteredPermutation, w: &WeightVector) -> Result<f64> {
    if c.len() != w.len() {
        return Err(Error::DimensionMismatch {
            expected: w.len(),
            got: c.len(),
        });
    }
    let order = c.permutation().order();
    let mut log_p = 0.0;
    for (k, &item) in order.iter().enumerate() {
        let rest = &order[k..];
        let m = rest.iter().map(|&j| w.0[j]).fold(f64::NEG_INFINITY, f64::max);
        let z: f64 = rest.iter().map(|&j| (w.0[j] - m).exp()).sum();
        log_p += w.0[item] - m - z.ln();
    }
    Ok(log_p.exp())
}

/// How [`sample_pl`] draws a ranking. Both produce exactly `PL(w)`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlSampler {
    /// Repeatedly pick the next item with probability `∝ e^{w(u)}`.
    Sequential,
    /// Sort `w(u) + G_u` descending with iid standard Gumbel `G_u`.
    #[default]
    Gumbel,
}

pub fn sample_pl(w: &WeightVector, rng: &mut GameRng, method: PlSampler) -> CenteredPermutation {
    let n = w.len();
    let order = match method {
        PlSampler::Sequential => {
            let mut pool: Vec<usize> = (0..n).collect();
            let mut order = Vec::with_capacity(n);
            let mut probs = Vec::with_capacity(n);
            while !pool.is_empty() {
                let m = pool.iter().map(|&j| w.0[j]).fold(f64::NEG_INFINITY, f64::max);
                probs.clear();
                probs.extend(pool.iter().map(|&j| (w.0[j] - m).exp()));
                let total: f64 = probs.iter().sum();
                let mut r = rng.random::<f64>() * total;
                let mut pick = pool.len() - 1;
                for (k, p) in probs.iter().enumerate() {
                    if r < *p {
                        pick = k;
                        break;
                    }
                    r -= p;
                }
                order.push(pool.remove(pick));
            }
            order
        }
        PlSampler::Gumbel => {
            let keys: Vec<f64> = w
                .0
                .iter()
                .map(|&wu| {
                    let u: f64 = rng.sample(Open01);
                    wu - (-u.ln()).ln()
                })
                .collect();
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| keys[b].total_cmp(&keys[a]));
            order
        }
    };
    center(&Permutation::from_order(&order).expect("sampled order is a bijection"))
}

/// One orientation per unordered pair `{u, v}`, stored for `u < v`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tournament {
    n: usize,
    bits: Vec<bool>,
}

fn pair_index(n: usize, u: usize, v: usize) -> usize {
    debug_assert!(u < v && v < n);
    u * (2 * n - u - 1) / 2 + (v - u - 1)
}

impl Tournament {
    /// `bits[k]` orients the `k`-th pair in `(0,1), (0,2), …, (n−2,n−1)` order;
    /// `true` means the lower-indexed item wins.
    pub fn from_bits(n: usize, bits: Vec<bool>) -> Result<Self> {
        let pairs = n * n.saturating_sub(1) / 2;
        if bits.len() != pairs {
            return Err(Error::DimensionMismatch {
                expected: pairs,
                got: bits.len(),
            });
        }
        Ok(Self { n, bits })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// `true` when `(u, v) ∈ A`.
    pub fn beats(&self, u: usize, v: usize) -> bool {
        match u.cmp(&v) {
            std::cmp::Ordering::Less => self.bits[pair_index(self.n, u, v)],
            std::cmp::Ordering::Greater => !self.bits[pair_index(self.n, v, u)],
            std::cmp::Ordering::Equal => false,
        }
    }

    /// `log Π_{(u,v)∈A} p(u ≺ v | w)`.
    pub fn log_prob(&self, w: &WeightVector) -> f64 {
        let mut lp = 0.0;
        for u in 0..self.n {
            for v in u + 1..self.n {
                let (a, b) = if self.beats(u, v) { (u, v) } else { (v, u) };
                lp += logistic_pair(w.0[a], w.0[b]).ln();
            }
        }
        lp
    }
}

/// Draws each pair's orientation independently from the BTL model.
pub fn sample_btl(w: &WeightVector, rng: &mut GameRng) -> Tournament {
    let n = w.len();
    let mut bits = Vec::with_capacity(n * n.saturating_sub(1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            bits.push(rng.random::<f64>() < logistic_pair(w.0[u], w.0[v]));
        }
    }
    Tournament { n, bits }
}

/// Exact `E_{π̂∼PL(w)}[π̂π̂']` in `O(n³)`.
///
/// With `N_u = #{v : v ≺ u}`, `π̂(u) = N_u − (n−1)/2`. Products of indicators
/// on disjoint pairs factorize under a random utility model, pairs sharing
/// one item reduce to three-item marginals and equal pairs to pair
/// marginals. For `u ≠ x` this gives
/// `E[N_u N_x] = 2·Σ_v p(v ≺ {u,x}) + A_u A_x − Σ_v p(v≺u)p(v≺x)`
/// with `v` ranging over the other items and `A_u = Σ_v p(v≺u)`.
pub fn pl_covariance(w: &WeightVector) -> SymmetricMatrix {
    let n = w.len();
    let ws = w.as_slice();
    // ratio[a][b] = e^{w(b) - w(a)}
    let ratio: Vec<f64> = (0..n * n).map(|k| (ws[k % n] - ws[k / n]).exp()).collect();
    let r = |a: usize, b: usize| ratio[a * n + b];
    // pr[a][b] = p(a ≺ b)
    let pr: Vec<f64> = (0..n * n)
        .map(|k| if k / n == k % n { 0.0 } else { 1.0 / (1.0 + ratio[k]) })
        .collect();
    let p = |a: usize, b: usize| pr[a * n + b];

    // beaten_by[u] = E[N_u]
    let beaten_by: Vec<f64> = (0..n).map(|u| (0..n).map(|v| p(v, u)).sum()).collect();
    let half = (n as f64 - 1.0) / 2.0;

    SymmetricMatrix::from_upper(n, |u, x| {
        let second = if u == x {
            // E[N_u²] = E[N_u] + Σ_{v≠y} p({v,y} ≺ u)
            let mut both_before = 0.0;
            for v in 0..n {
                if v == u {
                    continue;
                }
                for y in v + 1..n {
                    if y == u {
                        continue;
                    }
                    let first_v = 1.0 / (1.0 + r(v, y) + r(v, u));
                    let first_y = 1.0 / (1.0 + r(y, v) + r(y, u));
                    both_before += first_v * p(y, u) + first_y * p(v, u);
                }
            }
            beaten_by[u] + 2.0 * both_before
        } else {
            let mut first = 0.0;
            let mut shared = 0.0;
            for v in 0..n {
                if v == u || v == x {
                    continue;
                }
                first += 1.0 / (1.0 + r(v, u) + r(v, x));
                shared += p(v, u) * p(v, x);
            }
            let a_u = beaten_by[u] - p(x, u);
            let a_x = beaten_by[x] - p(u, x);
            2.0 * first + a_u * a_x - shared
        };
        second - half * (beaten_by[u] + beaten_by[x]) + half * half
    })
}

/// Monte-Carlo estimate of [`pl_covariance`]; only for cross-checking.
pub fn pl_covariance_monte_carlo(
    w: &WeightVector,
    samples: usize,
    rng: &mut GameRng,
) -> SymmetricMatrix {
    let n = w.len();
    let mut acc = nalgebra::DMatrix::<f64>::zeros(n, n);
    for _ in 0..samples {
        let c = sample_pl(w, rng, PlSampler::Gumbel);
        let v = nalgebra::DVector::from_column_slice(c.coords());
        acc += &v * v.transpose();
    }
    acc /= samples as f64;
    SymmetricMatrix::new(acc).expect("outer-product average is symmetric")
}

/// Coefficient matrix of `H(Δ) = s(Δ)' M s(Δ)` for a three-item set `Δ = {a, b, c}`:
/// diagonal `H_aa, H_bb, H_cc`, off-diagonal `½H_ab, ½H_ac, ½H_bc`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HMatrix {
    pub m: [[f64; 3]; 3],
}

impl HMatrix {
    pub fn diag(&self, i: usize) -> f64 {
        self.m[i][i]
    }

    /// The un-halved cross coefficient `H_ij` (coefficient of `s_i s_j` in the form).
    pub fn cross(&self, i: usize, j: usize) -> f64 {
        2.0 * self.m[i][j]
    }

    /// `H_aa·H_bb − ¼H_ab²`, computed from the entries.
    pub fn leading_minor(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[0][1]
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let m = nalgebra::Matrix3::from_fn(|i, j| self.m[i][j]);
        m.symmetric_eigenvalues().min()
    }

    /// Largest entry of `|M·1|`.
    pub fn kernel_residual(&self) -> f64 {
        self.m
            .iter()
            .map(|row| row.iter().sum::<f64>().abs())
            .fold(0.0, f64::max)
    }

    pub fn form(&self, s: [f64; 3]) -> f64 {
        let mut acc = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                acc += s[i] * self.m[i][j] * s[j];
            }
        }
        acc
    }
}

/// Closed-form H-matrix for weights `(w(a), w(b), w(c))`.
///
/// `H_aa = 4e^{a+b+c} / ((e^a+e^b)(e^a+e^c)(e^a+e^b+e^c))` and
/// `H_ab = −8e^{a+b+2c} / ((e^a+e^b)(e^a+e^c)(e^b+e^c)(e^a+e^b+e^c))`;
/// the other entries follow by relabeling.
pub fn h_matrix(w: [f64; 3]) -> HMatrix {
    let m = w[0].max(w[1]).max(w[2]);
    let e = [(w[0] - m).exp(), (w[1] - m).exp(), (w[2] - m).exp()];
    let total = e[0] + e[1] + e[2];
    let prod = e[0] * e[1] * e[2];
    let diag = |i: usize, j: usize, k: usize| 4.0 * prod / ((e[i] + e[j]) * (e[i] + e[k]) * total);
    let cross = |i: usize, j: usize, k: usize| {
        -8.0 * prod * e[k] / ((e[i] + e[j]) * (e[i] + e[k]) * (e[j] + e[k]) * total)
    };
    let (h_ab, h_ac, h_bc) = (cross(0, 1, 2), cross(0, 2, 1), cross(1, 2, 0));
    HMatrix {
        m: [
            [diag(0, 1, 2), 0.5 * h_ab, 0.5 * h_ac],
            [0.5 * h_ab, diag(1, 0, 2), 0.5 * h_bc],
            [0.5 * h_ac, 0.5 * h_bc, diag(2, 0, 1)],
        ],
    }
}
