//! Permutations and the vertices of the symmetrized permutahedron.
//!
//! Items are 0-indexed; positions are 1-based, so `positions[v] == 1` means
//! item `v` is ranked first. Lower positions are more favorable, and the
//! loss of a ranking against a quality vector `s` is `Σ_v π̂(v)·s(v)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Slack allowed when checking loss-vector regime bounds.
pub const REGIME_SLACK: f64 = 1e-12;

/// A bijection from items onto positions `1..=n`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Permutation {
    positions: Vec<usize>,
}

impl Permutation {
    pub fn new(positions: Vec<usize>) -> Result<Self> {
        let n = positions.len();
        let mut seen = vec![false; n];
        for &p in &positions {
            if p == 0 || p > n {
                return Err(Error::InvalidPermutation(format!(
                    "position {p} outside 1..={n}"
                )));
            }
            if std::mem::replace(&mut seen[p - 1], true) {
                return Err(Error::InvalidPermutation(format!("position {p} repeated")));
            }
        }
        Ok(Self { positions })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            positions: (1..=n).collect(),
        }
    }

    /// Builds the permutation that ranks `order[0]` first, `order[1]` second, ...
    pub fn from_order(order: &[usize]) -> Result<Self> {
        let n = order.len();
        let mut positions = vec![0; n];
        for (rank, &item) in order.iter().enumerate() {
            if item >= n {
                return Err(Error::ItemOutOfRange { item, n });
            }
            if positions[item] != 0 {
                return Err(Error::InvalidPermutation(format!("item {item} repeated")));
            }
            positions[item] = rank + 1;
        }
        Ok(Self { positions })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    pub fn position(&self, item: usize) -> usize {
        self.positions[item]
    }

    /// Items listed from most to least favorable position.
    pub fn order(&self) -> Vec<usize> {
        let mut order = vec![0; self.len()];
        for (item, &p) in self.positions.iter().enumerate() {
            order[p - 1] = item;
        }
        order
    }

    /// `true` when `u` is ranked ahead of `v`.
    pub fn beats(&self, u: usize, v: usize) -> bool {
        self.positions[u] < self.positions[v]
    }

    /// Coordinates of the standard (un-centered) permutahedron vertex.
    pub fn standard_coords(&self) -> Vec<f64> {
        self.positions.iter().map(|&p| p as f64).collect()
    }
}

/// A vertex of the symmetrized permutahedron: `π(v) − (n+1)/2`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CenteredPermutation {
    perm: Permutation,
    coords: Vec<f64>,
}

impl CenteredPermutation {
    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl AsRef<[f64]> for CenteredPermutation {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

impl From<Permutation> for CenteredPermutation {
    fn from(perm: Permutation) -> Self {
        center(&perm)
    }
}

/// A vertex of `Q̂_n = (2/(n−1))·P̂_n`, which lies in `[−1, 1]ⁿ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledVertex {
    perm: Permutation,
    coords: Vec<f64>,
}

impl ScaledVertex {
    pub fn from_permutation(perm: &Permutation) -> Result<Self> {
        scale_to_q(&center(perm))
    }

    pub fn permutation(&self) -> &Permutation {
        &self.perm
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn len(&self) -> usize {
        self.coords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coords.is_empty()
    }
}

impl AsRef<[f64]> for ScaledVertex {
    fn as_ref(&self) -> &[f64] {
        &self.coords
    }
}

/// Which bounded family a loss vector belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    /// `|π̂·s| ≤ 1` for every vertex `π̂`.
    Dual,
    /// `‖s‖₁ ≤ 1`.
    L1,
}

impl Regime {
    pub fn name(self) -> &'static str {
        match self {
            Regime::Dual => "dual",
            Regime::L1 => "l1",
        }
    }

    /// The norm whose unit ball defines the regime.
    pub fn norm(self, s: &[f64]) -> f64 {
        match self {
            Regime::Dual => dual_norm(s),
            Regime::L1 => s.iter().map(|x| x.abs()).sum(),
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "dual" => Ok(Regime::Dual),
            "l1" => Ok(Regime::L1),
            other => Err(Error::InvalidParameter(format!("unknown regime `{other}`"))),
        }
    }
}

/// A hidden per-round quality vector, checked against its regime on construction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossVector {
    s: Vec<f64>,
    regime: Regime,
}

impl LossVector {
    pub fn new(s: Vec<f64>, regime: Regime) -> Result<Self> {
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let norm = regime.norm(&s);
        if norm > 1.0 + REGIME_SLACK {
            return Err(Error::RegimeViolation {
                regime: regime.name(),
                norm,
            });
        }
        Ok(Self { s, regime })
    }

    /// Rescales `s` onto the unit sphere of the regime's norm.
    pub fn normalized(s: &[f64], regime: Regime) -> Result<Self> {
        let norm = regime.norm(s);
        if !norm.is_finite() {
            return Err(Error::NonFinite);
        }
        if norm <= f64::EPSILON * s.len() as f64 {
            return Err(Error::DegenerateLoss(format!(
                "{regime} norm is zero, cannot normalize"
            )));
        }
        Self::new(s.iter().map(|x| x / norm).collect(), regime)
    }

    pub fn regime(&self) -> Regime {
        self.regime
    }

    pub fn values(&self) -> &[f64] {
        &self.s
    }

    pub fn len(&self) -> usize {
        self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.s.is_empty()
    }
}

impl AsRef<[f64]> for LossVector {
    fn as_ref(&self) -> &[f64] {
        &self.s
    }
}

pub fn center(p: &Permutation) -> CenteredPermutation {
    let mid = (p.len() as f64 + 1.0) / 2.0;
    let coords = p.positions().iter().map(|&pos| pos as f64 - mid).collect();
    CenteredPermutation {
        perm: p.clone(),
        coords,
    }
}

pub fn scale_to_q(c: &CenteredPermutation) -> Result<ScaledVertex> {
    let n = c.len();
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    let factor = 2.0 / (n as f64 - 1.0);
    Ok(ScaledVertex {
        perm: c.permutation().clone(),
        coords: c.coords().iter().map(|x| x * factor).collect(),
    })
}

pub fn dot(coords: impl AsRef<[f64]>, s: impl AsRef<[f64]>) -> Result<f64> {
    let (a, b) = (coords.as_ref(), s.as_ref());
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch {
            expected: a.len(),
            got: b.len(),
        });
    }
    Ok(a.iter().zip(b).map(|(x, y)| x * y).sum())
}

/// Best ranking in hindsight: the largest coordinate of `total` is ranked
/// first. Equal coordinates are ordered by item index.
pub fn best_static(total: &[f64]) -> Permutation {
    let mut order: Vec<usize> = (0..total.len()).collect();
    // stable sort keeps lower indices first among ties
    order.sort_by(|&a, &b| total[b].total_cmp(&total[a]));
    Permutation::from_order(&order).expect("argsort is a bijection")
}

/// `max_π̂ |π̂·s|` over all vertices of the symmetrized permutahedron.
///
/// By the rearrangement inequality the maximum pairs the sorted entries of
/// `s` with the sorted centered positions; the minimum is its negation.
pub fn dual_norm(s: &[f64]) -> f64 {
    let n = s.len();
    let mut sorted = s.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mid = (n as f64 + 1.0) / 2.0;
    sorted
        .iter()
        .enumerate()
        .map(|(i, x)| (i as f64 + 1.0 - mid) * x)
        .sum::<f64>()
        .abs()
}

/// The value `(n+1)/2 · Σ s` that separates standard from centered losses:
/// `π·s = π̂·s + standard_offset(s)`.
pub fn standard_offset(s: &[f64]) -> f64 {
    (s.len() as f64 + 1.0) / 2.0 * s.iter().sum::<f64>()
}

/// Converts a centered-game loss into the loss of the same ranking on the
/// standard permutahedron.
pub fn to_standard_loss(centered_loss: f64, s: &[f64]) -> f64 {
    centered_loss + standard_offset(s)
}

/// All `n!` permutations in lexicographic order of their item order.
pub fn all_permutations(n: usize) -> AllPermutations {
    AllPermutations {
        next: Some((0..n).collect()),
    }
}

pub struct AllPermutations {
    next: Option<Vec<usize>>,
}

impl Iterator for AllPermutations {
    type Item = Permutation;

    fn next(&mut self) -> Option<Permutation> {
        let order = self.next.take()?;
        let perm = Permutation::from_order(&order).expect("valid order");
        let mut succ = order;
        if next_lexicographic(&mut succ) {
            self.next = Some(succ);
        }
        Some(perm)
    }
}

fn next_lexicographic(a: &mut [usize]) -> bool {
    if a.len() < 2 {
        return false;
    }
    let Some(i) = (0..a.len() - 1).rev().find(|&i| a[i] < a[i + 1]) else {
        return false;
    };
    let j = (i + 1..a.len()).rev().find(|&j| a[j] > a[i]).unwrap();
    a.swap(i, j);
    a[i + 1..].reverse();
    true
}
