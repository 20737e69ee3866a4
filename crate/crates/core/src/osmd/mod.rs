//! OSMDRank: online stochastic mirror descent over `Q̂_n` with the
//! binary-entropy regularizer.
//!
//! Each round plays a vertex drawn from a convex decomposition of
//! `(1−γ)x_t`, estimates the loss vector from the observed scalar, takes a
//! step in link space and projects back onto `Q̂_n`.

pub mod decomposition;
pub mod mirror;
pub mod projection;

use nalgebra::{Cholesky, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

pub use decomposition::{decompose, ConvexCombination};
pub use mirror::{bregman, link, link_inv, regularizer_f};
pub use projection::{delta_solve, polytope_violation, prefix_bound, project, project_dual, ProjectionResult};

use crate::banditrank::LOSS_SLACK;
use crate::error::{Error, Result};
use crate::game::{ActionSet, Learner};
use crate::numerics::{pseudo_inverse, SymmetricMatrix, DEFAULT_RANK_TOL};
use crate::perm::ScaledVertex;
use crate::GameRng;

/// Coordinates are kept this far inside `(−1, 1)` between rounds.
pub const INTERIOR_MARGIN: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OsmdParams {
    pub n: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub eta: f64,
}

impl OsmdParams {
    pub const DEFAULT_C_ETA: f64 = 1.0;
    pub const DEFAULT_C_GAMMA: f64 = 1.0;

    /// `η = c_eta·n/√T` and `γ = min(1, c_gamma/√T)`.
    pub fn default_params(n: usize, horizon: usize, c_eta: f64, c_gamma: f64) -> Self {
        let root = (horizon.max(1) as f64).sqrt();
        Self {
            n,
            horizon,
            gamma: (c_gamma / root).min(1.0),
            eta: c_eta * n as f64 / root,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::TooFewItems(self.n));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "gamma must lie in (0, 1], got {}",
                self.gamma
            )));
        }
        if !(self.eta > 0.0 && self.eta.is_finite()) {
            return Err(Error::InvalidParameter(format!("eta must be positive, got {}", self.eta)));
        }
        Ok(())
    }
}

/// `E[σσ']` for the exploration mixture on `{−1, 1}ⁿ ∪ {±e_i}`:
/// `γ/n·I + (1−γ)(xx' + diag(1 − x_i²))`.
pub fn estimator_covariance(x: &[f64], gamma: f64) -> Result<SymmetricMatrix> {
    for (index, &value) in x.iter().enumerate() {
        if !value.is_finite() {
            return Err(Error::NonFinite);
        }
        if value.abs() > 1.0 {
            return Err(Error::OutsideCube { index, value });
        }
    }
    let n = x.len();
    let explore = gamma / n as f64;
    Ok(SymmetricMatrix::from_upper(n, |i, j| {
        let rademacher = if i == j { 1.0 } else { x[i] * x[j] };
        let uniform = if i == j { explore } else { 0.0 };
        uniform + (1.0 - gamma) * rademacher
    }))
}

/// One draw from the mixture whose second moment is [`estimator_covariance`]:
/// with probability `γ` a uniformly chosen `±e_i`, otherwise independent signs
/// with `P(σ_i = 1) = (1 + x_i)/2`.
pub fn sample_hypercube(x: &[f64], gamma: f64, rng: &mut GameRng) -> Vec<f64> {
    let n = x.len();
    if rng.random::<f64>() < gamma {
        let mut sigma = vec![0.0; n];
        let i = rng.random_range(0..n);
        sigma[i] = if rng.random::<bool>() { 1.0 } else { -1.0 };
        sigma
    } else {
        x.iter()
            .map(|&xi| if rng.random::<f64>() < (1.0 + xi) / 2.0 { 1.0 } else { -1.0 })
            .collect()
    }
}

#[derive(Clone, Debug)]
pub struct OsmdRank {
    params: OsmdParams,
    x: Vec<f64>,
    t: usize,
    pending: Option<ScaledVertex>,
}

impl OsmdRank {
    pub fn new(params: OsmdParams) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            x: vec![0.0; params.n],
            t: 0,
            pending: None,
            params,
        })
    }

    pub fn params(&self) -> &OsmdParams {
        &self.params
    }

    /// The current mirror point `x_t`.
    pub fn point(&self) -> &[f64] {
        &self.x
    }

    pub fn step(&self) -> usize {
        self.t
    }

    /// Replaces `x_t`; the point must lie in `Q̂_n` and strictly inside the cube.
    pub fn set_point(&mut self, x: Vec<f64>) -> Result<()> {
        if x.len() != self.params.n {
            return Err(Error::DimensionMismatch {
                expected: self.params.n,
                got: x.len(),
            });
        }
        let violation = polytope_violation(&x);
        if violation > decomposition::MEMBERSHIP_TOL {
            return Err(Error::OutsidePolytope { violation });
        }
        link(&x)?;
        self.x = x;
        Ok(())
    }

    /// The distribution actions are drawn from: a decomposition of `(1−γ)x_t`.
    pub fn action_distribution(&self) -> Result<ConvexCombination> {
        let shrunk: Vec<f64> = self.x.iter().map(|v| (1.0 - self.params.gamma) * v).collect();
        decompose(&shrunk)
    }

    pub fn draw(&self, rng: &mut GameRng) -> Result<ScaledVertex> {
        Ok(self.action_distribution()?.sample(rng).clone())
    }

    /// `s̃ = ℓ·P_t⁻¹·π_t`, with `P_t` from [`estimator_covariance`].
    pub fn estimate_loss(&self, action: &[f64], loss: f64) -> Result<Vec<f64>> {
        let n = self.params.n;
        if action.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: action.len(),
            });
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite);
        }
        if loss.abs() > 1.0 + LOSS_SLACK {
            return Err(Error::LossOutOfRange(loss));
        }
        let p = estimator_covariance(&self.x, self.params.gamma)?;
        let rhs = DVector::from_iterator(n, action.iter().map(|a| a * loss));
        let solved = match Cholesky::new(p.matrix().clone()) {
            Some(chol) => chol.solve(&rhs),
            None => pseudo_inverse(&p, DEFAULT_RANK_TOL)?.matrix() * rhs,
        };
        Ok(solved.iter().copied().collect())
    }

    /// Mirror step `x_{t+½} = ∇F*(∇F(x_t) − η·s̃)` followed by projection.
    ///
    /// The mirror step is taken in the dual: `∇F(x_t) − η·s̃` goes straight to
    /// the projection, which works in link space.
    pub fn update_with(&mut self, action: &[f64], loss: f64) -> Result<()> {
        let step = self.t;
        let inner = || -> Result<Vec<f64>> {
            let est = self.estimate_loss(action, loss)?;
            let theta: Vec<f64> = link(&self.x)?
                .iter()
                .zip(&est)
                .map(|(y, s)| y - self.params.eta * s)
                .collect();
            Ok(project_dual(&theta)?.point)
        };
        let next = inner().map_err(|e| e.at_step(step))?;
        let bound = 1.0 - INTERIOR_MARGIN;
        self.x = next.into_iter().map(|v| v.clamp(-bound, bound)).collect();
        self.t += 1;
        Ok(())
    }
}

impl Learner for OsmdRank {
    fn name(&self) -> &'static str {
        "osmdrank"
    }

    fn action_set(&self) -> ActionSet {
        ActionSet::Rescaled
    }

    fn act(&mut self, rng: &mut GameRng) -> Result<Vec<f64>> {
        let action = self.draw(rng).map_err(|e| e.at_step(self.t))?;
        let coords = action.coords().to_vec();
        self.pending = Some(action);
        Ok(coords)
    }

    fn observe(&mut self, loss: f64) -> Result<()> {
        let action = self.pending.take().ok_or(Error::NoPendingAction)?;
        self.update_with(action.coords(), loss)
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.params.gamma)
    }

    fn eta(&self) -> Option<f64> {
        Some(self.params.eta)
    }
}
