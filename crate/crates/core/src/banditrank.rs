//! BanditRank: Plackett-Luce play mixed with uniform exploration, with an
//! exponentiated-weights update driven by an unbiased loss estimate.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{ActionSet, Learner};
use crate::numerics::{pseudo_inverse, uniform_covariance, uniform_min_eig, SymmetricMatrix, DEFAULT_RANK_TOL};
use crate::perm::{center, CenteredPermutation, Permutation};
use crate::plackett_luce::{pl_covariance, sample_pl, PlSampler, WeightVector};
use crate::GameRng;

/// Losses may exceed 1 in magnitude by this much before they are rejected.
pub const LOSS_SLACK: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BanditRankParams {
    pub n: usize,
    pub horizon: usize,
    pub gamma: f64,
    pub eta: f64,
    /// Safety constant `c` in the step-size ceiling `η ≤ γ/(c·n)`.
    pub c_eta: f64,
}

impl BanditRankParams {
    pub const DEFAULT_C_GAMMA: f64 = 1.0;
    pub const DEFAULT_C_ETA: f64 = 4.0;

    /// `γ = min(1, c_gamma·n^{3/2}/√T)` and `η = γ/(c_eta·n)`.
    pub fn default_params(n: usize, horizon: usize, c_gamma: f64, c_eta: f64) -> Self {
        let nf = n as f64;
        let gamma = (c_gamma * nf.powf(1.5) / (horizon.max(1) as f64).sqrt()).min(1.0);
        Self {
            n,
            horizon,
            gamma,
            eta: gamma / (c_eta * nf),
            c_eta,
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
        if self.c_eta.is_nan() || self.c_eta <= 0.0 {
            return Err(Error::InvalidParameter(format!("c_eta must be positive, got {}", self.c_eta)));
        }
        Ok(())
    }

    /// `γ/(c_eta·n)`, the largest step size the safeguard allows.
    pub fn eta_ceiling(&self) -> f64 {
        self.gamma / (self.c_eta * self.n as f64)
    }
}

#[derive(Clone, Debug)]
pub struct BanditRank {
    params: BanditRankParams,
    w: WeightVector,
    t: usize,
    uniform: SymmetricMatrix,
    sampler: PlSampler,
    pending: Option<CenteredPermutation>,
    clip_events: u64,
}

impl BanditRank {
    pub fn new(params: BanditRankParams) -> Result<Self> {
        params.validate()?;
        if params.eta > params.eta_ceiling() * (1.0 + 1e-12) {
            log::warn!(
                "eta = {} exceeds gamma/(c_eta*n) = {}; the estimate safeguard may not hold",
                params.eta,
                params.eta_ceiling()
            );
        }
        let n = params.n;
        Ok(Self {
            w: WeightVector::zeros(n),
            t: 0,
            uniform: uniform_covariance(n),
            sampler: PlSampler::default(),
            pending: None,
            clip_events: 0,
            params,
        })
    }

    pub fn with_sampler(mut self, sampler: PlSampler) -> Self {
        self.sampler = sampler;
        self
    }

    pub fn params(&self) -> &BanditRankParams {
        &self.params
    }

    pub fn weights(&self) -> &WeightVector {
        &self.w
    }

    /// Replaces the current weights, e.g. to inspect the learner at a chosen state.
    pub fn set_weights(&mut self, w: WeightVector) -> Result<()> {
        if w.len() != self.params.n {
            return Err(Error::DimensionMismatch {
                expected: self.params.n,
                got: w.len(),
            });
        }
        self.w = w;
        Ok(())
    }

    pub fn step(&self) -> usize {
        self.t
    }

    pub fn clip_events(&self) -> u64 {
        self.clip_events
    }

    /// `γ·P_uniform + (1−γ)·E_{PL(w)}[π̂π̂']`
    pub fn mixture_covariance(&self) -> SymmetricMatrix {
        let g = self.params.gamma;
        if g >= 1.0 {
            return self.uniform.clone();
        }
        self.uniform.combine(g, &pl_covariance(&self.w), 1.0 - g)
    }

    /// With probability `γ` a uniform permutation, otherwise a `PL(w)` sample.
    pub fn draw_action(&self, rng: &mut GameRng) -> CenteredPermutation {
        if rng.random::<f64>() < self.params.gamma {
            let mut order: Vec<usize> = (0..self.params.n).collect();
            order.shuffle(rng);
            center(&Permutation::from_order(&order).expect("shuffled order is a bijection"))
        } else {
            sample_pl(&self.w, rng, self.sampler)
        }
    }

    /// Norm ceiling for the estimate: `‖π̂‖₂ / (γ·n(n+1)/12)`, using that the
    /// mixture covariance dominates `γ·P_uniform` on the complement of `1`.
    pub fn estimate_bound(&self, action: &CenteredPermutation) -> f64 {
        let norm = action.coords().iter().map(|x| x * x).sum::<f64>().sqrt();
        norm / (self.params.gamma * uniform_min_eig(self.params.n))
    }

    /// `s̃ = ℓ·P⁺·π̂`, clipped to [`estimate_bound`](Self::estimate_bound) if
    /// round-off pushes it past that norm.
    pub fn estimate_loss(&mut self, action: &CenteredPermutation, loss: f64) -> Result<Vec<f64>> {
        if action.len() != self.params.n {
            return Err(Error::DimensionMismatch {
                expected: self.params.n,
                got: action.len(),
            });
        }
        if !loss.is_finite() {
            return Err(Error::NonFinite);
        }
        if loss.abs() > 1.0 + LOSS_SLACK {
            return Err(Error::LossOutOfRange(loss));
        }
        if loss == 0.0 {
            return Ok(vec![0.0; self.params.n]);
        }
        let pinv = pseudo_inverse(&self.mixture_covariance(), DEFAULT_RANK_TOL)?;
        let mut est = pinv.mul_vec(action.coords());
        for e in &mut est {
            *e *= loss;
        }
        let bound = self.estimate_bound(action);
        let norm = est.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > bound {
            self.clip_events += 1;
            let scale = bound / norm;
            for e in &mut est {
                *e *= scale;
            }
        }
        Ok(est)
    }

    /// `w ← w + η·s̃`
    pub fn update(&mut self, estimate: &[f64]) -> Result<()> {
        self.w.add_scaled(self.params.eta, estimate)?;
        self.t += 1;
        Ok(())
    }
}

impl Learner for BanditRank {
    fn name(&self) -> &'static str {
        "banditrank"
    }

    fn action_set(&self) -> ActionSet {
        ActionSet::Symmetrized
    }

    fn act(&mut self, rng: &mut GameRng) -> Result<Vec<f64>> {
        let action = self.draw_action(rng);
        let coords = action.coords().to_vec();
        self.pending = Some(action);
        Ok(coords)
    }

    fn observe(&mut self, loss: f64) -> Result<()> {
        let action = self.pending.take().ok_or(Error::NoPendingAction)?;
        let est = self.estimate_loss(&action, loss)?;
        self.update(&est)
    }

    fn clip_events(&self) -> u64 {
        self.clip_events
    }

    fn gamma(&self) -> Option<f64> {
        Some(self.params.gamma)
    }

    fn eta(&self) -> Option<f64> {
        Some(self.params.eta)
    }
}
