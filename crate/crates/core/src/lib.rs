//! Adversarial bandit linear optimization over the permutahedron.
//!
//! A player repeatedly ranks `n` items, i.e. plays a vertex of the
//! (symmetrized) permutahedron, and only observes the scalar loss
//! `π̂ · s_t` of the ranking it played. The crate provides:
//!
//! - [`banditrank`]: Plackett-Luce exponential weights with a uniform
//!   exploration mixture and an exact pseudo-inverse loss estimator, for loss
//!   vectors in the polar of the permutahedron.
//! - [`osmd`]: online stochastic mirror descent with the binary-entropy
//!   regularizer, a Bregman projection onto the rescaled permutahedron and a
//!   vertex decomposition, for `‖s_t‖₁ ≤ 1`.
//! - [`plackett_luce`]: the Plackett-Luce and Bradley-Terry-Luce
//!   distributions with exact pair/triple marginals, the O(n³) covariance and
//!   the 3×3 H-matrix closed forms.
//! - [`oracle`]: brute-force enumeration over all permutations and
//!   tournaments for small `n`, plus the `verify` suite that cross-checks
//!   every closed form against it.
//! - [`game`]: the repeated game, oblivious adversaries, regret traces and
//!   seed sweeps.

pub mod banditrank;
pub mod error;
pub mod game;
pub mod numerics;
pub mod oracle;
pub mod osmd;
pub mod perm;
pub mod plackett_luce;

pub use banditrank::{BanditRank, BanditRankParams};
pub use error::{Error, Result};
pub use game::{
    make_adversary, regret_slope, run_game, Adversary, AdversarySpec, Algorithm, GameConfig,
    Learner, RegretTrace,
};
pub use numerics::SymmetricMatrix;
pub use osmd::{OsmdParams, OsmdRank};
pub use perm::{
    best_static, center, dot, dual_norm, scale_to_q, CenteredPermutation, LossVector,
    Permutation, Regime, ScaledVertex,
};
pub use plackett_luce::{HMatrix, Tournament, WeightVector};

/// Random number generator used by every sampler and game replica.
pub type GameRng = rand_chacha::ChaCha8Rng;

/// Name recorded in run manifests for the generator family above.
pub const RNG_NAME: &str = "rand_chacha::ChaCha8Rng (rand_chacha 0.9)";
