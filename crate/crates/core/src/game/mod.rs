//! The repeated bandit game: an oblivious adversary fixes a loss vector, the
//! learner plays a ranking and sees only the scalar loss of that ranking.
//!
//! Bandit feedback is enforced by the [`Learner`] trait itself: the only
//! channel from the game to the learner is [`Learner::observe`], which takes
//! a single `f64`.

pub mod adversary;
pub mod sweep;
pub mod trace;

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

pub use adversary::{make_adversary, Adversary, AdversarySpec};
pub use sweep::{child_seed, sweep, SweepPoint, SweepResult};
pub use trace::{horizon_stats, regret_slope, HorizonStats, RegretTrace, SlopeFit, TraceRow, CSV_HEADER};

use crate::banditrank::{BanditRank, BanditRankParams};
use crate::error::{Error, Result};
use crate::osmd::{OsmdParams, OsmdRank};
use crate::perm::{best_static, center, dot, scale_to_q, Permutation, Regime};
use crate::GameRng;

/// RNG stream used by the learner; the adversary draws from [`ADVERSARY_STREAM`].
pub const LEARNER_STREAM: u64 = 0;
pub const ADVERSARY_STREAM: u64 = 1;

/// Which polytope a learner's actions are vertices of.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionSet {
    /// `P̂_n`: centered permutations.
    Symmetrized,
    /// `Q̂_n = (2/(n−1))·P̂_n`.
    Rescaled,
}

impl ActionSet {
    pub fn vertex(self, p: &Permutation) -> Vec<f64> {
        let c = center(p);
        match self {
            Self::Symmetrized => c.coords().to_vec(),
            Self::Rescaled => scale_to_q(&c).expect("n >= 2").coords().to_vec(),
        }
    }

    /// The action set matched to a loss regime: losses stay in `[−1, 1]`.
    pub fn for_regime(regime: Regime) -> Self {
        match regime {
            Regime::Dual => Self::Symmetrized,
            Regime::L1 => Self::Rescaled,
        }
    }
}

/// A player in the bandit game.
pub trait Learner: Send {
    fn name(&self) -> &'static str;

    fn action_set(&self) -> ActionSet;

    /// Commits to an action and returns its coordinates in [`Learner::action_set`].
    fn act(&mut self, rng: &mut GameRng) -> Result<Vec<f64>>;

    /// Receives the loss of the action returned by the last [`Learner::act`].
    fn observe(&mut self, loss: f64) -> Result<()>;

    fn clip_events(&self) -> u64 {
        0
    }

    fn gamma(&self) -> Option<f64> {
        None
    }

    fn eta(&self) -> Option<f64> {
        None
    }
}

/// Plays a uniformly random vertex every round.
#[derive(Clone, Debug)]
pub struct UniformPlayer {
    n: usize,
    set: ActionSet,
}

impl UniformPlayer {
    pub fn new(n: usize, set: ActionSet) -> Result<Self> {
        if n < 2 {
            return Err(Error::TooFewItems(n));
        }
        Ok(Self { n, set })
    }
}

impl Learner for UniformPlayer {
    fn name(&self) -> &'static str {
        "uniform"
    }

    fn action_set(&self) -> ActionSet {
        self.set
    }

    fn act(&mut self, rng: &mut GameRng) -> Result<Vec<f64>> {
        let mut order: Vec<usize> = (0..self.n).collect();
        order.shuffle(rng);
        Ok(self.set.vertex(&Permutation::from_order(&order)?))
    }

    fn observe(&mut self, _loss: f64) -> Result<()> {
        Ok(())
    }

    fn gamma(&self) -> Option<f64> {
        Some(1.0)
    }
}

/// Plays the same ranking every round.
#[derive(Clone, Debug)]
pub struct StaticPlayer {
    coords: Vec<f64>,
    set: ActionSet,
}

impl StaticPlayer {
    pub fn new(p: &Permutation, set: ActionSet) -> Self {
        Self {
            coords: set.vertex(p),
            set,
        }
    }
}

impl Learner for StaticPlayer {
    fn name(&self) -> &'static str {
        "static"
    }

    fn action_set(&self) -> ActionSet {
        self.set
    }

    fn act(&mut self, _rng: &mut GameRng) -> Result<Vec<f64>> {
        Ok(self.coords.clone())
    }

    fn observe(&mut self, _loss: f64) -> Result<()> {
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    BanditRank,
    OsmdRank,
    /// Uniformly random rankings; a reference point for regret comparisons.
    Uniform,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Self::BanditRank => "banditrank",
            Self::OsmdRank => "osmdrank",
            Self::Uniform => "uniform",
        }
    }

    pub fn default_regime(self) -> Regime {
        match self {
            Self::BanditRank | Self::Uniform => Regime::Dual,
            Self::OsmdRank => Regime::L1,
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "banditrank" => Ok(Self::BanditRank),
            "osmdrank" => Ok(Self::OsmdRank),
            "uniform" => Ok(Self::Uniform),
            other => Err(Error::InvalidParameter(format!("unknown algorithm '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GameConfig {
    pub n: usize,
    pub horizon: usize,
    pub algorithm: Algorithm,
    pub adversary: AdversarySpec,
    pub seed: u64,
    /// Loss regime; defaults to the algorithm's natural regime.
    pub regime: Option<Regime>,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub c_gamma: Option<f64>,
    pub c_eta: Option<f64>,
}

/// Every tunable of a game with defaults filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedParams {
    pub regime: Regime,
    pub action_set: ActionSet,
    pub gamma: Option<f64>,
    pub eta: Option<f64>,
    pub c_gamma: Option<f64>,
    pub c_eta: Option<f64>,
}

impl GameConfig {
    pub fn new(n: usize, horizon: usize, algorithm: Algorithm, adversary: AdversarySpec, seed: u64) -> Self {
        Self {
            n,
            horizon,
            algorithm,
            adversary,
            seed,
            regime: None,
            gamma: None,
            eta: None,
            c_gamma: None,
            c_eta: None,
        }
    }

    pub fn regime(&self) -> Regime {
        self.regime.unwrap_or_else(|| self.algorithm.default_regime())
    }

    fn check_overrides(&self) -> Result<()> {
        if let Some(g) = self.gamma {
            if !(g > 0.0 && g <= 1.0) {
                return Err(Error::InvalidParameter(format!("gamma must lie in (0, 1], got {g}")));
            }
        }
        for (name, v) in [("eta", self.eta), ("c-gamma", self.c_gamma), ("c-eta", self.c_eta)] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
                }
            }
        }
        if self.n < 2 {
            return Err(Error::TooFewItems(self.n));
        }
        if self.horizon == 0 {
            return Err(Error::InvalidParameter("horizon must be at least 1".into()));
        }
        if self.algorithm == Algorithm::Uniform
            && (self.gamma.is_some() || self.eta.is_some() || self.c_gamma.is_some() || self.c_eta.is_some())
        {
            return Err(Error::InvalidParameter("the uniform player takes no step parameters".into()));
        }
        Ok(())
    }

    pub fn banditrank_params(&self) -> BanditRankParams {
        let c_gamma = self.c_gamma.unwrap_or(BanditRankParams::DEFAULT_C_GAMMA);
        let c_eta = self.c_eta.unwrap_or(BanditRankParams::DEFAULT_C_ETA);
        let mut p = BanditRankParams::default_params(self.n, self.horizon, c_gamma, c_eta);
        if let Some(g) = self.gamma {
            p.gamma = g;
            p.eta = g / (c_eta * self.n as f64);
        }
        if let Some(e) = self.eta {
            p.eta = e;
        }
        p
    }

    pub fn osmd_params(&self) -> OsmdParams {
        let c_eta = self.c_eta.unwrap_or(OsmdParams::DEFAULT_C_ETA);
        let c_gamma = self.c_gamma.unwrap_or(OsmdParams::DEFAULT_C_GAMMA);
        let mut p = OsmdParams::default_params(self.n, self.horizon, c_eta, c_gamma);
        if let Some(g) = self.gamma {
            p.gamma = g;
        }
        if let Some(e) = self.eta {
            p.eta = e;
        }
        p
    }

    pub fn resolve(&self) -> Result<ResolvedParams> {
        self.check_overrides()?;
        // rejects adversaries that cannot be normalized into the regime
        self.build_adversary()?;
        let regime = self.regime();
        Ok(match self.algorithm {
            Algorithm::BanditRank => {
                let p = self.banditrank_params();
                p.validate()?;
                ResolvedParams {
                    regime,
                    action_set: ActionSet::Symmetrized,
                    gamma: Some(p.gamma),
                    eta: Some(p.eta),
                    c_gamma: Some(self.c_gamma.unwrap_or(BanditRankParams::DEFAULT_C_GAMMA)),
                    c_eta: Some(p.c_eta),
                }
            }
            Algorithm::OsmdRank => {
                let p = self.osmd_params();
                p.validate()?;
                ResolvedParams {
                    regime,
                    action_set: ActionSet::Rescaled,
                    gamma: Some(p.gamma),
                    eta: Some(p.eta),
                    c_gamma: Some(self.c_gamma.unwrap_or(OsmdParams::DEFAULT_C_GAMMA)),
                    c_eta: Some(self.c_eta.unwrap_or(OsmdParams::DEFAULT_C_ETA)),
                }
            }
            Algorithm::Uniform => ResolvedParams {
                regime,
                action_set: ActionSet::for_regime(regime),
                gamma: Some(1.0),
                eta: None,
                c_gamma: None,
                c_eta: None,
            },
        })
    }

    pub fn build_learner(&self) -> Result<Box<dyn Learner>> {
        let resolved = self.resolve()?;
        Ok(match self.algorithm {
            Algorithm::BanditRank => Box::new(BanditRank::new(self.banditrank_params())?),
            Algorithm::OsmdRank => Box::new(OsmdRank::new(self.osmd_params())?),
            Algorithm::Uniform => Box::new(UniformPlayer::new(self.n, resolved.action_set)?),
        })
    }

    pub fn build_adversary(&self) -> Result<Box<dyn Adversary>> {
        make_adversary(&self.adversary, self.n, self.horizon, self.regime(), stream_rng(self.seed, ADVERSARY_STREAM))
    }
}

pub fn stream_rng(seed: u64, stream: u64) -> GameRng {
    let mut rng = GameRng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// A game that stopped early: the rounds played so far and the cause.
#[derive(Debug, thiserror::Error)]
#[error("game aborted after {} rounds", partial.len())]
pub struct GameFailure {
    pub partial: Box<RegretTrace>,
    #[source]
    pub source: Error,
}

impl From<Error> for GameFailure {
    fn from(source: Error) -> Self {
        Self {
            partial: Box::default(),
            source,
        }
    }
}

/// Plays `learner` against `adversary` for `horizon` rounds.
///
/// `latencies`, when given, receives the wall time in seconds of each
/// learner round (act plus observe).
pub fn play(
    learner: &mut dyn Learner,
    adversary: &mut dyn Adversary,
    horizon: usize,
    rng: &mut GameRng,
    mut latencies: Option<&mut Vec<f64>>,
) -> std::result::Result<RegretTrace, GameFailure> {
    let set = learner.action_set();
    let mut losses: Vec<f64> = Vec::with_capacity(horizon);
    let mut history: Vec<Vec<f64>> = Vec::with_capacity(horizon);
    let mut failure = None;
    for t in 1..=horizon {
        let s = match adversary.loss(t) {
            Ok(s) => s,
            Err(e) => {
                failure = Some(e.at_step(t));
                break;
            }
        };
        let start = Instant::now();
        let played = learner.act(rng).and_then(|a| {
            let loss = dot(&a, s.values())?;
            learner.observe(loss)?;
            Ok(loss)
        });
        if let Some(l) = latencies.as_deref_mut() {
            l.push(start.elapsed().as_secs_f64());
        }
        match played {
            Ok(loss) => {
                losses.push(loss);
                history.push(s.values().to_vec());
            }
            Err(e) => {
                failure = Some(match e {
                    Error::AtStep { .. } => e,
                    other => other.at_step(t),
                });
                break;
            }
        }
    }

    let trace = backfill(&losses, &history, set, learner.clip_events());
    match failure {
        None => Ok(trace),
        Some(source) => Err(GameFailure {
            partial: Box::new(trace),
            source,
        }),
    }
}

/// Builds the trace once the comparator is known: the best static ranking
/// for the summed losses, evaluated round by round.
fn backfill(losses: &[f64], history: &[Vec<f64>], set: ActionSet, clip_events: u64) -> RegretTrace {
    let Some(first) = history.first() else {
        return RegretTrace {
            clip_events,
            ..RegretTrace::default()
        };
    };
    let n = first.len();
    let mut total = vec![0.0; n];
    for s in history {
        for (a, b) in total.iter_mut().zip(s) {
            *a += b;
        }
    }
    let best = best_static(&total);
    let v = set.vertex(&best);
    let mut rows = Vec::with_capacity(losses.len());
    let (mut cum_loss, mut cum_opt) = (0.0, 0.0);
    for (k, (loss, s)) in losses.iter().zip(history).enumerate() {
        cum_loss += loss;
        cum_opt += v.iter().zip(s).map(|(a, b)| a * b).sum::<f64>();
        rows.push(TraceRow {
            t: k + 1,
            loss: *loss,
            cum_loss,
            cum_opt,
            regret: cum_loss - cum_opt,
        });
    }
    RegretTrace {
        rows,
        comparator: best.positions().to_vec(),
        clip_events,
    }
}

/// Runs the game described by `cfg`. Identical configurations give
/// bit-identical traces.
pub fn run_game(cfg: &GameConfig) -> std::result::Result<RegretTrace, GameFailure> {
    run_game_timed(cfg, None)
}

pub fn run_game_timed(
    cfg: &GameConfig,
    latencies: Option<&mut Vec<f64>>,
) -> std::result::Result<RegretTrace, GameFailure> {
    let mut learner = cfg.build_learner()?;
    let mut adversary = cfg.build_adversary()?;
    let mut rng = stream_rng(cfg.seed, LEARNER_STREAM);
    play(learner.as_mut(), adversary.as_mut(), cfg.horizon, &mut rng, latencies)
}
