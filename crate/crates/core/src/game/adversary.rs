//! Oblivious loss generators. An adversary sees only the round index and its
//! own random stream, never the learner's actions.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::perm::{LossVector, Regime};
use crate::GameRng;

pub trait Adversary: Send {
    /// Loss vector for round `t` (1-based), normalized into [`Adversary::regime`].
    fn loss(&mut self, t: usize) -> Result<LossVector>;

    fn regime(&self) -> Regime;
}

/// Parsed form of an adversary spec string.
///
/// Accepted forms: `fixed[:v]`, `noisy-fixed[:amplitude]`, `switch[:v]` and
/// `seasonal[:period]`, where `v` is a comma-separated base vector. The
/// default base vector is `e_0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum AdversarySpec {
    /// The same vector every round.
    Fixed { base: Option<Vec<f64>> },
    /// `e_0` plus fresh uniform noise in `[−amplitude, amplitude]ⁿ` each round.
    NoisyFixed { amplitude: f64 },
    /// The base vector for `t ≤ T/2`, its negation afterwards.
    Switch { base: Option<Vec<f64>> },
    /// `e_k` with the favored item `k` advancing every `period` rounds.
    Seasonal { period: usize },
}

impl AdversarySpec {
    pub const DEFAULT_NOISE: f64 = 0.5;
    pub const DEFAULT_PERIOD: usize = 100;
}

fn parse_vector(text: &str) -> Result<Vec<f64>> {
    text.split(',')
        .map(|t| {
            t.trim()
                .parse::<f64>()
                .map_err(|_| Error::UnknownAdversary(format!("bad vector entry '{t}'")))
        })
        .collect()
}

impl FromStr for AdversarySpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let (kind, arg) = match s.split_once(':') {
            Some((k, a)) => (k, Some(a)),
            None => (s, None),
        };
        let bad = || Error::UnknownAdversary(s.to_string());
        match kind {
            "fixed" => Ok(Self::Fixed {
                base: arg.map(parse_vector).transpose()?,
            }),
            "switch" => Ok(Self::Switch {
                base: arg.map(parse_vector).transpose()?,
            }),
            "noisy-fixed" => {
                let amplitude = match arg {
                    Some(a) => a.parse::<f64>().map_err(|_| bad())?,
                    None => Self::DEFAULT_NOISE,
                };
                if !(amplitude >= 0.0 && amplitude.is_finite()) {
                    return Err(bad());
                }
                Ok(Self::NoisyFixed { amplitude })
            }
            "seasonal" => {
                let period = match arg {
                    Some(a) => a.parse::<usize>().map_err(|_| bad())?,
                    None => Self::DEFAULT_PERIOD,
                };
                if period == 0 {
                    return Err(bad());
                }
                Ok(Self::Seasonal { period })
            }
            _ => Err(bad()),
        }
    }
}

impl fmt::Display for AdversarySpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let vector = |v: &Option<Vec<f64>>| {
            v.as_ref().map(|v| {
                let parts: Vec<String> = v.iter().map(|x| x.to_string()).collect();
                format!(":{}", parts.join(","))
            })
        };
        match self {
            Self::Fixed { base } => write!(f, "fixed{}", vector(base).unwrap_or_default()),
            Self::Switch { base } => write!(f, "switch{}", vector(base).unwrap_or_default()),
            Self::NoisyFixed { amplitude } => write!(f, "noisy-fixed:{amplitude}"),
            Self::Seasonal { period } => write!(f, "seasonal:{period}"),
        }
    }
}

fn unit(n: usize, k: usize) -> Vec<f64> {
    let mut v = vec![0.0; n];
    v[k] = 1.0;
    v
}

fn resolve_base(base: &Option<Vec<f64>>, n: usize) -> Result<Vec<f64>> {
    match base {
        Some(v) if v.len() != n => Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        }),
        Some(v) => Ok(v.clone()),
        None => Ok(unit(n, 0)),
    }
}

struct Fixed {
    loss: LossVector,
}

impl Adversary for Fixed {
    fn loss(&mut self, _t: usize) -> Result<LossVector> {
        Ok(self.loss.clone())
    }

    fn regime(&self) -> Regime {
        self.loss.regime()
    }
}

struct NoisyFixed {
    base: Vec<f64>,
    amplitude: f64,
    regime: Regime,
    rng: GameRng,
}

impl Adversary for NoisyFixed {
    fn loss(&mut self, _t: usize) -> Result<LossVector> {
        let raw: Vec<f64> = self
            .base
            .iter()
            .map(|b| b + self.amplitude * (2.0 * self.rng.random::<f64>() - 1.0))
            .collect();
        match LossVector::normalized(&raw, self.regime) {
            Err(Error::DegenerateLoss(_)) => LossVector::normalized(&self.base, self.regime),
            other => other,
        }
    }

    fn regime(&self) -> Regime {
        self.regime
    }
}

struct Switch {
    first: LossVector,
    second: LossVector,
    flip_after: usize,
}

impl Adversary for Switch {
    fn loss(&mut self, t: usize) -> Result<LossVector> {
        Ok(if t > self.flip_after {
            self.second.clone()
        } else {
            self.first.clone()
        })
    }

    fn regime(&self) -> Regime {
        self.first.regime()
    }
}

struct Seasonal {
    n: usize,
    period: usize,
    regime: Regime,
}

impl Adversary for Seasonal {
    fn loss(&mut self, t: usize) -> Result<LossVector> {
        let favored = (t.saturating_sub(1) / self.period) % self.n;
        LossVector::normalized(&unit(self.n, favored), self.regime)
    }

    fn regime(&self) -> Regime {
        self.regime
    }
}

/// Builds the generator for `spec`. `rng` is consumed only by noisy specs.
pub fn make_adversary(
    spec: &AdversarySpec,
    n: usize,
    horizon: usize,
    regime: Regime,
    rng: GameRng,
) -> Result<Box<dyn Adversary>> {
    if n < 2 {
        return Err(Error::TooFewItems(n));
    }
    Ok(match spec {
        AdversarySpec::Fixed { base } => Box::new(Fixed {
            loss: LossVector::normalized(&resolve_base(base, n)?, regime)?,
        }),
        AdversarySpec::NoisyFixed { amplitude } => {
            let base = unit(n, 0);
            // fail early if even the noiseless vector is degenerate
            LossVector::normalized(&base, regime)?;
            Box::new(NoisyFixed {
                base,
                amplitude: *amplitude,
                regime,
                rng,
            })
        }
        AdversarySpec::Switch { base } => {
            let base = resolve_base(base, n)?;
            let negated: Vec<f64> = base.iter().map(|x| -x).collect();
            Box::new(Switch {
                first: LossVector::normalized(&base, regime)?,
                second: LossVector::normalized(&negated, regime)?,
                flip_after: horizon / 2,
            })
        }
        AdversarySpec::Seasonal { period } => Box::new(Seasonal {
            n,
            period: *period,
            regime,
        }),
    })
}
