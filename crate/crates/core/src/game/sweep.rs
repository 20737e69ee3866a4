//! Replicated games over a grid of horizons, run in parallel.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::trace::{horizon_stats, regret_slope, SlopeFit};
use crate::game::{run_game, GameConfig};

/// Seed of replica `index`: `base ⊕ index`.
pub fn child_seed(base: u64, index: usize) -> u64 {
    base ^ index as u64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub horizon: usize,
    pub seeds: Vec<u64>,
    pub final_regrets: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub points: Vec<SweepPoint>,
    /// `None` when the grid is too small for a fit.
    pub fit: Option<SlopeFit>,
}

impl SweepResult {
    pub fn from_points(points: Vec<SweepPoint>) -> Self {
        let data: Vec<(usize, Vec<f64>)> = points
            .iter()
            .map(|p| (p.horizon, p.final_regrets.clone()))
            .collect();
        let fit = match regret_slope(&data) {
            Ok(fit) => Some(fit),
            Err(e) => {
                log::info!("no slope fit: {e}");
                None
            }
        };
        Self { points, fit }
    }
}

/// Runs `replicas` copies of `base` at every horizon, `jobs` at a time.
///
/// Replica `k` uses seed [`child_seed`]`(base.seed, k)` at every horizon.
/// Results do not depend on `jobs` or on scheduling order.
pub fn sweep(base: &GameConfig, horizons: &[usize], replicas: usize, jobs: usize) -> Result<SweepResult> {
    if replicas == 0 || horizons.is_empty() {
        return Err(Error::InvalidParameter("sweep needs at least one horizon and one replica".into()));
    }
    GameConfig {
        horizon: horizons[0],
        ..base.clone()
    }
    .resolve()?;
    let tasks: Vec<(usize, usize)> = horizons
        .iter()
        .flat_map(|&h| (0..replicas).map(move |k| (h, k)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidParameter(format!("thread pool: {e}")))?;
    let regrets: Vec<Result<f64>> = pool.install(|| {
        tasks
            .par_iter()
            .map(|&(horizon, k)| {
                let cfg = GameConfig {
                    horizon,
                    seed: child_seed(base.seed, k),
                    ..base.clone()
                };
                run_game(&cfg).map(|t| t.final_regret()).map_err(|f| f.source)
            })
            .collect()
    });
    let regrets = regrets.into_iter().collect::<Result<Vec<f64>>>()?;

    let points = horizons
        .iter()
        .enumerate()
        .map(|(i, &horizon)| {
            let final_regrets = regrets[i * replicas..(i + 1) * replicas].to_vec();
            let stats = horizon_stats(horizon, &final_regrets);
            SweepPoint {
                horizon,
                seeds: (0..replicas).map(|k| child_seed(base.seed, k)).collect(),
                final_regrets,
                mean: stats.mean,
                std: stats.std,
            }
        })
        .collect();
    Ok(SweepResult::from_points(points))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::Algorithm;

    #[test]
    fn results_do_not_depend_on_jobs() {
        let base = GameConfig::new(3, 0, Algorithm::BanditRank, "noisy-fixed".parse().unwrap(), 12);
        let a = sweep(&base, &[50, 100, 200], 10, 1).unwrap();
        let b = sweep(&base, &[50, 100, 200], 10, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.points.len(), 3);
        assert_eq!(a.points[0].seeds, (0..10).map(|k| 12 ^ k).collect::<Vec<u64>>());
    }
}
