//! Per-round regret bookkeeping, trace serialization and log-log slope fits.

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Header of the CSV trace format.
pub const CSV_HEADER: &str = "t,loss,cum_loss,cum_opt,regret";

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub t: usize,
    pub loss: f64,
    pub cum_loss: f64,
    pub cum_opt: f64,
    pub regret: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RegretTrace {
    pub rows: Vec<TraceRow>,
    /// Best static ranking in hindsight as 1-based positions.
    pub comparator: Vec<usize>,
    pub clip_events: u64,
}

impl RegretTrace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn final_regret(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.regret)
    }

    pub fn total_loss(&self) -> f64 {
        self.rows.last().map_or(0.0, |r| r.cum_loss)
    }

    /// Largest deviation of the cumulative columns from running sums of
    /// their increments, and of `regret` from `cum_loss − cum_opt`.
    pub fn consistency_error(&self) -> f64 {
        let mut worst = 0.0f64;
        let mut cum = 0.0;
        for r in &self.rows {
            cum += r.loss;
            worst = worst.max((cum - r.cum_loss).abs());
            worst = worst.max((r.cum_loss - r.cum_opt - r.regret).abs());
        }
        worst
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::WriterBuilder::new().has_headers(true).from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads rows written by [`write_csv`](Self::write_csv); the comparator
    /// and clip counter are not part of the CSV format and come back empty.
    pub fn read_csv<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::Reader::from_reader(input);
        let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
        if header.join(",") != CSV_HEADER {
            return Err(Error::InvalidParameter(format!(
                "unexpected trace header '{}'",
                header.join(",")
            )));
        }
        let rows = r.deserialize().collect::<std::result::Result<Vec<TraceRow>, _>>()?;
        Ok(Self {
            rows,
            ..Self::default()
        })
    }

    pub fn write_json<W: Write>(&self, out: W) -> Result<()> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }

    pub fn read_json<R: Read>(input: R) -> Result<Self> {
        Ok(serde_json::from_reader(input)?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HorizonStats {
    pub horizon: usize,
    pub mean: f64,
    pub std: f64,
    pub samples: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Horizons that entered the fit.
    pub used: Vec<HorizonStats>,
    /// Horizons dropped because their mean regret was not positive.
    pub excluded: Vec<HorizonStats>,
}

pub const MIN_SLOPE_HORIZONS: usize = 3;
pub const MIN_SLOPE_SAMPLES: usize = 10;

pub fn horizon_stats(horizon: usize, regrets: &[f64]) -> HorizonStats {
    let k = regrets.len() as f64;
    let mean = regrets.iter().sum::<f64>() / k;
    let var = if regrets.len() > 1 {
        regrets.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (k - 1.0)
    } else {
        0.0
    };
    HorizonStats {
        horizon,
        mean,
        std: var.sqrt(),
        samples: regrets.len(),
    }
}

/// Least-squares slope of `log(mean regret)` against `log T`.
///
/// `points` pairs each horizon with the final regrets of its replicas.
pub fn regret_slope(points: &[(usize, Vec<f64>)]) -> Result<SlopeFit> {
    if points.len() < MIN_SLOPE_HORIZONS {
        return Err(Error::InsufficientData(format!(
            "need at least {MIN_SLOPE_HORIZONS} horizons, got {}",
            points.len()
        )));
    }
    let mut used = Vec::new();
    let mut excluded = Vec::new();
    for (horizon, regrets) in points {
        if regrets.len() < MIN_SLOPE_SAMPLES {
            return Err(Error::InsufficientData(format!(
                "horizon {horizon} has {} samples, need {MIN_SLOPE_SAMPLES}",
                regrets.len()
            )));
        }
        let stats = horizon_stats(*horizon, regrets);
        if stats.mean > 0.0 && *horizon > 0 {
            used.push(stats);
        } else {
            log::warn!(
                "excluding horizon {horizon} from the slope fit: mean regret {}",
                stats.mean
            );
            excluded.push(stats);
        }
    }
    if used.len() < 2 {
        return Err(Error::InsufficientData(
            "fewer than two horizons with positive mean regret".into(),
        ));
    }
    let xs: Vec<f64> = used.iter().map(|s| (s.horizon as f64).ln()).collect();
    let ys: Vec<f64> = used.iter().map(|s| s.mean.ln()).collect();
    let k = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / k;
    let my = ys.iter().sum::<f64>() / k;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all horizons are equal".into()));
    }
    let slope = sxy / sxx;
    Ok(SlopeFit {
        slope,
        intercept: my - slope * mx,
        used,
        excluded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn synthetic(f: impl Fn(f64) -> f64) -> Vec<(usize, Vec<f64>)> {
        [1000usize, 4000, 16000, 64000]
            .iter()
            .map(|&t| (t, vec![f(t as f64); 10]))
            .collect()
    }

    #[test]
    fn slope_of_synthetic_curves() {
        let fit = regret_slope(&synthetic(f64::sqrt)).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-9);
        let fit = regret_slope(&synthetic(|t| t)).unwrap();
        assert!((fit.slope - 1.0).abs() < 1e-9);
        let fit = regret_slope(&synthetic(|t| 3.0 * t.powf(0.7))).unwrap();
        assert!((fit.slope - 0.7).abs() < 1e-9);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn slope_preconditions() {
        let mut pts = synthetic(f64::sqrt);
        pts.truncate(2);
        assert!(matches!(regret_slope(&pts), Err(Error::InsufficientData(_))));
        let mut pts = synthetic(f64::sqrt);
        pts[0].1.truncate(9);
        assert!(regret_slope(&pts).is_err());
    }

    #[test]
    fn nonpositive_horizons_are_excluded() {
        let mut pts = synthetic(f64::sqrt);
        pts[0].1 = vec![-1.0; 10];
        let fit = regret_slope(&pts).unwrap();
        assert_eq!(fit.excluded.len(), 1);
        assert!((fit.slope - 0.5).abs() < 1e-9);
    }

    fn sample_trace() -> RegretTrace {
        let mut rows = Vec::new();
        let (mut cl, mut co) = (0.0, 0.0);
        for t in 1..=5 {
            let loss = 0.1 * t as f64 - 0.3 + 1.0 / 3.0;
            cl += loss;
            co += -0.25;
            rows.push(TraceRow {
                t,
                loss,
                cum_loss: cl,
                cum_opt: co,
                regret: cl - co,
            });
        }
        RegretTrace {
            rows,
            comparator: vec![2, 1, 3],
            clip_events: 4,
        }
    }

    #[test]
    fn csv_round_trip() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(text.lines().next().unwrap(), CSV_HEADER);
        assert_eq!(text.lines().count(), 6);
        let back = RegretTrace::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.rows, trace.rows);
    }

    #[test]
    fn json_round_trip() {
        let trace = sample_trace();
        let mut buf = Vec::new();
        trace.write_json(&mut buf).unwrap();
        assert_eq!(RegretTrace::read_json(buf.as_slice()).unwrap(), trace);
        assert!(trace.consistency_error() < 1e-12);
    }
}
