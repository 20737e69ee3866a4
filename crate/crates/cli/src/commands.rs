//! Subcommand implementations. Every file is written inside the `--out`
//! directory.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use permrank::game::sweep::{SweepPoint, SweepResult};
use permrank::game::{child_seed, horizon_stats, run_game_timed, sweep as run_sweep, ResolvedParams};
use permrank::oracle::{run_verify, VerifyOptions};
use permrank::{AdversarySpec, Algorithm, GameConfig, Regime, RNG_NAME};
use serde::Serialize;
use serde_json::json;

use crate::{GameArgs, RunArgs, Synthetic, SweepArgs, TraceFormat, VerifyArgs};

/// A failed command and the exit code it maps to.
pub enum Failure {
    /// Bad flags or an invalid configuration (exit code 2).
    Usage(anyhow::Error),
    /// The run or verification itself failed (exit code 1).
    Run(anyhow::Error),
}

impl Failure {
    pub fn code(&self) -> u8 {
        match self {
            Self::Usage(_) => 2,
            Self::Run(_) => 1,
        }
    }

    /// The error chain on one line.
    pub fn message(&self) -> String {
        let (Self::Usage(e) | Self::Run(e)) = self;
        format!("{e:#}").replace('\n', " ")
    }
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

fn failed(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Run(e.into())
}

fn game_config(args: &GameArgs, horizon: usize) -> Result<GameConfig, Failure> {
    let algorithm: Algorithm = args.algo.parse().map_err(usage)?;
    let adversary: AdversarySpec = args.adversary.parse().map_err(usage)?;
    let regime = args
        .regime
        .as_deref()
        .map(str::parse::<Regime>)
        .transpose()
        .map_err(usage)?;
    let cfg = GameConfig {
        regime,
        gamma: args.gamma,
        eta: args.eta,
        c_gamma: args.c_gamma,
        c_eta: args.c_eta,
        ..GameConfig::new(args.n, horizon, algorithm, adversary, args.seed)
    };
    Ok(cfg)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::write_all(&mut w, b"\n")?;
    Ok(())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

#[derive(Serialize)]
struct Summary<'a> {
    n: usize,
    t_horizon: usize,
    algo: &'a str,
    adversary: String,
    seed: u64,
    gamma: Option<f64>,
    eta: Option<f64>,
    final_regret: f64,
    steps_per_second: f64,
    clip_events: u64,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'static str,
    code_version: &'static str,
    rng: &'static str,
    seed: u64,
    config: &'a GameConfig,
    resolved: &'a ResolvedParams,
    trace_file: &'a str,
    timing: Timing,
}

#[derive(Serialize)]
struct Timing {
    median_step_seconds: f64,
    p95_step_seconds: f64,
    steps_per_second: f64,
}

pub fn run(args: &RunArgs) -> Result<(), Failure> {
    let cfg = game_config(&args.game, args.horizon)?;
    let resolved = cfg.resolve().map_err(usage)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(failed)?;

    let mut latencies = Vec::with_capacity(args.horizon);
    let start = Instant::now();
    let trace = run_game_timed(&cfg, Some(&mut latencies)).map_err(failed)?;
    let elapsed = start.elapsed().as_secs_f64();
    let steps_per_second = if elapsed > 0.0 { args.horizon as f64 / elapsed } else { f64::INFINITY };

    let trace_file = match args.format {
        TraceFormat::Csv => "trace.csv",
        TraceFormat::Json => "trace.json",
    };
    let trace_path = args.out.join(trace_file);
    let file = File::create(&trace_path)
        .with_context(|| format!("creating {}", trace_path.display()))
        .map_err(failed)?;
    match args.format {
        TraceFormat::Csv => trace.write_csv(BufWriter::new(file)),
        TraceFormat::Json => trace.write_json(BufWriter::new(file)),
    }
    .map_err(failed)?;

    let summary = Summary {
        n: cfg.n,
        t_horizon: cfg.horizon,
        algo: cfg.algorithm.name(),
        adversary: cfg.adversary.to_string(),
        seed: cfg.seed,
        gamma: resolved.gamma,
        eta: resolved.eta,
        final_regret: trace.final_regret(),
        steps_per_second,
        clip_events: trace.clip_events,
    };
    write_json(&args.out.join("summary.json"), &summary).map_err(failed)?;

    latencies.sort_by(f64::total_cmp);
    let manifest = RunManifest {
        command: "run",
        code_version: env!("CARGO_PKG_VERSION"),
        rng: RNG_NAME,
        seed: cfg.seed,
        config: &cfg,
        resolved: &resolved,
        trace_file,
        timing: Timing {
            median_step_seconds: quantile(&latencies, 0.5),
            p95_step_seconds: quantile(&latencies, 0.95),
            steps_per_second,
        },
    };
    write_json(&args.out.join("manifest.json"), &manifest).map_err(failed)?;
    println!(
        "{} n={} T={} final_regret={:.6} ({:.0} steps/s)",
        cfg.algorithm,
        cfg.n,
        cfg.horizon,
        trace.final_regret(),
        steps_per_second
    );
    Ok(())
}

fn synthetic_result(curve: Synthetic, horizons: &[usize], base_seed: u64, replicas: usize) -> SweepResult {
    let points = horizons
        .iter()
        .map(|&horizon| {
            let t = horizon as f64;
            let value = match curve {
                Synthetic::Sqrt => t.sqrt(),
                Synthetic::Linear => t,
            };
            let final_regrets = vec![value; replicas];
            let stats = horizon_stats(horizon, &final_regrets);
            SweepPoint {
                horizon,
                seeds: (0..replicas).map(|k| child_seed(base_seed, k)).collect(),
                final_regrets,
                mean: stats.mean,
                std: stats.std,
            }
        })
        .collect();
    SweepResult::from_points(points)
}

pub fn sweep(args: &SweepArgs) -> Result<(), Failure> {
    if args.t_grid.is_empty() || args.seeds == 0 {
        return Err(usage(anyhow::anyhow!("sweep needs a nonempty --t-grid and --seeds >= 1")));
    }
    let base = game_config(&args.game, args.t_grid[0])?;
    let resolved = base.resolve().map_err(usage)?;
    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))
        .map_err(failed)?;

    let result = match args.synthetic {
        Some(curve) => synthetic_result(curve, &args.t_grid, base.seed, args.seeds),
        None => run_sweep(&base, &args.t_grid, args.seeds, args.jobs).map_err(failed)?,
    };

    let aggregate = json!({
        "algo": base.algorithm.name(),
        "n": base.n,
        "adversary": base.adversary.to_string(),
        "synthetic": args.synthetic.map(|s| format!("{s:?}").to_lowercase()),
        "horizons": result.points.iter().map(|p| json!({
            "t": p.horizon,
            "mean_regret": p.mean,
            "std_regret": p.std,
            "replicas": p.final_regrets.len(),
        })).collect::<Vec<_>>(),
        "slope": result.fit.as_ref().map(|f| f.slope),
        "fit": result.fit,
    });
    write_json(&args.out.join("sweep.json"), &aggregate).map_err(failed)?;

    let children: Vec<_> = result
        .points
        .iter()
        .flat_map(|p| {
            p.seeds
                .iter()
                .zip(&p.final_regrets)
                .map(move |(seed, regret)| json!({"t": p.horizon, "seed": seed, "final_regret": regret}))
        })
        .collect();
    let manifest = json!({
        "command": "sweep",
        "code_version": env!("CARGO_PKG_VERSION"),
        "rng": RNG_NAME,
        "base_seed": base.seed,
        "seed_rule": "child seed = base seed XOR replica index",
        "config": base,
        "resolved_at_first_horizon": resolved,
        "t_grid": args.t_grid,
        "replicas": args.seeds,
        "jobs": args.jobs,
        "children": children,
    });
    write_json(&args.out.join("manifest.json"), &manifest).map_err(failed)?;

    for p in &result.points {
        println!("T={:<8} mean_regret={:<14.6} std={:.6}", p.horizon, p.mean, p.std);
    }
    match &result.fit {
        Some(fit) => println!("slope={:.6}", fit.slope),
        None => println!("slope=n/a"),
    }
    Ok(())
}

pub fn verify(args: &VerifyArgs) -> Result<(), Failure> {
    if args.max_n < 2 {
        return Err(usage(anyhow::anyhow!("--max-n must be at least 2")));
    }
    if args.cases == 0 {
        return Err(usage(anyhow::anyhow!("--cases must be at least 1")));
    }
    let opts = VerifyOptions {
        max_n: args.max_n,
        seed: args.seed,
        cases: args.cases,
        perturb: None,
    };
    let report = run_verify(&opts).map_err(failed)?;
    print!("{report}");
    if report.all_passed() {
        Ok(())
    } else {
        let failed_rows: Vec<&str> = report.rows.iter().filter(|r| !r.passed).map(|r| r.check.id()).collect();
        Err(failed(anyhow::anyhow!("verification failed: {}", failed_rows.join(", "))))
    }
}
