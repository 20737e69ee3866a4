//! The verification suite: every closed form checked against enumeration,
//! one report row per formula.

use std::fmt;

use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::banditrank::{BanditRank, BanditRankParams};
use crate::error::Result;
use crate::numerics::{min_eig_on_range, uniform_covariance, uniform_min_eig, SymmetricMatrix};
use crate::oracle::{
    banditrank_estimator_mean, centered_target, convex::reference_projection, enumerate_pl, enumerate_tournaments,
    estimator_mean_enumerated, exact_covariance, hypercube_second_moment, lemma1_moments, pl_prob_direct,
    quadratic_form_coeffs, tournament_moments_factorized, ExactDistribution,
};
use crate::osmd::{decompose, estimator_covariance, project};
use crate::plackett_luce::{
    h_matrix, pair_prob, pl_covariance, pl_prob, top_among_three, top_pair_prob, triple_order_prob, WeightVector,
};
use crate::GameRng;

/// One verified formula.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifyCheck {
    PairProb,
    TripleOrderProb,
    TopAmongThree,
    TopPairProb,
    PlProb,
    MixturePairMarginal,
    TournamentDistribution,
    TournamentMoments,
    HMatrix,
    Lemma1KnownCase,
    Lemma1Means,
    Lemma1Inequality,
    UniformCovariance,
    UniformMinEig,
    PlCovariance,
    MixtureCovariance,
    EstimatorMean,
    EstimatorCovariance,
    Projection,
    Decomposition,
}

impl VerifyCheck {
    pub const ALL: [VerifyCheck; 20] = [
        Self::PairProb,
        Self::TripleOrderProb,
        Self::TopAmongThree,
        Self::TopPairProb,
        Self::PlProb,
        Self::MixturePairMarginal,
        Self::TournamentDistribution,
        Self::TournamentMoments,
        Self::HMatrix,
        Self::Lemma1KnownCase,
        Self::Lemma1Means,
        Self::Lemma1Inequality,
        Self::UniformCovariance,
        Self::UniformMinEig,
        Self::PlCovariance,
        Self::MixtureCovariance,
        Self::EstimatorMean,
        Self::EstimatorCovariance,
        Self::Projection,
        Self::Decomposition,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Self::PairProb => "pair_prob",
            Self::TripleOrderProb => "triple_order_prob",
            Self::TopAmongThree => "top_among_three",
            Self::TopPairProb => "top_pair_prob",
            Self::PlProb => "pl_prob",
            Self::MixturePairMarginal => "mixture_pair_marginal",
            Self::TournamentDistribution => "tournament_distribution",
            Self::TournamentMoments => "tournament_moments",
            Self::HMatrix => "h_matrix",
            Self::Lemma1KnownCase => "lemma1_known_case",
            Self::Lemma1Means => "lemma1_means",
            Self::Lemma1Inequality => "lemma1_inequality",
            Self::UniformCovariance => "uniform_covariance",
            Self::UniformMinEig => "uniform_min_eig",
            Self::PlCovariance => "pl_covariance",
            Self::MixtureCovariance => "mixture_covariance",
            Self::EstimatorMean => "estimator_mean",
            Self::EstimatorCovariance => "estimator_covariance",
            Self::Projection => "projection",
            Self::Decomposition => "decomposition",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Self::PairProb => "p(u<v|w) vs ranking table",
            Self::TripleOrderProb => "p(a<b<c|w) vs ranking table",
            Self::TopAmongThree => "p(u<{v,z}|w) vs ranking table",
            Self::TopPairProb => "p({u,v}<z|w) vs ranking table",
            Self::PlProb => "chain-rule probability, two code paths",
            Self::MixturePairMarginal => "(1-g)p(u<v|w) + g/2 vs mixed table",
            Self::TournamentDistribution => "tournament table total and pair marginals",
            Self::TournamentMoments => "tournament moments, factorized vs enumerated",
            Self::HMatrix => "closed-form H vs F1 - F2 coefficients",
            Self::Lemma1KnownCase => "n=3, w=0, s=e_0 gives (8/3, 2)",
            Self::Lemma1Means => "E[X1] = E[X2]",
            Self::Lemma1Inequality => "E[X2^2] <= E[X1^2] (excess)",
            Self::UniformCovariance => "uniform second moment closed form",
            Self::UniformMinEig => "smallest nonzero eigenvalue n(n+1)/12",
            Self::PlCovariance => "O(n^3) PL second moment vs table",
            Self::MixtureCovariance => "learner mixture covariance vs table",
            Self::EstimatorMean => "E[estimate] = (I - 11'/n)s",
            Self::EstimatorCovariance => "hypercube mixture second moment",
            Self::Projection => "block projection vs generic convex solver",
            Self::Decomposition => "convex decomposition mean",
        }
    }

    pub fn tolerance(self) -> f64 {
        match self {
            Self::PairProb
            | Self::TripleOrderProb
            | Self::TopAmongThree
            | Self::TopPairProb
            | Self::PlProb
            | Self::MixturePairMarginal
            | Self::TournamentDistribution
            | Self::TournamentMoments
            | Self::HMatrix
            | Self::Lemma1KnownCase
            | Self::Lemma1Means
            | Self::UniformCovariance
            | Self::EstimatorCovariance => 1e-12,
            Self::Lemma1Inequality | Self::EstimatorMean | Self::Decomposition => 1e-9,
            Self::UniformMinEig | Self::PlCovariance | Self::MixtureCovariance => 1e-10,
            Self::Projection => 1e-6,
        }
    }
}

impl fmt::Display for VerifyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.id())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyOptions {
    pub max_n: usize,
    pub seed: u64,
    /// Random instances per `n` for the randomized checks.
    pub cases: usize,
    /// Test hook: offsets the closed form of one check by `1e−6`.
    pub perturb: Option<VerifyCheck>,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            max_n: 5,
            seed: 0,
            cases: 6,
            perturb: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyRow {
    pub check: VerifyCheck,
    pub max_residual: f64,
    pub tolerance: f64,
    pub passed: bool,
    /// Number of individual comparisons folded into the row.
    pub comparisons: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn all_passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, check: VerifyCheck) -> Option<&VerifyRow> {
        self.rows.iter().find(|r| r.check == check)
    }
}

impl fmt::Display for VerifyReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<24} {:>12} {:>10}  {:<6} description", "formula", "max_residual", "tolerance", "status")?;
        for r in &self.rows {
            writeln!(
                f,
                "{:<24} {:>12.3e} {:>10.0e}  {:<6} {}",
                r.check.id(),
                r.max_residual,
                r.tolerance,
                if r.passed { "PASS" } else { "FAIL" },
                r.check.description()
            )?;
        }
        Ok(())
    }
}

/// Running maximum of residuals for one check.
struct Acc {
    check: VerifyCheck,
    worst: f64,
    count: usize,
    bump: f64,
}

impl Acc {
    fn new(check: VerifyCheck, opts: &VerifyOptions) -> Self {
        Self {
            check,
            worst: 0.0,
            count: 0,
            bump: if opts.perturb == Some(check) { 1e-6 } else { 0.0 },
        }
    }

    /// Records `|closed + bump − reference|`.
    fn compare(&mut self, closed: f64, reference: f64) {
        self.record((closed + self.bump - reference).abs());
    }

    fn compare_matrix(&mut self, closed: &SymmetricMatrix, reference: &SymmetricMatrix) {
        let n = closed.order();
        for i in 0..n {
            for j in 0..n {
                self.compare(closed.get(i, j), reference.get(i, j));
            }
        }
    }

    fn record(&mut self, residual: f64) {
        // NaN must fail the row, so it is recorded as infinite
        let r = if residual.is_nan() { f64::INFINITY } else { residual };
        self.worst = self.worst.max(r);
        self.count += 1;
    }

    fn finish(self) -> VerifyRow {
        let tolerance = self.check.tolerance();
        VerifyRow {
            check: self.check,
            max_residual: self.worst,
            tolerance,
            passed: self.count > 0 && self.worst <= tolerance,
            comparisons: self.count,
        }
    }
}

fn random_weights(n: usize, rng: &mut GameRng) -> WeightVector {
    WeightVector::new((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).expect("finite")
}

fn triple_table(d: &ExactDistribution, a: usize, b: usize, c: usize) -> f64 {
    d.expectation(|x| {
        let p = x.permutation();
        f64::from(u8::from(p.beats(a, b) && p.beats(b, c)))
    })
}

/// Runs every check for `n` up to `opts.max_n` (at least 3).
pub fn run_verify(opts: &VerifyOptions) -> Result<VerifyReport> {
    let max_n = opts.max_n.max(3);
    let mut rng = GameRng::seed_from_u64(opts.seed);
    let mut acc: Vec<Acc> = VerifyCheck::ALL.iter().map(|&c| Acc::new(c, opts)).collect();
    let idx = |c: VerifyCheck| VerifyCheck::ALL.iter().position(|&x| x == c).unwrap();
    macro_rules! row {
        ($c:ident) => {
            acc[idx(VerifyCheck::$c)]
        };
    }

    for n in 2..=max_n {
        for case in 0..opts.cases {
            let w = if case == 0 { WeightVector::zeros(n) } else { random_weights(n, &mut rng) };
            let table = enumerate_pl(&w)?;
            row!(PlProb).compare(table.total(), 1.0);
            for (c, p) in &table.entries {
                row!(PlProb).compare(pl_prob(c, &w)?, pl_prob_direct(&c.permutation().order(), w.as_slice()));
                let _ = p;
            }
            let gamma: f64 = rng.random_range(0.05..0.95);
            let mixed = table.mix_uniform(gamma);
            for u in 0..n {
                for v in 0..n {
                    if u == v {
                        continue;
                    }
                    let p = pair_prob(u, v, &w)?;
                    row!(PairProb).compare(p, table.pair_marginal(u, v));
                    row!(MixturePairMarginal).compare((1.0 - gamma) * p + gamma / 2.0, mixed.pair_marginal(u, v));
                    for z in 0..n {
                        if z == u || z == v {
                            continue;
                        }
                        row!(TripleOrderProb).compare(triple_order_prob(u, v, z, &w)?, triple_table(&table, u, v, z));
                        let top = triple_table(&table, u, v, z) + triple_table(&table, u, z, v);
                        row!(TopAmongThree).compare(top_among_three(u, v, z, &w)?, top);
                        let both = triple_table(&table, u, v, z) + triple_table(&table, v, u, z);
                        row!(TopPairProb).compare(top_pair_prob(u, v, z, &w)?, both);
                    }
                }
            }

            let second = table.second_moment();
            row!(PlCovariance).compare_matrix(&pl_covariance(&w), &second);
            if case == 0 {
                row!(UniformCovariance).compare_matrix(&uniform_covariance(n), &second);
                row!(UniformMinEig).compare(uniform_min_eig(n), min_eig_on_range(&second)?);
            }

            let mut learner = BanditRank::new(BanditRankParams {
                n,
                horizon: 1,
                gamma,
                eta: gamma / (4.0 * n as f64),
                c_eta: 4.0,
            })?;
            learner.set_weights(w.clone())?;
            row!(MixtureCovariance).compare_matrix(&learner.mixture_covariance(), &exact_covariance(&w, gamma)?);
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
            let norm = crate::perm::dual_norm(&s);
            let s: Vec<f64> = s.iter().map(|x| x / norm).collect();
            let target = centered_target(&s);
            let mean = banditrank_estimator_mean(&mut learner, &s)?;
            let independent = estimator_mean_enumerated(&w, gamma, &s)?;
            for i in 0..n {
                row!(EstimatorMean).compare(mean[i], target[i]);
                row!(EstimatorMean).compare(independent[i], target[i]);
            }

            if n <= 5.min(max_n) {
                let tournaments = enumerate_tournaments(&w)?;
                let total: f64 = tournaments.iter().map(|(_, p)| p).sum();
                row!(TournamentDistribution).compare(total, 1.0);
                for u in 0..n {
                    for v in u + 1..n {
                        let marginal: f64 = tournaments.iter().filter(|(t, _)| t.beats(u, v)).map(|(_, p)| p).sum();
                        row!(TournamentDistribution).compare(pair_prob(u, v, &w)?, marginal);
                    }
                }
            }
            if n >= 3 {
                let m = lemma1_moments(&w, &s)?;
                row!(Lemma1Means).compare(m.mean_x1, m.mean_x2);
                // a perturbed run replaces the tournament moment by one just above its bound
                let bump = row!(Lemma1Inequality).bump;
                let second_x2 = if bump > 0.0 { m.second_x1 + bump } else { m.second_x2 };
                row!(Lemma1Inequality).record((second_x2 - m.second_x1).max(0.0));
                let (mean2, second2) = tournament_moments_factorized(&w, &s);
                row!(TournamentMoments).compare(mean2, m.mean_x2);
                row!(TournamentMoments).compare(second2, m.second_x2);
            }

            let x: Vec<f64> = (0..n).map(|_| rng.random_range(-0.95..0.95)).collect();
            row!(EstimatorCovariance).compare_matrix(&estimator_covariance(&x, gamma)?, &hypercube_second_moment(&x, gamma)?);

            let q: Vec<f64> = (0..n).map(|_| rng.random_range(-0.99..0.99)).collect();
            let p = project(&q)?;
            let reference = reference_projection(&q)?;
            for i in 0..n {
                row!(Projection).compare(p[i], reference.point[i]);
            }
            let shrink = rng.random_range(0.5..1.0);
            let y: Vec<f64> = p.iter().map(|v| v * shrink).collect();
            let combo = decompose(&y)?;
            for (a, b) in combo.mean().iter().zip(&y) {
                row!(Decomposition).compare(*a, *b);
            }
        }
    }

    for _ in 0..opts.cases * 10 {
        let w3 = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
        let h = h_matrix(w3);
        let m = quadratic_form_coeffs(w3);
        for i in 0..3 {
            for j in 0..3 {
                row!(HMatrix).compare(h.m[i][j], m[i][j]);
            }
        }
    }
    let known = lemma1_moments(&WeightVector::zeros(3), &[1.0, 0.0, 0.0])?;
    row!(Lemma1KnownCase).compare(known.second_x1, 8.0 / 3.0);
    row!(Lemma1KnownCase).compare(known.second_x2, 2.0);

    Ok(VerifyReport {
        rows: acc.into_iter().map(Acc::finish).collect(),
    })
}
