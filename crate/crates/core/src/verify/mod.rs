//! Numerical checks of the inequalities behind AdaSpider's guarantees and of
//! the analytic gradients. Every checker returns a [`LemmaReport`] and can be
//! run against a negated right-hand side ([`Rhs::Negated`]) to confirm it
//! is able to fail.

mod gradcheck;
mod rate;
mod report;
mod sequences;
mod trajectory;
mod variance;

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub use gradcheck::{
    gradcheck, GradFault, GradcheckResult, DEFAULT_GRADCHECK_POINTS, FINITE_DIFFERENCE_STEP,
    GRADCHECK_TOLERANCE,
};
pub use rate::{check_rate_scaling, least_squares_slope, rate_theta, DEFAULT_RATE_GRID, RATE_DECAY_FLOOR};
pub use report::{LemmaReport, Rhs, Violation};
pub use sequences::{
    check_log_lemma, check_log_lemma_with, check_sqrt_lemma, check_sqrt_lemma_with, log_lemma_sides,
    log_lemma_sweep, random_sequence, sqrt_lemma_sides, sqrt_lemma_sweep, DEFAULT_SEQUENCES,
    MAX_SEQUENCE_LEN, MAX_SEQUENCE_VALUE, SEQUENCE_SLACK,
};
pub use trajectory::{check_trajectory_bound, trajectory_bound, trajectory_sweep, STEP_SLACK};
pub use variance::{
    check_cumulative_variance, check_estimator_exactness, check_variance_recursion, check_weighted_variance,
    variance_recursion_sweep, MAX_ENUMERATION, MIN_MONTE_CARLO_SEEDS, MONTE_CARLO_SIGMAS,
};

use crate::data::{generate_synthetic, SyntheticKind};
use crate::error::{Error, Result};
use crate::optimizers::AdaSpiderConfig;
use crate::problems::{LossKind, QuadraticProblem, RegularizedErm, DEFAULT_LAMBDA};

/// Named groups of checks with their documented default instances.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    All,
    Sqrt,
    Log,
    Variance,
    Estimator,
    Trajectory,
    Cumulative,
    Weighted,
    Rate,
}

impl Suite {
    pub const NAMES: [&'static str; 9] = [
        "all",
        "sqrt",
        "log",
        "variance",
        "estimator",
        "trajectory",
        "cumulative",
        "weighted",
        "rate",
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Suite::All => "all",
            Suite::Sqrt => "sqrt",
            Suite::Log => "log",
            Suite::Variance => "variance",
            Suite::Estimator => "estimator",
            Suite::Trajectory => "trajectory",
            Suite::Cumulative => "cumulative",
            Suite::Weighted => "weighted",
            Suite::Rate => "rate",
        }
    }

    fn members(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![
                Suite::Sqrt,
                Suite::Log,
                Suite::Variance,
                Suite::Estimator,
                Suite::Trajectory,
                Suite::Cumulative,
                Suite::Weighted,
                Suite::Rate,
            ],
            s => vec![s],
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "all" => Suite::All,
            "sqrt" => Suite::Sqrt,
            "log" => Suite::Log,
            "variance" => Suite::Variance,
            "estimator" => Suite::Estimator,
            "trajectory" => Suite::Trajectory,
            "cumulative" => Suite::Cumulative,
            "weighted" => Suite::Weighted,
            "rate" => Suite::Rate,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite '{other}', expected one of {}",
                    Suite::NAMES.join("|")
                )))
            }
        })
    }
}

pub const VARIANCE_INSTANCES: usize = 100;
pub const TRAJECTORY_RUNS: usize = 50;
/// Instances of the `n = 4`, `d = 2` quadratic family in the Monte-Carlo suites.
pub const MONTE_CARLO_INSTANCES: usize = 3;
pub const MONTE_CARLO_SEEDS: usize = 200;
pub const MONTE_CARLO_STEPS: usize = 40;
/// Synthetic logistic problem of the rate suite.
pub const RATE_PROBLEM: (usize, usize) = (64, 10);
pub const RATE_SEEDS: usize = 5;

fn seeds_from(rng: &mut ChaCha8Rng, count: usize) -> Vec<u64> {
    (0..count).map(|_| rng.random()).collect()
}

type MonteCarloCheck = fn(&QuadraticProblem, &[f64], &AdaSpiderConfig, &[u64], Rhs) -> Result<LemmaReport>;

fn monte_carlo_suite(lemma: &str, seed: u64, rhs: Rhs, check: MonteCarloCheck) -> Result<LemmaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport::new(lemma);
    let config = AdaSpiderConfig::with_steps(MONTE_CARLO_STEPS);
    let mut details = Vec::new();
    for _ in 0..MONTE_CARLO_INSTANCES {
        let problem = QuadraticProblem::random_rotated(4, 2, -1.0, 2.0, &mut rng);
        let x0: Vec<f64> = (0..2).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let seeds = seeds_from(&mut rng, MONTE_CARLO_SEEDS);
        let sub = check(&problem, &x0, &config, &seeds, rhs)?;
        details.push(sub.detail.clone());
        report.absorb(sub);
    }
    Ok(report.with_detail(details.join("; ")))
}

fn estimator_suite(seed: u64) -> Result<LemmaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport::new("estimator");
    for k in 0..6 {
        let sub = if k == 5 {
            let data =
                generate_synthetic(SyntheticKind::SeparableLogistic, MAX_ENUMERATION, 4, rng.random())?;
            let problem = RegularizedErm::new(data, LossKind::Logistic, DEFAULT_LAMBDA)?;
            check_estimator_exactness(
                &problem,
                &[0.0; 4],
                &AdaSpiderConfig::with_steps(3 * MAX_ENUMERATION),
                rng.random(),
            )?
        } else {
            let n = rng.random_range(2..=MAX_ENUMERATION);
            let d = rng.random_range(1..=4);
            let problem = QuadraticProblem::random_rotated(n, d, -1.0, 2.0, &mut rng);
            let x0: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            check_estimator_exactness(
                &problem,
                &x0,
                &AdaSpiderConfig::with_steps(3 * n + 1),
                rng.random(),
            )?
        };
        report.absorb(sub);
    }
    Ok(report.with_detail("5 random quadratics and 1 logistic problem, n <= 20, three periods each"))
}

/// Synthetic logistic problem with `λ = 0.1` used by the rate suite.
pub fn rate_problem(seed: u64) -> Result<RegularizedErm> {
    let (n, d) = RATE_PROBLEM;
    let data = generate_synthetic(SyntheticKind::SeparableLogistic, n, d, seed)?;
    RegularizedErm::new(data, LossKind::Logistic, DEFAULT_LAMBDA)
}

fn rate_suite(seed: u64, rhs: Rhs) -> Result<LemmaReport> {
    let problem = rate_problem(seed)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let seeds = seeds_from(&mut rng, RATE_SEEDS);
    check_rate_scaling(
        &problem,
        &vec![0.0; RATE_PROBLEM.1],
        &AdaSpiderConfig::default(),
        &DEFAULT_RATE_GRID,
        &seeds,
        rhs,
    )
}

/// Runs `suite` with its default instances, all derived from `seed`.
pub fn run_suite(suite: Suite, seed: u64, rhs: Rhs) -> Result<Vec<LemmaReport>> {
    suite
        .members()
        .into_iter()
        .map(|s| match s {
            Suite::Sqrt => sqrt_lemma_sweep(seed, DEFAULT_SEQUENCES, rhs),
            Suite::Log => log_lemma_sweep(seed, DEFAULT_SEQUENCES, rhs),
            Suite::Variance => variance_recursion_sweep(seed, VARIANCE_INSTANCES, rhs),
            // an equality check; a negated zero right-hand side cannot fail it
            Suite::Estimator => estimator_suite(seed),
            Suite::Trajectory => trajectory_sweep(seed, TRAJECTORY_RUNS, rhs),
            Suite::Cumulative => monte_carlo_suite("cumulative", seed, rhs, check_cumulative_variance),
            Suite::Weighted => monte_carlo_suite("weighted", seed, rhs, check_weighted_variance),
            Suite::Rate => rate_suite(seed, rhs),
            Suite::All => unreachable!("expanded by members"),
        })
        .collect()
}
