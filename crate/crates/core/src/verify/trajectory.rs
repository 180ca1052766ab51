use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::report::{LemmaReport, Rhs};
use crate::data::{generate_synthetic, SyntheticKind};
use crate::error::{Error, Result};
use crate::optimizers::{adaspider_run, AdaSpiderConfig, AlgorithmId, RunTrace};
use crate::oracle::{measure_gradient, FiniteSumProblem};
use crate::problems::{LossKind, QuadraticProblem, RegularizedErm, DEFAULT_LAMBDA};
use crate::vecops;

pub const STEP_SLACK: f64 = 1e-12;

/// `2L²n²T/β₀² + 2L²T³/β₀² + 4LT²‖∇f(x₀)‖/β₀ + 2T‖∇f(x₀)‖²`.
pub fn trajectory_bound(l: f64, n: usize, steps: usize, beta0: f64, grad0_norm: f64) -> f64 {
    let (n, t) = (n as f64, steps as f64);
    2.0 * l * l * n * n * t / (beta0 * beta0)
        + 2.0 * l * l * t.powi(3) / (beta0 * beta0)
        + 4.0 * l * t * t * grad0_norm / beta0
        + 2.0 * t * grad0_norm * grad0_norm
}

/// Checks an AdaSpider trace against (a) `‖x_{t+1} − x_t‖ ≤ 1/β₀` at every
/// step (trials `0..T`) and (b) `Σ_{t<T} ‖∇_t‖² ≤` [`trajectory_bound`]
/// (trial `T`).
pub fn check_trajectory_bound<P: FiniteSumProblem + ?Sized>(
    trace: &RunTrace,
    problem: &P,
    beta0: f64,
    rhs: Rhs,
) -> Result<LemmaReport> {
    if trace.algorithm != AlgorithmId::AdaSpider {
        return Err(Error::invalid(
            "trace",
            format!("expected an adaspider trace, got {}", trace.algorithm),
        ));
    }
    if trace.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let l = problem.smoothness().ok_or(Error::MissingSmoothness)?;
    let mut report = LemmaReport::new("trajectory");
    for w in trace.iterates.windows(2) {
        report.record(vecops::dist(&w[0], &w[1]), rhs.apply(1.0 / beta0), STEP_SLACK);
    }
    let grad0 = measure_gradient(problem, &trace.iterates[0])?.norm();
    let total: f64 = trace
        .steps
        .iter()
        .map(|s| s.direction_norm * s.direction_norm)
        .sum();
    let bound = trajectory_bound(l, trace.num_components, trace.len(), beta0, grad0);
    report.record(total, rhs.apply(bound), 0.0);
    Ok(report.with_detail(format!(
        "sum of squared estimator norms {total:.6e} against {bound:.6e}"
    )))
}

/// `runs` seeded AdaSpider runs on random quadratics (every fifth run on a
/// synthetic logistic problem) with varied `β₀`, `G₀`, `n` and `T`.
pub fn trajectory_sweep(seed: u64, runs: usize, rhs: Rhs) -> Result<LemmaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport::new("trajectory");
    for k in 0..runs {
        let beta0 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let g0 = [0.5, 1.0, 2.0][rng.random_range(0..3)];
        let steps = rng.random_range(20..=200);
        let config = AdaSpiderConfig {
            beta0,
            g0,
            steps,
            period: None,
        };
        let run_seed = rng.random();
        let sub = if k % 5 == 4 {
            let data = generate_synthetic(SyntheticKind::SeparableLogistic, 20, 5, run_seed)?;
            let problem = RegularizedErm::new(data, LossKind::Logistic, DEFAULT_LAMBDA)?;
            let trace = adaspider_run(&problem, &[0.0; 5], &config, &mut rng)?;
            check_trajectory_bound(&trace, &problem, beta0, rhs)?
        } else {
            let n = rng.random_range(2..=12);
            let d = rng.random_range(1..=4);
            let problem = QuadraticProblem::random_rotated(n, d, -2.0, 3.0, &mut rng);
            let x0: Vec<f64> = (0..d)
                .map(|_| 3.0 * rng.sample::<f64, _>(StandardNormal))
                .collect();
            let trace = adaspider_run(&problem, &x0, &config, &mut rng)?;
            check_trajectory_bound(&trace, &problem, beta0, rhs)?
        };
        report.absorb(sub);
    }
    Ok(report.with_detail(format!(
        "{runs} seeded AdaSpider runs, step bound and squared-norm sum bound"
    )))
}
