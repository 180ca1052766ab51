//! Variance of the path-integrated estimator: the one-step recursion by
//! exact enumeration, reset exactness and unbiasedness along real runs, and
//! the cumulative/weighted bounds by Monte Carlo over seeds.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use super::report::{LemmaReport, Rhs};
use crate::error::{Error, Result};
use crate::optimizers::{adaspider_run_observed, AdaSpiderConfig, StepView};
use crate::oracle::{measure_gradient, FiniteSumProblem};
use crate::problems::QuadraticProblem;
use crate::vecops;

/// Largest `n` the enumeration checks accept.
pub const MAX_ENUMERATION: usize = 20;
/// Relative slack for the exactly enumerated recursion.
pub const RECURSION_SLACK: f64 = 1e-12;
/// Absolute tolerance for the unbiasedness identity.
pub const UNBIASED_TOLERANCE: f64 = 1e-12;
pub const MIN_MONTE_CARLO_SEEDS: usize = 50;
/// Standard errors of slack granted to Monte-Carlo comparisons.
pub const MONTE_CARLO_SIGMAS: f64 = 3.0;

fn component_grad<P: FiniteSumProblem + ?Sized>(problem: &P, index: usize, x: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; problem.dim()];
    problem.add_component_gradient(index, x, 1.0, &mut g);
    g
}

fn smoothness_of<P: FiniteSumProblem + ?Sized>(problem: &P) -> Result<f64> {
    problem.smoothness().ok_or(Error::MissingSmoothness)
}

/// Checks `E‖∇_x − ∇f(x)‖² ≤ L²‖x−y‖² + E‖∇_y − ∇f(y)‖²` for
/// `∇_x = ∇fᵢ(x) − ∇fᵢ(y) + ∇_y`, enumerating every index `i` and every
/// outcome `(∇_y, probability)` of `grad_y_dist`.
pub fn check_variance_recursion<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    y: &[f64],
    grad_y_dist: &[(Vec<f64>, f64)],
    rhs: Rhs,
) -> Result<LemmaReport> {
    let n = problem.num_components();
    let d = problem.dim();
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(format!(
            "{n} components, limit {MAX_ENUMERATION}"
        )));
    }
    let l = smoothness_of(problem)?;
    if x.len() != d || y.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: if x.len() != d { x.len() } else { y.len() },
        });
    }
    if grad_y_dist.is_empty() {
        return Err(Error::invalid("grad_y_dist", "needs at least one outcome"));
    }
    let mut total_p = 0.0;
    for (g, p) in grad_y_dist {
        if g.len() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: g.len(),
            });
        }
        if !(*p >= 0.0) {
            return Err(Error::invalid("grad_y_dist", format!("negative probability {p}")));
        }
        total_p += p;
    }
    if (total_p - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(
            "grad_y_dist",
            format!("probabilities sum to {total_p}"),
        ));
    }

    let fx = measure_gradient(problem, x)?;
    let fy = measure_gradient(problem, y)?;
    let diffs: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            let mut g = component_grad(problem, i, x);
            vecops::axpy(-1.0, &component_grad(problem, i, y), &mut g);
            g
        })
        .collect();

    let mut lhs = 0.0;
    let mut prior_variance = 0.0;
    for (grad_y, p) in grad_y_dist {
        prior_variance += p * vecops::dist_sq(grad_y, &fy);
        let mut inner = 0.0;
        for diff in &diffs {
            let err: f64 = (0..d).map(|j| (diff[j] + grad_y[j] - fx[j]).powi(2)).sum();
            inner += err;
        }
        lhs += p * inner / n as f64;
    }
    let stated = l * l * vecops::dist_sq(x, y) + prior_variance;
    let mut report = LemmaReport::new("variance");
    let bound = rhs.apply(stated);
    report.record(lhs, bound, RECURSION_SLACK * bound.abs().max(1.0));
    Ok(report)
}

fn gaussian_vec<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

/// Random quadratic instances with `n ≤ 10`, `d ≤ 3`. Every fifth instance
/// uses `x = y`; every fourth a deterministic `∇_y = ∇f(y)`.
pub fn variance_recursion_sweep(seed: u64, instances: usize, rhs: Rhs) -> Result<LemmaReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = LemmaReport::new("variance");
    for k in 0..instances {
        let n = rng.random_range(1..=10);
        let d = rng.random_range(1..=3);
        let p = QuadraticProblem::random_rotated(n, d, -2.0, 3.0, &mut rng);
        let y = gaussian_vec(&mut rng, d, 2.0);
        let x = if k % 5 == 0 {
            y.clone()
        } else {
            gaussian_vec(&mut rng, d, 2.0)
        };
        let fy = measure_gradient(&p, &y)?;
        let dist: Vec<(Vec<f64>, f64)> = if k % 4 == 0 {
            vec![(fy.into_vec(), 1.0)]
        } else {
            let outcomes = rng.random_range(1..=4);
            let weights: Vec<f64> = (0..outcomes).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = weights.iter().sum();
            weights
                .into_iter()
                .map(|w| {
                    let mut g = gaussian_vec(&mut rng, d, 1.0);
                    vecops::axpy(1.0, &fy, &mut g);
                    (g, w / total)
                })
                .collect()
        };
        report.absorb(check_variance_recursion(&p, &x, &y, &dist, rhs)?);
    }
    Ok(report.with_detail(format!(
        "{instances} random quadratic instances, n <= 10, exact enumeration"
    )))
}

/// Runs AdaSpider and checks, at every step, that reset steps carry the
/// exact full gradient and that the inner increment averaged over all `n`
/// indices equals `∇f(x_t) − ∇f(x_{t−1})`.
pub fn check_estimator_exactness<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seed: u64,
) -> Result<LemmaReport> {
    let n = problem.num_components();
    if n > MAX_ENUMERATION {
        return Err(Error::EnumerationTooLarge(format!(
            "{n} components, limit {MAX_ENUMERATION}"
        )));
    }
    let period = config.period_for(n);
    let mut report = LemmaReport::new("estimator");
    let mut failure: Option<Error> = None;
    let mut previous: Option<Vec<f64>> = None;
    let mut observe = |view: &StepView<'_>| {
        let result = (|| -> Result<()> {
            let truth = measure_gradient(problem, view.x)?;
            if view.t.is_multiple_of(period) {
                report.record(vecops::dist(view.direction, &truth), 0.0, 0.0);
            } else if let Some(prev) = &previous {
                let mut mean_increment = vec![0.0; problem.dim()];
                for i in 0..n {
                    problem.add_component_gradient(i, view.x, 1.0 / n as f64, &mut mean_increment);
                    problem.add_component_gradient(i, prev, -1.0 / n as f64, &mut mean_increment);
                }
                let mut exact = truth.into_vec();
                vecops::axpy(-1.0, &measure_gradient(problem, prev)?, &mut exact);
                report.record(vecops::dist(&mean_increment, &exact), 0.0, UNBIASED_TOLERANCE);
            }
            Ok(())
        })();
        if let Err(e) = result {
            failure.get_or_insert(e);
        }
        previous = Some(view.x.to_vec());
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    adaspider_run_observed(problem, x0, config, &mut rng, &mut observe)?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(report.with_detail(format!(
        "reset steps exact, inner increments unbiased to {UNBIASED_TOLERANCE:e}"
    )))
}

/// Per-seed sums `(Σ a_t, Σ b_t)` along one AdaSpider run, where `weigh`
/// maps `(γ_t, ‖∇_t − ∇f(x_t)‖², ‖∇_t‖²)` to `(a_t, b_t)`.
fn per_seed_sums<P, W>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seed: u64,
    weigh: &W,
) -> Result<(f64, f64)>
where
    P: FiniteSumProblem + ?Sized,
    W: Fn(f64, f64, f64) -> (f64, f64) + Sync,
{
    let mut sums = (0.0, 0.0);
    let mut failure: Option<Error> = None;
    let mut observe = |view: &StepView<'_>| match measure_gradient(problem, view.x) {
        Ok(truth) => {
            let (a, b) = weigh(
                view.step_size,
                vecops::dist_sq(view.direction, &truth),
                vecops::norm_sq(view.direction),
            );
            sums.0 += a;
            sums.1 += b;
        }
        Err(e) => {
            failure.get_or_insert(e);
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trace = adaspider_run_observed(problem, x0, config, &mut rng, &mut observe)?;
    if let Some(e) = failure {
        return Err(e);
    }
    if trace.is_diverged() {
        return Err(Error::invalid(
            "problem",
            format!("run with seed {seed} diverged"),
        ));
    }
    Ok(sums)
}

fn monte_carlo_check<P, W>(
    lemma: &str,
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seeds: &[u64],
    rhs: Rhs,
    weigh: W,
) -> Result<LemmaReport>
where
    P: FiniteSumProblem + ?Sized,
    W: Fn(f64, f64, f64) -> (f64, f64) + Sync,
{
    if seeds.len() < MIN_MONTE_CARLO_SEEDS {
        return Err(Error::invalid(
            "seeds",
            format!(
                "{} seeds is too few, need at least {MIN_MONTE_CARLO_SEEDS}",
                seeds.len()
            ),
        ));
    }
    let n = problem.num_components();
    if config.period_for(n) > n {
        return Err(Error::invalid(
            "period",
            "the bound assumes a reset at least every n steps",
        ));
    }
    let l = smoothness_of(problem)?;
    let factor = rhs.apply(l * l * n as f64);

    let sums: Vec<(f64, f64)> = seeds
        .par_iter()
        .map(|&s| per_seed_sums(problem, x0, config, s, &weigh))
        .collect::<Result<_>>()?;
    let m = sums.len() as f64;
    let mean_a = sums.iter().map(|s| s.0).sum::<f64>() / m;
    let mean_b = sums.iter().map(|s| s.1).sum::<f64>() / m;
    let gaps: Vec<f64> = sums.iter().map(|s| s.0 - factor * s.1).collect();
    let mean_gap = gaps.iter().sum::<f64>() / m;
    let var_gap = gaps.iter().map(|g| (g - mean_gap).powi(2)).sum::<f64>() / (m - 1.0);
    let se = (var_gap / m).sqrt();

    let mut report = LemmaReport::new(lemma);
    report.record(mean_a, factor * mean_b, MONTE_CARLO_SIGMAS * se);
    Ok(report.with_detail(format!(
        "{} seeds, T = {}: lhs {mean_a:.6e}, rhs {:.6e}, standard error {se:.3e}",
        seeds.len(),
        config.steps,
        factor * mean_b
    )))
}

/// `Σ_t E‖∇_t − ∇f(x_t)‖² ≤ L²n · Σ_t E[γ_t²‖∇_t‖²]`, both sides estimated
/// over `seeds` (at least 50) and compared within three standard errors of
/// the per-seed difference.
pub fn check_cumulative_variance<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seeds: &[u64],
    rhs: Rhs,
) -> Result<LemmaReport> {
    monte_carlo_check(
        "cumulative",
        problem,
        x0,
        config,
        seeds,
        rhs,
        |gamma, err_sq, norm_sq| (err_sq, gamma * gamma * norm_sq),
    )
}

/// `E[Σ_t γ_t‖∇_t − ∇f(x_t)‖²] ≤ L²n · E[Σ_t γ_t³‖∇_t‖²]`, estimated like
/// [`check_cumulative_variance`].
pub fn check_weighted_variance<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seeds: &[u64],
    rhs: Rhs,
) -> Result<LemmaReport> {
    monte_carlo_check(
        "weighted",
        problem,
        x0,
        config,
        seeds,
        rhs,
        |gamma, err_sq, norm_sq| (gamma * err_sq, gamma.powi(3) * norm_sq),
    )
}
