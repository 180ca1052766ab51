use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::report::{LemmaReport, Rhs};
use crate::error::{Error, Result};
use crate::optimizers::{adaspider_run_observed, AdaSpiderConfig, StepView};
use crate::oracle::{measure_gradient, measure_loss, FiniteSumProblem};

/// The fitted log-log slope must be at most the negative of this.
pub const RATE_DECAY_FLOOR: f64 = 0.35;
pub const DEFAULT_RATE_GRID: [usize; 3] = [100, 1_000, 10_000];

/// `Θ = Δ₀·β₀ + G₀ + L/β₀ + L²/(β₀²·G₀)`.
pub fn rate_theta(delta0: f64, beta0: f64, g0: f64, smoothness: f64) -> f64 {
    delta0 * beta0 + g0 + smoothness / beta0 + smoothness * smoothness / (beta0 * beta0 * g0)
}

/// Least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let k = values.len();
    if k % 2 == 1 {
        values[k / 2]
    } else {
        0.5 * (values[k / 2 - 1] + values[k / 2])
    }
}

/// Mean of `‖∇f(x_t)‖` over `t = 0..T−1` and the smallest loss seen.
fn mean_grad_norm<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut total = 0.0;
    let mut min_loss = f64::INFINITY;
    let mut failure = None;
    let mut observe =
        |view: &StepView<'_>| match (measure_gradient(problem, view.x), measure_loss(problem, view.x)) {
            (Ok(g), Ok(f)) => {
                total += g.norm();
                min_loss = min_loss.min(f);
            }
            (Err(e), _) | (_, Err(e)) => {
                failure.get_or_insert(e);
            }
        };
    let trace = adaspider_run_observed(
        problem,
        x0,
        config,
        &mut ChaCha8Rng::seed_from_u64(seed),
        &mut observe,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    if trace.is_diverged() {
        return Err(Error::invalid(
            "problem",
            format!("run with seed {seed} diverged"),
        ));
    }
    Ok((total / config.steps as f64, min_loss))
}

/// Fits `log(mean_t ‖∇f(x_t)‖)` (median over `seeds`) against `log T` over
/// `t_grid` and checks the decay exponent: `0.35 ≤ −slope`. The grid needs at
/// least three increasing budgets spanning two decades.
pub fn check_rate_scaling<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    t_grid: &[usize],
    seeds: &[u64],
    rhs: Rhs,
) -> Result<LemmaReport> {
    if t_grid.len() < 3 {
        return Err(Error::invalid(
            "t_grid",
            format!("need at least 3 budgets, got {}", t_grid.len()),
        ));
    }
    if t_grid.windows(2).any(|w| w[1] <= w[0]) || t_grid[0] == 0 {
        return Err(Error::invalid(
            "t_grid",
            "budgets must be positive and increasing",
        ));
    }
    if (t_grid[t_grid.len() - 1] as f64) < 100.0 * t_grid[0] as f64 {
        return Err(Error::invalid("t_grid", "budgets must span at least two decades"));
    }
    if seeds.is_empty() {
        return Err(Error::invalid("seeds", "need at least one seed"));
    }

    let jobs: Vec<(usize, u64)> = t_grid
        .iter()
        .flat_map(|&t| seeds.iter().map(move |&s| (t, s)))
        .collect();
    let results: Vec<(f64, f64)> = jobs
        .par_iter()
        .map(|&(steps, seed)| {
            mean_grad_norm(
                problem,
                x0,
                &AdaSpiderConfig {
                    steps,
                    ..config.clone()
                },
                seed,
            )
        })
        .collect::<Result<_>>()?;

    let mut medians = Vec::with_capacity(t_grid.len());
    for chunk in results.chunks(seeds.len()) {
        let mut norms: Vec<f64> = chunk.iter().map(|r| r.0).collect();
        let m = median(&mut norms);
        if !(m > 0.0) || !m.is_finite() {
            return Err(Error::invalid(
                "problem",
                format!("degenerate fit, median gradient norm {m}"),
            ));
        }
        medians.push(m);
    }
    let log_t: Vec<f64> = t_grid.iter().map(|&t| (t as f64).ln()).collect();
    let log_g: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
    let slope = least_squares_slope(&log_t, &log_g);

    let mut report = LemmaReport::new("rate");
    report.record(RATE_DECAY_FLOOR, rhs.apply(-slope), 0.0);
    let mut detail = format!("slope {slope:.4} over T = {t_grid:?}, medians {medians:.4?}");
    if let Some(l) = problem.smoothness() {
        let f0 = measure_loss(problem, x0)?;
        let best = results.iter().map(|r| r.1).fold(f64::INFINITY, f64::min);
        let theta = rate_theta((f0 - best).max(0.0), config.beta0, config.g0, l);
        detail.push_str(&format!(", theta {theta:.4e}"));
    }
    Ok(report.with_detail(detail))
}
