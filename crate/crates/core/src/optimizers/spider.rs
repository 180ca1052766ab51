//! The two non-adaptive users of the path-integrated estimator: Spider with
//! its accuracy-dependent step, and SpiderBoost with a constant `1/L` step on
//! a `⌈√n⌉` schedule.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::driver::{drive, validate_steps, StepRule, StepView};
use super::estimator::SpiderEstimatorState;
use super::trace::{AlgorithmId, RunTrace};
use crate::error::{Error, Result};
use crate::oracle::{FiniteSumProblem, OracleCounter};
use crate::vecops;

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

/// Smallest integer `r` with `r² ≥ n`.
pub fn ceil_sqrt(n: usize) -> usize {
    let mut r = (n as f64).sqrt().ceil() as usize;
    while r > 0 && (r - 1) * (r - 1) >= n {
        r -= 1;
    }
    while r * r < n {
        r += 1;
    }
    r
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiderConfig {
    pub epsilon: f64,
    pub smoothness: f64,
    #[serde(default)]
    pub steps: usize,
    #[serde(default)]
    pub period: Option<usize>,
    /// Inner mini-batch size (`n₀`).
    #[serde(default = "one")]
    pub batch: usize,
}

fn one() -> usize {
    1
}

impl SpiderConfig {
    pub fn new(epsilon: f64, smoothness: f64, steps: usize) -> Self {
        SpiderConfig {
            epsilon,
            smoothness,
            steps,
            period: None,
            batch: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("epsilon", self.epsilon)?;
        check_positive("smoothness", self.smoothness)?;
        if self.period == Some(0) || self.batch == 0 {
            return Err(Error::invalid("period/batch", "must be at least 1"));
        }
        validate_steps(self.steps)
    }
}

/// `min(ε / (L√n‖∇_t‖), 1 / (2√n·L))`; a zero norm takes the second branch.
pub fn spider_step_size(n: usize, epsilon: f64, smoothness: f64, direction_norm: f64) -> f64 {
    let root_n = (n as f64).sqrt();
    let cap = 1.0 / (2.0 * root_n * smoothness);
    if direction_norm > 0.0 {
        (epsilon / (smoothness * root_n * direction_norm)).min(cap)
    } else {
        cap
    }
}

struct SpiderRule {
    estimator: SpiderEstimatorState,
    n: usize,
    epsilon: f64,
    smoothness: f64,
}

impl<P: FiniteSumProblem + ?Sized> StepRule<P> for SpiderRule {
    fn direction<R: Rng + ?Sized>(
        &mut self,
        problem: &P,
        _t: usize,
        x: &[f64],
        dir: &mut [f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<f64> {
        dir.copy_from_slice(self.estimator.update(problem, x, rng, counter)?);
        Ok(spider_step_size(
            self.n,
            self.epsilon,
            self.smoothness,
            vecops::norm(dir),
        ))
    }
}

pub fn spider_run<P, R>(problem: &P, x0: &[f64], config: &SpiderConfig, rng: &mut R) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    spider_run_observed(problem, x0, config, rng, &mut |_| {})
}

pub fn spider_run_observed<P, R>(
    problem: &P,
    x0: &[f64],
    config: &SpiderConfig,
    rng: &mut R,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let n = problem.num_components();
    let mut rule = SpiderRule {
        estimator: SpiderEstimatorState::new(problem.dim(), config.period.unwrap_or(n), config.batch)?,
        n,
        epsilon: config.epsilon,
        smoothness: config.smoothness,
    };
    drive(
        AlgorithmId::Spider,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        observer,
    )
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpiderBoostConfig {
    /// Constant step is `1/smoothness`.
    pub smoothness: f64,
    #[serde(default)]
    pub steps: usize,
    /// Defaults to `⌈√n⌉`.
    #[serde(default)]
    pub period: Option<usize>,
    /// Defaults to `⌈√n⌉`.
    #[serde(default)]
    pub batch: Option<usize>,
}

impl SpiderBoostConfig {
    pub fn new(smoothness: f64, steps: usize) -> Self {
        SpiderBoostConfig {
            smoothness,
            steps,
            period: None,
            batch: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        check_positive("smoothness", self.smoothness)?;
        if self.period == Some(0) || self.batch == Some(0) {
            return Err(Error::invalid("period/batch", "must be at least 1"));
        }
        validate_steps(self.steps)
    }

    pub fn period_for(&self, n: usize) -> usize {
        self.period.unwrap_or_else(|| ceil_sqrt(n))
    }

    pub fn batch_for(&self, n: usize) -> usize {
        self.batch.unwrap_or_else(|| ceil_sqrt(n))
    }
}

struct ConstantStepSpider {
    estimator: SpiderEstimatorState,
    step: f64,
}

impl<P: FiniteSumProblem + ?Sized> StepRule<P> for ConstantStepSpider {
    fn direction<R: Rng + ?Sized>(
        &mut self,
        problem: &P,
        _t: usize,
        x: &[f64],
        dir: &mut [f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<f64> {
        dir.copy_from_slice(self.estimator.update(problem, x, rng, counter)?);
        Ok(self.step)
    }
}

pub fn spiderboost_run<P, R>(
    problem: &P,
    x0: &[f64],
    config: &SpiderBoostConfig,
    rng: &mut R,
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let n = problem.num_components();
    let mut rule = ConstantStepSpider {
        estimator: SpiderEstimatorState::new(problem.dim(), config.period_for(n), config.batch_for(n))?,
        step: 1.0 / config.smoothness,
    };
    drive(
        AlgorithmId::SpiderBoost,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        &mut |_| {},
    )
}
