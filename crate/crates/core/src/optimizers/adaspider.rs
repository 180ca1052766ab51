//! Adaptive SPIDER: the path-integrated estimator with a step size built
//! from the accumulated squared estimator norms. Needs neither `L` nor a
//! target accuracy.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::driver::{drive, validate_steps, StepRule, StepView};
use super::estimator::SpiderEstimatorState;
use super::trace::{AlgorithmId, RunTrace};
use crate::error::{Error, Result};
use crate::oracle::{FiniteSumProblem, OracleCounter};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaSpiderConfig {
    /// Inverse length scale; every step moves at most `1/beta0`.
    #[serde(default = "one")]
    pub beta0: f64,
    /// Gradient scale.
    #[serde(default = "one")]
    pub g0: f64,
    #[serde(default)]
    pub steps: usize,
    /// Full-gradient period; `None` means `n`.
    #[serde(default)]
    pub period: Option<usize>,
}

fn one() -> f64 {
    1.0
}

impl Default for AdaSpiderConfig {
    fn default() -> Self {
        AdaSpiderConfig {
            beta0: 1.0,
            g0: 1.0,
            steps: 1000,
            period: None,
        }
    }
}

impl AdaSpiderConfig {
    pub fn with_steps(steps: usize) -> Self {
        AdaSpiderConfig {
            steps,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.beta0 > 0.0) || !self.beta0.is_finite() {
            return Err(Error::invalid(
                "beta0",
                format!("must be positive, got {}", self.beta0),
            ));
        }
        if !(self.g0 > 0.0) || !self.g0.is_finite() {
            return Err(Error::invalid("g0", format!("must be positive, got {}", self.g0)));
        }
        if self.period == Some(0) {
            return Err(Error::invalid("period", "must be at least 1"));
        }
        validate_steps(self.steps)
    }

    pub fn period_for(&self, n: usize) -> usize {
        self.period.unwrap_or(n)
    }
}

/// `γ_t = 1 / (n^{1/4} · β₀ · √(n^{1/2}·G₀² + Σ_{s≤t} ‖∇_s‖²))`.
///
/// The accumulator must already contain `‖∇_t‖²`; that is what bounds every
/// step length by `1/β₀`.
pub fn adaspider_step_size(n: usize, beta0: f64, g0: f64, accumulator: f64) -> Result<f64> {
    if !(accumulator >= 0.0) {
        return Err(Error::invalid(
            "accumulator",
            format!("must be non-negative, got {accumulator}"),
        ));
    }
    let n = n as f64;
    Ok(1.0 / (n.sqrt().sqrt() * beta0 * (n.sqrt() * g0 * g0 + accumulator).sqrt()))
}

struct AdaSpiderRule {
    estimator: SpiderEstimatorState,
    n: usize,
    beta0: f64,
    g0: f64,
}

impl<P: FiniteSumProblem + ?Sized> StepRule<P> for AdaSpiderRule {
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
        adaspider_step_size(
            self.n,
            self.beta0,
            self.g0,
            self.estimator.grad_norm_accumulator(),
        )
    }
}

pub fn adaspider_run<P, R>(problem: &P, x0: &[f64], config: &AdaSpiderConfig, rng: &mut R) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    adaspider_run_observed(problem, x0, config, rng, &mut |_| {})
}

/// [`adaspider_run`] with a callback invoked at every step before the update.
pub fn adaspider_run_observed<P, R>(
    problem: &P,
    x0: &[f64],
    config: &AdaSpiderConfig,
    rng: &mut R,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let n = problem.num_components();
    let mut rule = AdaSpiderRule {
        estimator: SpiderEstimatorState::new(problem.dim(), config.period_for(n), 1)?,
        n,
        beta0: config.beta0,
        g0: config.g0,
    };
    drive(
        AlgorithmId::AdaSpider,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        observer,
    )
}
