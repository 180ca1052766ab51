use rand::Rng;
use serde::{Deserialize, Serialize};

use super::driver::{drive, validate_steps, StepRule};
use super::trace::{AlgorithmId, RunTrace};
use crate::error::{Error, Result};
use crate::oracle::{add_component_gradient_charged, full_gradient_into, FiniteSumProblem, OracleCounter};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SvrgConfig {
    pub eta: f64,
    /// Steps between snapshots; defaults to `n`.
    #[serde(default)]
    pub epoch_len: Option<usize>,
    #[serde(default)]
    pub steps: usize,
}

impl SvrgConfig {
    pub fn new(eta: f64, steps: usize) -> Self {
        SvrgConfig {
            eta,
            epoch_len: None,
            steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return Err(Error::invalid(
                "eta",
                format!("must be positive, got {}", self.eta),
            ));
        }
        if self.epoch_len == Some(0) {
            return Err(Error::invalid("epoch_len", "must be at least 1"));
        }
        validate_steps(self.steps)
    }

    pub fn epoch_len_for(&self, n: usize) -> usize {
        self.epoch_len.unwrap_or(n)
    }
}

/// Every `m` steps the current iterate becomes the snapshot `y` with
/// `μ = ∇f(y)`; in between the direction is `∇fᵢ(x_t) − ∇fᵢ(y) + μ`.
/// On snapshot steps `x_t = y`, so the direction is `μ` itself.
struct SvrgRule {
    epoch_len: usize,
    eta: f64,
    snapshot: Vec<f64>,
    mu: Vec<f64>,
}

impl<P: FiniteSumProblem + ?Sized> StepRule<P> for SvrgRule {
    fn direction<R: Rng + ?Sized>(
        &mut self,
        problem: &P,
        t: usize,
        x: &[f64],
        dir: &mut [f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<f64> {
        if t.is_multiple_of(self.epoch_len) {
            self.snapshot.copy_from_slice(x);
            full_gradient_into(problem, x, &mut self.mu, Some(counter))?;
            dir.copy_from_slice(&self.mu);
        } else {
            let i = rng.random_range(0..problem.num_components());
            dir.copy_from_slice(&self.mu);
            add_component_gradient_charged(problem, i, x, 1.0, dir, counter)?;
            add_component_gradient_charged(problem, i, &self.snapshot, -1.0, dir, counter)?;
        }
        Ok(self.eta)
    }
}

pub fn svrg_run<P, R>(problem: &P, x0: &[f64], config: &SvrgConfig, rng: &mut R) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let d = problem.dim();
    let mut rule = SvrgRule {
        epoch_len: config.epoch_len_for(problem.num_components()),
        eta: config.eta,
        snapshot: vec![0.0; d],
        mu: vec![0.0; d],
    };
    drive(
        AlgorithmId::Svrg,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        &mut |_| {},
    )
}
