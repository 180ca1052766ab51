//! Non-variance-reduced baselines: plain SGD and AdaGrad-Norm.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::driver::{drive, validate_steps, StepRule};
use super::trace::{AlgorithmId, RunTrace};
use crate::error::{Error, Result};
use crate::oracle::{add_component_gradient_charged, FiniteSumProblem, OracleCounter};
use crate::vecops;

pub const DEFAULT_SGD_ETA: f64 = 0.01;
pub const DEFAULT_ADAGRAD_ETA: f64 = 0.01;
pub const DEFAULT_ADAGRAD_B0: f64 = 1e-4;

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("must be positive, got {v}")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SgdConfig {
    #[serde(default = "sgd_eta")]
    pub eta: f64,
    #[serde(default)]
    pub steps: usize,
}

fn sgd_eta() -> f64 {
    DEFAULT_SGD_ETA
}

impl SgdConfig {
    pub fn new(eta: f64, steps: usize) -> Self {
        SgdConfig { eta, steps }
    }

    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        validate_steps(self.steps)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaGradNormConfig {
    #[serde(default = "adagrad_eta")]
    pub eta: f64,
    #[serde(default = "adagrad_b0")]
    pub b0: f64,
    #[serde(default)]
    pub steps: usize,
}

fn adagrad_eta() -> f64 {
    DEFAULT_ADAGRAD_ETA
}

fn adagrad_b0() -> f64 {
    DEFAULT_ADAGRAD_B0
}

impl AdaGradNormConfig {
    pub fn new(eta: f64, b0: f64, steps: usize) -> Self {
        AdaGradNormConfig { eta, b0, steps }
    }

    pub fn validate(&self) -> Result<()> {
        positive("eta", self.eta)?;
        positive("b0", self.b0)?;
        validate_steps(self.steps)
    }
}

/// Direction `∇f_{i_t}(x_t)` with `i_t` uniform; the step size is either
/// fixed or AdaGrad-Norm's `η / √(b0² + Σ_{s≤t} ‖g_s‖²)`.
struct SingleSampleRule {
    eta: f64,
    adaptive: Option<(f64, f64)>,
}

impl<P: FiniteSumProblem + ?Sized> StepRule<P> for SingleSampleRule {
    fn direction<R: Rng + ?Sized>(
        &mut self,
        problem: &P,
        _t: usize,
        x: &[f64],
        dir: &mut [f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<f64> {
        let i = rng.random_range(0..problem.num_components());
        dir.iter_mut().for_each(|v| *v = 0.0);
        add_component_gradient_charged(problem, i, x, 1.0, dir, counter)?;
        Ok(match &mut self.adaptive {
            None => self.eta,
            Some((b0_sq, acc)) => {
                *acc += vecops::norm_sq(dir);
                self.eta / (*b0_sq + *acc).sqrt()
            }
        })
    }
}

pub fn sgd_run<P, R>(problem: &P, x0: &[f64], config: &SgdConfig, rng: &mut R) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut rule = SingleSampleRule {
        eta: config.eta,
        adaptive: None,
    };
    drive(
        AlgorithmId::Sgd,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        &mut |_| {},
    )
}

pub fn adagrad_norm_run<P, R>(
    problem: &P,
    x0: &[f64],
    config: &AdaGradNormConfig,
    rng: &mut R,
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
{
    config.validate()?;
    let mut rule = SingleSampleRule {
        eta: config.eta,
        adaptive: Some((config.b0 * config.b0, 0.0)),
    };
    drive(
        AlgorithmId::AdaGradNorm,
        problem,
        x0,
        config.steps,
        &mut rule,
        rng,
        &mut |_| {},
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn sgd_contracts_quadratic() {
        // f(x) = x²/2, x₃ = 0.9³
        let p = QuadraticProblem::diagonal(vec![vec![1.0]], vec![vec![0.0]]).unwrap();
        let trace = sgd_run(
            &p,
            &[1.0],
            &SgdConfig::new(0.1, 3),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!((trace.iterates[3][0] - 0.729).abs() < 1e-15);
        assert_eq!(trace.oracle_calls(), 3);
    }

    #[test]
    fn sgd_zero_gradient_constant() {
        let p = QuadraticProblem::zero(5, 2);
        let trace = sgd_run(
            &p,
            &[1.0, 2.0],
            &SgdConfig::new(DEFAULT_SGD_ETA, 10),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert!(trace.iterates.iter().all(|x| x.as_slice() == [1.0, 2.0]));
    }

    #[test]
    fn adagrad_first_zero_gradient_step() {
        let p = QuadraticProblem::zero(3, 1);
        let cfg = AdaGradNormConfig::new(0.01, 1e-4, 1);
        let trace = adagrad_norm_run(&p, &[0.7], &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!((trace.steps[0].step_size - 0.01 / 1e-4).abs() < 1e-9);
        assert_eq!(trace.iterates[1][0], 0.7);
    }

    #[test]
    fn adagrad_step_sizes_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let p = QuadraticProblem::random_rotated(8, 3, -1.0, 2.0, &mut rng);
        let cfg = AdaGradNormConfig::new(0.5, 0.1, 200);
        let trace = adagrad_norm_run(&p, &[1.0, 1.0, 1.0], &cfg, &mut rng).unwrap();
        for w in trace.steps.windows(2) {
            assert!(w[1].step_size <= w[0].step_size);
        }
        assert_eq!(trace.oracle_calls(), 200);
    }

    #[test]
    fn validation() {
        let p = QuadraticProblem::zero(1, 1);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(sgd_run(&p, &[0.0], &SgdConfig::new(-0.1, 3), &mut rng).is_err());
        assert!(adagrad_norm_run(&p, &[0.0], &AdaGradNormConfig::new(0.1, 0.0, 3), &mut rng).is_err());
    }
}
