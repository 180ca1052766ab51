//! AdaSpider and the baseline optimizers, all driven through one loop that
//! charges oracle calls and records a [`RunTrace`].

mod adaspider;
mod driver;
mod estimator;
mod sgd;
mod spider;
mod svrg;
mod trace;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use adaspider::{adaspider_run, adaspider_run_observed, adaspider_step_size, AdaSpiderConfig};
pub use driver::{StepView, DIVERGENCE_LIMIT};
pub use estimator::SpiderEstimatorState;
pub use sgd::{
    adagrad_norm_run, sgd_run, AdaGradNormConfig, SgdConfig, DEFAULT_ADAGRAD_B0, DEFAULT_ADAGRAD_ETA,
    DEFAULT_SGD_ETA,
};
pub use spider::{
    ceil_sqrt, spider_run, spider_run_observed, spider_step_size, spiderboost_run, SpiderBoostConfig,
    SpiderConfig,
};
pub use svrg::{svrg_run, SvrgConfig};
pub use trace::{select_output, AlgorithmId, PassRecord, RunStatus, RunTrace, StepRecord};

use crate::error::{Error, Result};
use crate::oracle::FiniteSumProblem;

/// One fully parameterized optimizer. Serialized with an `algo` tag, e.g.
/// `{"algo": "sgd", "eta": 0.01, "steps": 1000}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algo", rename_all = "lowercase")]
pub enum Algorithm {
    AdaSpider(AdaSpiderConfig),
    Spider(SpiderConfig),
    SpiderBoost(SpiderBoostConfig),
    Svrg(SvrgConfig),
    Sgd(SgdConfig),
    #[serde(rename = "adagrad")]
    AdaGradNorm(AdaGradNormConfig),
}

impl Algorithm {
    /// Default-parameter template for `id`. Spider and SpiderBoost get
    /// `L = 1`, SVRG `η = 0.01`, and Spider `ε = 0.01`; sweeps overwrite the
    /// tunable scale anyway.
    pub fn default_for(id: AlgorithmId, steps: usize) -> Self {
        match id {
            AlgorithmId::AdaSpider => Algorithm::AdaSpider(AdaSpiderConfig::with_steps(steps)),
            AlgorithmId::Spider => Algorithm::Spider(SpiderConfig::new(0.01, 1.0, steps)),
            AlgorithmId::SpiderBoost => Algorithm::SpiderBoost(SpiderBoostConfig::new(1.0, steps)),
            AlgorithmId::Svrg => Algorithm::Svrg(SvrgConfig::new(0.01, steps)),
            AlgorithmId::Sgd => Algorithm::Sgd(SgdConfig::new(DEFAULT_SGD_ETA, steps)),
            AlgorithmId::AdaGradNorm => Algorithm::AdaGradNorm(AdaGradNormConfig::new(
                DEFAULT_ADAGRAD_ETA,
                DEFAULT_ADAGRAD_B0,
                steps,
            )),
        }
    }

    pub fn id(&self) -> AlgorithmId {
        match self {
            Algorithm::AdaSpider(_) => AlgorithmId::AdaSpider,
            Algorithm::Spider(_) => AlgorithmId::Spider,
            Algorithm::SpiderBoost(_) => AlgorithmId::SpiderBoost,
            Algorithm::Svrg(_) => AlgorithmId::Svrg,
            Algorithm::Sgd(_) => AlgorithmId::Sgd,
            Algorithm::AdaGradNorm(_) => AlgorithmId::AdaGradNorm,
        }
    }

    pub fn steps(&self) -> usize {
        match self {
            Algorithm::AdaSpider(c) => c.steps,
            Algorithm::Spider(c) => c.steps,
            Algorithm::SpiderBoost(c) => c.steps,
            Algorithm::Svrg(c) => c.steps,
            Algorithm::Sgd(c) => c.steps,
            Algorithm::AdaGradNorm(c) => c.steps,
        }
    }

    pub fn with_steps(mut self, steps: usize) -> Self {
        match &mut self {
            Algorithm::AdaSpider(c) => c.steps = steps,
            Algorithm::Spider(c) => c.steps = steps,
            Algorithm::SpiderBoost(c) => c.steps = steps,
            Algorithm::Svrg(c) => c.steps = steps,
            Algorithm::Sgd(c) => c.steps = steps,
            Algorithm::AdaGradNorm(c) => c.steps = steps,
        }
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Algorithm::AdaSpider(c) => c.validate(),
            Algorithm::Spider(c) => c.validate(),
            Algorithm::SpiderBoost(c) => c.validate(),
            Algorithm::Svrg(c) => c.validate(),
            Algorithm::Sgd(c) => c.validate(),
            Algorithm::AdaGradNorm(c) => c.validate(),
        }
    }

    /// Full-gradient period and inner-step cost for this configuration on a
    /// problem with `n` components. Non-VR methods report period 0.
    fn schedule(&self, n: usize) -> (usize, u64) {
        match self {
            Algorithm::AdaSpider(c) => (c.period_for(n), 2),
            Algorithm::Spider(c) => (c.period.unwrap_or(n), 2 * c.batch.min(n) as u64),
            Algorithm::SpiderBoost(c) => (c.period_for(n), 2 * c.batch_for(n).min(n) as u64),
            Algorithm::Svrg(c) => (c.epoch_len_for(n), 2),
            Algorithm::Sgd(_) | Algorithm::AdaGradNorm(_) => (0, 1),
        }
    }

    /// Charged oracle calls of a completed `steps`-step run, in closed form.
    pub fn closed_form_calls(&self, n: usize, steps: usize) -> u64 {
        let (period, inner) = self.schedule(n);
        if period == 0 {
            return steps as u64;
        }
        let full = steps.div_ceil(period) as u64;
        n as u64 * full + inner * (steps as u64 - full)
    }

    /// Largest step count whose closed-form cost stays within `budget`
    /// (at least one step).
    pub fn steps_within_budget(&self, n: usize, budget: u64) -> usize {
        let (mut lo, mut hi) = (1usize, 1usize);
        while self.closed_form_calls(n, hi) <= budget {
            lo = hi;
            hi *= 2;
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.closed_form_calls(n, mid) <= budget {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// Sets the single tunable scale used by step-size sweeps. SGD,
    /// AdaGrad-Norm and SVRG take it as `η`; SpiderBoost and Spider as the
    /// step scale `1/L`; AdaSpider as its length scale `1/β₀`.
    pub fn with_step_scale(mut self, scale: f64) -> Result<Self> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
        }
        match &mut self {
            Algorithm::AdaSpider(c) => c.beta0 = 1.0 / scale,
            Algorithm::Spider(c) => c.smoothness = 1.0 / scale,
            Algorithm::SpiderBoost(c) => c.smoothness = 1.0 / scale,
            Algorithm::Svrg(c) => c.eta = scale,
            Algorithm::Sgd(c) => c.eta = scale,
            Algorithm::AdaGradNorm(c) => c.eta = scale,
        }
        Ok(self)
    }

    pub fn run<P, R>(&self, problem: &P, x0: &[f64], rng: &mut R) -> Result<RunTrace>
    where
        P: FiniteSumProblem + ?Sized,
        R: Rng + ?Sized,
    {
        match self {
            Algorithm::AdaSpider(c) => adaspider_run(problem, x0, c, rng),
            Algorithm::Spider(c) => spider_run(problem, x0, c, rng),
            Algorithm::SpiderBoost(c) => spiderboost_run(problem, x0, c, rng),
            Algorithm::Svrg(c) => svrg_run(problem, x0, c, rng),
            Algorithm::Sgd(c) => sgd_run(problem, x0, c, rng),
            Algorithm::AdaGradNorm(c) => adagrad_norm_run(problem, x0, c, rng),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn all_algorithms(steps: usize) -> Vec<Algorithm> {
        vec![
            Algorithm::AdaSpider(AdaSpiderConfig::with_steps(steps)),
            Algorithm::Spider(SpiderConfig::new(0.01, 2.0, steps)),
            Algorithm::SpiderBoost(SpiderBoostConfig::new(2.0, steps)),
            Algorithm::Svrg(SvrgConfig::new(0.1, steps)),
            Algorithm::Sgd(SgdConfig::new(0.1, steps)),
            Algorithm::AdaGradNorm(AdaGradNormConfig::new(0.1, 1e-4, steps)),
        ]
    }

    #[test]
    fn closed_form_matches_counter() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = QuadraticProblem::random_rotated(10, 3, -0.5, 1.0, &mut rng);
        for steps in [1, 7, 10, 11, 37] {
            for alg in all_algorithms(steps) {
                let trace = alg.run(&p, &[1.0, 0.0, -1.0], &mut rng).unwrap();
                assert_eq!(
                    trace.oracle_calls(),
                    alg.closed_form_calls(10, steps),
                    "{} T={steps}",
                    alg.id()
                );
            }
        }
    }

    #[test]
    fn adaspider_t_equals_n() {
        let alg = Algorithm::AdaSpider(AdaSpiderConfig::with_steps(16));
        assert_eq!(alg.closed_form_calls(16, 16), 16 + 2 * 15);
    }

    #[test]
    fn budget_inverts_cost() {
        for alg in all_algorithms(1) {
            for budget in [1u64, 50, 499, 500, 25_000] {
                let t = alg.steps_within_budget(500, budget);
                if t > 1 {
                    assert!(alg.closed_form_calls(500, t) <= budget);
                }
                assert!(
                    alg.closed_form_calls(500, t + 1) > budget,
                    "{} budget={budget}",
                    alg.id()
                );
            }
        }
    }

    #[test]
    fn json_tagging() {
        let alg: Algorithm = serde_json::from_str(r#"{"algo":"adagrad","steps":5}"#).unwrap();
        assert_eq!(alg, Algorithm::AdaGradNorm(AdaGradNormConfig::new(0.01, 1e-4, 5)));
        let alg: Algorithm = serde_json::from_str(r#"{"algo":"adaspider","steps":5}"#).unwrap();
        assert_eq!(alg.id(), AlgorithmId::AdaSpider);
        for a in all_algorithms(3) {
            let s = serde_json::to_string(&a).unwrap();
            assert!(s.contains(&format!("\"algo\":\"{}\"", a.id())));
            assert_eq!(serde_json::from_str::<Algorithm>(&s).unwrap(), a);
        }
        assert!(serde_json::from_str::<Algorithm>(r#"{"algo":"spider","steps":5}"#).is_err());
    }

    #[test]
    fn step_scale_semantics() {
        let a = Algorithm::AdaSpider(AdaSpiderConfig::default())
            .with_step_scale(10.0)
            .unwrap();
        assert_eq!(
            a,
            Algorithm::AdaSpider(AdaSpiderConfig {
                beta0: 0.1,
                ..Default::default()
            })
        );
        let s = Algorithm::Sgd(SgdConfig::new(0.01, 3))
            .with_step_scale(0.5)
            .unwrap();
        assert_eq!(s, Algorithm::Sgd(SgdConfig::new(0.5, 3)));
        assert!(s.with_step_scale(0.0).is_err());
    }

    #[test]
    fn runs_are_deterministic() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = QuadraticProblem::random_rotated(6, 2, -0.2, 1.0, &mut rng);
        for alg in all_algorithms(25) {
            let a = alg
                .run(&p, &[0.3, 0.4], &mut ChaCha8Rng::seed_from_u64(5))
                .unwrap();
            let b = alg
                .run(&p, &[0.3, 0.4], &mut ChaCha8Rng::seed_from_u64(5))
                .unwrap();
            assert_eq!(a, b);
        }
    }
}
