use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::ParamVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AlgorithmId {
    AdaSpider,
    Spider,
    SpiderBoost,
    Svrg,
    Sgd,
    #[serde(rename = "adagrad")]
    AdaGradNorm,
}

impl AlgorithmId {
    pub const ALL: [AlgorithmId; 6] = [
        AlgorithmId::AdaSpider,
        AlgorithmId::Spider,
        AlgorithmId::SpiderBoost,
        AlgorithmId::Svrg,
        AlgorithmId::Sgd,
        AlgorithmId::AdaGradNorm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AlgorithmId::AdaSpider => "adaspider",
            AlgorithmId::Spider => "spider",
            AlgorithmId::SpiderBoost => "spiderboost",
            AlgorithmId::Svrg => "svrg",
            AlgorithmId::Sgd => "sgd",
            AlgorithmId::AdaGradNorm => "adagrad",
        }
    }

    /// Variance-reduced methods (periodic full gradients).
    pub fn is_variance_reduced(self) -> bool {
        !matches!(self, AlgorithmId::Sgd | AlgorithmId::AdaGradNorm)
    }
}

impl std::fmt::Display for AlgorithmId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for AlgorithmId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        AlgorithmId::ALL
            .into_iter()
            .find(|id| id.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::Config(format!("unknown algorithm `{s}`")))
    }
}

/// One optimizer step `x_{t+1} = x_t − γ_t·∇_t`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: usize,
    pub step_size: f64,
    /// `‖∇_t‖` of the search direction actually used.
    pub direction_norm: f64,
    /// Charged oracle calls including this step.
    pub oracle_calls: u64,
}

/// Uncharged measurement at `x_t`, taken once per `n` charged calls and at
/// the final iterate.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PassRecord {
    pub t: usize,
    /// Charged calls spent to reach `x_t`.
    pub oracle_calls: u64,
    pub loss: f64,
    pub grad_norm: f64,
    /// Step size used from `x_t` (the last one used, for the final iterate).
    pub step_size: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Completed,
    /// The iterate after step `step` left the finite/bounded region.
    Diverged {
        step: usize,
        reason: String,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunTrace {
    pub algorithm: AlgorithmId,
    pub num_components: usize,
    pub steps: Vec<StepRecord>,
    pub passes: Vec<PassRecord>,
    /// `x_0, …, x_T` (without the offending point when the run diverged).
    pub iterates: Vec<ParamVector>,
    pub status: RunStatus,
}

impl RunTrace {
    /// Number of steps taken.
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn oracle_calls(&self) -> u64 {
        self.steps.last().map_or(0, |s| s.oracle_calls)
    }

    pub fn is_diverged(&self) -> bool {
        matches!(self.status, RunStatus::Diverged { .. })
    }

    pub fn final_point(&self) -> Option<&ParamVector> {
        self.iterates.last()
    }

    /// True gradient norm at the last measured iterate; infinite when the
    /// run diverged.
    pub fn final_grad_norm(&self) -> f64 {
        if self.is_diverged() {
            return f64::INFINITY;
        }
        self.passes.last().map_or(f64::INFINITY, |p| p.grad_norm)
    }

    pub fn best_grad_norm(&self) -> f64 {
        self.passes
            .iter()
            .map(|p| p.grad_norm)
            .fold(f64::INFINITY, f64::min)
    }
}

/// The output point of a run: one iterate drawn uniformly from
/// `x_0, …, x_{T−1}`, and the measured iterate with the smallest true
/// gradient norm (earliest on ties).
pub fn select_output<R: Rng + ?Sized>(trace: &RunTrace, rng: &mut R) -> Result<(ParamVector, ParamVector)> {
    let t = trace.len().min(trace.iterates.len());
    if t == 0 || trace.passes.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let uniform = trace.iterates[rng.random_range(0..t)].clone();
    let mut best = &trace.passes[0];
    for pass in &trace.passes[1..] {
        if pass.grad_norm < best.grad_norm {
            best = pass;
        }
    }
    let best_iterate = trace.iterates.get(best.t).ok_or(Error::EmptyTrace)?.clone();
    Ok((uniform, best_iterate))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn trace_with_norms(norms: &[f64]) -> RunTrace {
        let iterates = (0..=norms.len())
            .map(|t| ParamVector::new(vec![t as f64]).unwrap())
            .collect();
        RunTrace {
            algorithm: AlgorithmId::AdaSpider,
            num_components: 1,
            steps: (0..norms.len())
                .map(|t| StepRecord {
                    t,
                    step_size: 0.1,
                    direction_norm: 1.0,
                    oracle_calls: t as u64 + 1,
                })
                .collect(),
            passes: norms
                .iter()
                .enumerate()
                .map(|(t, &g)| PassRecord {
                    t,
                    oracle_calls: t as u64,
                    loss: 0.0,
                    grad_norm: g,
                    step_size: 0.1,
                })
                .collect(),
            iterates,
            status: RunStatus::Completed,
        }
    }

    #[test]
    fn best_iterate_has_smallest_measured_norm() {
        let trace = trace_with_norms(&[3.0, 1.0, 2.0]);
        let (_, best) = select_output(&trace, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(best.as_slice(), &[1.0]);
    }

    #[test]
    fn ties_pick_earliest() {
        let trace = trace_with_norms(&[2.0, 1.0, 1.0]);
        let (_, best) = select_output(&trace, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert_eq!(best.as_slice(), &[1.0]);
    }

    #[test]
    fn single_step_returns_x0_twice() {
        let trace = trace_with_norms(&[5.0]);
        let (u, b) = select_output(&trace, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(u.as_slice(), &[0.0]);
        assert_eq!(b.as_slice(), &[0.0]);
    }

    #[test]
    fn uniform_choice_is_seeded_and_excludes_final_point() {
        let trace = trace_with_norms(&[1.0; 10]);
        let mut seen = [false; 11];
        for seed in 0..200 {
            let (a, _) = select_output(&trace, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            let (b, _) = select_output(&trace, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
            assert_eq!(a, b);
            seen[a[0] as usize] = true;
        }
        assert!(seen[..10].iter().all(|&s| s));
        assert!(!seen[10]);
    }

    #[test]
    fn empty_trace_is_an_error() {
        let trace = trace_with_norms(&[]);
        assert!(matches!(
            select_output(&trace, &mut ChaCha8Rng::seed_from_u64(0)),
            Err(Error::EmptyTrace)
        ));
    }

    #[test]
    fn algorithm_names_round_trip() {
        for id in AlgorithmId::ALL {
            assert_eq!(id.as_str().parse::<AlgorithmId>().unwrap(), id);
            assert_eq!(serde_json::to_string(&id).unwrap(), format!("\"{id}\""));
        }
        assert!("adam".parse::<AlgorithmId>().is_err());
    }
}
