use rand::Rng;

use crate::error::{Error, Result};
use crate::oracle::{
    add_component_gradient_charged, check_dim, full_gradient_into, FiniteSumProblem, OracleCounter,
};
use crate::vecops;

/// State of the stochastic path-integrated differential estimator
///
/// ```text
/// ∇_t = ∇f(x_t)                                   if t mod period = 0
/// ∇_t = (1/b) Σ_{i ∈ batch} [∇fᵢ(x_t) − ∇fᵢ(x_{t−1})] + ∇_{t−1}   otherwise
/// ```
///
/// together with the running sum `Σ_{s≤t} ‖∇_s‖²` that drives the adaptive
/// step size.
#[derive(Clone, Debug)]
pub struct SpiderEstimatorState {
    current_estimate: Vec<f64>,
    previous_point: Vec<f64>,
    step_index: usize,
    grad_norm_accumulator: f64,
    period: usize,
    batch: usize,
}

impl SpiderEstimatorState {
    pub fn new(dim: usize, period: usize, batch: usize) -> Result<Self> {
        if period == 0 {
            return Err(Error::invalid("period", "must be at least 1"));
        }
        if batch == 0 {
            return Err(Error::invalid("batch", "must be at least 1"));
        }
        Ok(SpiderEstimatorState {
            current_estimate: vec![0.0; dim],
            previous_point: vec![0.0; dim],
            step_index: 0,
            grad_norm_accumulator: 0.0,
            period,
            batch,
        })
    }

    pub fn current_estimate(&self) -> &[f64] {
        &self.current_estimate
    }

    pub fn previous_point(&self) -> &[f64] {
        &self.previous_point
    }

    /// Index `t` of the next update.
    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn grad_norm_accumulator(&self) -> f64 {
        self.grad_norm_accumulator
    }

    pub fn period(&self) -> usize {
        self.period
    }

    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Forms `∇_t` at `x_t`, sampling the inner batch uniformly with
    /// replacement. A batch of at least `n` uses every component once.
    pub fn update<P, R>(
        &mut self,
        problem: &P,
        x_t: &[f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<&[f64]>
    where
        P: FiniteSumProblem + ?Sized,
        R: Rng + ?Sized,
    {
        let n = problem.num_components();
        let indices: Vec<usize> = if self.step_index.is_multiple_of(self.period) {
            Vec::new()
        } else if self.batch >= n {
            (0..n).collect()
        } else {
            (0..self.batch).map(|_| rng.random_range(0..n)).collect()
        };
        self.advance(problem, x_t, &indices, counter)
    }

    /// Same as [`update`](Self::update) with the inner indices given
    /// explicitly (1-based). Ignored on full-gradient steps.
    pub fn update_with_indices<P>(
        &mut self,
        problem: &P,
        x_t: &[f64],
        indices: &[usize],
        counter: &mut OracleCounter,
    ) -> Result<&[f64]>
    where
        P: FiniteSumProblem + ?Sized,
    {
        let n = problem.num_components();
        let mut zero_based = Vec::with_capacity(indices.len());
        for &i in indices {
            if i == 0 || i > n {
                return Err(Error::IndexOutOfRange { index: i, n });
            }
            zero_based.push(i - 1);
        }
        if !self.step_index.is_multiple_of(self.period) && zero_based.is_empty() {
            return Err(Error::invalid("indices", "inner step needs at least one index"));
        }
        self.advance(problem, x_t, &zero_based, counter)
    }

    fn advance<P>(
        &mut self,
        problem: &P,
        x_t: &[f64],
        indices: &[usize],
        counter: &mut OracleCounter,
    ) -> Result<&[f64]>
    where
        P: FiniteSumProblem + ?Sized,
    {
        check_dim(problem, x_t)?;
        if self.current_estimate.len() != x_t.len() {
            return Err(Error::DimensionMismatch {
                expected: self.current_estimate.len(),
                got: x_t.len(),
            });
        }
        if self.step_index.is_multiple_of(self.period) {
            full_gradient_into(problem, x_t, &mut self.current_estimate, Some(counter))?;
        } else {
            let scale = 1.0 / indices.len() as f64;
            for &i in indices {
                add_component_gradient_charged(problem, i, x_t, scale, &mut self.current_estimate, counter)?;
                add_component_gradient_charged(
                    problem,
                    i,
                    &self.previous_point,
                    -scale,
                    &mut self.current_estimate,
                    counter,
                )?;
            }
        }
        self.previous_point.copy_from_slice(x_t);
        self.step_index += 1;
        self.grad_norm_accumulator += vecops::norm_sq(&self.current_estimate);
        Ok(&self.current_estimate)
    }
}
