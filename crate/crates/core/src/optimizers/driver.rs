//! The shared step loop: every optimizer supplies a direction and a step
//! size per iteration, the driver moves the iterate, keeps the books and
//! guards against divergence.

use rand::Rng;

use super::trace::{AlgorithmId, PassRecord, RunStatus, RunTrace, StepRecord};
use crate::error::{Error, Result};
use crate::oracle::{
    check_dim, measure_gradient, measure_loss, FiniteSumProblem, OracleCounter, ParamVector,
};
use crate::vecops;

/// Iterates with any coordinate beyond this magnitude count as diverged.
pub const DIVERGENCE_LIMIT: f64 = 1e12;

/// What an observer sees at step `t`, before the update is applied.
pub struct StepView<'a> {
    pub t: usize,
    pub x: &'a [f64],
    pub direction: &'a [f64],
    pub step_size: f64,
    pub oracle_calls: u64,
}

pub(crate) trait StepRule<P: FiniteSumProblem + ?Sized> {
    /// Writes the direction `∇_t` at `x` into `dir` and returns `γ_t`.
    fn direction<R: Rng + ?Sized>(
        &mut self,
        problem: &P,
        t: usize,
        x: &[f64],
        dir: &mut [f64],
        rng: &mut R,
        counter: &mut OracleCounter,
    ) -> Result<f64>;
}

fn out_of_bounds(x: &[f64]) -> Option<String> {
    x.iter()
        .position(|v| !v.is_finite() || v.abs() > DIVERGENCE_LIMIT)
        .map(|j| format!("coordinate {j} = {} outside ±{DIVERGENCE_LIMIT:e}", x[j]))
}

pub(crate) fn validate_steps(steps: usize) -> Result<()> {
    if steps == 0 {
        return Err(Error::invalid("steps", "need at least one step"));
    }
    Ok(())
}

pub(crate) fn drive<P, R, S>(
    algorithm: AlgorithmId,
    problem: &P,
    x0: &[f64],
    steps: usize,
    rule: &mut S,
    rng: &mut R,
    observer: &mut dyn FnMut(&StepView<'_>),
) -> Result<RunTrace>
where
    P: FiniteSumProblem + ?Sized,
    R: Rng + ?Sized,
    S: StepRule<P>,
{
    validate_steps(steps)?;
    check_dim(problem, x0)?;
    let x0 = ParamVector::new(x0.to_vec())?;
    let n = problem.num_components() as u64;
    let d = problem.dim();

    let mut x = x0.to_vec();
    let mut dir = vec![0.0; d];
    let mut counter = OracleCounter::new();
    let mut trace = RunTrace {
        algorithm,
        num_components: n as usize,
        steps: Vec::with_capacity(steps),
        passes: Vec::new(),
        iterates: Vec::with_capacity(steps + 1),
        status: RunStatus::Completed,
    };
    trace.iterates.push(x0);
    let mut last_logged_epoch: Option<u64> = None;
    let mut step_size = f64::NAN;

    for t in 0..steps {
        let calls_before = counter.calls();
        step_size = match rule.direction(problem, t, &x, &mut dir, rng, &mut counter) {
            Ok(g) => g,
            Err(Error::NonFiniteGradient { component }) => {
                trace.status = RunStatus::Diverged {
                    step: t,
                    reason: format!("non-finite gradient from component {component} at step {t}"),
                };
                return Ok(trace);
            }
            Err(e) => return Err(e),
        };

        let epoch = calls_before / n;
        if last_logged_epoch.is_none_or(|e| epoch > e) {
            last_logged_epoch = Some(epoch);
            trace.passes.push(PassRecord {
                t,
                oracle_calls: calls_before,
                loss: measure_loss(problem, &x)?,
                grad_norm: measure_gradient(problem, &x)?.norm(),
                step_size,
            });
        }

        observer(&StepView {
            t,
            x: &x,
            direction: &dir,
            step_size,
            oracle_calls: counter.calls(),
        });
        trace.steps.push(StepRecord {
            t,
            step_size,
            direction_norm: vecops::norm(&dir),
            oracle_calls: counter.calls(),
        });

        vecops::axpy(-step_size, &dir, &mut x);
        if let Some(reason) = out_of_bounds(&x) {
            trace.status = RunStatus::Diverged {
                step: t,
                reason: format!("iterate after step {t}: {reason}"),
            };
            return Ok(trace);
        }
        trace.iterates.push(ParamVector::new(x.clone())?);
    }

    let loss = measure_loss(problem, &x)?;
    let grad = match measure_gradient(problem, &x) {
        Ok(g) => g.norm(),
        Err(Error::NonFiniteGradient { .. }) => f64::INFINITY,
        Err(e) => return Err(e),
    };
    trace.passes.push(PassRecord {
        t: steps,
        oracle_calls: counter.calls(),
        loss,
        grad_norm: grad,
        step_size,
    });
    Ok(trace)
}
