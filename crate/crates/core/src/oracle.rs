//! The finite-sum gradient oracle.
//!
//! Every optimizer sees a problem `f(x) = (1/n) Σ f_i(x)` only through the
//! functions in this module. Charged evaluations go through an
//! [`OracleCounter`]; the `measure_*` functions are the uncharged path used
//! for logging and verification.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::vecops;

/// Dense decision variable `x ∈ ℝᵈ`. All entries are finite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(coordinate) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFiniteParameter { coordinate });
        }
        Ok(ParamVector(values))
    }

    pub fn zeros(dim: usize) -> Self {
        ParamVector(vec![0.0; dim])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        vecops::norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        vecops::norm_sq(&self.0)
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for ParamVector {
    type Error = Error;

    fn try_from(values: Vec<f64>) -> Result<Self> {
        ParamVector::new(values)
    }
}

impl From<ParamVector> for Vec<f64> {
    fn from(p: ParamVector) -> Vec<f64> {
        p.0
    }
}

/// A finite sum of `n` smooth components over `ℝᵈ`.
///
/// Implementors use zero-based component indices; the public oracle
/// functions ([`component_gradient`]) take the 1-based index `i ∈ {1,…,n}`
/// and do the range check. Implementations must be immutable once built so
/// that concurrent runs can share them.
pub trait FiniteSumProblem: Send + Sync {
    fn num_components(&self) -> usize;

    fn dim(&self) -> usize;

    /// `f_index(x)`, zero-based index.
    fn component_value(&self, index: usize, x: &[f64]) -> f64;

    /// `out += scale * ∇f_index(x)`, zero-based index.
    fn add_component_gradient(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]);

    /// Smoothness constant `L` of every component, when known.
    fn smoothness(&self) -> Option<f64> {
        None
    }
}

/// Number of component-gradient evaluations charged to one run.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct OracleCounter {
    component_calls: u64,
}

impl OracleCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn calls(&self) -> u64 {
        self.component_calls
    }

    pub(crate) fn charge(&mut self, calls: u64) {
        self.component_calls += calls;
    }
}

pub(crate) fn check_dim<P: FiniteSumProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<()> {
    if x.len() != problem.dim() {
        return Err(Error::DimensionMismatch {
            expected: problem.dim(),
            got: x.len(),
        });
    }
    Ok(())
}

fn check_finite(out: &[f64], index: usize) -> Result<()> {
    if out.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteGradient { component: index + 1 })
    }
}

/// `out += scale * ∇f_index(x)` with a finiteness check, charging one call.
pub(crate) fn add_component_gradient_charged<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    index: usize,
    x: &[f64],
    scale: f64,
    out: &mut [f64],
    counter: &mut OracleCounter,
) -> Result<()> {
    counter.charge(1);
    problem.add_component_gradient(index, x, scale, out);
    check_finite(out, index)
}

/// Overwrites `out` with `∇f(x)`, charging `n` calls when a counter is given.
pub(crate) fn full_gradient_into<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    out: &mut [f64],
    counter: Option<&mut OracleCounter>,
) -> Result<()> {
    check_dim(problem, x)?;
    let n = problem.num_components();
    out.iter_mut().for_each(|v| *v = 0.0);
    let scale = 1.0 / n as f64;
    for index in 0..n {
        problem.add_component_gradient(index, x, scale, out);
        check_finite(out, index)?;
    }
    if let Some(counter) = counter {
        counter.charge(n as u64);
    }
    Ok(())
}

/// `∇f(x) = (1/n) Σᵢ ∇fᵢ(x)`; charges `n` oracle calls.
pub fn full_gradient<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    x: &[f64],
    counter: &mut OracleCounter,
) -> Result<ParamVector> {
    let mut out = vec![0.0; problem.dim()];
    full_gradient_into(problem, x, &mut out, Some(counter))?;
    Ok(ParamVector(out))
}

/// `∇fᵢ(x)` for the 1-based component index `i`; charges one oracle call.
pub fn component_gradient<P: FiniteSumProblem + ?Sized>(
    problem: &P,
    i: usize,
    x: &[f64],
    counter: &mut OracleCounter,
) -> Result<ParamVector> {
    let n = problem.num_components();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    check_dim(problem, x)?;
    let mut out = vec![0.0; problem.dim()];
    add_component_gradient_charged(problem, i - 1, x, 1.0, &mut out, counter)?;
    Ok(ParamVector(out))
}

/// `fᵢ(x)` for the 1-based component index `i`. Values are never charged.
pub fn component_value<P: FiniteSumProblem + ?Sized>(problem: &P, i: usize, x: &[f64]) -> Result<f64> {
    let n = problem.num_components();
    if i == 0 || i > n {
        return Err(Error::IndexOutOfRange { index: i, n });
    }
    check_dim(problem, x)?;
    Ok(problem.component_value(i - 1, x))
}

/// Uncharged full gradient, for metrics and verification only.
pub fn measure_gradient<P: FiniteSumProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<ParamVector> {
    let mut out = vec![0.0; problem.dim()];
    full_gradient_into(problem, x, &mut out, None)?;
    Ok(ParamVector(out))
}

/// Uncharged objective value `f(x)`.
pub fn measure_loss<P: FiniteSumProblem + ?Sized>(problem: &P, x: &[f64]) -> Result<f64> {
    check_dim(problem, x)?;
    let n = problem.num_components();
    let total: f64 = (0..n).map(|i| problem.component_value(i, x)).sum();
    Ok(total / n as f64)
}

/// Central-difference gradient:
/// `(value_fn(x + h·eⱼ) − value_fn(x − h·eⱼ)) / 2h` for each coordinate `j`.
pub fn finite_difference_gradient<F>(value_fn: F, x: &[f64], h: f64) -> Result<ParamVector>
where
    F: Fn(&[f64]) -> f64,
{
    if !(h > 0.0) || !h.is_finite() {
        return Err(Error::invalid("h", format!("step must be positive, got {h}")));
    }
    let mut probe = x.to_vec();
    let mut grad = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        probe[j] = x[j] + h;
        let up = value_fn(&probe);
        probe[j] = x[j] - h;
        let down = value_fn(&probe);
        probe[j] = x[j];
        grad.push((up - down) / (2.0 * h));
    }
    ParamVector::new(grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::QuadraticProblem;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn two_scalar_quadratics() -> QuadraticProblem {
        // f₁(x) = x², f₂(x) = 2x²
        QuadraticProblem::diagonal(vec![vec![2.0], vec![4.0]], vec![vec![0.0], vec![0.0]]).unwrap()
    }

    #[test]
    fn full_gradient_is_mean_and_charges_n() {
        let p = two_scalar_quadratics();
        let mut counter = OracleCounter::new();
        let g = full_gradient(&p, &[1.0], &mut counter).unwrap();
        assert_eq!(g.as_slice(), &[3.0]);
        assert_eq!(counter.calls(), 2);
    }

    #[test]
    fn zero_component_gradients_give_zero_vector() {
        let p = QuadraticProblem::diagonal(vec![vec![0.0; 3]; 4], vec![vec![0.0; 3]; 4]).unwrap();
        let mut counter = OracleCounter::new();
        let g = full_gradient(&p, &[1.0, -2.0, 0.5], &mut counter).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn full_gradient_matches_enumerated_components() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let p = QuadraticProblem::random_rotated(5, 3, 0.1, 2.0, &mut rng);
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
        let mut counter = OracleCounter::new();
        let full = full_gradient(&p, &x, &mut counter).unwrap();
        let mut mean = vec![0.0; 3];
        for i in 1..=5 {
            let g = component_gradient(&p, i, &x, &mut counter).unwrap();
            vecops::axpy(1.0 / 5.0, &g, &mut mean);
        }
        assert!(vecops::dist(&full, &mean) < 1e-14);
        assert_eq!(counter.calls(), 10);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = two_scalar_quadratics();
        let mut counter = OracleCounter::new();
        let err = full_gradient(&p, &[1.0, 2.0], &mut counter).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { expected: 1, got: 2 }));
        assert_eq!(counter.calls(), 0);
    }

    #[test]
    fn component_index_is_one_based() {
        let p = two_scalar_quadratics();
        let mut counter = OracleCounter::new();
        assert_eq!(
            component_gradient(&p, 1, &[1.0], &mut counter)
                .unwrap()
                .as_slice(),
            &[2.0]
        );
        assert_eq!(
            component_gradient(&p, 2, &[1.0], &mut counter)
                .unwrap()
                .as_slice(),
            &[4.0]
        );
        assert!(matches!(
            component_gradient(&p, 0, &[1.0], &mut counter),
            Err(Error::IndexOutOfRange { index: 0, n: 2 })
        ));
        assert!(component_gradient(&p, 3, &[1.0], &mut counter).is_err());
        assert_eq!(counter.calls(), 2);
    }

    struct Exploding;

    impl FiniteSumProblem for Exploding {
        fn num_components(&self) -> usize {
            3
        }
        fn dim(&self) -> usize {
            1
        }
        fn component_value(&self, _: usize, _: &[f64]) -> f64 {
            0.0
        }
        fn add_component_gradient(&self, index: usize, _: &[f64], scale: f64, out: &mut [f64]) {
            out[0] += scale * if index == 1 { f64::NAN } else { 1.0 };
        }
    }

    #[test]
    fn non_finite_gradient_names_component() {
        let mut counter = OracleCounter::new();
        let err = full_gradient(&Exploding, &[0.0], &mut counter).unwrap_err();
        assert!(matches!(err, Error::NonFiniteGradient { component: 2 }));
    }

    #[test]
    fn measured_gradient_is_uncharged() {
        let p = two_scalar_quadratics();
        let g = measure_gradient(&p, &[1.0]).unwrap();
        assert_eq!(g.as_slice(), &[3.0]);
        assert!((measure_loss(&p, &[1.0]).unwrap() - 1.5).abs() < 1e-15);
    }

    #[test]
    fn finite_difference_of_square() {
        let g = finite_difference_gradient(|x| x[0] * x[0], &[1.0], 1e-5).unwrap();
        assert!((g[0] - 2.0).abs() < 1e-8);
    }

    #[test]
    fn finite_difference_of_constant_is_exactly_zero() {
        let g = finite_difference_gradient(|_| 4.25, &[1.0, -3.0, 7.0], 1e-5).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn finite_difference_rejects_bad_step() {
        assert!(finite_difference_gradient(|x| x[0], &[1.0], 0.0).is_err());
        assert!(finite_difference_gradient(|x| x[0], &[1.0], -1e-3).is_err());
    }

    #[test]
    fn param_vector_rejects_non_finite() {
        assert!(ParamVector::new(vec![1.0, f64::INFINITY]).is_err());
        assert!(serde_json::from_str::<ParamVector>("[1.0, 2.0]").is_ok());
    }
}
