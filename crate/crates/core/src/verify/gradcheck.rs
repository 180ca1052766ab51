//! Analytic gradients of every objective against central differences.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{generate_synthetic, SyntheticKind};
use crate::error::{Error, Result};
use crate::oracle::{finite_difference_gradient, FiniteSumProblem};
use crate::problems::{
    kaiming_uniform_scaled_init, nonconvex_regularizer, nonconvex_regularizer_grad, LossKind,
    MlpClassification, MlpLayout, RegularizedErm, DEFAULT_LAMBDA, DEFAULT_MLP_DIMS,
};
use crate::vecops;

pub const GRADCHECK_TOLERANCE: f64 = 1e-5;
pub const FINITE_DIFFERENCE_STEP: f64 = 1e-5;
pub const DEFAULT_GRADCHECK_POINTS: usize = 20;
/// Denominator floor of the relative error, so near-zero gradients are
/// compared absolutely.
const RELATIVE_FLOOR: f64 = 1e-8;

/// Deliberate corruption used to confirm the checker can fail.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GradFault {
    #[default]
    None,
    /// Doubles the analytic regularizer gradient.
    RegularizerGradient,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradcheckResult {
    pub target: String,
    pub points: usize,
    pub max_rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

fn gaussian<R: Rng + ?Sized>(rng: &mut R, d: usize, scale: f64) -> Vec<f64> {
    (0..d)
        .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
        .collect()
}

fn summarize(target: &str, errors: &[f64]) -> GradcheckResult {
    let max = errors.iter().copied().fold(0.0, f64::max);
    GradcheckResult {
        target: target.to_string(),
        points: errors.len(),
        max_rel_error: max,
        tolerance: GRADCHECK_TOLERANCE,
        pass: errors.iter().all(|e| *e <= GRADCHECK_TOLERANCE),
    }
}

/// Relative error of the component gradients of `problem` at random
/// `(i, x)` pairs drawn by `point`.
fn component_errors<P, R>(
    problem: &P,
    points: usize,
    rng: &mut R,
    point: impl Fn(&mut R) -> Vec<f64>,
) -> Result<Vec<f64>>
where
    P: FiniteSumProblem,
    R: Rng,
{
    let n = problem.num_components();
    (0..points)
        .map(|_| {
            let i = rng.random_range(0..n);
            let x = point(rng);
            let mut analytic = vec![0.0; problem.dim()];
            problem.add_component_gradient(i, &x, 1.0, &mut analytic);
            let fd =
                finite_difference_gradient(|z| problem.component_value(i, z), &x, FINITE_DIFFERENCE_STEP)?;
            Ok(vecops::relative_error(&analytic, &fd, RELATIVE_FLOOR))
        })
        .collect()
}

/// Checks the logistic and squared ERM components, the regularizer and the
/// MLP at `points` random points each.
pub fn gradcheck(points: usize, seed: u64, fault: GradFault) -> Result<Vec<GradcheckResult>> {
    if points == 0 {
        return Err(Error::invalid("points", "need at least one point"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut results = Vec::with_capacity(4);

    for (name, kind, loss) in [
        ("logistic", SyntheticKind::SeparableLogistic, LossKind::Logistic),
        ("squared", SyntheticKind::Quadratic, LossKind::Squared),
    ] {
        let data = generate_synthetic(kind, 30, 8, rng.random())?;
        let problem = RegularizedErm::new(data, loss, DEFAULT_LAMBDA)?;
        let errors = component_errors(&problem, points, &mut rng, |r| gaussian(r, 8, 1.0))?;
        results.push(summarize(name, &errors));
    }

    let errors: Vec<f64> = (0..points)
        .map(|_| {
            let x = gaussian(&mut rng, 6, 2.0);
            let mut analytic = nonconvex_regularizer_grad(&x);
            if fault == GradFault::RegularizerGradient {
                analytic.iter_mut().for_each(|g| *g *= 2.0);
            }
            let fd = finite_difference_gradient(nonconvex_regularizer, &x, FINITE_DIFFERENCE_STEP)?;
            Ok(vecops::relative_error(&analytic, &fd, RELATIVE_FLOOR))
        })
        .collect::<Result<_>>()?;
    results.push(summarize("regularizer", &errors));

    let layout = MlpLayout::new(DEFAULT_MLP_DIMS.to_vec())?;
    let classes = layout.num_classes();
    let data = generate_synthetic(
        SyntheticKind::Clusters { classes },
        12,
        layout.input_dim(),
        rng.random(),
    )?;
    let problem = MlpClassification::new(layout.clone(), &data)?;
    let errors = component_errors(&problem, points, &mut rng, |r| {
        kaiming_uniform_scaled_init(layout.dims(), 1.0, r)
            .expect("valid layout")
            .into_params()
            .into_vec()
            .into_iter()
            .map(|w| w + 0.05 * r.sample::<f64, _>(StandardNormal))
            .collect()
    })?;
    results.push(summarize("mlp", &errors));
    Ok(results)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_targets_pass() {
        let results = gradcheck(DEFAULT_GRADCHECK_POINTS, 0, GradFault::None).unwrap();
        let names: Vec<&str> = results.iter().map(|r| r.target.as_str()).collect();
        assert_eq!(names, ["logistic", "squared", "regularizer", "mlp"]);
        for r in &results {
            assert!(r.pass, "{r:?}");
            assert_eq!(r.points, DEFAULT_GRADCHECK_POINTS);
        }
    }

    #[test]
    fn deterministic() {
        assert_eq!(
            gradcheck(1, 3, GradFault::None).unwrap(),
            gradcheck(1, 3, GradFault::None).unwrap()
        );
    }

    #[test]
    fn fault_detected() {
        let results = gradcheck(2, 0, GradFault::RegularizerGradient).unwrap();
        let reg = results.iter().find(|r| r.target == "regularizer").unwrap();
        assert!(!reg.pass);
        assert!(results
            .iter()
            .filter(|r| r.target != "regularizer")
            .all(|r| r.pass));
    }

    #[test]
    fn zero_points_rejected() {
        assert!(gradcheck(0, 0, GradFault::None).is_err());
    }
}
