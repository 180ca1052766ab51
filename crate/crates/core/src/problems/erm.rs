use serde::{Deserialize, Serialize};

use super::regularizer::{add_regularizer_grad, nonconvex_regularizer, REGULARIZER_SMOOTHNESS};
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{self, FiniteSumProblem, ParamVector};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LossKind {
    Logistic,
    Squared,
}

/// Default regularizer weight for the ERM benchmarks.
pub const DEFAULT_LAMBDA: f64 = 0.1;

/// `fᵢ(x) = ℓ(x, (aᵢ, bᵢ)) + λ·g(x)`, so that `f` is the regularized
/// empirical risk.
#[derive(Clone, Debug)]
pub struct RegularizedErm {
    dataset: Dataset,
    targets: Vec<f64>,
    loss: LossKind,
    lambda: f64,
    smoothness: f64,
}

impl RegularizedErm {
    pub fn new(dataset: Dataset, loss: LossKind, lambda: f64) -> Result<Self> {
        if !(lambda >= 0.0) || !lambda.is_finite() {
            return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
        }
        if dataset.is_empty() {
            return Err(Error::invalid("dataset", "no rows"));
        }
        if dataset.dim() == 0 {
            return Err(Error::invalid("dataset", "zero feature dimension"));
        }
        let targets = match loss {
            LossKind::Logistic => dataset.binary_labels()?,
            LossKind::Squared => dataset.labels().to_vec(),
        };
        let max_row_sq = (0..dataset.len())
            .map(|i| dataset.row_norm_sq(i))
            .fold(0.0, f64::max);
        let loss_curvature = match loss {
            LossKind::Logistic => 0.25,
            LossKind::Squared => 1.0,
        };
        let smoothness = loss_curvature * max_row_sq + REGULARIZER_SMOOTHNESS * lambda;
        Ok(RegularizedErm {
            dataset,
            targets,
            loss,
            lambda,
            smoothness,
        })
    }

    pub fn dataset(&self) -> &Dataset {
        &self.dataset
    }

    pub fn loss(&self) -> LossKind {
        self.loss
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// Uncharged `∇fᵢ(x)` for the 1-based index `i`.
    pub fn component_gradient(&self, i: usize, x: &[f64]) -> Result<ParamVector> {
        let mut counter = oracle::OracleCounter::new();
        oracle::component_gradient(self, i, x, &mut counter)
    }
}

fn softplus(z: f64) -> f64 {
    z.max(0.0) + (-z.abs()).exp().ln_1p()
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

impl FiniteSumProblem for RegularizedErm {
    fn num_components(&self) -> usize {
        self.dataset.len()
    }

    fn dim(&self) -> usize {
        self.dataset.dim()
    }

    fn component_value(&self, index: usize, x: &[f64]) -> f64 {
        let m = self.dataset.row_dot(index, x);
        let b = self.targets[index];
        let loss = match self.loss {
            LossKind::Logistic => softplus(-b * m),
            LossKind::Squared => 0.5 * (m - b) * (m - b),
        };
        loss + self.lambda * nonconvex_regularizer(x)
    }

    fn add_component_gradient(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let m = self.dataset.row_dot(index, x);
        let b = self.targets[index];
        let coeff = match self.loss {
            LossKind::Logistic => -b * sigmoid(-b * m),
            LossKind::Squared => m - b,
        };
        for &(idx, v) in self.dataset.row(index) {
            out[idx - 1] += scale * coeff * v;
        }
        if self.lambda != 0.0 {
            add_regularizer_grad(x, scale * self.lambda, out);
        }
    }

    fn smoothness(&self) -> Option<f64> {
        Some(self.smoothness)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic_with_truth, parse_libsvm_str, SyntheticKind, QUADRATIC_NOISE};
    use crate::oracle::{finite_difference_gradient, full_gradient, measure_gradient, OracleCounter};
    use crate::vecops::{self, relative_error};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn logistic_gradient_at_origin() {
        let ds = parse_libsvm_str("-1 1:2 3:-4\n1 2:1").unwrap();
        let p = RegularizedErm::new(ds, LossKind::Logistic, 0.1).unwrap();
        let g = p.component_gradient(1, &[0.0; 3]).unwrap();
        // −b·a/2 with b = −1, a = (2, 0, −4)
        assert_eq!(g.as_slice(), &[1.0, 0.0, -2.0]);
    }

    #[test]
    fn squared_gradient_unit_case() {
        let ds = parse_libsvm_str("0 1:1").unwrap().with_dim(2).unwrap();
        let p = RegularizedErm::new(ds, LossKind::Squared, 0.0).unwrap();
        let g = p.component_gradient(1, &[1.0, 0.0]).unwrap();
        assert_eq!(g.as_slice(), &[1.0, 0.0]);
    }

    #[test]
    fn index_out_of_range() {
        let ds = parse_libsvm_str("1 1:1").unwrap();
        let p = RegularizedErm::new(ds, LossKind::Logistic, 0.1).unwrap();
        assert!(p.component_gradient(2, &[0.0]).is_err());
        assert!(p.component_gradient(0, &[0.0]).is_err());
    }

    #[test]
    fn logistic_rejects_non_binary_labels() {
        let ds = parse_libsvm_str("3 1:1").unwrap();
        assert!(RegularizedErm::new(ds, LossKind::Logistic, 0.1).is_err());
    }

    #[test]
    fn gradients_match_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for loss in [LossKind::Logistic, LossKind::Squared] {
            let kind = match loss {
                LossKind::Logistic => SyntheticKind::SeparableLogistic,
                LossKind::Squared => SyntheticKind::Quadratic,
            };
            let (ds, _) = generate_synthetic_with_truth(kind, 12, 5, 2).unwrap();
            let p = RegularizedErm::new(ds, loss, 0.1).unwrap();
            for _ in 0..20 {
                let x: Vec<f64> = (0..5).map(|_| rng.random_range(-2.0..2.0)).collect();
                let i = rng.random_range(1..=12);
                let g = p.component_gradient(i, &x).unwrap();
                let fd = finite_difference_gradient(|y| p.component_value(i - 1, y), &x, 1e-5).unwrap();
                assert!(relative_error(&g, &fd, 1e-8) < 1e-5, "{loss:?} i={i}");
            }
        }
    }

    #[test]
    fn mean_of_components_is_full_gradient() {
        let (ds, _) = generate_synthetic_with_truth(SyntheticKind::SeparableLogistic, 17, 4, 8).unwrap();
        let p = RegularizedErm::new(ds, LossKind::Logistic, 0.1).unwrap();
        let x = [0.4, -0.2, 1.1, 0.0];
        let mut mean = vec![0.0; 4];
        for i in 1..=17 {
            vecops::axpy(1.0 / 17.0, &p.component_gradient(i, &x).unwrap(), &mut mean);
        }
        let full = full_gradient(&p, &x, &mut OracleCounter::new()).unwrap();
        assert!(vecops::dist(&full, &mean) < 1e-15);
    }

    /// Gaussian elimination with partial pivoting; test-only oracle.
    fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
        let n = b.len();
        for col in 0..n {
            let piv = (col..n)
                .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
                .unwrap();
            a.swap(col, piv);
            b.swap(col, piv);
            for row in col + 1..n {
                let f = a[row][col] / a[col][col];
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
        let mut x = vec![0.0; n];
        for row in (0..n).rev() {
            let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
            x[row] = (b[row] - s) / a[row][row];
        }
        x
    }

    #[test]
    fn least_squares_gradient_small_at_generating_vector() {
        let (ds, w) = generate_synthetic_with_truth(SyntheticKind::Quadratic, 200, 10, 4).unwrap();
        let mut ata = vec![vec![0.0; 10]; 10];
        let mut atb = vec![0.0; 10];
        for i in 0..ds.len() {
            let a = ds.dense_row(i);
            for r in 0..10 {
                for c in 0..10 {
                    ata[r][c] += a[r] * a[c];
                }
                atb[r] += a[r] * ds.labels()[i];
            }
        }
        let w_star = solve(ata, atb);
        let p = RegularizedErm::new(ds, LossKind::Squared, 0.0).unwrap();
        assert!(measure_gradient(&p, &w_star).unwrap().norm() < 1e-10);
        assert!(vecops::dist(&w_star, &w) < QUADRATIC_NOISE);
        assert!(measure_gradient(&p, &w).unwrap().norm() <= QUADRATIC_NOISE);
    }
}
