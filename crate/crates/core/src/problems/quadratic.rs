use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::oracle::FiniteSumProblem;

/// `fᵢ(x) = ½ xᵀAᵢx + bᵢᵀx` with symmetric `Aᵢ`. Used as a small instance
/// with exactly known smoothness for the verification checks.
#[derive(Clone, Debug)]
pub struct QuadraticProblem {
    dim: usize,
    /// Row-major `d × d` matrices.
    hessians: Vec<Vec<f64>>,
    linear: Vec<Vec<f64>>,
    smoothness: Option<f64>,
}

impl QuadraticProblem {
    pub fn new(
        dim: usize,
        hessians: Vec<Vec<f64>>,
        linear: Vec<Vec<f64>>,
        smoothness: Option<f64>,
    ) -> Result<Self> {
        if hessians.is_empty() || hessians.len() != linear.len() {
            return Err(Error::invalid(
                "hessians",
                "need one hessian and one linear term per component",
            ));
        }
        for (h, b) in hessians.iter().zip(&linear) {
            if h.len() != dim * dim || b.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: b.len(),
                });
            }
            for r in 0..dim {
                for c in 0..r {
                    if h[r * dim + c] != h[c * dim + r] {
                        return Err(Error::invalid("hessians", "must be symmetric"));
                    }
                }
            }
        }
        Ok(QuadraticProblem {
            dim,
            hessians,
            linear,
            smoothness,
        })
    }

    /// Diagonal Hessians; the smoothness constant is the largest `|diag|`.
    pub fn diagonal(diagonals: Vec<Vec<f64>>, linear: Vec<Vec<f64>>) -> Result<Self> {
        let dim = diagonals.first().map_or(0, Vec::len);
        let smoothness = diagonals.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
        let hessians = diagonals
            .iter()
            .map(|diag| {
                let mut h = vec![0.0; dim * dim];
                for (j, &v) in diag.iter().enumerate() {
                    if j < dim {
                        h[j * dim + j] = v;
                    }
                }
                h
            })
            .collect();
        if diagonals.iter().any(|d| d.len() != dim) {
            return Err(Error::invalid("diagonals", "ragged diagonals"));
        }
        QuadraticProblem::new(dim, hessians, linear, Some(smoothness))
    }

    /// Random instance `Aᵢ = Qᵢ diag(λ) Qᵢᵀ` with eigenvalues uniform in
    /// `[min_eig, max_eig]` and `Qᵢ` a product of random plane rotations, so
    /// the smoothness constant `max |λ|` is known exactly.
    pub fn random_rotated<R: Rng + ?Sized>(
        n: usize,
        dim: usize,
        min_eig: f64,
        max_eig: f64,
        rng: &mut R,
    ) -> Self {
        let mut hessians = Vec::with_capacity(n);
        let mut linear = Vec::with_capacity(n);
        let mut smoothness = 0.0f64;
        for _ in 0..n {
            let eigs: Vec<f64> = (0..dim).map(|_| rng.random_range(min_eig..=max_eig)).collect();
            smoothness = eigs.iter().fold(smoothness, |m, v| m.max(v.abs()));
            let q = random_rotation(dim, rng);
            let mut h = vec![0.0; dim * dim];
            for r in 0..dim {
                for c in 0..=r {
                    let v: f64 = (0..dim).map(|k| q[r * dim + k] * eigs[k] * q[c * dim + k]).sum();
                    h[r * dim + c] = v;
                    h[c * dim + r] = v;
                }
            }
            hessians.push(h);
            linear.push((0..dim).map(|_| rng.sample(StandardNormal)).collect());
        }
        QuadraticProblem {
            dim,
            hessians,
            linear,
            smoothness: Some(smoothness),
        }
    }

    /// Every component identically zero.
    pub fn zero(n: usize, dim: usize) -> Self {
        QuadraticProblem::diagonal(vec![vec![0.0; dim]; n], vec![vec![0.0; dim]; n])
            .expect("well-formed zero problem")
    }
}

fn random_rotation<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut q = vec![0.0; dim * dim];
    for j in 0..dim {
        q[j * dim + j] = 1.0;
    }
    for a in 0..dim {
        for b in a + 1..dim {
            let theta = rng.random_range(0.0..std::f64::consts::TAU);
            let (s, c) = theta.sin_cos();
            for r in 0..dim {
                let qa = q[r * dim + a];
                let qb = q[r * dim + b];
                q[r * dim + a] = c * qa - s * qb;
                q[r * dim + b] = s * qa + c * qb;
            }
        }
    }
    q
}

impl FiniteSumProblem for QuadraticProblem {
    fn num_components(&self) -> usize {
        self.hessians.len()
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn component_value(&self, index: usize, x: &[f64]) -> f64 {
        let h = &self.hessians[index];
        let d = self.dim;
        let quad: f64 = (0..d)
            .map(|r| x[r] * (0..d).map(|c| h[r * d + c] * x[c]).sum::<f64>())
            .sum();
        let lin: f64 = self.linear[index].iter().zip(x).map(|(b, v)| b * v).sum();
        0.5 * quad + lin
    }

    fn add_component_gradient(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let h = &self.hessians[index];
        let d = self.dim;
        for r in 0..d {
            let hx: f64 = (0..d).map(|c| h[r * d + c] * x[c]).sum();
            out[r] += scale * (hx + self.linear[index][r]);
        }
    }

    fn smoothness(&self) -> Option<f64> {
        self.smoothness
    }
}
