//! The bounded non-convex penalty `g(x) = Σⱼ xⱼ² / (1 + xⱼ²)`.

/// `g(x)`, always in `[0, d)`.
pub fn nonconvex_regularizer(x: &[f64]) -> f64 {
    x.iter()
        .map(|&z| {
            let z2 = z * z;
            z2 / (1.0 + z2)
        })
        .sum()
}

/// `∇g(x)ⱼ = 2xⱼ / (1 + xⱼ²)²`.
pub fn nonconvex_regularizer_grad(x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; x.len()];
    add_regularizer_grad(x, 1.0, &mut out);
    out
}

pub(crate) fn add_regularizer_grad(x: &[f64], scale: f64, out: &mut [f64]) {
    for (o, &z) in out.iter_mut().zip(x) {
        let denom = 1.0 + z * z;
        *o += scale * 2.0 * z / (denom * denom);
    }
}

/// Bound on `|g''|` per coordinate (attained at 0), so `λg` is `2λ`-smooth.
pub const REGULARIZER_SMOOTHNESS: f64 = 2.0;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::finite_difference_gradient;
    use crate::vecops::relative_error;
    use proptest::prelude::*;

    #[test]
    fn known_values() {
        assert_eq!(nonconvex_regularizer(&[0.0, 0.0]), 0.0);
        assert_eq!(nonconvex_regularizer(&[1.0, 1.0]), 1.0);
        assert!((nonconvex_regularizer(&[3.0]) - 0.9).abs() < 1e-15);
    }

    #[test]
    fn known_gradients() {
        assert_eq!(nonconvex_regularizer_grad(&[0.0, 0.0, 0.0]), vec![0.0; 3]);
        assert_eq!(nonconvex_regularizer_grad(&[1.0]), vec![0.5]);
    }

    #[test]
    fn gradient_matches_central_differences() {
        let x = [0.3, -1.7, 2.2, 0.05];
        let fd = finite_difference_gradient(nonconvex_regularizer, &x, 1e-5).unwrap();
        let g = nonconvex_regularizer_grad(&x);
        assert!(relative_error(&g, &fd, 1e-12) < 1e-6);
    }

    proptest! {
        #[test]
        fn bounded_value_and_gradient(x in prop::collection::vec(-1e6f64..1e6, 1..12)) {
            let d = x.len() as f64;
            let v = nonconvex_regularizer(&x);
            prop_assert!(v >= 0.0 && v < d);
            for gj in nonconvex_regularizer_grad(&x) {
                prop_assert!(gj.abs() <= 0.65);
            }
        }
    }
}
