//! Fully connected ELU network with a softmax cross-entropy head and
//! hand-written backpropagation.
//!
//! Parameters are flattened layer by layer: the `out × in` weight matrix in
//! row-major order followed by the `out` biases.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::oracle::{FiniteSumProblem, ParamVector};

/// Hidden/output widths used for desk-scale runs (input 20, 4 classes).
pub const DEFAULT_MLP_DIMS: [usize; 4] = [20, 16, 16, 4];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MlpLayout {
    dims: Vec<usize>,
}

impl MlpLayout {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::invalid(
                "layer_dims",
                "need at least an input and an output width",
            ));
        }
        if dims.contains(&0) {
            return Err(Error::invalid("layer_dims", "widths must be positive"));
        }
        Ok(MlpLayout { dims })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_classes(&self) -> usize {
        *self.dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.dims.len() - 1
    }

    /// `Σ (in·out + out)`.
    pub fn num_params(&self) -> usize {
        self.dims.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
    }

    fn layer_offsets(&self) -> Vec<usize> {
        let mut offsets = Vec::with_capacity(self.num_layers());
        let mut at = 0;
        for w in self.dims.windows(2) {
            offsets.push(at);
            at += w[0] * w[1] + w[1];
        }
        offsets
    }
}

fn elu(z: f64) -> f64 {
    if z > 0.0 {
        z
    } else {
        z.exp_m1()
    }
}

fn elu_derivative(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else {
        z.exp()
    }
}

fn log_sum_exp(z: &[f64]) -> f64 {
    let max = z.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    max + z.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

struct ForwardCache {
    /// Input to each layer; `inputs[0]` is the sample itself.
    inputs: Vec<Vec<f64>>,
    /// Pre-activations of each layer; the last one holds the logits.
    pre: Vec<Vec<f64>>,
}

fn forward_cached(layout: &MlpLayout, params: &[f64], input: &[f64]) -> ForwardCache {
    let offsets = layout.layer_offsets();
    let last = layout.num_layers() - 1;
    let mut inputs = Vec::with_capacity(layout.num_layers());
    let mut pre = Vec::with_capacity(layout.num_layers());
    let mut act = input.to_vec();
    for (l, w) in layout.dims.windows(2).enumerate() {
        let (n_in, n_out) = (w[0], w[1]);
        let weights = &params[offsets[l]..offsets[l] + n_in * n_out];
        let bias = &params[offsets[l] + n_in * n_out..offsets[l] + n_in * n_out + n_out];
        let z: Vec<f64> = (0..n_out)
            .map(|o| {
                let row = &weights[o * n_in..(o + 1) * n_in];
                bias[o] + row.iter().zip(&act).map(|(a, b)| a * b).sum::<f64>()
            })
            .collect();
        let next = if l < last {
            z.iter().map(|&v| elu(v)).collect()
        } else {
            Vec::new()
        };
        inputs.push(std::mem::replace(&mut act, next));
        pre.push(z);
    }
    ForwardCache { inputs, pre }
}

/// Cross-entropy `−bᵀz + logsumexp(z)` of the logits `z`; adds
/// `scale · ∂loss/∂params` into `grad` when given.
fn loss_and_add_gradient(
    layout: &MlpLayout,
    params: &[f64],
    input: &[f64],
    one_hot: &[f64],
    scale: f64,
    grad: Option<&mut [f64]>,
) -> f64 {
    let cache = forward_cached(layout, params, input);
    let logits = cache.pre.last().unwrap();
    let lse = log_sum_exp(logits);
    let fit: f64 = one_hot.iter().zip(logits).map(|(b, z)| b * z).sum();
    let loss = lse - fit;

    let Some(grad) = grad else {
        return loss;
    };
    let offsets = layout.layer_offsets();
    let mut delta: Vec<f64> = logits
        .iter()
        .zip(one_hot)
        .map(|(z, b)| (z - lse).exp() - b)
        .collect();
    for l in (0..layout.num_layers()).rev() {
        let (n_in, n_out) = (layout.dims[l], layout.dims[l + 1]);
        let a = &cache.inputs[l];
        let w_off = offsets[l];
        let b_off = w_off + n_in * n_out;
        for o in 0..n_out {
            let d = scale * delta[o];
            if d != 0.0 {
                let row = &mut grad[w_off + o * n_in..w_off + (o + 1) * n_in];
                for (g, ai) in row.iter_mut().zip(a) {
                    *g += d * ai;
                }
            }
            grad[b_off + o] += d;
        }
        if l > 0 {
            let weights = &params[w_off..b_off];
            let z_prev = &cache.pre[l - 1];
            delta = (0..n_in)
                .map(|i| {
                    let back: f64 = (0..n_out).map(|o| weights[o * n_in + i] * delta[o]).sum();
                    back * elu_derivative(z_prev[i])
                })
                .collect();
        }
    }
    loss
}

fn check_one_hot(label: &[f64], classes: usize) -> Result<()> {
    if label.len() != classes {
        return Err(Error::NotOneHot(format!(
            "length {} for {classes} classes",
            label.len()
        )));
    }
    let ones = label.iter().filter(|&&v| v == 1.0).count();
    let zeros = label.iter().filter(|&&v| v == 0.0).count();
    if ones != 1 || zeros != classes - 1 {
        return Err(Error::NotOneHot(format!("{label:?}")));
    }
    Ok(())
}

/// A network architecture together with one parameter vector.
#[derive(Clone, Debug, PartialEq)]
pub struct MlpNet {
    layout: MlpLayout,
    params: ParamVector,
}

impl MlpNet {
    pub fn new(layout: MlpLayout, params: ParamVector) -> Result<Self> {
        if params.len() != layout.num_params() {
            return Err(Error::DimensionMismatch {
                expected: layout.num_params(),
                got: params.len(),
            });
        }
        Ok(MlpNet { layout, params })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        let layout = MlpLayout::new(dims)?;
        let params = ParamVector::zeros(layout.num_params());
        Ok(MlpNet { layout, params })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn into_params(self) -> ParamVector {
        self.params
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.layout.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.layout.input_dim(),
                got: input.len(),
            });
        }
        Ok(())
    }

    /// Logits: affine layers with ELU in between, none after the last.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut cache = forward_cached(&self.layout, &self.params, input);
        Ok(cache.pre.pop().unwrap())
    }

    /// Cross-entropy loss and its gradient with respect to every parameter.
    pub fn loss_and_gradient(&self, input: &[f64], one_hot: &[f64]) -> Result<(f64, ParamVector)> {
        self.check_input(input)?;
        check_one_hot(one_hot, self.layout.num_classes())?;
        let mut grad = vec![0.0; self.layout.num_params()];
        let loss = loss_and_add_gradient(&self.layout, &self.params, input, one_hot, 1.0, Some(&mut grad));
        Ok((loss, ParamVector::new(grad)?))
    }
}

/// Uniform weights on `±√(3·c_init/d_in)` (variance `c_init/d_in`), zero biases.
pub fn kaiming_uniform_scaled_init<R: Rng + ?Sized>(
    layer_dims: &[usize],
    c_init: f64,
    rng: &mut R,
) -> Result<MlpNet> {
    if !(c_init > 0.0) || !c_init.is_finite() {
        return Err(Error::invalid(
            "c_init",
            format!("must be positive, got {c_init}"),
        ));
    }
    let layout = MlpLayout::new(layer_dims.to_vec())?;
    let mut params = Vec::with_capacity(layout.num_params());
    for w in layout.dims.windows(2) {
        let (n_in, n_out) = (w[0], w[1]);
        let bound = (3.0 * c_init / n_in as f64).sqrt();
        params.extend((0..n_in * n_out).map(|_| rng.random_range(-bound..=bound)));
        params.extend(std::iter::repeat_n(0.0, n_out));
    }
    MlpNet::new(layout, ParamVector::new(params)?)
}

/// Cross-entropy classification over a dataset; component `i` is sample `i`.
#[derive(Clone, Debug)]
pub struct MlpClassification {
    layout: MlpLayout,
    inputs: Vec<Vec<f64>>,
    classes: Vec<usize>,
}

impl MlpClassification {
    pub fn new(layout: MlpLayout, dataset: &Dataset) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::invalid("dataset", "no rows"));
        }
        if dataset.dim() != layout.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: layout.input_dim(),
                got: dataset.dim(),
            });
        }
        let classes = dataset.class_labels(layout.num_classes())?;
        let inputs = (0..dataset.len()).map(|i| dataset.dense_row(i)).collect();
        Ok(MlpClassification {
            layout,
            inputs,
            classes,
        })
    }

    pub fn layout(&self) -> &MlpLayout {
        &self.layout
    }

    fn one_hot(&self, index: usize) -> Vec<f64> {
        let mut b = vec![0.0; self.layout.num_classes()];
        b[self.classes[index]] = 1.0;
        b
    }
}

impl FiniteSumProblem for MlpClassification {
    fn num_components(&self) -> usize {
        self.inputs.len()
    }

    fn dim(&self) -> usize {
        self.layout.num_params()
    }

    fn component_value(&self, index: usize, x: &[f64]) -> f64 {
        let b = self.one_hot(index);
        loss_and_add_gradient(&self.layout, x, &self.inputs[index], &b, 1.0, None)
    }

    fn add_component_gradient(&self, index: usize, x: &[f64], scale: f64, out: &mut [f64]) {
        let b = self.one_hot(index);
        loss_and_add_gradient(&self.layout, x, &self.inputs[index], &b, scale, Some(out));
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::finite_difference_gradient;
    use crate::vecops::relative_error;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn param_count() {
        let layout = MlpLayout::new(vec![4, 8, 3]).unwrap();
        assert_eq!(layout.num_params(), 4 * 8 + 8 + 8 * 3 + 3);
        assert_eq!(
            MlpLayout::new(DEFAULT_MLP_DIMS.to_vec()).unwrap().num_params(),
            676
        );
    }

    #[test]
    fn zero_net_gives_zero_logits() {
        let net = MlpNet::zeros(vec![3, 5, 2]).unwrap();
        assert_eq!(net.forward(&[1.0, -2.0, 7.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn single_affine_layer() {
        let layout = MlpLayout::new(vec![2, 1]).unwrap();
        let net = MlpNet::new(layout, ParamVector::new(vec![1.0, 1.0, 0.0]).unwrap()).unwrap();
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![3.0]);
    }

    #[test]
    fn output_shape_and_finiteness() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = kaiming_uniform_scaled_init(&[4, 8, 3], 1.0, &mut rng).unwrap();
        let out = net.forward(&[0.1, -0.3, 2.0, 1.0]).unwrap();
        assert_eq!(out.len(), 3);
        assert!(out.iter().all(|v| v.is_finite()));
        assert!(net.forward(&[1.0]).is_err());
    }

    #[test]
    fn zero_net_loss_is_ln2() {
        let net = MlpNet::zeros(vec![3, 2]).unwrap();
        let (loss, _) = net.loss_and_gradient(&[1.0, 2.0, 3.0], &[0.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn binary_softmax_identity() {
        // Single layer [1, 2] with weights (t, 0) and input 1 gives logits (t, 0).
        let layout = MlpLayout::new(vec![1, 2]).unwrap();
        for t in [-3.0, 0.5, 4.0] {
            let net = MlpNet::new(layout.clone(), ParamVector::new(vec![t, 0.0, 0.0, 0.0]).unwrap()).unwrap();
            let (loss, _) = net.loss_and_gradient(&[1.0], &[1.0, 0.0]).unwrap();
            assert!((loss - (-t).exp().ln_1p()).abs() < 1e-14);
        }
    }

    #[test]
    fn rejects_non_one_hot() {
        let net = MlpNet::zeros(vec![2, 3]).unwrap();
        for bad in [vec![1.0, 1.0, 0.0], vec![0.5, 0.5, 0.0], vec![1.0, 0.0]] {
            assert!(matches!(
                net.loss_and_gradient(&[0.0, 0.0], &bad),
                Err(Error::NotOneHot(_))
            ));
        }
    }

    #[test]
    fn stable_for_large_logits() {
        let layout = MlpLayout::new(vec![1, 3]).unwrap();
        let net = MlpNet::new(
            layout,
            ParamVector::new(vec![1e3, -1e3, 0.0, 0.0, 0.0, 0.0]).unwrap(),
        )
        .unwrap();
        for class in 0..3 {
            let mut b = vec![0.0; 3];
            b[class] = 1.0;
            let (loss, grad) = net.loss_and_gradient(&[1.0], &b).unwrap();
            assert!(loss.is_finite());
            assert!(grad.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn backprop_matches_central_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let layout = MlpLayout::new(vec![3, 4, 2]).unwrap();
        for _ in 0..20 {
            let net = kaiming_uniform_scaled_init(layout.dims(), 3.0, &mut rng).unwrap();
            let mut params = net.params().to_vec();
            // nonzero biases so every branch of the ELU gets exercised
            for p in params.iter_mut() {
                *p += rng.random_range(-0.5..0.5);
            }
            let net = MlpNet::new(layout.clone(), ParamVector::new(params.clone()).unwrap()).unwrap();
            let input: Vec<f64> = (0..3).map(|_| rng.random_range(-2.0..2.0)).collect();
            let class = rng.random_range(0..2);
            let mut b = vec![0.0; 2];
            b[class] = 1.0;
            let (_, grad) = net.loss_and_gradient(&input, &b).unwrap();
            let fd = finite_difference_gradient(
                |p| loss_and_add_gradient(&layout, p, &input, &b, 1.0, None),
                &params,
                1e-5,
            )
            .unwrap();
            assert!(relative_error(&grad, &fd, 1e-8) < 1e-5);
        }
    }

    fn weight_variance(net: &MlpNet, layer: usize) -> f64 {
        let layout = net.layout();
        let off = layout.layer_offsets()[layer];
        let (n_in, n_out) = (layout.dims()[layer], layout.dims()[layer + 1]);
        let w = &net.params()[off..off + n_in * n_out];
        w.iter().map(|v| v * v).sum::<f64>() / w.len() as f64
    }

    #[test]
    fn scaled_kaiming_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        // 400 × 250 = 10⁵ weights in the first layer
        let net = kaiming_uniform_scaled_init(&[400, 250, 10], 0.03, &mut rng).unwrap();
        let target = 0.03 / 400.0;
        assert!((weight_variance(&net, 0) - target).abs() <= 0.05 * target);
        let layout = net.layout();
        let off = layout.layer_offsets()[0];
        let bias = &net.params()[off + 400 * 250..off + 400 * 250 + 250];
        assert!(bias.iter().all(|&b| b == 0.0));
    }

    #[test]
    fn scaled_kaiming_bound() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = kaiming_uniform_scaled_init(&[50, 10], 0.01, &mut rng).unwrap();
        let bound = (0.03f64 / 50.0).sqrt();
        let w = &net.params()[..500];
        assert!(w.iter().all(|v| v.abs() <= bound));
        assert!(w.iter().any(|v| v.abs() > 0.9 * bound));
    }

    #[test]
    fn init_is_deterministic_and_validated() {
        let a = kaiming_uniform_scaled_init(&[5, 4, 3], 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        let b = kaiming_uniform_scaled_init(&[5, 4, 3], 0.01, &mut ChaCha8Rng::seed_from_u64(4)).unwrap();
        assert_eq!(a, b);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        assert!(kaiming_uniform_scaled_init(&[], 0.01, &mut rng).is_err());
        assert!(kaiming_uniform_scaled_init(&[3, 2], 0.0, &mut rng).is_err());
    }
}
