//! Feed-forward layer arithmetic and exact reverse-mode gradients.
//!
//! The network family is a fixed stack of affine layers with ReLU or identity
//! activations, so the backward pass is hand-derived per layer rather than
//! taped. [`fd_gradient`] is the independent central-difference oracle the
//! analytic gradients are checked against.

use crate::error::{Error, Result};
use crate::exec;
use crate::tensor::Tensor;

/// Element-wise activation applied after an affine layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Relu => x.max(0.0),
            Activation::Identity => x,
        }
    }

    /// Derivative with respect to the pre-activation value.
    ///
    /// ReLU uses the subgradient 0 at exactly zero.
    #[inline]
    fn derivative(self, pre: f64) -> f64 {
        match self {
            Activation::Relu => {
                if pre > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// One affine layer: `y = activation(W x + b)`.
///
/// Weights are row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Tensor,
    pub bias: Tensor,
    pub activation: Activation,
}

impl LayerParams {
    pub fn new(weights: Tensor, bias: Tensor, activation: Activation) -> Result<Self> {
        if weights.shape().len() != 2 {
            return Err(Error::contract(format!(
                "layer weights must be 2-d, got shape {:?}",
                weights.shape()
            )));
        }
        let out_dim = weights.shape()[0];
        if !bias.is_vector_of(out_dim) {
            return Err(Error::ShapeMismatch {
                context: "LayerParams::new",
                expected: vec![out_dim],
                found: bias.shape().to_vec(),
            });
        }
        Ok(Self {
            weights,
            bias,
            activation,
        })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }
}

/// Applies one layer: `activation(W x + b)`.
pub fn forward_affine(x: &Tensor, layer: &LayerParams) -> Result<Tensor> {
    let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
    if !x.is_vector_of(in_dim) {
        return Err(Error::ShapeMismatch {
            context: "forward_affine",
            expected: vec![in_dim],
            found: x.shape().to_vec(),
        });
    }
    let w = layer.weights.data();
    let b = layer.bias.data();
    let xd = x.data();
    let mut out = vec![0.0; out_dim];
    for (o, out_v) in out.iter_mut().enumerate() {
        let row = &w[o * in_dim..(o + 1) * in_dim];
        let mut sum = b[o];
        for (wv, xv) in row.iter().zip(xd) {
            sum += wv * xv;
        }
        *out_v = layer.activation.apply(sum);
    }
    Ok(Tensor::vector(out))
}

/// Softmax with max-subtraction. Entries are non-negative and sum to one.
pub fn softmax_probs(logits: &Tensor) -> Result<Tensor> {
    let k = logits.len();
    if logits.shape().len() != 1 || k < 2 {
        return Err(Error::contract(format!(
            "softmax needs a vector of at least 2 logits, got shape {:?}",
            logits.shape()
        )));
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("softmax logits".into()));
    }
    let m = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.data().iter().map(|&v| (v - m).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(Tensor::vector(exps.into_iter().map(|e| e / sum).collect()))
}

/// Cross-entropy of the softmax distribution against a class index.
///
/// Computed as `logsumexp(logits) - logits[target]` after max-subtraction,
/// which stays finite for any finite logits and is exactly `ln K` when all
/// logits coincide.
pub fn cross_entropy(logits: &Tensor, target: usize) -> Result<f64> {
    let k = logits.len();
    if logits.shape().len() != 1 || k < 2 {
        return Err(Error::contract(format!(
            "cross_entropy needs a vector of at least 2 logits, got shape {:?}",
            logits.shape()
        )));
    }
    if target >= k {
        return Err(Error::contract(format!(
            "target class {target} out of range for {k} classes"
        )));
    }
    if !logits.all_finite() {
        return Err(Error::NonFinite("cross_entropy logits".into()));
    }
    let m = logits.data().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logits.data().iter().map(|&v| (v - m).exp()).sum();
    Ok(sum.ln() - (logits.data()[target] - m))
}

/// Per-layer parameter gradients, shaped like the layer they belong to.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

/// Loss value plus gradients from one backward pass.
#[derive(Debug, Clone)]
pub struct GradResult {
    pub loss: f64,
    /// Gradient with respect to the network input (batch mean for batched calls).
    pub grad_input: Tensor,
    /// Per-layer weight and bias gradients, when requested.
    pub grad_params: Option<Vec<LayerGrads>>,
}

/// Forward pass keeping per-layer pre- and post-activation values.
struct ForwardTrace {
    pre: Vec<Tensor>,
    post: Vec<Tensor>,
}

fn forward_trace(layers: &[LayerParams], x: &Tensor) -> Result<ForwardTrace> {
    let mut pre = Vec::with_capacity(layers.len());
    let mut post = Vec::with_capacity(layers.len());
    let mut cur = x.clone();
    for layer in layers {
        let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());
        if !cur.is_vector_of(in_dim) {
            return Err(Error::ShapeMismatch {
                context: "forward_trace",
                expected: vec![in_dim],
                found: cur.shape().to_vec(),
            });
        }
        let w = layer.weights.data();
        let b = layer.bias.data();
        let mut s = vec![0.0; out_dim];
        for (o, sv) in s.iter_mut().enumerate() {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            let mut sum = b[o];
            for (wv, xv) in row.iter().zip(cur.data()) {
                sum += wv * xv;
            }
            *sv = sum;
        }
        let a: Vec<f64> = s.iter().map(|&v| layer.activation.apply(v)).collect();
        pre.push(Tensor::vector(s));
        let act = Tensor::vector(a);
        post.push(act.clone());
        cur = act;
    }
    Ok(ForwardTrace { pre, post })
}

/// Backward pass from a gradient at the network output down to the input.
///
/// Returns the input gradient and, when `want_params` is set, per-layer
/// parameter gradients.
fn backward(
    layers: &[LayerParams],
    x: &Tensor,
    trace: &ForwardTrace,
    grad_output: &Tensor,
    want_params: bool,
) -> (Tensor, Option<Vec<LayerGrads>>) {
    let mut grads: Vec<Option<LayerGrads>> = (0..layers.len()).map(|_| None).collect();
    let mut upstream = grad_output.clone();
    for (k, layer) in layers.iter().enumerate().rev() {
        let pre = &trace.pre[k];
        let input = if k == 0 { x } else { &trace.post[k - 1] };
        let (out_dim, in_dim) = (layer.out_dim(), layer.in_dim());

        // d_pre = upstream ⊙ act'(pre)
        let d_pre: Vec<f64> = upstream
            .data()
            .iter()
            .zip(pre.data())
            .map(|(&g, &s)| g * layer.activation.derivative(s))
            .collect();

        if want_params {
            let mut dw = vec![0.0; out_dim * in_dim];
            for o in 0..out_dim {
                let row = &mut dw[o * in_dim..(o + 1) * in_dim];
                for (i, rv) in row.iter_mut().enumerate() {
                    *rv = d_pre[o] * input.data()[i];
                }
            }
            grads[k] = Some(LayerGrads {
                weights: Tensor::new(vec![out_dim, in_dim], dw).expect("grad shape"),
                bias: Tensor::vector(d_pre.clone()),
            });
        }

        // d_input = W^T d_pre
        let w = layer.weights.data();
        let mut d_in = vec![0.0; in_dim];
        for (o, &dp) in d_pre.iter().enumerate() {
            let row = &w[o * in_dim..(o + 1) * in_dim];
            for (i, wv) in row.iter().enumerate() {
                d_in[i] += wv * dp;
            }
        }
        upstream = Tensor::vector(d_in);
    }
    let grad_params = if want_params {
        Some(grads.into_iter().map(|g| g.expect("filled")).collect())
    } else {
        None
    };
    (upstream, grad_params)
}

/// Gradient at the output of a cross-entropy-over-softmax head.
fn cross_entropy_output_grad(logits: &Tensor, target: usize) -> Result<Tensor> {
    let probs = softmax_probs(logits)?;
    let mut g = probs.data().to_vec();
    g[target] -= 1.0;
    Ok(Tensor::vector(g))
}

/// Loss and exact input gradient of `cross_entropy(layers(z), target)`.
pub fn grad_wrt_input(layers: &[LayerParams], z: &Tensor, target: usize) -> Result<GradResult> {
    if layers.is_empty() {
        return Err(Error::contract("grad_wrt_input needs at least one layer"));
    }
    let trace = forward_trace(layers, z)?;
    let output = trace.post.last().expect("nonempty trace");
    let loss = cross_entropy(output, target)?;
    let grad_out = cross_entropy_output_grad(output, target)?;
    let (grad_input, _) = backward(layers, z, &trace, &grad_out, false);
    Ok(GradResult {
        loss,
        grad_input,
        grad_params: None,
    })
}

/// Mean-over-batch loss and gradients with respect to all weights and biases.
///
/// `grad_input` carries the batch-mean gradient with respect to the inputs.
pub fn grad_wrt_params(layers: &[LayerParams], batch: &[(Tensor, usize)]) -> Result<GradResult> {
    if batch.is_empty() {
        return Err(Error::contract("grad_wrt_params needs a nonempty batch"));
    }
    let per_sample = exec::try_map_collect(batch, |(x, target)| -> Result<_> {
        let trace = forward_trace(layers, x)?;
        let output = trace.post.last().expect("nonempty trace");
        let loss = cross_entropy(output, *target)?;
        let grad_out = cross_entropy_output_grad(output, *target)?;
        let (grad_input, grad_params) = backward(layers, x, &trace, &grad_out, true);
        Ok((loss, grad_input, grad_params.expect("params requested")))
    })?;

    let inv = 1.0 / batch.len() as f64;
    let mut loss = 0.0;
    let mut grad_input = Tensor::zeros(batch[0].0.shape().to_vec());
    let mut acc: Vec<LayerGrads> = layers
        .iter()
        .map(|l| LayerGrads {
            weights: Tensor::zeros(l.weights.shape().to_vec()),
            bias: Tensor::zeros(l.bias.shape().to_vec()),
        })
        .collect();
    for (l, gi, gp) in &per_sample {
        loss += l;
        grad_input.add_scaled(gi, 1.0);
        for (a, g) in acc.iter_mut().zip(gp) {
            a.weights.add_scaled(&g.weights, 1.0);
            a.bias.add_scaled(&g.bias, 1.0);
        }
    }
    loss *= inv;
    grad_input = grad_input.scaled(inv);
    for a in &mut acc {
        a.weights = a.weights.scaled(inv);
        a.bias = a.bias.scaled(inv);
    }
    Ok(GradResult {
        loss,
        grad_input,
        grad_params: Some(acc),
    })
}

/// Central-difference gradient `(f(z + eps e_i) - f(z - eps e_i)) / (2 eps)`.
///
/// The verification oracle for every analytic gradient in this crate; it
/// never shares code with the backward pass.
pub fn fd_gradient<F>(f: F, z: &Tensor, eps: f64) -> Result<Tensor>
where
    F: Fn(&Tensor) -> f64,
{
    if !(eps > 0.0) {
        return Err(Error::contract(format!("fd_gradient eps must be positive, got {eps}")));
    }
    let mut grad = vec![0.0; z.len()];
    let mut probe = z.clone();
    for i in 0..z.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + eps;
        let plus = f(&probe);
        probe.data_mut()[i] = orig - eps;
        let minus = f(&probe);
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite(format!(
                "fd_gradient probe at coordinate {i}"
            )));
        }
        grad[i] = (plus - minus) / (2.0 * eps);
    }
    Tensor::new(z.shape().to_vec(), grad)
}

/// Relative L2 distance `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_l2(a: &Tensor, b: &Tensor) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let diff = a.sub(b).norm();
    let scale = a.norm().max(b.norm()).max(1e-12);
    diff / scale
}
