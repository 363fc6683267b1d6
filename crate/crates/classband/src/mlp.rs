//! Small feed-forward classifiers: construction, training, persistence, and
//! the layer hooks used for latent-space work.
//!
//! Layer indexing convention: index `l` counts post-activation outputs, with
//! `l = 0` standing for the raw input. `latent(x, l)` runs layers `0..l`;
//! `partial_forward(z, l)` runs layers `l..`. The two compose to the exact
//! full forward pass, executing the identical layer sequence, so the results
//! agree bit for bit.

use std::fs::File;
use std::io::{BufReader, BufWriter};
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adam::{AdamParams, AdamState};
use crate::checkpoint::{self, MAGIC_CLASSIFIER};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::net::{forward_affine, grad_wrt_params, softmax_probs, Activation, LayerParams};
use crate::tensor::Tensor;

/// Architecture of a classifier: input dim first, class count last.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MlpSpec {
    pub layer_dims: Vec<usize>,
    pub seed: u64,
}

impl MlpSpec {
    pub fn new(layer_dims: Vec<usize>, seed: u64) -> Result<Self> {
        let spec = Self { layer_dims, seed };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.layer_dims.len() < 2 {
            return Err(Error::contract(format!(
                "spec needs at least input and output dims, got {:?}",
                self.layer_dims
            )));
        }
        if self.layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::contract(format!(
                "spec dims must be positive, got {:?}",
                self.layer_dims
            )));
        }
        if *self.layer_dims.last().unwrap() < 2 {
            return Err(Error::contract("class count must be at least 2"));
        }
        Ok(())
    }
}

/// A trained (or freshly initialized) feed-forward classifier.
///
/// Hidden layers use ReLU; the last layer is identity and produces logits.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<LayerParams>,
}

/// Training hyperparameters for [`train_adam`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            batch_size: 32,
            epochs: 200,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        // learning_rate 0 is legal and leaves the model untouched.
        if !(self.learning_rate >= 0.0) {
            return Err(Error::contract("learning_rate must be non-negative"));
        }
        if self.batch_size == 0 || self.epochs == 0 {
            return Err(Error::contract("batch_size and epochs must be positive"));
        }
        for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
            if !(0.0..1.0).contains(&b) {
                return Err(Error::contract(format!("{name} must lie in [0, 1), got {b}")));
            }
        }
        if !(self.adam_eps > 0.0) {
            return Err(Error::contract("adam_eps must be positive"));
        }
        Ok(())
    }

    fn adam_params(&self) -> AdamParams {
        AdamParams {
            learning_rate: self.learning_rate,
            beta1: self.adam_beta1,
            beta2: self.adam_beta2,
            eps: self.adam_eps,
        }
    }
}

/// Draws zero-mean weights scaled by `1/sqrt(in_dim)`; biases start at zero.
/// Deterministic in the seed. Shared by classifier and decoder construction.
pub(crate) fn init_layers(dims: &[usize], seed: u64) -> Vec<LayerParams> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(dims.len() - 1);
    for k in 0..dims.len() - 1 {
        let (in_dim, out_dim) = (dims[k], dims[k + 1]);
        let scale = 1.0 / (in_dim as f64).sqrt();
        let data: Vec<f64> = (0..out_dim * in_dim)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let activation = if k + 1 == dims.len() - 1 {
            Activation::Identity
        } else {
            Activation::Relu
        };
        layers.push(
            LayerParams::new(
                Tensor::new(vec![out_dim, in_dim], data).expect("init shape"),
                Tensor::zeros(vec![out_dim]),
                activation,
            )
            .expect("init layer"),
        );
    }
    layers
}

/// Index of the largest entry, ties broken toward the lowest index.
pub fn argmax_lowest(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Builds a fresh model from a spec. Deterministic in the spec seed.
pub fn init_model(spec: &MlpSpec) -> Result<MlpModel> {
    spec.validate()?;
    Ok(MlpModel {
        layers: init_layers(&spec.layer_dims, spec.seed),
    })
}

impl MlpModel {
    pub(crate) fn from_layers(layers: Vec<LayerParams>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::contract("model needs at least one layer"));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim() != pair[1].in_dim() {
                return Err(Error::ShapeMismatch {
                    context: "MlpModel layer chain",
                    expected: vec![pair[0].out_dim()],
                    found: vec![pair[1].in_dim()],
                });
            }
        }
        if layers.last().unwrap().out_dim() < 2 {
            return Err(Error::contract("model must output at least 2 classes"));
        }
        Ok(Self { layers })
    }

    pub fn layers(&self) -> &[LayerParams] {
        &self.layers
    }

    pub(crate) fn layers_mut(&mut self) -> &mut [LayerParams] {
        &mut self.layers
    }

    /// Layers from index `l` onward — the partial network behind
    /// [`MlpModel::partial_forward`].
    pub fn layers_from(&self, layer_index: usize) -> Result<&[LayerParams]> {
        self.check_layer_index(layer_index)?;
        Ok(&self.layers[layer_index..])
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim()
    }

    pub fn class_count(&self) -> usize {
        self.layers.last().unwrap().out_dim()
    }

    /// Number of hidden layers (valid latent indices run `0..=hidden_layer_count`).
    pub fn hidden_layer_count(&self) -> usize {
        self.layers.len() - 1
    }

    /// Output dimension of latent index `l` (`l = 0` is the input itself).
    pub fn latent_dim(&self, layer_index: usize) -> Result<usize> {
        self.check_layer_index(layer_index)?;
        Ok(if layer_index == 0 {
            self.input_dim()
        } else {
            self.layers[layer_index - 1].out_dim()
        })
    }

    fn check_layer_index(&self, layer_index: usize) -> Result<()> {
        if layer_index > self.hidden_layer_count() {
            return Err(Error::contract(format!(
                "layer index {layer_index} out of range, model has {} hidden layers",
                self.hidden_layer_count()
            )));
        }
        Ok(())
    }

    fn apply_layers(&self, x: &Tensor, range: std::ops::Range<usize>) -> Result<Tensor> {
        let mut cur = x.clone();
        for layer in &self.layers[range] {
            cur = forward_affine(&cur, layer)?;
        }
        Ok(cur)
    }

    /// Full forward pass to logits.
    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.apply_layers(x, 0..self.layers.len())
    }

    /// Activations after hidden layer `layer_index`; `0` returns the input.
    pub fn latent(&self, x: &Tensor, layer_index: usize) -> Result<Tensor> {
        self.check_layer_index(layer_index)?;
        self.apply_layers(x, 0..layer_index)
    }

    /// Applies the remaining layers `layer_index..` to a latent point.
    pub fn partial_forward(&self, z: &Tensor, layer_index: usize) -> Result<Tensor> {
        self.check_layer_index(layer_index)?;
        self.apply_layers(z, layer_index..self.layers.len())
    }

    /// Predicted class (argmax, ties to the lowest index) and softmax probabilities.
    pub fn predict(&self, x: &Tensor) -> Result<(usize, Tensor)> {
        let logits = self.forward(x)?;
        let probs = softmax_probs(&logits)?;
        Ok((argmax_lowest(logits.data()), probs))
    }
}

/// Trains with Adam over shuffled mini-batches; the shuffle is deterministic
/// in `cfg.seed`. Returns the trained model and the per-epoch mean loss trace.
pub fn train_adam(
    model: &MlpModel,
    data: &Dataset,
    cfg: &TrainConfig,
) -> Result<(MlpModel, Vec<f64>)> {
    cfg.validate()?;
    if data.points.is_empty() {
        return Err(Error::contract("training data must be nonempty"));
    }
    for (i, p) in data.points.iter().enumerate() {
        if !p.is_vector_of(model.input_dim()) {
            return Err(Error::ShapeMismatch {
                context: "train_adam data point",
                expected: vec![model.input_dim()],
                found: p.shape().to_vec(),
            });
        }
        if data.labels[i] >= model.class_count() {
            return Err(Error::contract(format!(
                "label {} out of range for {} classes",
                data.labels[i],
                model.class_count()
            )));
        }
    }

    let mut trained = model.clone();
    let mut adam = AdamState::new(trained.layers());
    let params = cfg.adam_params();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut indices: Vec<usize> = (0..data.points.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        indices.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for chunk in indices.chunks(cfg.batch_size) {
            let batch: Vec<(Tensor, usize)> = chunk
                .iter()
                .map(|&i| (data.points[i].clone(), data.labels[i]))
                .collect();
            let grads = grad_wrt_params(trained.layers(), &batch)?;
            epoch_loss += grads.loss * batch.len() as f64;
            adam.update(
                trained.layers_mut(),
                grads.grad_params.as_ref().expect("params requested"),
                &params,
            );
        }
        let mean = epoch_loss / data.points.len() as f64;
        if !mean.is_finite() {
            return Err(Error::Training {
                epoch,
                message: format!("mean loss became {mean}"),
            });
        }
        trace.push(mean);
    }
    Ok((trained, trace))
}

/// Fraction of points whose predicted class equals the dataset label.
pub fn accuracy(model: &MlpModel, data: &Dataset) -> Result<f64> {
    let hits = crate::exec::try_map_collect(&data.points, |p| {
        model.predict(p).map(|(c, _)| c)
    })?;
    let correct = hits
        .iter()
        .zip(&data.labels)
        .filter(|(c, l)| c == l)
        .count();
    Ok(correct as f64 / data.points.len() as f64)
}

/// Writes a versioned binary checkpoint (magic `CPTH`).
pub fn save_model(model: &MlpModel, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    checkpoint::write_checkpoint(&mut w, MAGIC_CLASSIFIER, None, model.layers())
}

/// Reads a checkpoint written by [`save_model`]; round-trips are bitwise.
pub fn load_model(path: &Path) -> Result<MlpModel> {
    let mut r = BufReader::new(File::open(path)?);
    let (_, layers) = checkpoint::read_checkpoint(&mut r, MAGIC_CLASSIFIER, false)?;
    MlpModel::from_layers(layers)
}
