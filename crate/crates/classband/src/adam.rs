//! Adam updates over a stack of layer parameters.

use crate::net::{LayerGrads, LayerParams};
use crate::tensor::Tensor;

/// First/second moment accumulators for one layer stack.
#[derive(Debug, Clone)]
pub struct AdamState {
    m: Vec<LayerGrads>,
    v: Vec<LayerGrads>,
    step: u32,
}

/// Adam hyperparameters.
#[derive(Debug, Clone, Copy)]
pub struct AdamParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    /// Zero-initialized moments matching the given layer shapes.
    pub fn new(layers: &[LayerParams]) -> Self {
        let zero = |l: &LayerParams| LayerGrads {
            weights: Tensor::zeros(l.weights.shape().to_vec()),
            bias: Tensor::zeros(l.bias.shape().to_vec()),
        };
        Self {
            m: layers.iter().map(zero).collect(),
            v: layers.iter().map(zero).collect(),
            step: 0,
        }
    }

    /// One bias-corrected Adam step applied in place.
    pub fn update(&mut self, layers: &mut [LayerParams], grads: &[LayerGrads], p: &AdamParams) {
        debug_assert_eq!(layers.len(), grads.len());
        self.step += 1;
        let lr_t = p.learning_rate * (1.0 - p.beta2.powi(self.step as i32)).sqrt()
            / (1.0 - p.beta1.powi(self.step as i32));
        for ((layer, grad), (m, v)) in layers
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            apply(
                layer.weights.data_mut(),
                grad.weights.data(),
                m.weights.data_mut(),
                v.weights.data_mut(),
                lr_t,
                p,
            );
            apply(
                layer.bias.data_mut(),
                grad.bias.data(),
                m.bias.data_mut(),
                v.bias.data_mut(),
                lr_t,
                p,
            );
        }
    }
}

fn apply(params: &mut [f64], grads: &[f64], m: &mut [f64], v: &mut [f64], lr_t: f64, p: &AdamParams) {
    for i in 0..params.len() {
        let g = grads[i];
        m[i] = p.beta1 * m[i] + (1.0 - p.beta1) * g;
        v[i] = p.beta2 * v[i] + (1.0 - p.beta2) * g * g;
        params[i] -= lr_t * m[i] / (v[i].sqrt() + p.eps);
    }
}
