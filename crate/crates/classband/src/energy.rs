//! Differentiable scalar fields over a representation space.
//!
//! The relaxer only needs `energy` and `gradient`. Classifier-backed fields
//! additionally expose `classify`, which drives class-profile checks and the
//! target-class early stop.

use crate::error::{Error, Result};
use crate::mlp::{argmax_lowest, MlpModel};
use crate::net::{cross_entropy, grad_wrt_input, softmax_probs};
use crate::tensor::Tensor;

/// A scalar energy with an exact gradient, evaluated point by point.
///
/// Implementations must be safe for concurrent read-only evaluation; the
/// gradient must agree with central differences of `energy`.
pub trait EnergyField: Sync {
    fn energy(&self, z: &Tensor) -> Result<f64>;

    fn gradient(&self, z: &Tensor) -> Result<Tensor>;

    /// Whether [`EnergyField::classify`] is available.
    fn has_classifier(&self) -> bool {
        false
    }

    /// Predicted class and softmax probabilities at `z`, for fields backed by
    /// a classifier.
    fn classify(&self, z: &Tensor) -> Result<(usize, Tensor)> {
        let _ = z;
        Err(Error::MissingCapability("classify"))
    }

    /// The class the field drives paths toward, when there is one.
    fn target_class(&self) -> Option<usize> {
        None
    }
}

/// Cross-entropy of a classifier's partial network against a target class:
/// the loss surface paths are relaxed on.
#[derive(Debug, Clone)]
pub struct ClassifierEnergy<'a> {
    model: &'a MlpModel,
    layer_index: usize,
    target: usize,
}

impl<'a> ClassifierEnergy<'a> {
    pub fn new(model: &'a MlpModel, layer_index: usize, target: usize) -> Result<Self> {
        // Validates the layer index.
        model.layers_from(layer_index)?;
        if target >= model.class_count() {
            return Err(Error::contract(format!(
                "target class {target} out of range for {} classes",
                model.class_count()
            )));
        }
        Ok(Self {
            model,
            layer_index,
            target,
        })
    }

    pub fn layer_index(&self) -> usize {
        self.layer_index
    }
}

impl EnergyField for ClassifierEnergy<'_> {
    fn energy(&self, z: &Tensor) -> Result<f64> {
        let logits = self.model.partial_forward(z, self.layer_index)?;
        cross_entropy(&logits, self.target)
    }

    fn gradient(&self, z: &Tensor) -> Result<Tensor> {
        let layers = self.model.layers_from(self.layer_index)?;
        Ok(grad_wrt_input(layers, z, self.target)?.grad_input)
    }

    fn has_classifier(&self) -> bool {
        true
    }

    fn classify(&self, z: &Tensor) -> Result<(usize, Tensor)> {
        let logits = self.model.partial_forward(z, self.layer_index)?;
        let probs = softmax_probs(&logits)?;
        Ok((argmax_lowest(logits.data()), probs))
    }

    fn target_class(&self) -> Option<usize> {
        Some(self.target)
    }
}

/// `E(z) = (|z| - radius)^2`: a circular valley whose minimum-energy path
/// between two points on the circle is the connecting arc. Used as an
/// analytic oracle for the relaxer.
#[derive(Debug, Clone, Copy)]
pub struct RadialValley {
    pub radius: f64,
}

impl EnergyField for RadialValley {
    fn energy(&self, z: &Tensor) -> Result<f64> {
        let d = z.norm() - self.radius;
        Ok(d * d)
    }

    fn gradient(&self, z: &Tensor) -> Result<Tensor> {
        let n = z.norm();
        if n == 0.0 {
            // The cusp at the origin; any subgradient direction works.
            return Ok(Tensor::zeros(z.shape().to_vec()));
        }
        Ok(z.scaled(2.0 * (n - self.radius) / n))
    }
}

/// A constant field: zero gradient everywhere.
#[derive(Debug, Clone, Copy)]
pub struct ConstantField(pub f64);

impl EnergyField for ConstantField {
    fn energy(&self, _z: &Tensor) -> Result<f64> {
        Ok(self.0)
    }

    fn gradient(&self, z: &Tensor) -> Result<Tensor> {
        Ok(Tensor::zeros(z.shape().to_vec()))
    }
}
