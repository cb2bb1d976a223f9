//! Feed-forward scoring network with hand-written backpropagation.
//!
//! `hidden = []` gives a plain linear ranker. Hidden layers use the elu
//! activation; the output layer is linear and one-dimensional, so the score
//! of a document is a single real number.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::ModelError;
use crate::rng::{derive_rng, stream};

/// elu(x) = x for x >= 0, e^x - 1 otherwise.
pub fn elu(x: f64) -> f64 {
    if x >= 0.0 {
        x
    } else {
        x.exp() - 1.0
    }
}

/// Derivative of elu expressed through its output value.
fn elu_grad_from_output(activated: f64) -> f64 {
    if activated >= 0.0 {
        1.0
    } else {
        activated + 1.0
    }
}

/// Architecture descriptor: input width and hidden layer sizes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RankerArch {
    pub input_dim: usize,
    pub hidden: Vec<usize>,
}

impl RankerArch {
    pub fn linear(input_dim: usize) -> Self {
        RankerArch {
            input_dim,
            hidden: Vec::new(),
        }
    }

    pub fn mlp(input_dim: usize, hidden: Vec<usize>) -> Self {
        RankerArch { input_dim, hidden }
    }

    /// (output, input) size of each layer, chaining down to a scalar score.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut sizes = vec![self.input_dim];
        sizes.extend(&self.hidden);
        sizes.push(1);
        sizes.windows(2).map(|w| (w[1], w[0])).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Learnable ranker parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankerParams {
    pub arch: RankerArch,
    pub layers: Vec<DenseLayer>,
}

impl RankerParams {
    /// All-zero parameters. The canonical start for a linear ranker.
    pub fn zeros(arch: RankerArch) -> Self {
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(out, inp)| DenseLayer {
                weights: Matrix::zeros(out, inp),
                bias: vec![0.0; out],
            })
            .collect();
        RankerParams { arch, layers }
    }

    /// Seeded initialization. Linear rankers stay at zero; multi-layer
    /// networks draw weights from uniform(-0.05, 0.05) because zero
    /// initialization never breaks hidden-unit symmetry. Biases start at zero.
    pub fn seeded(arch: RankerArch, seed: u64) -> Self {
        if arch.hidden.is_empty() {
            return Self::zeros(arch);
        }
        let mut rng = derive_rng(seed, stream::MODEL_INIT, 0);
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(out, inp)| DenseLayer {
                weights: Matrix::from_fn(out, inp, |_, _| rng.gen_range(-0.05..0.05)),
                bias: vec![0.0; out],
            })
            .collect();
        RankerParams { arch, layers }
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    /// Flatten all parameters: per layer, weights row-major then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for layer in &self.layers {
            out.extend_from_slice(layer.weights.data());
            out.extend_from_slice(&layer.bias);
        }
        out
    }

    /// Rebuild parameters from a flat array in `flatten` order.
    pub fn from_flat(arch: RankerArch, flat: &[f64]) -> Result<Self, ModelError> {
        let mut params = Self::zeros(arch);
        if flat.len() != params.num_params() {
            return Err(ModelError::ShapeMismatch {
                context: "flat parameter array",
                expected: params.num_params(),
                got: flat.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut params.layers {
            let w = layer.weights.data_mut();
            w.copy_from_slice(&flat[offset..offset + w.len()]);
            offset += w.len();
            let b = layer.bias.len();
            layer.bias.copy_from_slice(&flat[offset..offset + b]);
            offset += b;
        }
        Ok(params)
    }

    /// In-place update `theta += scale * grads`; pass a negative scale for a
    /// descent step.
    pub fn apply_step(&mut self, grads: &RankerGradients, scale: f64) {
        for (layer, grad) in self.layers.iter_mut().zip(&grads.layers) {
            layer.weights.add_scaled(&grad.weights, scale);
            for (b, g) in layer.bias.iter_mut().zip(&grad.bias) {
                *b += scale * g;
            }
        }
    }

    fn forward_cached(&self, features: &[f64]) -> Vec<Vec<f64>> {
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(features.to_vec());
        let last = self.layers.len() - 1;
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut z = layer.weights.matvec(activations.last().expect("nonempty"));
            for (zi, b) in z.iter_mut().zip(&layer.bias) {
                *zi += b;
            }
            if idx < last {
                for zi in z.iter_mut() {
                    *zi = elu(*zi);
                }
            }
            activations.push(z);
        }
        activations
    }

    /// Score a single feature vector.
    pub fn score_one(&self, features: &[f64]) -> Result<f64, ModelError> {
        if features.len() != self.arch.input_dim {
            return Err(ModelError::ShapeMismatch {
                context: "document features",
                expected: self.arch.input_dim,
                got: features.len(),
            });
        }
        Ok(self.forward_cached(features).last().expect("output layer")[0])
    }
}

/// Gradients with the same shape as [`RankerParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct RankerGradients {
    pub layers: Vec<DenseLayer>,
}

impl RankerGradients {
    pub fn zeros(arch: &RankerArch) -> Self {
        RankerGradients {
            layers: RankerParams::zeros(arch.clone()).layers,
        }
    }

    pub fn add_assign(&mut self, other: &RankerGradients) {
        for (a, b) in self.layers.iter_mut().zip(&other.layers) {
            a.weights.add_scaled(&b.weights, 1.0);
            for (x, y) in a.bias.iter_mut().zip(&b.bias) {
                *x += y;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for layer in &mut self.layers {
            for w in layer.weights.data_mut() {
                *w *= factor;
            }
            for b in &mut layer.bias {
                *b *= factor;
            }
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.bias))
            .fold(0.0f64, |m, g| m.max(g.abs()))
    }
}

/// One scalar score per document row.
pub fn score_documents(
    params: &RankerParams,
    features: &[Vec<f64>],
) -> Result<Vec<f64>, ModelError> {
    features.iter().map(|f| params.score_one(f)).collect()
}

/// Exact gradient of `sum_x upstream_x * score(x)` with respect to every
/// parameter, accumulated over the documents of one list.
pub fn score_gradients(
    params: &RankerParams,
    features: &[Vec<f64>],
    upstream: &[f64],
) -> Result<RankerGradients, ModelError> {
    if upstream.len() != features.len() {
        return Err(ModelError::ShapeMismatch {
            context: "upstream gradient",
            expected: features.len(),
            got: upstream.len(),
        });
    }
    let mut grads = RankerGradients::zeros(&params.arch);
    for (feat, &up) in features.iter().zip(upstream) {
        if feat.len() != params.arch.input_dim {
            return Err(ModelError::ShapeMismatch {
                context: "document features",
                expected: params.arch.input_dim,
                got: feat.len(),
            });
        }
        if up == 0.0 {
            continue;
        }
        let activations = params.forward_cached(feat);
        // Output layer is linear, so the seed delta is the upstream value.
        let mut delta = vec![up];
        for idx in (0..params.layers.len()).rev() {
            let input = &activations[idx];
            grads.layers[idx].weights.add_outer(&delta, input, 1.0);
            for (b, d) in grads.layers[idx].bias.iter_mut().zip(&delta) {
                *b += d;
            }
            if idx > 0 {
                let mut back = params.layers[idx].weights.matvec_transpose(&delta);
                for (d, a) in back.iter_mut().zip(&activations[idx]) {
                    *d *= elu_grad_from_output(*a);
                }
                delta = back;
            }
        }
    }
    Ok(grads)
}
