use alloc::vec;
use alloc::vec::Vec;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{check_dim, invalid, Error, Result};
use crate::matrix::Matrix;

/// Fully connected feature extractor: ReLU on hidden layers, identity output.
///
/// Layer `l` maps `layer_dims[l]` inputs to `layer_dims[l + 1]` outputs with
/// an `out x in` weight matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layer_dims: Vec<usize>,
    weights: Vec<Matrix>,
    biases: Vec<Vec<f64>>,
}

/// Activations recorded by [`MlpModel::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    layer_dims: Vec<usize>,
    /// `inputs[l]` is the input of layer `l`.
    inputs: Vec<Matrix>,
    /// `pre_activations[l]` is the affine output of layer `l`.
    pre_activations: Vec<Matrix>,
}

/// Gradients of a scalar loss w.r.t. every weight and bias.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Vec<Matrix>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(model: &MlpModel) -> Self {
        Self {
            weights: model
                .weights
                .iter()
                .map(|w| Matrix::zeros(w.rows(), w.cols()))
                .collect(),
            biases: model.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    /// Flattened in the same order as [`MlpModel::parameters`].
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }
}

fn validate_dims(layer_dims: &[usize]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(invalid("an MLP needs at least an input and an output dimension"));
    }
    if layer_dims.contains(&0) {
        return Err(invalid("layer dimensions must be positive"));
    }
    Ok(())
}

impl ForwardCache {
    /// Affine outputs of every layer, before the nonlinearity.
    pub fn pre_activations(&self) -> &[Matrix] {
        &self.pre_activations
    }
}

impl MlpModel {
    /// He-style initialization: weights ~ N(0, 2 / fan_in), biases zero.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        validate_dims(layer_dims)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for pair in layer_dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let normal = Normal::new(0.0, libm::sqrt(2.0 / fan_in as f64))
                .map_err(|_| invalid("bad init variance"))?;
            let data = (0..fan_in * fan_out).map(|_| normal.sample(&mut rng)).collect();
            weights.push(Matrix::from_vec(fan_out, fan_in, data)?);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(Self {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
        })
    }

    /// Assembles a model from explicit parameters, checking every shape.
    pub fn from_parts(layer_dims: Vec<usize>, weights: Vec<Matrix>, biases: Vec<Vec<f64>>) -> Result<Self> {
        validate_dims(&layer_dims)?;
        let layers = layer_dims.len() - 1;
        check_dim("weight matrices", layers, weights.len())?;
        check_dim("bias vectors", layers, biases.len())?;
        for (l, (w, b)) in weights.iter().zip(&biases).enumerate() {
            check_dim("weight rows", layer_dims[l + 1], w.rows())?;
            check_dim("weight cols", layer_dims[l], w.cols())?;
            check_dim("bias length", layer_dims[l + 1], b.len())?;
            if !w.is_finite() || b.iter().any(|v| !v.is_finite()) {
                return Err(invalid("model parameters must be finite"));
            }
        }
        Ok(Self {
            layer_dims,
            weights,
            biases,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap_or(&0)
    }

    pub fn weights(&self) -> &[Matrix] {
        &self.weights
    }

    pub fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn params_mut(&mut self) -> (&mut [Matrix], &mut [Vec<f64>]) {
        (&mut self.weights, &mut self.biases)
    }

    pub fn num_parameters(&self) -> usize {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| w.rows() * w.cols() + b.len())
            .sum()
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn parameters(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_parameters());
        for (w, b) in self.weights.iter().zip(&self.biases) {
            out.extend_from_slice(w.as_slice());
            out.extend_from_slice(b);
        }
        out
    }

    pub fn set_parameters(&mut self, params: &[f64]) -> Result<()> {
        check_dim("parameter vector", self.num_parameters(), params.len())?;
        let mut offset = 0;
        for (w, b) in self.weights.iter_mut().zip(self.biases.iter_mut()) {
            let wn = w.as_slice().len();
            w.as_mut_slice().copy_from_slice(&params[offset..offset + wn]);
            offset += wn;
            let bn = b.len();
            b.copy_from_slice(&params[offset..offset + bn]);
            offset += bn;
        }
        Ok(())
    }

    /// Embeds a batch; returns the output features and the backward cache.
    pub fn forward(&self, inputs: &Matrix) -> Result<(Matrix, ForwardCache)> {
        check_dim("network input width", self.input_dim(), inputs.cols())?;
        let layers = self.weights.len();
        let mut cache = ForwardCache {
            layer_dims: self.layer_dims.clone(),
            inputs: Vec::with_capacity(layers),
            pre_activations: Vec::with_capacity(layers),
        };
        let mut current = inputs.clone();
        for (l, (w, b)) in self.weights.iter().zip(&self.biases).enumerate() {
            let mut z = current.matmul_transposed(w)?;
            for i in 0..z.rows() {
                for (v, bias) in z.row_mut(i).iter_mut().zip(b) {
                    *v += bias;
                }
            }
            let next = if l + 1 < layers {
                let mut a = z.clone();
                a.as_mut_slice().iter_mut().for_each(|v| *v = v.max(0.0));
                a
            } else {
                z.clone()
            };
            cache.inputs.push(core::mem::replace(&mut current, next));
            cache.pre_activations.push(z);
        }
        Ok((current, cache))
    }

    /// Forward pass without keeping the cache.
    pub fn embed(&self, inputs: &Matrix) -> Result<Matrix> {
        self.forward(inputs).map(|(out, _)| out)
    }

    /// Backpropagates `grad_features` (d loss / d output) to every parameter.
    pub fn backward(&self, cache: &ForwardCache, grad_features: &Matrix) -> Result<Gradients> {
        if cache.layer_dims != self.layer_dims || cache.inputs.len() != self.weights.len() {
            return Err(invalid("forward cache was produced by a different model"));
        }
        let batch = cache.inputs[0].rows();
        check_dim("grad_features rows", batch, grad_features.rows())?;
        check_dim("grad_features cols", self.output_dim(), grad_features.cols())?;

        let layers = self.weights.len();
        let mut grads = Gradients::zeros_like(self);
        let mut upstream = grad_features.clone();
        for l in (0..layers).rev() {
            if l + 1 < layers {
                let z = &cache.pre_activations[l];
                for (g, &zv) in upstream.as_mut_slice().iter_mut().zip(z.as_slice()) {
                    if zv <= 0.0 {
                        *g = 0.0;
                    }
                }
            }
            let input = &cache.inputs[l];
            if input.rows() != upstream.rows() {
                return Err(Error::DimensionMismatch {
                    context: "stale forward cache",
                    expected: upstream.rows(),
                    actual: input.rows(),
                });
            }
            grads.weights[l] = upstream.transpose().matmul(input)?;
            let gb = &mut grads.biases[l];
            for row in upstream.iter_rows() {
                for (acc, v) in gb.iter_mut().zip(row) {
                    *acc += v;
                }
            }
            if l > 0 {
                upstream = upstream.matmul(&self.weights[l])?;
            }
        }
        Ok(grads)
    }
}
