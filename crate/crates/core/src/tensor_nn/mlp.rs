use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::matrix::{gemm, Matrix, Operand};
use crate::error::{Error, Result};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    Relu,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    pub input_dim: usize,
    pub hidden_dims: Vec<usize>,
    pub output_dim: usize,
    pub activation: Activation,
    pub seed: u64,
}

impl MlpConfig {
    pub fn new(input_dim: usize, hidden_dims: Vec<usize>, output_dim: usize, seed: u64) -> Self {
        Self {
            input_dim,
            hidden_dims,
            output_dim,
            activation: Activation::Relu,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.output_dim == 0 {
            return Err(Error::config("mlp.dims", "input and output dims must be >= 1"));
        }
        if self.hidden_dims.is_empty() {
            return Err(Error::config("mlp.hidden_dims", "must be non-empty"));
        }
        if self.hidden_dims.contains(&0) {
            return Err(Error::config("mlp.hidden_dims", "every hidden layer needs >= 1 unit"));
        }
        Ok(())
    }

    fn layer_dims(&self) -> Vec<(usize, usize)> {
        let mut dims = Vec::with_capacity(self.hidden_dims.len() + 1);
        let mut prev = self.input_dim;
        for &h in self.hidden_dims.iter().chain(std::iter::once(&self.output_dim)) {
            dims.push((prev, h));
            prev = h;
        }
        dims
    }
}

/// Fully connected layer; `weights` is `fan_in × fan_out`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn fan_in(&self) -> usize {
        self.weights.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weights.cols()
    }
}

/// Dense ReLU network with a linear output layer.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    config: MlpConfig,
    layers: Vec<Dense>,
}

/// Intermediate values kept for back-propagation.
pub(crate) struct ForwardCache {
    /// Input to each layer (post-activation of the previous one).
    inputs: Vec<Matrix>,
    output: Matrix,
}

impl ForwardCache {
    pub(crate) fn output(&self) -> &Matrix {
        &self.output
    }
}

/// Gradients with the same shapes as the network parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Dense>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| Dense {
                    weights: Matrix::zeros(l.fan_in(), l.fan_out()),
                    bias: vec![0.0; l.fan_out()],
                })
                .collect(),
        }
    }
}

impl Mlp {
    /// He-uniform initialization driven by `config.seed`; biases start at zero.
    pub fn new(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let mut rng = rng_from_seed(config.seed);
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(fan_in, fan_out)| {
                let bound = (6.0 / fan_in as f64).sqrt();
                let w = (0..fan_in * fan_out)
                    .map(|_| rng.random_range(-bound..bound))
                    .collect();
                Dense {
                    weights: Matrix::from_vec(fan_in, fan_out, w).expect("sized"),
                    bias: vec![0.0; fan_out],
                }
            })
            .collect();
        Ok(Self { config, layers })
    }

    pub fn zeros(config: MlpConfig) -> Result<Self> {
        config.validate()?;
        let layers = config
            .layer_dims()
            .into_iter()
            .map(|(i, o)| Dense {
                weights: Matrix::zeros(i, o),
                bias: vec![0.0; o],
            })
            .collect();
        Ok(Self { config, layers })
    }

    /// Assembles a network from explicit layers. Any depth >= 1 is accepted.
    pub fn from_layers(layers: Vec<Dense>, seed: u64) -> Result<Self> {
        let first = layers.first().ok_or(Error::EmptyData("no layers"))?;
        let mut prev = first.fan_in();
        for l in &layers {
            if l.fan_in() != prev {
                return Err(Error::DimensionMismatch {
                    context: "Mlp::from_layers",
                    expected: prev,
                    actual: l.fan_in(),
                });
            }
            if l.bias.len() != l.fan_out() {
                return Err(Error::DimensionMismatch {
                    context: "Mlp::from_layers bias",
                    expected: l.fan_out(),
                    actual: l.bias.len(),
                });
            }
            prev = l.fan_out();
        }
        let config = MlpConfig {
            input_dim: first.fan_in(),
            hidden_dims: layers[..layers.len() - 1].iter().map(Dense::fan_out).collect(),
            output_dim: prev,
            activation: Activation::Relu,
            seed,
        };
        Ok(Self { config, layers })
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.config.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.config.output_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.data().len() + l.bias.len())
            .sum()
    }

    pub fn forward(&self, x: &Matrix) -> Result<Matrix> {
        self.check_input(x)?;
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            h = affine(&h, layer);
            if i < last {
                relu_in_place(&mut h);
            }
        }
        Ok(h)
    }

    pub(crate) fn forward_cached(&self, x: &Matrix) -> Result<ForwardCache> {
        self.check_input(x)?;
        let mut inputs = Vec::with_capacity(self.layers.len());
        let mut h = x.clone();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut next = affine(&h, layer);
            if i < last {
                relu_in_place(&mut next);
            }
            inputs.push(h);
            h = next;
        }
        Ok(ForwardCache { inputs, output: h })
    }

    /// Back-propagates `d_output` (∂loss/∂output, already averaged over the
    /// batch) through the cached forward pass.
    pub(crate) fn backward(&self, cache: &ForwardCache, d_output: &Matrix) -> Gradients {
        let mut grads = Gradients::zeros_like(self);
        let mut delta = d_output.clone();
        for i in (0..self.layers.len()).rev() {
            let input = &cache.inputs[i];
            let layer = &self.layers[i];
            let g = &mut grads.layers[i];
            gemm(
                layer.fan_in(),
                input.rows(),
                layer.fan_out(),
                Operand::transposed(input),
                Operand::plain(&delta),
                &mut g.weights,
                0.0,
            );
            for r in 0..delta.rows() {
                for (b, d) in g.bias.iter_mut().zip(delta.row(r)) {
                    *b += d;
                }
            }
            if i > 0 {
                let mut prev = Matrix::zeros(delta.rows(), layer.fan_in());
                gemm(
                    delta.rows(),
                    layer.fan_out(),
                    layer.fan_in(),
                    Operand::plain(&delta),
                    Operand::transposed(&layer.weights),
                    &mut prev,
                    0.0,
                );
                // ReLU mask: the layer input is the previous post-activation,
                // positive exactly where the pre-activation was positive.
                for (p, a) in prev.data_mut().iter_mut().zip(input.data()) {
                    if *a <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
        grads
    }

    fn check_input(&self, x: &Matrix) -> Result<()> {
        if x.cols() != self.config.input_dim {
            return Err(Error::DimensionMismatch {
                context: "Mlp::forward input columns",
                expected: self.config.input_dim,
                actual: x.cols(),
            });
        }
        Ok(())
    }
}

fn affine(x: &Matrix, layer: &Dense) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), layer.fan_out());
    for r in 0..x.rows() {
        out.row_mut(r).copy_from_slice(&layer.bias);
    }
    gemm(
        x.rows(),
        layer.fan_in(),
        layer.fan_out(),
        Operand::plain(x),
        Operand::plain(&layer.weights),
        &mut out,
        1.0,
    );
    out
}

fn relu_in_place(m: &mut Matrix) {
    for v in m.data_mut() {
        if *v < 0.0 {
            *v = 0.0;
        }
    }
}
