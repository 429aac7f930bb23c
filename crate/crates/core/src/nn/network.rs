use rand::distr::{Distribution, Uniform};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::activation::Activation;
use super::linalg::{matmul, matmul_a_bt, matmul_at_b};
use crate::error::{Error, Result};

/// One fully connected layer, `y = activation(W x + b)`.
///
/// `weights` is row-major with shape `(out_dim, in_dim)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub in_dim: usize,
    pub out_dim: usize,
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
    pub activation: Activation,
}

impl Dense {
    pub fn zeros(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            weights: vec![0.0; in_dim * out_dim],
            biases: vec![0.0; out_dim],
            activation,
        }
    }

    #[inline]
    pub fn weight(&self, row: usize, col: usize) -> f64 {
        self.weights[row * self.in_dim + col]
    }
}

/// Parameters of a feed-forward network. Used for policy means, value
/// functions and Lyapunov candidates alike.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "NetworkJson", into = "NetworkJson")]
pub struct NetworkParams {
    layers: Vec<Dense>,
}

/// Intermediate values of a batched forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct Tape {
    batch: usize,
    inputs: Vec<f64>,
    pre: Vec<Vec<f64>>,
    post: Vec<Vec<f64>>,
}

impl Tape {
    pub fn batch(&self) -> usize {
        self.batch
    }

    /// Row-major `batch × output_dim` network outputs.
    pub fn output(&self) -> &[f64] {
        self.post.last().map(Vec::as_slice).unwrap_or(&self.inputs)
    }

    /// Pre-activations of layer `layer`, row-major `batch × out_dim`.
    pub fn pre_activations(&self, layer: usize) -> &[f64] {
        &self.pre[layer]
    }
}

/// Gradient of a scalar with respect to every parameter of a [`NetworkParams`].
#[derive(Debug, Clone, PartialEq)]
pub struct GradientBundle {
    pub layers: Vec<LayerGradient>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl GradientBundle {
    pub fn zeros_like(net: &NetworkParams) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| LayerGradient {
                    weights: vec![0.0; l.weights.len()],
                    biases: vec![0.0; l.biases.len()],
                })
                .collect(),
        }
    }

    pub fn fill_zero(&mut self) {
        for tensor in self.tensors_mut() {
            tensor.fill(0.0);
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for tensor in self.tensors_mut() {
            tensor.iter_mut().for_each(|g| *g *= factor);
        }
    }

    pub fn squared_norm(&self) -> f64 {
        self.tensors().flat_map(|t| t.iter()).map(|g| g * g).sum()
    }

    /// Tensors in a fixed order: layer 0 weights, layer 0 biases, layer 1 weights, ...
    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
    }

    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
    }

    pub fn matches(&self, net: &NetworkParams) -> bool {
        self.layers.len() == net.layers.len()
            && self
                .layers
                .iter()
                .zip(&net.layers)
                .all(|(g, l)| g.weights.len() == l.weights.len() && g.biases.len() == l.biases.len())
    }

    /// Errors naming the first tensor holding a NaN or infinity.
    pub fn check_finite(&self) -> Result<()> {
        for (i, layer) in self.layers.iter().enumerate() {
            if layer.weights.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("layer {i} weights")));
            }
            if layer.biases.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient(format!("layer {i} biases")));
            }
        }
        Ok(())
    }
}

pub(crate) fn tensor_name(index: usize) -> String {
    let kind = if index % 2 == 0 { "weights" } else { "biases" };
    format!("layer {} {kind}", index / 2)
}

impl NetworkParams {
    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::InvalidNetwork("network has no layers".into()));
        }
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim == 0 || layer.out_dim == 0 {
                return Err(Error::InvalidNetwork(format!("layer {i} has a zero dimension")));
            }
            if layer.weights.len() != layer.in_dim * layer.out_dim || layer.biases.len() != layer.out_dim {
                return Err(Error::InvalidNetwork(format!("layer {i} tensor sizes do not match its dims")));
            }
            if i > 0 && layers[i - 1].out_dim != layer.in_dim {
                return Err(Error::InvalidNetwork(format!(
                    "layer {i} expects {} inputs but layer {} produces {}",
                    layer.in_dim,
                    i - 1,
                    layers[i - 1].out_dim
                )));
            }
            if layer.weights.iter().chain(&layer.biases).any(|p| !p.is_finite()) {
                return Err(Error::InvalidNetwork(format!("layer {i} has non-finite parameters")));
            }
        }
        Ok(Self { layers })
    }

    /// All-zero parameters with the given shape.
    pub fn zeros(layer_dims: &[usize], activations: &[Activation]) -> Result<Self> {
        check_schedule(layer_dims, activations)?;
        let layers = layer_dims
            .windows(2)
            .zip(activations)
            .map(|(d, &act)| Dense::zeros(d[0], d[1], act))
            .collect();
        Self::from_layers(layers)
    }

    /// Weights uniform in `±1/sqrt(fan_in)`, biases zero.
    pub fn init<R: Rng + ?Sized>(layer_dims: &[usize], activations: &[Activation], rng: &mut R) -> Result<Self> {
        let mut net = Self::zeros(layer_dims, activations)?;
        for layer in &mut net.layers {
            let bound = 1.0 / (layer.in_dim as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound).expect("finite positive bound");
            for w in &mut layer.weights {
                *w = dist.sample(rng);
            }
        }
        Ok(net)
    }

    pub fn layers(&self) -> &[Dense] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Dense] {
        &mut self.layers
    }

    pub fn layer_dims(&self) -> Vec<usize> {
        std::iter::once(self.layers[0].in_dim)
            .chain(self.layers.iter().map(|l| l.out_dim))
            .collect()
    }

    pub fn activations(&self) -> Vec<Activation> {
        self.layers.iter().map(|l| l.activation).collect()
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].out_dim
    }

    pub fn num_params(&self) -> usize {
        self.layers.iter().map(|l| l.weights.len() + l.biases.len()).sum()
    }

    /// Parameter tensors in the same order as [`GradientBundle::tensors`].
    pub fn tensors_mut(&mut self) -> impl Iterator<Item = &mut Vec<f64>> {
        self.layers
            .iter_mut()
            .flat_map(|l| [&mut l.weights, &mut l.biases])
    }

    pub fn tensors(&self) -> impl Iterator<Item = &[f64]> {
        self.layers
            .iter()
            .flat_map(|l| [l.weights.as_slice(), l.biases.as_slice()])
    }

    /// Single-sample evaluation.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.input_dim() {
            return Err(Error::Shape {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        let mut current = x.to_vec();
        for layer in &self.layers {
            let mut next = layer.biases.clone();
            for (o, out) in next.iter_mut().enumerate() {
                let row = &layer.weights[o * layer.in_dim..(o + 1) * layer.in_dim];
                *out += row.iter().zip(&current).map(|(w, v)| w * v).sum::<f64>();
                *out = layer.activation.apply(*out);
            }
            current = next;
        }
        Ok(current)
    }

    /// Scalar output of a single-output network.
    pub fn forward_scalar(&self, x: &[f64]) -> Result<f64> {
        if self.output_dim() != 1 {
            return Err(Error::Shape {
                expected: 1,
                got: self.output_dim(),
            });
        }
        Ok(self.forward(x)?[0])
    }

    /// Batched evaluation of row-major `batch × input_dim` inputs.
    pub fn forward_batch(&self, inputs: &[f64], batch: usize) -> Result<Vec<f64>> {
        let mut tape = self.forward_tape(inputs, batch)?;
        Ok(tape.post.pop().unwrap_or_default())
    }

    /// Batched forward pass that records what [`NetworkParams::backward_tape`] needs.
    pub fn forward_tape(&self, inputs: &[f64], batch: usize) -> Result<Tape> {
        if inputs.len() != batch * self.input_dim() {
            return Err(Error::Shape {
                expected: batch * self.input_dim(),
                got: inputs.len(),
            });
        }
        let mut pre = Vec::with_capacity(self.layers.len());
        let mut post: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let input = post.last().map(Vec::as_slice).unwrap_or(inputs);
            let mut z = vec![0.0; batch * layer.out_dim];
            matmul_a_bt(input, &layer.weights, &mut z, batch, layer.in_dim, layer.out_dim, false);
            for row in z.chunks_exact_mut(layer.out_dim) {
                row.iter_mut().zip(&layer.biases).for_each(|(v, b)| *v += b);
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.activation.apply(v)).collect();
            pre.push(z);
            post.push(a);
        }
        Ok(Tape {
            batch,
            inputs: inputs.to_vec(),
            pre,
            post,
        })
    }

    /// Backpropagates `upstream` (row-major `batch × output_dim`, the cotangent of
    /// the outputs) through a recorded pass. Parameter gradients of
    /// `Σ upstream · output` are added into `grads`; the input gradient
    /// (`batch × input_dim`) is returned.
    pub fn backward_tape(&self, tape: &Tape, upstream: &[f64], grads: &mut GradientBundle) -> Result<Vec<f64>> {
        let batch = tape.batch;
        if upstream.len() != batch * self.output_dim() {
            return Err(Error::Shape {
                expected: batch * self.output_dim(),
                got: upstream.len(),
            });
        }
        if !grads.matches(self) {
            return Err(Error::InvalidNetwork("gradient bundle does not match network".into()));
        }
        let mut delta = upstream.to_vec();
        for (l, layer) in self.layers.iter().enumerate().rev() {
            let pre = &tape.pre[l];
            for (d, &z) in delta.iter_mut().zip(pre) {
                *d *= layer.activation.derivative(z);
            }
            let input = if l == 0 { &tape.inputs } else { &tape.post[l - 1] };
            let g = &mut grads.layers[l];
            matmul_at_b(&delta, input, &mut g.weights, layer.out_dim, batch, layer.in_dim, true);
            for row in delta.chunks_exact(layer.out_dim) {
                g.biases.iter_mut().zip(row).for_each(|(b, d)| *b += d);
            }
            let mut next = vec![0.0; batch * layer.in_dim];
            matmul(&delta, &layer.weights, &mut next, batch, layer.out_dim, layer.in_dim);
            delta = next;
        }
        Ok(delta)
    }

    /// Gradient of `upstream · forward(x)` with respect to the parameters and to `x`.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<(GradientBundle, Vec<f64>)> {
        let tape = self.forward_tape(x, 1)?;
        let mut grads = GradientBundle::zeros_like(self);
        let input_grad = self.backward_tape(&tape, upstream, &mut grads)?;
        Ok((grads, input_grad))
    }
}

fn check_schedule(layer_dims: &[usize], activations: &[Activation]) -> Result<()> {
    if layer_dims.len() < 2 {
        return Err(Error::InvalidNetwork("need at least input and output dims".into()));
    }
    if activations.len() != layer_dims.len() - 1 {
        return Err(Error::InvalidNetwork(format!(
            "{} layers but {} activations",
            layer_dims.len() - 1,
            activations.len()
        )));
    }
    Ok(())
}

/// On-disk layout: weights as nested row arrays.
#[derive(Serialize, Deserialize)]
struct NetworkJson {
    layer_dims: Vec<usize>,
    activations: Vec<Activation>,
    weights: Vec<Vec<Vec<f64>>>,
    biases: Vec<Vec<f64>>,
}

impl From<NetworkParams> for NetworkJson {
    fn from(net: NetworkParams) -> Self {
        NetworkJson {
            layer_dims: net.layer_dims(),
            activations: net.activations(),
            weights: net
                .layers
                .iter()
                .map(|l| l.weights.chunks(l.in_dim).map(<[f64]>::to_vec).collect())
                .collect(),
            biases: net.layers.iter().map(|l| l.biases.clone()).collect(),
        }
    }
}

impl TryFrom<NetworkJson> for NetworkParams {
    type Error = Error;

    fn try_from(json: NetworkJson) -> Result<Self> {
        check_schedule(&json.layer_dims, &json.activations)?;
        let n = json.activations.len();
        if json.weights.len() != n || json.biases.len() != n {
            return Err(Error::InvalidNetwork("tensor count does not match layer count".into()));
        }
        let mut layers = Vec::with_capacity(n);
        for (i, ((rows, biases), act)) in json.weights.into_iter().zip(json.biases).zip(json.activations).enumerate() {
            let (in_dim, out_dim) = (json.layer_dims[i], json.layer_dims[i + 1]);
            if rows.len() != out_dim || rows.iter().any(|r| r.len() != in_dim) {
                return Err(Error::InvalidNetwork(format!("layer {i} weights are not {out_dim}x{in_dim}")));
            }
            layers.push(Dense {
                in_dim,
                out_dim,
                weights: rows.concat(),
                biases,
                activation: act,
            });
        }
        NetworkParams::from_layers(layers)
    }
}
