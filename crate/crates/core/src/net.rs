//! Residual super-resolution network: `depth` 3×3 convolutions (1 → width →
//! … → width → 1), ReLU after all but the last, output added to the input.

use crate::error::{Error, Result};
use crate::rng::{rng_normal, SeededRng};
use crate::tensor::{conv2d_backward, conv2d_forward, relu, relu_backward, Tensor};

pub const HIDDEN_WIDTH: usize = 64;
pub const KERNEL: usize = 3;
const PAD: usize = 1;

/// RNG stream used for weight initialization.
pub(crate) const INIT_STREAM: u64 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct ConvLayer {
    /// `[out, in, 3, 3]`
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

impl ConvLayer {
    pub fn in_channels(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn out_channels(&self) -> usize {
        self.weights.shape()[0]
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SrNetwork {
    layers: Vec<ConvLayer>,
}

/// Closed-form parameter count (weights plus biases).
pub fn parameter_count(depth: usize, width: usize) -> usize {
    let k = KERNEL * KERNEL;
    let weights = k * (width + depth.saturating_sub(2) * width * width + width);
    let biases = (depth - 1) * width + 1;
    weights + biases
}

fn channel_plan(depth: usize, width: usize, layer: usize) -> (usize, usize) {
    let ci = if layer == 0 { 1 } else { width };
    let co = if layer + 1 == depth { 1 } else { width };
    (ci, co)
}

impl SrNetwork {
    /// He-initialized hidden layers and an all-zero final layer, so the fresh
    /// network maps every input to itself.
    pub fn init(depth: usize, seed: u64) -> Result<Self> {
        SrNetwork::init_with_width(depth, HIDDEN_WIDTH, seed)
    }

    pub fn init_with_width(depth: usize, width: usize, seed: u64) -> Result<Self> {
        if depth < 2 {
            return Err(Error::contract(
                "init_network",
                format!("depth must be >= 2, got {depth}"),
            ));
        }
        if width == 0 {
            return Err(Error::contract("init_network", "width must be positive"));
        }
        let mut rng = SeededRng::with_stream(seed, INIT_STREAM);
        let mut layers = Vec::with_capacity(depth);
        for l in 0..depth {
            let (ci, co) = channel_plan(depth, width, l);
            let shape = [co, ci, KERNEL, KERNEL];
            let weights = if l + 1 == depth {
                Tensor::zeros(shape)
            } else {
                let std = (2.0 / (ci * KERNEL * KERNEL) as f64).sqrt();
                rng_normal(&mut rng, shape, 0.0, std)?
            };
            layers.push(ConvLayer {
                weights,
                bias: vec![0.0; co],
            });
        }
        Ok(SrNetwork { layers })
    }

    /// Validate a layer stack against the channel plan.
    pub fn from_layers(layers: Vec<ConvLayer>) -> Result<Self> {
        let depth = layers.len();
        if depth < 2 {
            return Err(Error::contract(
                "SrNetwork",
                format!("depth must be >= 2, got {depth}"),
            ));
        }
        let width = layers[0].out_channels();
        for (l, layer) in layers.iter().enumerate() {
            let (ci, co) = channel_plan(depth, width, l);
            let expected = [co, ci, KERNEL, KERNEL];
            if layer.weights.shape() != expected || layer.bias.len() != co {
                return Err(Error::contract(
                    "SrNetwork",
                    format!(
                        "layer {l}: weights {:?} with {} biases, expected {expected:?}",
                        layer.weights.shape(),
                        layer.bias.len()
                    ),
                ));
            }
        }
        Ok(SrNetwork { layers })
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    pub fn width(&self) -> usize {
        self.layers[0].out_channels()
    }

    pub fn layers(&self) -> &[ConvLayer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [ConvLayer] {
        &mut self.layers
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// FNV-1a over the bit patterns of every parameter.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for layer in &self.layers {
            for v in layer.weights.data().iter().chain(&layer.bias) {
                for byte in v.to_bits().to_le_bytes() {
                    h ^= u64::from(byte);
                    h = h.wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        let [_, c, h, w] = x.shape();
        if c != 1 {
            return Err(Error::contract(
                "forward",
                format!("expected 1 input channel, got {c}"),
            ));
        }
        if h < 3 || w < 3 {
            return Err(Error::contract(
                "forward",
                format!("{h}x{w} input is smaller than 3x3"),
            ));
        }
        Ok(())
    }

    /// `x + residual(x)` and the activations needed by [`SrNetwork::backward`].
    pub fn forward(&self, x: &Tensor) -> Result<(Tensor, ForwardCache)> {
        self.check_input(x)?;
        let mut pre_activations = Vec::with_capacity(self.depth());
        let mut act = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = conv2d_forward(&act, &layer.weights, &layer.bias, PAD)?;
            if l + 1 < self.depth() {
                act = relu(&z);
            }
            pre_activations.push(z);
        }
        let residual = pre_activations.last().expect("depth >= 2");
        let y = x.zip_map(residual, |a, b| a + b)?;
        let cache = ForwardCache {
            input: x.clone(),
            pre_activations,
            fingerprint: self.fingerprint(),
        };
        Ok((y, cache))
    }

    /// Forward pass without keeping the activations.
    pub fn predict(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let mut act = x.clone();
        for (l, layer) in self.layers.iter().enumerate() {
            let z = conv2d_forward(&act, &layer.weights, &layer.bias, PAD)?;
            act = if l + 1 < self.depth() { relu(&z) } else { z };
        }
        x.zip_map(&act, |a, b| a + b)
    }

    /// Gradients of `⟨grad_y, y⟩` for the `y` produced with `cache`.
    pub fn backward(&self, cache: &ForwardCache, grad_y: &Tensor) -> Result<NetGrads> {
        if cache.pre_activations.len() != self.depth() || cache.fingerprint != self.fingerprint() {
            return Err(Error::contract(
                "backward",
                "cache was produced by a different network or parameters changed since forward",
            ));
        }
        if grad_y.shape() != cache.input.shape() {
            return Err(Error::contract(
                "backward",
                format!(
                    "grad_y shape {:?} vs output {:?}",
                    grad_y.shape(),
                    cache.input.shape()
                ),
            ));
        }
        let mut layer_grads = Vec::with_capacity(self.depth());
        let mut grad = grad_y.clone();
        for l in (0..self.depth()).rev() {
            if l + 1 < self.depth() {
                grad = relu_backward(&cache.pre_activations[l], &grad)?;
            }
            let layer_input = if l == 0 {
                cache.input.clone()
            } else {
                relu(&cache.pre_activations[l - 1])
            };
            let g = conv2d_backward(&layer_input, &self.layers[l].weights, PAD, &grad)?;
            layer_grads.push(LayerGrads {
                weights: g.grad_w,
                bias: g.grad_b,
            });
            grad = g.grad_x;
        }
        layer_grads.reverse();
        let input = grad_y.zip_map(&grad, |a, b| a + b)?;
        Ok(NetGrads {
            layers: layer_grads,
            input,
        })
    }
}

/// Activations retained by [`SrNetwork::forward`]. Post-activations are
/// recomputed from the pre-activations on demand.
#[derive(Clone, Debug)]
pub struct ForwardCache {
    input: Tensor,
    pre_activations: Vec<Tensor>,
    fingerprint: u64,
}

impl ForwardCache {
    pub fn depth(&self) -> usize {
        self.pre_activations.len()
    }

    pub fn pre_activation(&self, layer: usize) -> &Tensor {
        &self.pre_activations[layer]
    }

    pub fn post_activation(&self, layer: usize) -> Tensor {
        if layer + 1 == self.pre_activations.len() {
            self.pre_activations[layer].clone()
        } else {
            relu(&self.pre_activations[layer])
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NetGrads {
    pub layers: Vec<LayerGrads>,
    /// Gradient with respect to the network input, skip path included.
    pub input: Tensor,
}

impl NetGrads {
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.layers
            .iter()
            .flat_map(|l| l.weights.data().iter().chain(&l.bias).copied())
    }
}
