//! Minimal dense network substrate: fully-connected layers with ReLU hidden
//! activations, reverse-mode gradients, Adam, and target-network soft updates.
//!
//! Everything is `f64` and single-threaded. Layers are stored row-major
//! (`out_dim x in_dim`), which keeps the forward matvec contiguous.

mod adam;
mod checkpoint;

pub use adam::{adam_step, clip_global_norm, soft_update, AdamState, ScalarAdam};
pub use checkpoint::{read_adam, read_mlp, write_adam, write_mlp};
pub(crate) use checkpoint::{read_f64, read_u32, read_u64, read_u8, write_f64, write_u32, write_u64, write_u8};

use crate::error::{BresaError, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Output-layer activation. Hidden layers are always ReLU.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Identity,
    Tanh,
    Sigmoid,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Sigmoid => 1.0 / (1.0 + (-z).exp()),
        }
    }

    /// Derivative expressed in terms of the post-activation value.
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - y * y,
            Activation::Sigmoid => y * (1.0 - y),
        }
    }
}

/// Fully-connected network. `layer_sizes = [in, h1, ..., out]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    /// Per layer, row-major `out x in`.
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
    output_activation: Activation,
}

/// Per-parameter gradients with the same shapes as the owning [`Mlp`].
#[derive(Debug, Clone)]
pub struct Gradients {
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn add_scaled(&mut self, other: &Gradients, scale: f64) {
        for (dst, src) in self.weights.iter_mut().zip(&other.weights) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
        for (dst, src) in self.biases.iter_mut().zip(&other.biases) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s * scale;
            }
        }
    }

    pub fn scale(&mut self, factor: f64) {
        for w in &mut self.weights {
            for v in w.iter_mut() {
                *v *= factor;
            }
        }
        for b in &mut self.biases {
            for v in b.iter_mut() {
                *v *= factor;
            }
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut acc = 0.0;
        for w in &self.weights {
            for v in w {
                acc += v * v;
            }
        }
        for b in &self.biases {
            for v in b {
                acc += v * v;
            }
        }
        acc.sqrt()
    }
}

/// Post-activation values cached by [`Mlp::forward_tape`], consumed by
/// [`Mlp::backward`]. `activations[0]` is the input, `activations[L]` the output.
#[derive(Debug, Clone)]
pub struct Tape {
    activations: Vec<Vec<f64>>,
}

impl Tape {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("tape has at least the input")
    }
}

/// Gradients of a scalar loss with respect to parameters and to the input.
#[derive(Debug, Clone)]
pub struct BackwardResult {
    pub grads: Gradients,
    pub input_grad: Vec<f64>,
}

impl Mlp {
    /// Random network with uniform fan-in init: weights and biases drawn from
    /// `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn new(layer_sizes: &[usize], output_activation: Activation, rng: &mut ChaCha8Rng) -> Result<Self> {
        if layer_sizes.len() < 2 {
            return Err(BresaError::Config(
                "network needs at least an input and an output layer".into(),
            ));
        }
        if layer_sizes.iter().any(|&s| s == 0) {
            return Err(BresaError::Config("layer sizes must be positive".into()));
        }
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_sizes.len() - 1 {
            let fan_in = layer_sizes[l];
            let fan_out = layer_sizes[l + 1];
            let bound = 1.0 / (fan_in as f64).sqrt();
            let w: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            weights,
            biases,
            output_activation,
        })
    }

    /// Zero-initialized network (useful in tests: output = activation(0)).
    pub fn zeros(layer_sizes: &[usize], output_activation: Activation) -> Result<Self> {
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(0);
        let mut net = Mlp::new(layer_sizes, output_activation, &mut rng)?;
        for w in &mut net.weights {
            w.iter_mut().for_each(|v| *v = 0.0);
        }
        for b in &mut net.biases {
            b.iter_mut().for_each(|v| *v = 0.0);
        }
        Ok(net)
    }

    /// Build a network from explicit parameters. Shapes must match `layer_sizes`.
    pub fn from_parts(
        layer_sizes: Vec<usize>,
        weights: Vec<Vec<f64>>,
        biases: Vec<Vec<f64>>,
        output_activation: Activation,
    ) -> Result<Self> {
        if layer_sizes.len() < 2 || weights.len() != layer_sizes.len() - 1 || biases.len() != weights.len() {
            return Err(BresaError::Shape("layer count mismatch".into()));
        }
        for l in 0..weights.len() {
            if weights[l].len() != layer_sizes[l] * layer_sizes[l + 1] || biases[l].len() != layer_sizes[l + 1] {
                return Err(BresaError::Shape(format!("parameter shape mismatch at layer {l}")));
            }
        }
        Ok(Mlp {
            layer_sizes,
            weights,
            biases,
            output_activation,
        })
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn input_dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        *self.layer_sizes.last().unwrap()
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn same_topology(&self, other: &Mlp) -> bool {
        self.layer_sizes == other.layer_sizes && self.output_activation == other.output_activation
    }

    pub fn params_finite(&self) -> bool {
        self.weights.iter().flatten().all(|v| v.is_finite())
            && self.biases.iter().flatten().all(|v| v.is_finite())
    }

    pub(crate) fn weights(&self) -> &[Vec<f64>] {
        &self.weights
    }

    pub(crate) fn biases(&self) -> &[Vec<f64>] {
        &self.biases
    }

    pub(crate) fn weights_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.weights
    }

    pub(crate) fn biases_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.biases
    }

    fn check_input(&self, input: &[f64]) -> Result<()> {
        if input.len() != self.input_dim() {
            return Err(BresaError::Shape(format!(
                "input length {} does not match first layer size {}",
                input.len(),
                self.input_dim()
            )));
        }
        Ok(())
    }

    /// Forward pass without caching.
    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        self.check_input(input)?;
        let mut x = input.to_vec();
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            x = self.layer_forward(l, &x, l == last);
        }
        Ok(x)
    }

    /// Forward pass that records post-activations for a later [`Mlp::backward`].
    pub fn forward_tape(&self, input: &[f64]) -> Result<(Vec<f64>, Tape)> {
        self.check_input(input)?;
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(input.to_vec());
        let last = self.weights.len() - 1;
        for l in 0..self.weights.len() {
            let next = self.layer_forward(l, activations.last().unwrap(), l == last);
            activations.push(next);
        }
        let out = activations.last().unwrap().clone();
        Ok((out, Tape { activations }))
    }

    fn layer_forward(&self, l: usize, x: &[f64], is_output: bool) -> Vec<f64> {
        let in_dim = self.layer_sizes[l];
        let out_dim = self.layer_sizes[l + 1];
        let w = &self.weights[l];
        let b = &self.biases[l];
        let mut y = Vec::with_capacity(out_dim);
        for i in 0..out_dim {
            let row = &w[i * in_dim..(i + 1) * in_dim];
            let mut acc = b[i];
            for (wv, xv) in row.iter().zip(x) {
                acc += wv * xv;
            }
            y.push(if is_output {
                self.output_activation.apply(acc)
            } else {
                acc.max(0.0)
            });
        }
        y
    }

    /// Reverse pass for a scalar loss given `d loss / d output`.
    ///
    /// Parameters are not mutated; the tape must come from this network's
    /// [`Mlp::forward_tape`] (a tape with mismatched shapes is rejected).
    pub fn backward(&self, tape: &Tape, loss_grad_at_output: &[f64]) -> Result<BackwardResult> {
        if tape.activations.len() != self.layer_sizes.len()
            || tape
                .activations
                .iter()
                .zip(&self.layer_sizes)
                .any(|(a, &s)| a.len() != s)
        {
            return Err(BresaError::Shape("tape does not match network topology".into()));
        }
        if loss_grad_at_output.len() != self.output_dim() {
            return Err(BresaError::Shape("output gradient length mismatch".into()));
        }

        let mut grads = Gradients::zeros_like(self);
        let last = self.weights.len() - 1;

        // delta at the output layer: dL/dy * act'(z), with act' from the output value
        let out = &tape.activations[last + 1];
        let mut delta: Vec<f64> = loss_grad_at_output
            .iter()
            .zip(out)
            .map(|(g, &y)| g * self.output_activation.derivative_from_output(y))
            .collect();

        for l in (0..=last).rev() {
            let in_dim = self.layer_sizes[l];
            let x = &tape.activations[l];
            let gw = &mut grads.weights[l];
            for (i, &d) in delta.iter().enumerate() {
                let row = &mut gw[i * in_dim..(i + 1) * in_dim];
                for (gv, xv) in row.iter_mut().zip(x) {
                    *gv += d * xv;
                }
            }
            for (gb, &d) in grads.biases[l].iter_mut().zip(&delta) {
                *gb += d;
            }
            // propagate to the previous layer
            let w = &self.weights[l];
            let mut prev = vec![0.0; in_dim];
            for (i, &d) in delta.iter().enumerate() {
                let row = &w[i * in_dim..(i + 1) * in_dim];
                for (p, wv) in prev.iter_mut().zip(row) {
                    *p += d * wv;
                }
            }
            if l > 0 {
                // ReLU derivative from the post-activation value
                for (p, &a) in prev.iter_mut().zip(&tape.activations[l]) {
                    if a <= 0.0 {
                        *p = 0.0;
                    }
                }
            }
            delta = prev;
        }

        Ok(BackwardResult {
            grads,
            input_grad: delta,
        })
    }
}
