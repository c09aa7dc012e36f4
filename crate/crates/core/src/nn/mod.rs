//! Dense multilayer perceptrons with hand-written reverse-mode gradients.
//!
//! Every network in the toolkit (policy, value function, encoder, decoder) is
//! an [`Mlp`]. Parameters live in one flat buffer laid out layer by layer, each
//! layer as a row-major `out × in` weight matrix followed by its bias vector.
//! [`Gradients`] shares that layout, which keeps the optimizer and gradient
//! clipping trivial.

mod adam;
mod gradcheck;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use gradcheck::{finite_diff_check, GradCheckReport, LeastSquares, ScalarLoss};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_len, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    /// Derivative expressed through the activation's output.
    #[inline]
    fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    layer_sizes: Vec<usize>,
    hidden_activation: Activation,
    output_activation: Activation,
    params: Vec<f64>,
}

/// Per-parameter derivatives laid out exactly like [`Mlp`] parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

/// Post-activation outputs of every layer, input first. Produced by
/// [`Mlp::forward_trace`] and consumed by [`Mlp::backward_trace`].
#[derive(Debug, Clone)]
pub struct Trace {
    activations: Vec<Vec<f64>>,
}

impl Trace {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("trace always holds the input")
    }
}

fn validate_sizes(layer_sizes: &[usize]) -> Result<()> {
    if layer_sizes.len() < 2 {
        return Err(Error::InvalidArgument(
            "an mlp needs at least an input and an output layer".into(),
        ));
    }
    if layer_sizes.contains(&0) {
        return Err(Error::InvalidArgument(format!(
            "layer sizes must be positive, got {layer_sizes:?}"
        )));
    }
    Ok(())
}

fn param_count(layer_sizes: &[usize]) -> usize {
    layer_sizes.windows(2).map(|w| w[1] * w[0] + w[1]).sum()
}

/// Offset of layer `l`'s weights and its bias within the flat buffer.
fn layer_offsets(layer_sizes: &[usize], l: usize) -> (usize, usize) {
    let start: usize = layer_sizes[..=l]
        .windows(2)
        .map(|w| w[1] * w[0] + w[1])
        .sum();
    let (n_in, n_out) = (layer_sizes[l], layer_sizes[l + 1]);
    (start, start + n_in * n_out)
}

impl Mlp {
    /// Glorot-uniform weights from `rng`, zero biases.
    pub fn new<R: Rng + ?Sized>(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        let mut params = Vec::with_capacity(param_count(layer_sizes));
        for w in layer_sizes.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let limit = (6.0 / (n_in + n_out) as f64).sqrt();
            params.extend((0..n_in * n_out).map(|_| rng.random_range(-limit..=limit)));
            params.extend(std::iter::repeat_n(0.0, n_out));
        }
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_activation,
            params,
        })
    }

    pub fn zeros(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        Ok(Mlp {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_activation,
            params: vec![0.0; param_count(layer_sizes)],
        })
    }

    /// Assembles a network from explicit per-layer weights (rows = outputs)
    /// and biases.
    pub fn from_layers(
        weights: &[Vec<Vec<f64>>],
        biases: &[Vec<f64>],
        hidden_activation: Activation,
        output_activation: Activation,
    ) -> Result<Self> {
        ensure_len("mlp bias layers", weights.len(), biases.len())?;
        if weights.is_empty() {
            return Err(Error::InvalidArgument("mlp needs at least one layer".into()));
        }
        let mut layer_sizes = vec![weights[0].first().map_or(0, Vec::len)];
        let mut params = Vec::new();
        for (l, (w, b)) in weights.iter().zip(biases).enumerate() {
            let n_in = layer_sizes[l];
            ensure_len(&format!("layer {l} bias"), w.len(), b.len())?;
            for row in w {
                ensure_len(&format!("layer {l} weight row"), n_in, row.len())?;
                params.extend_from_slice(row);
            }
            params.extend_from_slice(b);
            layer_sizes.push(w.len());
        }
        validate_sizes(&layer_sizes)?;
        let net = Mlp {
            layer_sizes,
            hidden_activation,
            output_activation,
            params,
        };
        net.validate()?;
        Ok(net)
    }

    /// Rebuilds a network from a flat parameter buffer (checkpoint format).
    pub fn from_flat(
        layer_sizes: &[usize],
        hidden_activation: Activation,
        output_activation: Activation,
        params: Vec<f64>,
    ) -> Result<Self> {
        validate_sizes(layer_sizes)?;
        ensure_len("mlp parameters", param_count(layer_sizes), params.len())?;
        let net = Mlp {
            layer_sizes: layer_sizes.to_vec(),
            hidden_activation,
            output_activation,
            params,
        };
        net.validate()?;
        Ok(net)
    }

    /// Checks the shape and finiteness invariants. Deserialized networks go
    /// through here before use.
    pub fn validate(&self) -> Result<()> {
        validate_sizes(&self.layer_sizes)?;
        ensure_len(
            "mlp parameters",
            param_count(&self.layer_sizes),
            self.params.len(),
        )?;
        for l in 0..self.n_layers() {
            if !self.weights(l).iter().chain(self.biases(l)).all(|v| v.is_finite()) {
                return Err(Error::NonFinite {
                    context: format!("mlp layer {l} parameters"),
                });
            }
        }
        Ok(())
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

    /// Number of weight layers.
    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn hidden_activation(&self) -> Activation {
        self.hidden_activation
    }

    pub fn output_activation(&self) -> Activation {
        self.output_activation
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Row-major `layer_sizes[l+1] × layer_sizes[l]` weight matrix of layer `l`.
    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = layer_offsets(&self.layer_sizes, l);
        &self.params[w..b]
    }

    pub fn weights_mut(&mut self, l: usize) -> &mut [f64] {
        let (w, b) = layer_offsets(&self.layer_sizes, l);
        &mut self.params[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = layer_offsets(&self.layer_sizes, l);
        &self.params[b..b + self.layer_sizes[l + 1]]
    }

    pub fn biases_mut(&mut self, l: usize) -> &mut [f64] {
        let (_, b) = layer_offsets(&self.layer_sizes, l);
        let n = self.layer_sizes[l + 1];
        &mut self.params[b..b + n]
    }

    /// Which layer owns flat parameter index `index`.
    pub fn layer_of_param(&self, index: usize) -> usize {
        let mut end = 0;
        for (l, w) in self.layer_sizes.windows(2).enumerate() {
            end += w[1] * w[0] + w[1];
            if index < end {
                return l;
            }
        }
        self.n_layers() - 1
    }

    fn activation_of(&self, l: usize) -> Activation {
        if l + 1 == self.n_layers() {
            self.output_activation
        } else {
            self.hidden_activation
        }
    }

    pub fn forward(&self, input: &[f64]) -> Result<Vec<f64>> {
        ensure_len("mlp input", self.input_dim(), input.len())?;
        let mut x = input.to_vec();
        let mut offset = 0;
        for l in 0..self.n_layers() {
            x = self.layer_forward(l, offset, &x);
            offset += self.layer_sizes[l] * self.layer_sizes[l + 1] + self.layer_sizes[l + 1];
        }
        Ok(x)
    }

    /// Forward pass that keeps every layer's output for a later backward pass.
    pub fn forward_trace(&self, input: &[f64]) -> Result<Trace> {
        ensure_len("mlp input", self.input_dim(), input.len())?;
        let mut activations = Vec::with_capacity(self.layer_sizes.len());
        activations.push(input.to_vec());
        let mut offset = 0;
        for l in 0..self.n_layers() {
            let next = self.layer_forward(l, offset, &activations[l]);
            activations.push(next);
            offset += self.layer_sizes[l] * self.layer_sizes[l + 1] + self.layer_sizes[l + 1];
        }
        Ok(Trace { activations })
    }

    #[inline]
    fn layer_forward(&self, l: usize, offset: usize, x: &[f64]) -> Vec<f64> {
        let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
        let act = self.activation_of(l);
        let weights = &self.params[offset..offset + n_in * n_out];
        let bias = &self.params[offset + n_in * n_out..offset + n_in * n_out + n_out];
        weights
            .chunks_exact(n_in)
            .zip(bias)
            .map(|(row, b)| act.apply(b + crate::linalg::dot(row, x)))
            .collect()
    }

    /// Gradients of a loss with respect to every parameter, given the loss
    /// gradient at the output.
    pub fn backward(&self, input: &[f64], upstream: &[f64]) -> Result<Gradients> {
        let trace = self.forward_trace(input)?;
        let mut grads = Gradients::zeros_like(self);
        self.backward_trace(&trace, upstream, &mut grads)?;
        Ok(grads)
    }

    /// Reverse pass over a recorded trace. Parameter gradients are added to
    /// `grads`; the gradient with respect to the network input is returned.
    pub fn backward_trace(
        &self,
        trace: &Trace,
        upstream: &[f64],
        grads: &mut Gradients,
    ) -> Result<Vec<f64>> {
        ensure_len("upstream gradient", self.output_dim(), upstream.len())?;
        ensure_len("trace layers", self.layer_sizes.len(), trace.activations.len())?;
        ensure_len("gradient buffer", self.params.len(), grads.values.len())?;
        let mut delta = upstream.to_vec();
        for l in (0..self.n_layers()).rev() {
            let (n_in, n_out) = (self.layer_sizes[l], self.layer_sizes[l + 1]);
            let act = self.activation_of(l);
            let y = &trace.activations[l + 1];
            let x = &trace.activations[l];
            for (d, &yo) in delta.iter_mut().zip(y) {
                *d *= act.derivative_from_output(yo);
            }
            let (w_off, b_off) = layer_offsets(&self.layer_sizes, l);
            let weights = &self.params[w_off..b_off];
            let (gw, gb) = grads.values[w_off..b_off + n_out].split_at_mut(n_in * n_out);
            let mut input_grad = vec![0.0; n_in];
            for (o, &d) in delta.iter().enumerate() {
                gb[o] += d;
                if d == 0.0 {
                    continue;
                }
                let w_row = &weights[o * n_in..(o + 1) * n_in];
                let g_row = &mut gw[o * n_in..(o + 1) * n_in];
                for (g, xi) in g_row.iter_mut().zip(x) {
                    *g += d * xi;
                }
                for (ig, w) in input_grad.iter_mut().zip(w_row) {
                    *ig += d * w;
                }
            }
            delta = input_grad;
        }
        Ok(delta)
    }
}

impl Gradients {
    pub fn zeros_like(net: &Mlp) -> Self {
        Gradients {
            layer_sizes: net.layer_sizes.clone(),
            values: vec![0.0; net.params.len()],
        }
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn weights(&self, l: usize) -> &[f64] {
        let (w, b) = layer_offsets(&self.layer_sizes, l);
        &self.values[w..b]
    }

    pub fn biases(&self, l: usize) -> &[f64] {
        let (_, b) = layer_offsets(&self.layer_sizes, l);
        &self.values[b..b + self.layer_sizes[l + 1]]
    }

    pub fn n_layers(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Clears the buffer between accumulation windows.
    pub fn zero(&mut self) {
        self.values.fill(0.0);
    }

    pub fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn squared_norm(&self) -> f64 {
        crate::linalg::squared_norm(&self.values)
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn linear(weights: Vec<Vec<f64>>, bias: Vec<f64>) -> Mlp {
        Mlp::from_layers(&[weights], &[bias], Activation::Identity, Activation::Identity).unwrap()
    }

    #[test]
    fn identity_network_passes_input_through() {
        let net = linear(vec![vec![1.0, 0.0], vec![0.0, 1.0]], vec![0.0, 0.0]);
        assert_eq!(net.forward(&[1.0, 2.0]).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn single_linear_layer_hand_product() {
        let net = linear(vec![vec![2.0, 0.0], vec![0.0, 3.0]], vec![1.0, 1.0]);
        assert_eq!(net.forward(&[1.0, 1.0]).unwrap(), vec![3.0, 4.0]);
    }

    #[test]
    fn zero_tanh_output_layer_gives_zero() {
        let net = Mlp::zeros(&[3, 5, 2], Activation::Tanh, Activation::Tanh).unwrap();
        assert_eq!(net.forward(&[0.3, -7.0, 11.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn forward_rejects_wrong_input_length() {
        let net = Mlp::zeros(&[3, 2], Activation::Tanh, Activation::Identity).unwrap();
        assert!(matches!(
            net.forward(&[1.0]),
            Err(Error::DimensionMismatch { expected: 3, actual: 1, .. })
        ));
    }

    #[test]
    fn scalar_linear_derivative() {
        let net = linear(vec![vec![0.7]], vec![0.0]);
        let g = net.backward(&[3.0], &[1.0]).unwrap();
        assert_eq!(g.weights(0), &[3.0]);
        assert_eq!(g.biases(0), &[1.0]);
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let net = Mlp::new(&[4, 6, 3], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let g = net.backward(&[0.1, 0.2, -0.3, 0.4], &[0.0; 3]).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn backward_rejects_shape_mismatch() {
        let net = Mlp::zeros(&[2, 2], Activation::Tanh, Activation::Identity).unwrap();
        assert!(net.backward(&[1.0, 2.0], &[1.0]).is_err());
    }

    #[test]
    fn glorot_init_bounds_and_zero_bias() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let net = Mlp::new(&[10, 6], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let limit = (6.0f64 / 16.0).sqrt();
        assert!(net.weights(0).iter().all(|w| w.abs() <= limit));
        assert!(net.biases(0).iter().all(|&b| b == 0.0));
    }

    #[test]
    fn non_finite_parameters_are_rejected() {
        let err = Mlp::from_flat(
            &[1, 1],
            Activation::Identity,
            Activation::Identity,
            vec![f64::NAN, 0.0],
        )
        .unwrap_err();
        assert!(err.to_string().contains("layer 0"));
    }

    #[test]
    fn layer_of_param_walks_layout() {
        let net = Mlp::zeros(&[2, 3, 1], Activation::Tanh, Activation::Identity).unwrap();
        // layer 0: 6 weights + 3 biases, layer 1: 3 weights + 1 bias
        assert_eq!(net.layer_of_param(0), 0);
        assert_eq!(net.layer_of_param(8), 0);
        assert_eq!(net.layer_of_param(9), 1);
        assert_eq!(net.layer_of_param(12), 1);
    }

    #[test]
    fn repeated_passes_are_bitwise_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = Mlp::new(&[3, 8, 8, 2], Activation::Tanh, Activation::Identity, &mut rng).unwrap();
        let x = [0.3, -0.2, 0.9];
        let a = net.backward(&x, &[1.0, -2.0]).unwrap();
        let b = net.backward(&x, &[1.0, -2.0]).unwrap();
        assert_eq!(a, b);
        assert_eq!(net.forward(&x).unwrap(), net.forward(&x).unwrap());
    }
}
