//! Small dense networks with hand-written backprop and Adam.
//!
//! Batches are row-major (`B×n`) f64 matrices. Hidden layers use tanh, which
//! keeps every loss smooth enough for the finite-difference gradient checks
//! that gate this module.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// One affine layer, weights stored out×in.
#[derive(Clone, Debug, PartialEq)]
pub struct Linear {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

impl Linear {
    fn xavier(n_in: usize, n_out: usize, rng: &mut ChaCha8Rng) -> Self {
        let limit = (6.0 / (n_in + n_out) as f64).sqrt();
        let weight = DMatrix::from_fn(n_out, n_in, |_, _| rng.random_range(-limit..limit));
        Linear {
            weight,
            bias: DVector::zeros(n_out),
        }
    }

    fn zeros(n_in: usize, n_out: usize) -> Self {
        Linear {
            weight: DMatrix::zeros(n_out, n_in),
            bias: DVector::zeros(n_out),
        }
    }
}

/// Gradient of one layer.
#[derive(Clone, Debug)]
pub struct LinearGrad {
    pub weight: DMatrix<f64>,
    pub bias: DVector<f64>,
}

/// Multi-layer perceptron: tanh hidden layers, linear output.
#[derive(Clone, Debug, PartialEq)]
pub struct Mlp {
    pub layers: Vec<Linear>,
}

/// Per-layer inputs cached during the forward pass.
pub struct ForwardCache {
    /// `inputs[i]` is the input to layer `i`; `inputs.len() == layers.len()`.
    inputs: Vec<DMatrix<f64>>,
    /// Post-activation outputs of the hidden layers.
    hidden_outputs: Vec<DMatrix<f64>>,
}

impl Mlp {
    /// Builds an MLP with the given layer sizes, e.g. `[38, 64, 64, 16]`.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Self {
        assert!(dims.len() >= 2);
        let layers = dims
            .windows(2)
            .map(|w| Linear::xavier(w[0], w[1], rng))
            .collect();
        Mlp { layers }
    }

    /// Zeroes the final layer so the initial output is exactly zero.
    pub fn zero_output_layer(&mut self) {
        let last = self.layers.len() - 1;
        let (n_out, n_in) = (self.layers[last].weight.nrows(), self.layers[last].weight.ncols());
        self.layers[last] = Linear::zeros(n_in, n_out);
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].weight.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.layers[self.layers.len() - 1].weight.nrows()
    }

    /// Forward pass keeping what backprop needs.
    pub fn forward(&self, input: &DMatrix<f64>) -> (DMatrix<f64>, ForwardCache) {
        let mut cache = ForwardCache {
            inputs: Vec::with_capacity(self.layers.len()),
            hidden_outputs: Vec::with_capacity(self.layers.len().saturating_sub(1)),
        };
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            cache.inputs.push(x.clone());
            let mut y = &x * layer.weight.transpose();
            for mut row in y.row_iter_mut() {
                row += layer.bias.transpose();
            }
            if idx + 1 < self.layers.len() {
                y.apply(|v| *v = v.tanh());
                cache.hidden_outputs.push(y.clone());
            }
            x = y;
        }
        (x, cache)
    }

    /// Output without building a cache.
    pub fn infer(&self, input: &DMatrix<f64>) -> DMatrix<f64> {
        let mut x = input.clone();
        for (idx, layer) in self.layers.iter().enumerate() {
            let mut y = &x * layer.weight.transpose();
            for mut row in y.row_iter_mut() {
                row += layer.bias.transpose();
            }
            if idx + 1 < self.layers.len() {
                y.apply(|v| *v = v.tanh());
            }
            x = y;
        }
        x
    }

    /// Backward pass. Returns per-layer gradients and the loss gradient with
    /// respect to the network input.
    pub fn backward(&self, cache: &ForwardCache, grad_output: &DMatrix<f64>) -> (Vec<LinearGrad>, DMatrix<f64>) {
        let mut grads: Vec<Option<LinearGrad>> = (0..self.layers.len()).map(|_| None).collect();
        let mut upstream = grad_output.clone();
        for idx in (0..self.layers.len()).rev() {
            // Through the activation of this layer's output (hidden only).
            if idx + 1 < self.layers.len() {
                let activated = &cache.hidden_outputs[idx];
                upstream.zip_apply(activated, |g, a| *g *= 1.0 - a * a);
            }
            let input = &cache.inputs[idx];
            let grad_w = upstream.transpose() * input;
            let grad_b = DVector::from_fn(upstream.ncols(), |c, _| upstream.column(c).sum());
            grads[idx] = Some(LinearGrad {
                weight: grad_w,
                bias: grad_b,
            });
            upstream *= self.layers[idx].weight.clone();
        }
        (
            grads.into_iter().map(Option::unwrap).collect(),
            upstream,
        )
    }

    /// Polyak-averages `source` into `self`: `self ← (1−τ)·self + τ·source`.
    pub fn lerp_from(&mut self, source: &Mlp, tau: f64) {
        for (dst, src) in self.layers.iter_mut().zip(source.layers.iter()) {
            dst.weight.zip_apply(&src.weight, |d, s| *d = (1.0 - tau) * *d + tau * s);
            dst.bias.zip_apply(&src.bias, |d, s| *d = (1.0 - tau) * *d + tau * s);
        }
    }

    /// Sum of squared parameter magnitudes, for diagnostics.
    pub fn param_norm(&self) -> f64 {
        self.layers
            .iter()
            .map(|l| l.weight.norm_squared() + l.bias.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    /// Flattens all parameters (used by checkpoints and tests).
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend(layer.weight.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Loads parameters from a flat slice produced by [`Mlp::flatten`].
    pub fn unflatten(&mut self, flat: &[f64]) {
        let mut cursor = 0;
        for layer in &mut self.layers {
            for v in layer.weight.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
            for v in layer.bias.iter_mut() {
                *v = flat[cursor];
                cursor += 1;
            }
        }
        assert_eq!(cursor, flat.len(), "flat parameter size mismatch");
    }
}

/// Adam state for one MLP.
#[derive(Clone, Debug)]
pub struct Adam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: Vec<LinearGrad>,
    v: Vec<LinearGrad>,
}

impl Adam {
    pub fn new(net: &Mlp, lr: f64) -> Self {
        let zeros = |l: &Linear| LinearGrad {
            weight: DMatrix::zeros(l.weight.nrows(), l.weight.ncols()),
            bias: DVector::zeros(l.bias.nrows()),
        };
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: net.layers.iter().map(zeros).collect(),
            v: net.layers.iter().map(zeros).collect(),
        }
    }

    pub fn step(&mut self, net: &mut Mlp, grads: &[LinearGrad]) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for ((layer, grad), (m, v)) in net
            .layers
            .iter_mut()
            .zip(grads.iter())
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64, lr: f64, b1: f64, b2: f64, eps: f64| {
                *m = b1 * *m + (1.0 - b1) * g;
                *v = b2 * *v + (1.0 - b2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *p -= lr * m_hat / (v_hat.sqrt() + eps);
            };
            for ((p, &g), (ms, vs)) in layer
                .weight
                .iter_mut()
                .zip(grad.weight.iter())
                .zip(m.weight.iter_mut().zip(v.weight.iter_mut()))
            {
                update(p, g, ms, vs, self.lr, self.beta1, self.beta2, self.eps);
            }
            for ((p, &g), (ms, vs)) in layer
                .bias
                .iter_mut()
                .zip(grad.bias.iter())
                .zip(m.bias.iter_mut().zip(v.bias.iter_mut()))
            {
                update(p, g, ms, vs, self.lr, self.beta1, self.beta2, self.eps);
            }
        }
    }
}

/// Adam on a single scalar (the entropy temperature).
#[derive(Clone, Copy, Debug)]
pub struct ScalarAdam {
    pub lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    t: u64,
    m: f64,
    v: f64,
}

impl ScalarAdam {
    pub fn new(lr: f64) -> Self {
        ScalarAdam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: 0.0,
            v: 0.0,
        }
    }

    pub fn step(&mut self, param: &mut f64, grad: f64) {
        self.t += 1;
        self.m = self.beta1 * self.m + (1.0 - self.beta1) * grad;
        self.v = self.beta2 * self.v + (1.0 - self.beta2) * grad * grad;
        let m_hat = self.m / (1.0 - self.beta1.powi(self.t as i32));
        let v_hat = self.v / (1.0 - self.beta2.powi(self.t as i32));
        *param -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
    }
}
