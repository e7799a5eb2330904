//! Fully connected value network with hand-written backprop. Hidden layers use
//! ReLU, the output layer is linear. Everything is plain `f64` so gradients
//! can be checked against finite differences coordinate by coordinate.

use rand::distributions::{Distribution, Uniform};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    /// Row-major `out_dim x in_dim` weights.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl Layer {
    pub fn new(in_dim: usize, out_dim: usize, w: Vec<f64>, b: Vec<f64>) -> Result<Self> {
        if w.len() != in_dim * out_dim {
            return Err(Error::DimensionMismatch { expected: in_dim * out_dim, actual: w.len() });
        }
        if b.len() != out_dim {
            return Err(Error::DimensionMismatch { expected: out_dim, actual: b.len() });
        }
        Ok(Self { w, b, in_dim, out_dim })
    }

    fn affine(&self, x: &[f64], out: &mut Vec<f64>) {
        out.clear();
        for o in 0..self.out_dim {
            let row = &self.w[o * self.in_dim..(o + 1) * self.in_dim];
            let mut acc = self.b[o];
            for (wi, xi) in row.iter().zip(x) {
                acc += wi * xi;
            }
            out.push(acc);
        }
    }
}

/// Per-layer gradient with the same shapes as the network.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradient {
    pub layers: Vec<(Vec<f64>, Vec<f64>)>,
}

impl Gradient {
    pub fn zeros_like(net: &ValueNet) -> Self {
        Self {
            layers: net
                .layers
                .iter()
                .map(|l| (vec![0.0; l.w.len()], vec![0.0; l.b.len()]))
                .collect(),
        }
    }

    pub fn scale(&mut self, s: f64) {
        for (w, b) in &mut self.layers {
            for v in w.iter_mut() {
                *v *= s;
            }
            for v in b.iter_mut() {
                *v *= s;
            }
        }
    }

    /// Flat view in the same order as [`ValueNet::get_params`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for (w, b) in &self.layers {
            out.extend_from_slice(w);
            out.extend_from_slice(b);
        }
        out
    }
}

/// Forward-pass cache needed for one backward pass.
pub struct ForwardCache {
    /// `activations[0]` is the input; `activations[i]` the post-activation of layer i-1.
    activations: Vec<Vec<f64>>,
    /// Pre-activations per layer.
    zs: Vec<Vec<f64>>,
}

impl ForwardCache {
    pub fn output(&self) -> &[f64] {
        self.activations.last().expect("cache always has the input")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueNet {
    layers: Vec<Layer>,
}

impl ValueNet {
    /// Random network with the given `[input, hidden.., output]` dims.
    /// Weights are uniform in +/- 1/sqrt(fan_in); biases start at zero.
    pub fn new(dims: &[usize], rng: &mut ChaCha8Rng) -> Result<Self> {
        if dims.len() < 2 {
            return Err(Error::Config("network needs at least input and output dims".into()));
        }
        if dims.iter().any(|&d| d == 0) {
            return Err(Error::Config("network dims must be positive".into()));
        }
        let mut layers = Vec::with_capacity(dims.len() - 1);
        for pair in dims.windows(2) {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let dist = Uniform::new_inclusive(-bound, bound);
            let w: Vec<f64> = (0..fan_in * fan_out).map(|_| dist.sample(rng)).collect();
            layers.push(Layer::new(fan_in, fan_out, w, vec![0.0; fan_out])?);
        }
        Ok(Self { layers })
    }

    pub fn from_layers(layers: Vec<Layer>) -> Result<Self> {
        if layers.is_empty() {
            return Err(Error::Config("network needs at least one layer".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].out_dim != pair[1].in_dim {
                return Err(Error::DimensionMismatch {
                    expected: pair[0].out_dim,
                    actual: pair[1].in_dim,
                });
            }
        }
        Ok(Self { layers })
    }

    pub fn dims(&self) -> Vec<usize> {
        let mut dims = vec![self.layers[0].in_dim];
        dims.extend(self.layers.iter().map(|l| l.out_dim));
        dims
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().expect("nonempty").out_dim
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.input_dim(), "input length mismatch");
        let mut cur = x.to_vec();
        let mut next = Vec::new();
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            layer.affine(&cur, &mut next);
            if i != last {
                for v in next.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }

    pub fn forward_cached(&self, x: &[f64]) -> ForwardCache {
        assert_eq!(x.len(), self.input_dim(), "input length mismatch");
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut zs = Vec::with_capacity(self.layers.len());
        activations.push(x.to_vec());
        let last = self.layers.len() - 1;
        for (i, layer) in self.layers.iter().enumerate() {
            let mut z = Vec::new();
            layer.affine(activations.last().expect("nonempty"), &mut z);
            zs.push(z.clone());
            if i != last {
                for v in z.iter_mut() {
                    if *v < 0.0 {
                        *v = 0.0;
                    }
                }
            }
            activations.push(z);
        }
        ForwardCache { activations, zs }
    }

    /// Gradient of the squared error `(q[action] - target)^2` for one sample,
    /// scaled by `scale` and accumulated into `grad`.
    pub fn backward_into(
        &self,
        cache: &ForwardCache,
        action: usize,
        target: f64,
        scale: f64,
        grad: &mut Gradient,
    ) {
        let out = cache.output();
        assert!(action < out.len(), "action index out of range");
        // dL/dq = 2 (q_a - target) on the chosen coordinate only
        let mut delta = vec![0.0; out.len()];
        delta[action] = 2.0 * (out[action] - target) * scale;

        for (i, layer) in self.layers.iter().enumerate().rev() {
            let input = &cache.activations[i];
            let (gw, gb) = &mut grad.layers[i];
            for o in 0..layer.out_dim {
                let d = delta[o];
                if d != 0.0 {
                    gb[o] += d;
                    let row = &mut gw[o * layer.in_dim..(o + 1) * layer.in_dim];
                    for (g, &xi) in row.iter_mut().zip(input) {
                        *g += d * xi;
                    }
                }
            }
            if i > 0 {
                let mut prev = vec![0.0; layer.in_dim];
                for o in 0..layer.out_dim {
                    let d = delta[o];
                    if d != 0.0 {
                        let row = &layer.w[o * layer.in_dim..(o + 1) * layer.in_dim];
                        for (p, &wi) in prev.iter_mut().zip(row) {
                            *p += d * wi;
                        }
                    }
                }
                // ReLU derivative: pass-through where the pre-activation was positive
                for (p, &z) in prev.iter_mut().zip(&cache.zs[i - 1]) {
                    if z <= 0.0 {
                        *p = 0.0;
                    }
                }
                delta = prev;
            }
        }
    }

    /// Convenience single-sample gradient of `(q[action] - target)^2`.
    pub fn backward(&self, x: &[f64], action: usize, target: f64) -> Gradient {
        let cache = self.forward_cached(x);
        let mut grad = Gradient::zeros_like(self);
        self.backward_into(&cache, action, target, 1.0, &mut grad);
        grad
    }

    /// One SGD step: `theta -= lr * grad`.
    pub fn apply_gradient(&mut self, grad: &Gradient, lr: f64) {
        assert_eq!(grad.layers.len(), self.layers.len());
        for (layer, (gw, gb)) in self.layers.iter_mut().zip(&grad.layers) {
            for (w, g) in layer.w.iter_mut().zip(gw) {
                *w -= lr * g;
            }
            for (b, g) in layer.b.iter_mut().zip(gb) {
                *b -= lr * g;
            }
        }
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.w.len() + l.b.len()).sum()
    }

    /// Flat parameters: per layer, row-major weights then biases.
    pub fn get_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        for l in &self.layers {
            out.extend_from_slice(&l.w);
            out.extend_from_slice(&l.b);
        }
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch { expected: self.param_count(), actual: params.len() });
        }
        let mut off = 0;
        for l in &mut self.layers {
            let wn = l.w.len();
            l.w.copy_from_slice(&params[off..off + wn]);
            off += wn;
            let bn = l.b.len();
            l.b.copy_from_slice(&params[off..off + bn]);
            off += bn;
        }
        Ok(())
    }

    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.w.iter().chain(&l.b).all(|v| v.is_finite()))
    }
}

/// Central finite-difference gradient of `(q[action] - target)^2` at `x`.
/// This is the independent check used to validate [`ValueNet::backward`].
pub fn finite_difference_gradient(
    net: &ValueNet,
    x: &[f64],
    action: usize,
    target: f64,
    perturbation: f64,
) -> Vec<f64> {
    let loss = |n: &ValueNet| {
        let q = n.forward(x)[action];
        (q - target) * (q - target)
    };
    let base = net.get_params();
    let mut work = net.clone();
    let mut grad = Vec::with_capacity(base.len());
    for i in 0..base.len() {
        let mut plus = base.clone();
        plus[i] += perturbation;
        work.set_params(&plus).expect("same shape");
        let up = loss(&work);
        let mut minus = base.clone();
        minus[i] -= perturbation;
        work.set_params(&minus).expect("same shape");
        let down = loss(&work);
        grad.push((up - down) / (2.0 * perturbation));
    }
    grad
}

/// Relative error with an absolute floor, for comparing near-zero gradients.
pub fn gradient_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let mut worst = 0.0f64;
    for (&a, &n) in analytic.iter().zip(numeric) {
        let denom = a.abs().max(n.abs()).max(1e-8);
        worst = worst.max((a - n).abs() / denom);
    }
    worst
}

/// Random small network plus input whose hidden pre-activations stay away from
/// the ReLU kink, so finite differences are well defined. Deterministic in `rng`.
pub fn random_smooth_instance(rng: &mut ChaCha8Rng) -> (ValueNet, Vec<f64>, usize, f64) {
    use rand::Rng;
    loop {
        let input = rng.gen_range(2..6);
        let hidden = rng.gen_range(3..8);
        let depth = rng.gen_range(1..3);
        let output = rng.gen_range(2..9);
        let mut dims = vec![input];
        for _ in 0..depth {
            dims.push(hidden);
        }
        dims.push(output);
        let net = ValueNet::new(&dims, rng).expect("valid dims");
        let x: Vec<f64> = (0..input).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let cache = net.forward_cached(&x);
        let near_kink = cache.zs[..cache.zs.len() - 1]
            .iter()
            .any(|z| z.iter().any(|v| v.abs() < 1e-3));
        if near_kink {
            continue;
        }
        let action = rng.gen_range(0..output);
        let target = rng.gen_range(-2.0..2.0);
        return (net, x, action, target);
    }
}
