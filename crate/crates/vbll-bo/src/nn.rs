//! Dense feed-forward feature extractor with ELU activations, manual
//! backpropagation, AdamW, and norm-based gradient clipping.
//!
//! The backbone maps inputs in the unit hypercube to a feature vector
//! `phi(x)`; ELU is applied on every layer including the output feature
//! layer. Training mutates a net from one thread at a time; forward
//! evaluation on an immutable snapshot is safe to share.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;

pub const ELU_ALPHA: f64 = 1.0;

#[inline]
pub fn elu(x: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        ELU_ALPHA * (x.exp() - 1.0)
    }
}

#[inline]
fn elu_prime(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        ELU_ALPHA * x.exp()
    }
}

/// Feed-forward net. `layer_dims = [D, h_1, ..., h_L]`; the feature
/// dimension `m` is the last width. Weight `l` has shape
/// `(layer_dims[l], layer_dims[l+1])`, stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackboneNet {
    layer_dims: Vec<usize>,
    pub weights: Vec<Vec<f64>>,
    pub biases: Vec<Vec<f64>>,
}

/// Activation record from a batched forward pass; consumed by `backward`.
pub struct BatchTape {
    /// Input to each layer: `inputs[0]` is the batch itself.
    inputs: Vec<Matrix>,
    /// Pre-activation of each layer.
    preacts: Vec<Matrix>,
}

/// Shape-matched gradients for every backbone parameter array.
#[derive(Debug, Clone, PartialEq)]
pub struct GradientSet {
    pub d_weights: Vec<Vec<f64>>,
    pub d_biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(net: &BackboneNet) -> Self {
        GradientSet {
            d_weights: net.weights.iter().map(|w| vec![0.0; w.len()]).collect(),
            d_biases: net.biases.iter().map(|b| vec![0.0; b.len()]).collect(),
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut s = 0.0;
        for a in self.d_weights.iter().chain(&self.d_biases) {
            for v in a {
                s += v * v;
            }
        }
        s.sqrt()
    }

    /// Scale all entries by `max_norm / norm` when the global L2 norm
    /// exceeds `max_norm`; identity otherwise.
    pub fn clipped(mut self, max_norm: f64) -> Self {
        assert!(max_norm > 0.0);
        let norm = self.global_norm();
        if norm > max_norm {
            let f = max_norm / norm;
            for a in self.d_weights.iter_mut().chain(self.d_biases.iter_mut()) {
                for v in a.iter_mut() {
                    *v *= f;
                }
            }
        }
        self
    }
}

impl BackboneNet {
    /// Fan-in-scaled uniform initialization, deterministic per seed: every
    /// entry of layer `l` is drawn from `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`.
    pub fn init(layer_dims: &[usize], seed: u64) -> Self {
        assert!(layer_dims.len() >= 2, "need at least one layer");
        assert!(layer_dims.iter().all(|&d| d >= 1));
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut weights = Vec::new();
        let mut biases = Vec::new();
        for l in 0..layer_dims.len() - 1 {
            let fan_in = layer_dims[l] as f64;
            let bound = 1.0 / fan_in.sqrt();
            let w: Vec<f64> = (0..layer_dims[l] * layer_dims[l + 1])
                .map(|_| rng.gen_range(-bound..bound))
                .collect();
            let b: Vec<f64> = (0..layer_dims[l + 1]).map(|_| rng.gen_range(-bound..bound)).collect();
            weights.push(w);
            biases.push(b);
        }
        BackboneNet { layer_dims: layer_dims.to_vec(), weights, biases }
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    pub fn feature_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    pub fn num_layers(&self) -> usize {
        self.weights.len()
    }

    /// Batched forward pass: rows of `xs` are inputs, rows of the returned
    /// matrix are features.
    pub fn forward_batch(&self, xs: &Matrix) -> (Matrix, BatchTape) {
        assert_eq!(xs.cols(), self.input_dim());
        let b = xs.rows();
        let mut inputs = Vec::with_capacity(self.num_layers());
        let mut preacts = Vec::with_capacity(self.num_layers());
        let mut act = xs.clone();
        for l in 0..self.num_layers() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let mut z = Matrix::zeros(b, n_out);
            for r in 0..b {
                let row_in = act.row(r);
                let row_z = z.row_mut(r);
                row_z.copy_from_slice(&self.biases[l]);
                for (i, &a) in row_in.iter().enumerate().take(n_in) {
                    let wrow = &self.weights[l][i * n_out..(i + 1) * n_out];
                    for j in 0..n_out {
                        row_z[j] += a * wrow[j];
                    }
                }
            }
            let next = Matrix::from_fn(b, n_out, |r, c| elu(z.get(r, c)));
            inputs.push(act);
            preacts.push(z);
            act = next;
        }
        (act, BatchTape { inputs, preacts })
    }

    /// Single-input forward pass.
    pub fn forward(&self, x: &[f64]) -> (Vec<f64>, BatchTape) {
        let xs = Matrix::from_rows(&[x.to_vec()]);
        let (feats, tape) = self.forward_batch(&xs);
        (feats.row(0).to_vec(), tape)
    }

    /// Feature vector only, when no backward pass will follow.
    pub fn features(&self, x: &[f64]) -> Vec<f64> {
        self.forward(x).0
    }

    fn backprop(&self, tape: &BatchTape, grad_features: &Matrix) -> (GradientSet, Matrix) {
        let b = grad_features.rows();
        assert_eq!(grad_features.cols(), self.feature_dim());
        assert_eq!(tape.inputs[0].rows(), b, "tape does not match gradient batch");
        let mut grads = GradientSet::zeros_like(self);
        // delta := dLoss/d(preact of current layer)
        let last = self.num_layers() - 1;
        let mut delta = Matrix::from_fn(b, self.layer_dims[last + 1], |r, c| {
            grad_features.get(r, c) * elu_prime(tape.preacts[last].get(r, c))
        });
        for l in (0..self.num_layers()).rev() {
            let (n_in, n_out) = (self.layer_dims[l], self.layer_dims[l + 1]);
            let dw = &mut grads.d_weights[l];
            let db = &mut grads.d_biases[l];
            for r in 0..b {
                let a_in = tape.inputs[l].row(r);
                let d = delta.row(r);
                for (i, &ai) in a_in.iter().enumerate().take(n_in) {
                    let wrow = &mut dw[i * n_out..(i + 1) * n_out];
                    for j in 0..n_out {
                        wrow[j] += ai * d[j];
                    }
                }
                for j in 0..n_out {
                    db[j] += d[j];
                }
            }
            // Propagate to the previous layer (or the input when l == 0).
            let mut prev = Matrix::zeros(b, n_in);
            for r in 0..b {
                let d = delta.row(r);
                let p = prev.row_mut(r);
                for i in 0..n_in {
                    let wrow = &self.weights[l][i * n_out..(i + 1) * n_out];
                    let mut s = 0.0;
                    for j in 0..n_out {
                        s += wrow[j] * d[j];
                    }
                    p[i] = s;
                }
            }
            if l > 0 {
                for r in 0..b {
                    let z = tape.preacts[l - 1].row(r);
                    let p = prev.row_mut(r);
                    for i in 0..n_in {
                        p[i] *= elu_prime(z[i]);
                    }
                }
            }
            delta = prev;
        }
        (grads, delta)
    }

    /// Exact parameter gradients of `sum_batch features . grad_features`.
    pub fn backward_batch(&self, tape: &BatchTape, grad_features: &Matrix) -> GradientSet {
        self.backprop(tape, grad_features).0
    }

    /// Single-input wrapper around [`BackboneNet::backward_batch`].
    pub fn backward(&self, tape: &BatchTape, grad_features: &[f64]) -> GradientSet {
        let g = Matrix::from_rows(&[grad_features.to_vec()]);
        self.backward_batch(tape, &g)
    }

    /// Gradient of `features . grad_features` with respect to the input
    /// (single-input tape). Used for acquisition optimization.
    pub fn input_gradient(&self, tape: &BatchTape, grad_features: &[f64]) -> Vec<f64> {
        let g = Matrix::from_rows(&[grad_features.to_vec()]);
        self.backprop(tape, &g).1.row(0).to_vec()
    }
}

/// AdamW optimizer state: step count plus first/second moments per
/// parameter array, addressed by a stable slot index.
#[derive(Debug, Clone)]
pub struct AdamWState {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub step: u64,
    moments_m: Vec<Vec<f64>>,
    moments_v: Vec<Vec<f64>>,
}

impl AdamWState {
    pub fn new(learning_rate: f64, weight_decay: f64) -> Self {
        AdamWState {
            learning_rate,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            step: 0,
            moments_m: Vec::new(),
            moments_v: Vec::new(),
        }
    }

    fn slot(&mut self, idx: usize, len: usize) {
        while self.moments_m.len() <= idx {
            self.moments_m.push(Vec::new());
            self.moments_v.push(Vec::new());
        }
        if self.moments_m[idx].is_empty() {
            self.moments_m[idx] = vec![0.0; len];
            self.moments_v[idx] = vec![0.0; len];
        }
        assert_eq!(self.moments_m[idx].len(), len, "parameter shape changed");
    }

    fn update_array(&mut self, idx: usize, param: &mut [f64], grad: &[f64], decay: bool) {
        assert_eq!(param.len(), grad.len());
        self.slot(idx, param.len());
        let bc1 = 1.0 - self.beta1.powi(self.step as i32);
        let bc2 = 1.0 - self.beta2.powi(self.step as i32);
        let m = &mut self.moments_m[idx];
        let v = &mut self.moments_v[idx];
        for k in 0..param.len() {
            m[k] = self.beta1 * m[k] + (1.0 - self.beta1) * grad[k];
            v[k] = self.beta2 * v[k] + (1.0 - self.beta2) * grad[k] * grad[k];
            let m_hat = m[k] / bc1;
            let v_hat = v[k] / bc2;
            if decay {
                param[k] -= self.learning_rate * self.weight_decay * param[k];
            }
            param[k] -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
        }
    }
}

/// One AdamW step with bias correction over a list of parameter arrays.
/// Decoupled weight decay is applied only where `decay_mask` is set.
pub fn adamw_step(
    state: &mut AdamWState,
    params: &mut [&mut [f64]],
    grads: &[&[f64]],
    decay_mask: &[bool],
) {
    assert_eq!(params.len(), grads.len());
    assert_eq!(params.len(), decay_mask.len());
    state.step += 1;
    for (idx, p) in params.iter_mut().enumerate() {
        state.update_array(idx, p, grads[idx], decay_mask[idx]);
    }
}

/// Norm-based clipping over arbitrary parameter-array gradients: if the
/// global L2 norm exceeds `max_norm`, every entry is scaled by
/// `max_norm / norm`. Returns the pre-clip norm.
pub fn clip_gradient_slices(arrays: &mut [&mut [f64]], max_norm: f64) -> f64 {
    assert!(max_norm > 0.0);
    let mut s = 0.0;
    for a in arrays.iter() {
        for v in a.iter() {
            s += v * v;
        }
    }
    let norm = s.sqrt();
    if norm > max_norm {
        let f = max_norm / norm;
        for a in arrays.iter_mut() {
            for v in a.iter_mut() {
                *v *= f;
            }
        }
    }
    norm
}
