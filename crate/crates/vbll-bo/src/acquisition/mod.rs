//! Candidate selection: log expected improvement on the Gaussian
//! predictive, analytic Thompson sampling with multistart bounded
//! quasi-Newton ascent, and multi-objective Thompson sampling via NSGA-II
//! with greedy hypervolume-improvement selection.
//!
//! Acquisition values are computed in the standardized output space (the
//! predictive distribution lives there); sampled objective functions are
//! reported in raw units for Pareto bookkeeping against observed data.

pub mod lbfgsb;
pub mod nsga2;
pub mod pareto;

pub use nsga2::{crowding_distance, non_dominated_sort, nsga2_run, NsgaConfig as Nsga2Config};
pub use pareto::{hypervolume, select_hvi_candidate, ParetoArchive};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::linalg::tri_solve;
use crate::nn::BackboneNet;
use crate::sobol_seq::SobolStream;
use crate::surrogate::{Standardizer, SurrogateModel};

use lbfgsb::{maximize_boxed, LbfgsOptions};
use nsga2::NsgaConfig;

const LOG_2PI: f64 = 1.8378770664093453;
const DEGENERATE_VARIANCE: f64 = 1e-18;

fn log_phi_pdf(u: f64) -> f64 {
    -0.5 * u * u - 0.5 * LOG_2PI
}

/// Tail `w` of Laplace's continued fraction for the Mills ratio:
/// `Phi(-t)/phi(t) = 1/(t + w)` with `w = 1/(t + 2/(t + 3/(t + ...)))`.
fn mills_tail(t: f64) -> f64 {
    let depth = if t < 4.0 { 120 } else if t < 10.0 { 60 } else { 24 };
    let mut tail = 0.0;
    for k in (2..=depth).rev() {
        tail = k as f64 / (t + tail);
    }
    1.0 / (t + tail)
}

/// `log h(u)` for `h(u) = phi(u) + u Phi(u)`, the unit-scale expected
/// improvement. Direct evaluation via `erfc` for moderate `u`; for deep
/// negative `u` the cancellation-free continued-fraction form
/// `h(u) = phi(t) w / (t + w)` with `t = -u`.
fn log_h(u: f64) -> f64 {
    if u >= -4.0 {
        let phi = (-0.5 * u * u).exp() / (2.0 * std::f64::consts::PI).sqrt();
        let cdf = 0.5 * erfc(-u / std::f64::consts::SQRT_2);
        (phi + u * cdf).ln()
    } else {
        let t = -u;
        let w = mills_tail(t);
        log_phi_pdf(u) + w.ln() - (t + w).ln()
    }
}

/// `log Phi(u)`, sharing the continued fraction in the deep tail.
fn log_cdf(u: f64) -> f64 {
    if u >= -4.0 {
        (0.5 * erfc(-u / std::f64::consts::SQRT_2)).ln()
    } else {
        let t = -u;
        let w = mills_tail(t);
        log_phi_pdf(u) - (t + w).ln()
    }
}

/// Log expected improvement for maximization:
/// `log EI = log sigma + log h((mean - best)/sigma)`.
///
/// Finite and monotone in `mean` for all non-degenerate variances and any
/// `u` down to far tails (well past `u = -30`).
pub fn log_ei(mean: f64, variance: f64, best: f64) -> Result<f64> {
    if !(variance > DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateVariance(variance));
    }
    let sigma = variance.sqrt();
    Ok(sigma.ln() + log_h((mean - best) / sigma))
}

/// Value plus partial derivatives with respect to `mean` and `variance`.
pub fn log_ei_with_grads(mean: f64, variance: f64, best: f64) -> Result<(f64, f64, f64)> {
    if !(variance > DEGENERATE_VARIANCE) {
        return Err(Error::DegenerateVariance(variance));
    }
    let sigma = variance.sqrt();
    let u = (mean - best) / sigma;
    let lh = log_h(u);
    let value = sigma.ln() + lh;
    // dEI/dmean = Phi(u); dEI/dsigma = phi(u).
    let d_mean = (log_cdf(u) - lh).exp() / sigma;
    let ratio_cdf_h = (log_cdf(u) - lh).exp();
    let d_var = (1.0 - u * ratio_cdf_h) / (2.0 * variance);
    Ok((value, d_mean, d_var))
}

/// Maximize logEI over the box by gradient ascent from the best of
/// `raw_samples` Sobol candidates (top `restarts` starts). Gradients flow
/// through the backbone and the head's triangular solves. Single-objective
/// models only; `best` is the incumbent in standardized space.
pub fn optimize_acqf_ei<R: Rng + ?Sized>(
    model: &SurrogateModel,
    best: f64,
    bounds: &[(f64, f64)],
    restarts: usize,
    raw_samples: usize,
    rng: &mut R,
) -> Vec<f64> {
    assert_eq!(model.outputs(), 1, "logEI acquisition is single-objective");
    assert!(restarts >= 1 && raw_samples >= 1);
    let d = model.input_dim();
    assert_eq!(bounds.len(), d);

    let objective = |x: &[f64]| -> (f64, Vec<f64>) {
        let (phi, tape) = model.backbone.forward(x);
        let post = &model.head.posteriors[0];
        let mean = crate::linalg::dot(&post.mean, &phi);
        let v = tri_solve(&post.chol, &phi, false);
        let var_epi = crate::linalg::dot(&v, &v);
        let var = var_epi + model.head.noise.sigma2(0);
        match log_ei_with_grads(mean, var, best) {
            Ok((val, d_mean, d_var)) => {
                // d mean / d phi = posterior mean; d var / d phi = 2 S phi.
                let a = tri_solve(&post.chol, &v, true);
                let grad_phi: Vec<f64> = post
                    .mean
                    .iter()
                    .zip(&a)
                    .map(|(m, ai)| d_mean * m + d_var * 2.0 * ai)
                    .collect();
                (val, model.backbone.input_gradient(&tape, &grad_phi))
            }
            Err(_) => (f64::NEG_INFINITY, vec![0.0; x.len()]),
        }
    };

    let mut sobol = SobolStream::new_scrambled(d, rng.gen());
    let mut candidates: Vec<(f64, Vec<f64>)> = Vec::with_capacity(raw_samples);
    for _ in 0..raw_samples {
        let unit = sobol.next_point();
        let x: Vec<f64> =
            unit.iter().zip(bounds).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect();
        let val = objective(&x).0;
        candidates.push((val, x));
    }
    candidates.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal));
    let fallback = candidates[0].clone();

    let opts = LbfgsOptions::default();
    let mut best_x = fallback.1.clone();
    let mut best_val = fallback.0;
    for (v0, start) in candidates.into_iter().take(restarts) {
        if !v0.is_finite() {
            continue;
        }
        let (x, val) = maximize_boxed(objective, &start, bounds, &opts);
        if val > best_val {
            best_val = val;
            best_x = x;
        }
    }
    best_x
}

/// A Thompson sample: posterior weight draw plus a backbone snapshot,
/// evaluable (with exact input gradients) as a deterministic generalized
/// linear model. Values are reported in raw objective units.
#[derive(Debug, Clone)]
pub struct GlmSample {
    pub weights: Vec<Vec<f64>>,
    backbone: BackboneNet,
    standardizer: Standardizer,
}

impl GlmSample {
    pub fn outputs(&self) -> usize {
        self.weights.len()
    }

    pub fn input_dim(&self) -> usize {
        self.backbone.input_dim()
    }

    /// Sampled objective values in raw units.
    pub fn evaluate(&self, x: &[f64]) -> Vec<f64> {
        let phi = self.backbone.features(x);
        self.weights
            .iter()
            .enumerate()
            .map(|(k, w)| self.standardizer.destandardize_mean(k, crate::linalg::dot(w, &phi)))
            .collect()
    }

    /// Raw value and exact input gradient for a single-output sample.
    pub fn value_and_grad(&self, x: &[f64]) -> (f64, Vec<f64>) {
        assert_eq!(self.outputs(), 1);
        let (phi, tape) = self.backbone.forward(x);
        let val_std = crate::linalg::dot(&self.weights[0], &phi);
        let grad_std = self.backbone.input_gradient(&tape, &self.weights[0]);
        let scale = self.standardizer.std[0];
        (
            self.standardizer.destandardize_mean(0, val_std),
            grad_std.into_iter().map(|g| g * scale).collect(),
        )
    }
}

/// Draw one weight set per output from the variational posterior against the
/// current backbone snapshot.
pub fn thompson_sample<R: Rng + ?Sized>(model: &SurrogateModel, rng: &mut R) -> GlmSample {
    GlmSample {
        weights: model.head.sample_weights(rng),
        backbone: model.backbone.clone(),
        standardizer: model.standardizer.clone(),
    }
}

/// The degenerate "sample" at the posterior mean; the sampled objective then
/// equals the predictive mean function.
pub fn mean_sample(model: &SurrogateModel) -> GlmSample {
    GlmSample {
        weights: model.head.posteriors.iter().map(|p| p.mean.clone()).collect(),
        backbone: model.backbone.clone(),
        standardizer: model.standardizer.clone(),
    }
}

/// Analytic single-objective Thompson sampling step: multistart projected
/// quasi-Newton ascent of the sampled GLM from Sobol initial conditions.
pub fn optimize_ts_single<R: Rng + ?Sized>(
    sample: &GlmSample,
    bounds: &[(f64, f64)],
    restarts: usize,
    rng: &mut R,
) -> Vec<f64> {
    assert_eq!(sample.outputs(), 1, "single-objective Thompson step needs K = 1");
    assert!(restarts >= 1);
    let d = sample.input_dim();
    let mut sobol = SobolStream::new_scrambled(d, rng.gen());
    let opts = LbfgsOptions::default();
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..restarts {
        let unit = sobol.next_point();
        let start: Vec<f64> =
            unit.iter().zip(bounds).map(|(u, (lo, hi))| lo + u * (hi - lo)).collect();
        let (x, val) = maximize_boxed(|x| sample.value_and_grad(x), &start, bounds, &opts);
        if best.as_ref().map_or(true, |(bv, _)| val > *bv) {
            best = Some((val, x));
        }
    }
    best.unwrap().1
}

/// Multi-objective Thompson sampling step: optimize the sampled GLM with
/// NSGA-II, returning the predicted front as `(x, y_raw)` pairs.
pub fn nsga2_optimize<R: Rng + ?Sized>(
    sample: &GlmSample,
    bounds: &[(f64, f64)],
    cfg: &NsgaConfig,
    rng: &mut R,
) -> Vec<(Vec<f64>, Vec<f64>)> {
    assert!(sample.outputs() >= 2, "NSGA-II step needs K >= 2");
    let f = |x: &[f64]| sample.evaluate(x);
    nsga2::nsga2_run(&f, bounds, cfg, rng)
}

/// Convenience: unit-hypercube bounds for a normalized model input space.
pub fn unit_bounds(d: usize) -> Vec<(f64, f64)> {
    vec![(0.0, 1.0); d]
}

/// Deterministic helper used by harness code: a fresh ChaCha generator from
/// a parent generator's output.
pub fn child_rng<R: Rng + ?Sized>(rng: &mut R) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(rng.gen())
}
