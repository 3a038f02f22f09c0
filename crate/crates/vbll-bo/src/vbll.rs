//! Variational Bayesian last layer: per-output Gaussian posteriors over the
//! last linear layer, the deterministic variational lower bound used for
//! training, the Gaussian posterior predictive, and exact O(m^2) recursive
//! conditioning in the natural parameterization.
//!
//! All quantities live in the standardized target space maintained by the
//! surrogate trainer; the head never sees raw targets. Outputs are modeled
//! independently with shared features, so a K-output head is K independent
//! inference problems.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{
    chol_rank1_update, cholesky, dot, inv_trace_from_chol, logdet_precision, sample_gaussian,
    sample_gaussian_with, tri_solve, LowerTriangular, Matrix,
};

const LOG_2PI: f64 = 1.8378770664093453;

/// Gaussian variational posterior `N(mean, S)` for one output, stored as the
/// precision Cholesky factor `L` (`S^{-1} = L L^T`) plus the natural mean
/// `q = S^{-1} mean`, which makes single-point conditioning additive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariationalPosterior {
    pub mean: Vec<f64>,
    pub chol: LowerTriangular,
    pub nat_mean: Vec<f64>,
}

impl VariationalPosterior {
    /// Posterior equal to the prior `N(0, s0 I)`.
    pub fn from_prior(dim: usize, prior: &LastLayerPrior) -> Self {
        let l = LowerTriangular::from_diagonal(&vec![1.0 / prior.scale.sqrt(); dim]);
        VariationalPosterior { mean: vec![0.0; dim], chol: l, nat_mean: vec![0.0; dim] }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Recompute `mean` from `(chol, nat_mean)`.
    pub fn mean_from_natural(&mut self) {
        let v = tri_solve(&self.chol, &self.nat_mean, false);
        self.mean = tri_solve(&self.chol, &v, true);
    }

    /// Recompute `nat_mean = L L^T mean`, restoring the natural-parameter
    /// invariant after gradient training has moved `mean` directly.
    pub fn resync_nat_mean(&mut self) {
        let m = self.dim();
        let mut t = vec![0.0; m];
        for i in 0..m {
            let mut s = 0.0;
            for k in i..m {
                s += self.chol.get(k, i) * self.mean[k];
            }
            t[i] = s;
        }
        for i in 0..m {
            let mut s = 0.0;
            for k in 0..=i {
                s += self.chol.get(i, k) * t[k];
            }
            self.nat_mean[i] = s;
        }
    }

    /// `phi^T S phi`, the epistemic part of the predictive variance.
    pub fn quadratic_form(&self, features: &[f64]) -> f64 {
        let v = tri_solve(&self.chol, features, false);
        dot(&v, &v)
    }
}

/// Zero-mean isotropic Gaussian prior `N(0, s0 I)` on last-layer weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LastLayerPrior {
    pub scale: f64,
}

impl LastLayerPrior {
    pub fn new(scale: f64) -> Self {
        assert!(scale > 0.0);
        LastLayerPrior { scale }
    }
}

/// Per-output observation noise `sigma^2 = exp(log_sigma2)` with an
/// inverse-Wishart-style prior of scale `V` entering the loss as a MAP term
/// (1-D form: `log p(sigma^2) = -(nu/2 + 1) log sigma^2 - V / (2 sigma^2)`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    pub log_sigma2: Vec<f64>,
    pub wishart_scale: f64,
    pub wishart_dof: f64,
}

impl NoiseModel {
    pub fn new(outputs: usize, wishart_scale: f64) -> Self {
        NoiseModel { log_sigma2: vec![0.0; outputs], wishart_scale, wishart_dof: 1.0 }
    }

    pub fn sigma2(&self, k: usize) -> f64 {
        self.log_sigma2[k].exp()
    }

    fn log_prior(&self, k: usize) -> f64 {
        let theta = self.log_sigma2[k];
        -(self.wishart_dof / 2.0 + 1.0) * theta - self.wishart_scale / (2.0 * theta.exp())
    }

    fn log_prior_grad(&self, k: usize) -> f64 {
        let theta = self.log_sigma2[k];
        -(self.wishart_dof / 2.0 + 1.0) + self.wishart_scale / (2.0 * theta.exp())
    }
}

/// K independent variational posteriors over shared features, plus the prior
/// and the noise model. The unit that is trained, conditioned, and sampled.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VbllHead {
    pub posteriors: Vec<VariationalPosterior>,
    pub prior: LastLayerPrior,
    pub noise: NoiseModel,
}

/// Gradients of the minibatch loss with respect to every head parameter and
/// to the feature rows (for backpropagation into the backbone). `d_chol` is
/// packed row-major over the lower triangle, matching
/// [`LowerTriangular::packed`].
#[derive(Debug, Clone)]
pub struct ElboGrads {
    pub d_mean: Vec<Vec<f64>>,
    pub d_chol: Vec<Vec<f64>>,
    pub d_log_sigma2: Vec<f64>,
    pub d_features: Matrix,
}

impl VbllHead {
    /// Head at the prior: `mean = 0`, `S = s0 I`, `q = 0`.
    pub fn new_prior(feature_dim: usize, outputs: usize, prior: LastLayerPrior, noise: NoiseModel) -> Self {
        assert!(outputs >= 1);
        assert_eq!(noise.log_sigma2.len(), outputs);
        let posteriors = (0..outputs).map(|_| VariationalPosterior::from_prior(feature_dim, &prior)).collect();
        VbllHead { posteriors, prior, noise }
    }

    pub fn feature_dim(&self) -> usize {
        self.posteriors[0].dim()
    }

    pub fn outputs(&self) -> usize {
        self.posteriors.len()
    }

    /// Minibatch loss (negative scaled lower bound) and its exact gradients.
    ///
    /// `loss = -[ (T/B) sum_batch sum_k (log N(y_k | mean_k . phi, sigma_k^2)
    ///            - phi^T S_k phi / (2 sigma_k^2))
    ///          - sum_k KL(q_k || p) + sum_k log p(sigma_k^2) ] / T`
    ///
    /// The data terms are rescaled by `T/B` and the KL/prior terms counted
    /// once, giving an unbiased estimate of the full objective; everything is
    /// divided by `T` for optimizer-scale stability.
    pub fn elbo_loss(&self, features: &Matrix, targets: &Matrix, total_count: usize) -> Result<(f64, ElboGrads)> {
        let b = features.rows();
        let m = self.feature_dim();
        let kk = self.outputs();
        assert!(b >= 1 && total_count >= b, "need B >= 1 and T >= B");
        assert_eq!(features.cols(), m);
        assert_eq!(targets.rows(), b);
        assert_eq!(targets.cols(), kk);
        let t_total = total_count as f64;
        let inv_b = 1.0 / b as f64;

        let mut loss = 0.0;
        let mut d_mean = Vec::with_capacity(kk);
        let mut d_chol = Vec::with_capacity(kk);
        let mut d_log_sigma2 = vec![0.0; kk];
        let mut d_features = Matrix::zeros(b, m);

        for k in 0..kk {
            let post = &self.posteriors[k];
            let l = &post.chol;
            let sigma2 = self.noise.sigma2(k);
            let linv = l.inverse();

            // KL(q || p) with p = N(0, s0 I).
            let s0 = self.prior.scale;
            let trace_s: f64 = linv.packed().iter().map(|v| v * v).sum();
            let logdet_s = -logdet_precision(l);
            let mean_sq = dot(&post.mean, &post.mean);
            let kl = 0.5 * (trace_s / s0 + mean_sq / s0 - m as f64 + (m as f64) * s0.ln() - logdet_s);

            let mut dm = vec![0.0; m];
            for i in 0..m {
                dm[i] = post.mean[i] / (s0 * t_total);
            }
            // d loss / d L from the KL term: (1/T) (-(1/s0) low(S L^{-T}) + diag(1/L_ii)).
            let mut dl = vec![0.0; m * (m + 1) / 2];
            {
                // c = L^{-1} L^{-T} (symmetric), then S L^{-T} = L^{-T} c.
                let mut c = vec![0.0; m * m];
                for i in 0..m {
                    for j in 0..m {
                        let mut s = 0.0;
                        // (L^{-1})_{ik} (L^{-T})_{kj} = linv_{ik} linv_{jk}
                        for q in 0..m {
                            s += linv.get(i, q) * linv.get(j, q);
                        }
                        c[i * m + j] = s;
                    }
                }
                let mut idx = 0;
                for i in 0..m {
                    for j in 0..=i {
                        // (L^{-T} c)_{ij} = sum_q linv_{qi} c_{qj}
                        let mut s = 0.0;
                        for q in 0..m {
                            s += linv.get(q, i) * c[q * m + j];
                        }
                        dl[idx] = -s / (s0 * t_total);
                        if i == j {
                            dl[idx] += 1.0 / (l.get(i, i) * t_total);
                        }
                        idx += 1;
                    }
                }
            }

            // Data terms.
            let mut data_sum = 0.0;
            let mut d_theta = 0.0;
            for r in 0..b {
                let phi = features.row(r);
                let y = targets.get(r, k);
                let mean = dot(&post.mean, phi);
                let resid = y - mean;
                let v = tri_solve(l, phi, false);
                let s_quad = dot(&v, &v);
                let a = tri_solve(l, &v, true); // a = S phi

                data_sum += -0.5 * LOG_2PI
                    - 0.5 * sigma2.ln()
                    - resid * resid / (2.0 * sigma2)
                    - s_quad / (2.0 * sigma2);

                // d loss / d mean_k from this row: -(1/B) (resid / sigma^2) phi
                for i in 0..m {
                    dm[i] -= inv_b * (resid / sigma2) * phi[i];
                }
                // d loss / d L from this row: -(1/B) (1/sigma^2) low(a v^T)
                let mut idx = 0;
                for i in 0..m {
                    for j in 0..=i {
                        dl[idx] -= inv_b * a[i] * v[j] / sigma2;
                        idx += 1;
                    }
                }
                // d loss / d theta_k, theta = log sigma^2
                d_theta -= inv_b * (-0.5 + (resid * resid + s_quad) / (2.0 * sigma2));
                // d loss / d phi_r
                let drow = d_features.row_mut(r);
                for i in 0..m {
                    drow[i] -= inv_b * ((resid / sigma2) * post.mean[i] - a[i] / sigma2);
                }
            }

            d_theta -= self.noise.log_prior_grad(k) / t_total;
            loss += -(data_sum * t_total * inv_b - kl + self.noise.log_prior(k)) / t_total;

            d_mean.push(dm);
            d_chol.push(dl);
            d_log_sigma2[k] = d_theta;
        }

        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss(format!("elbo loss = {loss}")));
        }
        Ok((loss, ElboGrads { d_mean, d_chol, d_log_sigma2, d_features }))
    }

    /// Gaussian posterior predictive `(mean_k, var_k)` per output:
    /// `N(mean_k . phi, phi^T S_k phi + sigma_k^2)`.
    pub fn predictive(&self, features: &[f64]) -> Vec<(f64, f64)> {
        (0..self.outputs())
            .map(|k| {
                let post = &self.posteriors[k];
                let mean = dot(&post.mean, features);
                let var = post.quadratic_form(features) + self.noise.sigma2(k);
                (mean, var)
            })
            .collect()
    }

    /// Exact single-observation conditioning in the natural parameters:
    /// `L_k <- rank1(L_k, phi / sigma_k)`, `q_k <- q_k + phi y_k / sigma_k^2`,
    /// then `mean_k` recomputed by triangular solves. O(m^2) per output; no
    /// pass over historical data.
    pub fn recursive_update(&mut self, features: &[f64], targets: &[f64]) {
        assert_eq!(targets.len(), self.outputs());
        assert_eq!(features.len(), self.feature_dim());
        for k in 0..self.outputs() {
            let sigma2 = self.noise.sigma2(k);
            let sigma = sigma2.sqrt();
            let scaled: Vec<f64> = features.iter().map(|f| f / sigma).collect();
            let post = &mut self.posteriors[k];
            post.chol = chol_rank1_update(&post.chol, &scaled);
            for i in 0..post.nat_mean.len() {
                post.nat_mean[i] += features[i] * targets[k] / sigma2;
            }
            post.mean_from_natural();
        }
    }

    /// Joint log predictive density `sum_k log N(y_k | mean_k, var_k)`.
    pub fn log_predictive_density(&self, features: &[f64], targets: &[f64]) -> f64 {
        self.predictive(features)
            .iter()
            .zip(targets)
            .map(|((mean, var), y)| -0.5 * LOG_2PI - 0.5 * var.ln() - (y - mean) * (y - mean) / (2.0 * var))
            .sum()
    }

    /// One posterior weight draw per output.
    pub fn sample_weights<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<Vec<f64>> {
        self.posteriors.iter().map(|p| sample_gaussian(&p.mean, &p.chol, rng)).collect()
    }

    /// Weight draw from pre-drawn standard normals (one vector per output).
    pub fn sample_weights_with(&self, z: &[Vec<f64>]) -> Vec<Vec<f64>> {
        assert_eq!(z.len(), self.outputs());
        self.posteriors
            .iter()
            .zip(z)
            .map(|(p, zk)| sample_gaussian_with(&p.mean, &p.chol, zk))
            .collect()
    }
}

/// `KL(q || p)` between one posterior and the shared isotropic prior.
pub fn kl_to_prior(post: &VariationalPosterior, prior: &LastLayerPrior) -> f64 {
    let m = post.dim() as f64;
    let s0 = prior.scale;
    let trace_s = inv_trace_from_chol(&post.chol);
    let logdet_s = -logdet_precision(&post.chol);
    0.5 * (trace_s / s0 + dot(&post.mean, &post.mean) / s0 - m + m * s0.ln() - logdet_s)
}

/// Exact Bayesian-linear-regression posterior for fixed features:
/// `S_k^{-1} = I/s0 + Phi^T Phi / sigma_k^2`, `q_k = Phi^T y_k / sigma_k^2`.
///
/// Serves as the conditioning oracle (the bound's maximizer equals this
/// posterior for frozen features) and as an optional post-training exact
/// refit.
pub fn fit_last_layer_exact(
    feature_dim: usize,
    features: &[Vec<f64>],
    targets: &[Vec<f64>],
    prior: &LastLayerPrior,
    noise: &NoiseModel,
) -> Result<VbllHead> {
    let t = features.len();
    let m = feature_dim;
    let kk = noise.log_sigma2.len();
    let mut head = VbllHead::new_prior(m, kk, *prior, noise.clone());
    if t == 0 {
        return Ok(head);
    }
    assert_eq!(targets.len(), t);

    // Phi^T Phi once; per-output scaling by sigma_k^{-2}.
    let mut gram = Matrix::zeros(m, m);
    for phi in features {
        assert_eq!(phi.len(), m);
        for i in 0..m {
            for j in 0..m {
                gram.set(i, j, gram.get(i, j) + phi[i] * phi[j]);
            }
        }
    }
    for k in 0..kk {
        let sigma2 = noise.sigma2(k);
        let prec = Matrix::from_fn(m, m, |i, j| {
            gram.get(i, j) / sigma2 + if i == j { 1.0 / prior.scale } else { 0.0 }
        });
        let l = cholesky(&prec)?;
        let mut q = vec![0.0; m];
        for (phi, y) in features.iter().zip(targets) {
            for i in 0..m {
                q[i] += phi[i] * y[k] / sigma2;
            }
        }
        let post = &mut head.posteriors[k];
        post.chol = l;
        post.nat_mean = q;
        post.mean_from_natural();
    }
    Ok(head)
}

/// Packed Cholesky parameters with the diagonal stored as log-values, so
/// gradient training is unconstrained while the diagonal stays positive.
pub fn chol_to_unconstrained(l: &LowerTriangular) -> Vec<f64> {
    let m = l.dim();
    let mut u = l.packed().to_vec();
    let mut idx = 0;
    for i in 0..m {
        idx += i;
        u[idx] = u[idx].ln();
        idx += 1;
    }
    u
}

pub fn chol_from_unconstrained(dim: usize, u: &[f64]) -> LowerTriangular {
    let mut data = u.to_vec();
    let mut idx = 0;
    for i in 0..dim {
        idx += i;
        data[idx] = data[idx].exp();
        idx += 1;
    }
    LowerTriangular::from_packed(dim, data)
}

/// Chain rule from raw-entry gradients to the unconstrained parameters:
/// `d/d(log L_ii) = L_ii * d/dL_ii`, off-diagonals pass through.
pub fn chol_grad_to_unconstrained(d_chol: &[f64], l: &LowerTriangular) -> Vec<f64> {
    let m = l.dim();
    let mut g = d_chol.to_vec();
    let mut idx = 0;
    for i in 0..m {
        idx += i;
        g[idx] *= l.get(i, i);
        idx += 1;
    }
    g
}
