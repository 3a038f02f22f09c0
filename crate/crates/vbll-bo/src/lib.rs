//! Bayesian optimization with neural-network surrogates that carry a
//! variational Bayesian last layer (VBLL).
//!
//! The surrogate is a dense feed-forward backbone producing features
//! `phi(x)` together with a Gaussian variational posterior over the last
//! linear layer, parameterized by a dense precision Cholesky factor. Two
//! training routes are supported and can be interleaved in a continual
//! learning loop:
//!
//! * full model training by minibatch gradient descent on a deterministic
//!   variational lower bound ([`surrogate::train_full`]), and
//! * exact O(m^2) recursive conditioning of the last layer on a single new
//!   observation ([`surrogate::condition_on`]), which never revisits old
//!   data.
//!
//! With frozen features the two routes agree: the maximizer of the bound
//! equals the recursive least-squares posterior. The library exploits this
//! to decide per BO step between retraining and conditioning via periodic,
//! sigmoid-scheduled, or event-triggered re-initialization policies.
//!
//! Candidate selection is provided by log expected improvement and by
//! analytic Thompson sampling: a posterior weight draw turns the surrogate
//! into a deterministic generalized linear model that is maximized directly
//! (multistart projected quasi-Newton for one objective, NSGA-II plus greedy
//! hypervolume-improvement selection for several).
//!
//! See the crate `examples/` directory for one runnable example per major
//! capability, and the `vbll-bo` binary for the experiment harness
//! (`run`, `sweep`, `export`, `list-problems`).

pub mod acquisition;
pub mod benchmarks;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod nn;
pub mod sobol_seq;
pub mod surrogate;
pub mod vbll;

#[cfg(test)]
pub(crate) mod test_oracles;

pub use error::{Error, Result};
