//! Denoising Fisher training for one-step neural implicit samplers.
//!
//! A sampler network `g(z)` pushes latent Gaussian noise to samples in a single
//! pass. It is trained by alternating two phases: an online score network is fit
//! to the (slightly noised) sampler distribution by denoising score matching, then
//! the sampler is moved along a surrogate gradient that is equivalent in
//! expectation to the gradient of the Fisher divergence between the noised
//! sampler and the target.
//!
//! The crate also ships the pieces needed to evaluate such samplers:
//!
//! * [`targets`]: analytic 2D benchmark densities and a Bayesian
//!   logistic-regression posterior,
//! * [`baselines`]: unadjusted Langevin, Hamiltonian Monte Carlo and SVGD,
//! * [`metrics`]: kernelized Stein discrepancy with the IMQ kernel,
//! * [`dft`]: the training loop plus Monte-Carlo checks of the gradient identity
//!   the method rests on.

pub mod baselines;
pub mod dft;
pub mod error;
pub mod metrics;
pub mod nn;
pub mod rng;
pub mod sample;
pub mod score_matching;
pub mod targets;

pub use error::{Error, Result};
pub use rng::Prng;
pub use sample::SampleBatch;
