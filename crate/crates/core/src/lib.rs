//! Orbit-averaged denoising targets for symmetry-aware generative models.
//!
//! A denoiser trained with the plain regression loss sees a single orbit
//! element `x0` per draw. The estimators here replace that target with its
//! conditional expectation over the symmetry orbit of `x0`, weighted by the
//! forward noising kernel. The resulting gradients are unbiased for the
//! symmetrized objective and have lower variance.
//!
//! Layout:
//! - [`groups`]: group elements, actions, and proposal distributions over them.
//! - [`schedule`]: discrete noise schedules and flow-matching coefficients.
//! - [`kernels`]: Gaussian and wrapped-normal forward kernels.
//! - [`estimator`]: exact and self-normalized orbit targets, plus oracles.
//! - [`net`]: a small MLP denoiser with hand-written backprop.
//! - [`train`]: loss variants, Adam training loop, variance and equivariance probes.
//! - [`sampler`]: ancestral and Euler samplers.
//! - [`eval`]: RMSD and 1D Wasserstein-2.
//! - [`config`], [`cli`]: experiment configuration and the command-line runner.

pub mod checks;
pub mod cli;
pub mod config;
pub mod error;
pub mod estimator;
pub mod eval;
pub mod groups;
pub mod kernels;
pub mod net;
pub mod point;
pub mod rng;
pub mod sampler;
pub mod schedule;
pub mod stats;
pub mod torus;
pub mod train;

pub use error::{Error, Result};
pub use point::{Point, Space};
