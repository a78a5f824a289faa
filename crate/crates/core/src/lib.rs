//! Teleporting-walker ensemble MCMC.
//!
//! An ensemble of `N` walkers targets `prod_i pi(x_i)`. Each step clones a
//! uniformly chosen walker, moves the clone with an ordinary proposal kernel,
//! deletes a walker chosen by importance weights, and accepts the result with
//! a Metropolis-Hastings correction that needs only the ratio of two weight
//! normalizers. When the walkers overlap under the kernel, mass teleports
//! between distant modes.
//!
//! Modules:
//! - [`sampler`]: the fully interacting ensemble step and its reference MH ratio.
//! - [`subset`]: interaction on a block `u` of variables, with independent
//!   Metropolis sweeps on the rest.
//! - [`targets`]: double well, Gaussian-process posteriors, finite tables.
//! - [`meanfield`]: the large-`N` density evolution on a 1-D grid.
//! - [`analysis`]: exact finite-state transition matrices and Jacobian spectra.
//! - [`diagnostics`]: integrated autocorrelation times and run statistics.
//! - [`experiments`]: config-driven runners behind the `teleport` CLI.

// `!(x > 0.0)` is deliberate: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod analysis;
pub mod config;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod kernel;
pub mod meanfield;
pub mod output;
pub mod rng;
pub mod sampler;
pub mod subset;
pub mod targets;

pub use error::{Error, Result};
pub use kernel::{FiniteKernel, GaussianKernel, TransitionKernel};
pub use sampler::{StepOutcome, WalkerEnsemble, WeightComputation};
pub use subset::SplitEnsemble;
pub use targets::{SplitTarget, TargetDensity};
