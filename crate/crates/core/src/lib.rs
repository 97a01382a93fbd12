//! Simulation and estimation for drifted stationary Gaussian processes
//! `X_t = Z_t + ∫_0^t μ_ξ(s) ds` observed on a high-frequency grid `t_i = i h`.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod asymptotics;
pub mod contrast;
pub mod drift;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod moments;
pub mod optim;
pub mod quad;
pub mod simulate;

pub use error::{Error, Result};

/// Version of this library, recorded in provenance manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
