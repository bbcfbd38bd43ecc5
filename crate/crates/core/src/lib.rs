//! Second-order blind source separation.
//!
//! The observed series are modelled as `x_t = mu + Omega z_t` where the latent
//! components of `z` are uncorrelated, weakly stationary and have unit
//! variance. Separation works on the symmetrized sample autocovariance
//! matrices of `x`:
//!
//! * [`autocovariance`] builds `S_0, S_k` and the whitened `R_k`.
//! * [`joint_diag`] recovers the unmixing matrix by AMUSE, deflation-based
//!   SOBI, symmetric SOBI (fixed point) or symmetric SOBI (Jacobi rotations).
//! * [`asymptotics`] evaluates the limiting variances of both SOBI estimators
//!   for MA(inf) sources.
//! * [`metrics`] holds the minimum distance index and the Amari index.
//! * [`signal_model`] simulates ARMA sources and mixtures.

pub mod asymptotics;
pub mod autocovariance;
pub mod error;
pub mod joint_diag;
mod linalg;
pub mod metrics;
pub mod presets;
pub mod signal_model;

pub use error::{Error, Result};

pub use nalgebra::DMatrix;
