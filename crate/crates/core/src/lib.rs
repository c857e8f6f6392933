//! Stochastic Schrödinger equation simulation under classical colored noise,
//! and fidelity-aware variational pulse optimization built on a stochastic
//! adjoint gradient.

pub mod checks;
pub mod config;
pub mod error;
pub mod experiments;
pub mod gradient;
pub mod linalg;
pub mod noise;
pub mod optimizer;
pub mod oracles;
pub mod rng;
pub mod sde;
pub mod sse;
pub mod stats;
pub mod transfer;

pub use error::{Error, Result};
