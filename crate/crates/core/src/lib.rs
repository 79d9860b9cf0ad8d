//! Classical simulation of quantum algorithms that estimate Shannon and
//! von Neumann entropy to a multiplicative factor.
//!
//! - [`dist`]: distributions, density matrices, exact entropies, hard
//!   instance pairs.
//! - [`log_approx`]: power-function logarithm approximation and binomial
//!   series polynomials.
//! - [`encodings`]: purified oracles and projected unitary encodings.
//! - [`qsub`]: singular value estimation and transformation, amplitude
//!   estimation, query ledgers.
//! - [`estimator`]: the light-weight, heavy-entropy and combined
//!   estimators with their parameter derivations.

pub mod dist;
pub mod encodings;
pub mod error;
pub mod estimator;
pub mod log_approx;
pub mod qsub;

pub use error::{Error, Result};
