//! Numerical lab for two-timescale gradient descent-ascent.
//!
//! Quadratic games and their hypocoercive rates, a block-elimination
//! preconditioner, mean-field particle GDA with reflection-synchronous
//! coupling, constructive Wasserstein contraction rates and the averaging
//! rate for interaction-dominated flows.

pub mod averaging;
pub mod error;
pub mod fit;
pub mod linalg;
pub mod meanfield;
pub mod precond;
pub mod quadratic;
pub mod rates;
pub mod rng;

pub use error::{Error, Result};
pub use linalg::{Matrix, Vector};
pub use quadratic::QuadraticGame;
pub use rng::NoiseStream;
