//! Spectral-Galerkin simulation of neutral stochastic functional
//! differential equations `d[u + g(u_t)] = [A u + f(u_t)] dt + sigma(u_t) dW`
//! on `L^2(0, 1)`, with tools for invariant-measure estimation.

pub mod cli;
pub mod coefficients;
pub mod error;
pub mod grid;
pub mod measure;
pub mod noise;
pub mod quadrature;
pub mod segment;
pub mod solver;
pub mod spectral;

pub use error::{Error, Result};
