//! Numerical lab for the harmonic oscillator chain with exchange noise and a
//! weak Hamiltonian drift: exact stochastic simulation, closed moment
//! equations, limiting PDEs, the associated random walks and discrete
//! negative Sobolev norms, plus a config-driven experiment harness.

// Parameter guards are written as `!(x > 0.0)` so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod continuum;
pub mod error;
pub mod harness;
pub mod lattice;
pub mod moments;
pub mod ode;
pub mod rw;
pub mod sobolev;
pub mod stats;

pub use error::{Error, Result};
