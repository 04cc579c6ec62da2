//! Exact numerics for the open lattice Schwinger model.
//!
//! The crate enumerates the Gauss-law constrained Hilbert space, builds the
//! Hamiltonian and Lindblad operators of a thermal environment, analyses
//! the Liouvillian spectrum, evolves density matrices, and emulates a
//! dilation-based quantum algorithm with Trotter error accounting.

pub mod config;
pub mod dilation;
pub mod dynamics;
pub mod environment;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod liouvillian;
pub mod model;
pub mod operators;
pub mod output;
pub mod parallel;
pub mod sparse;

pub use error::{Error, Result};
