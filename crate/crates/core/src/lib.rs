//! Relativistic time dilation of quantum clocks.
//!
//! A clock is a finite-dimensional quantum system carried by a massive
//! particle. Coupling its Hamiltonian to the particle's momentum and height
//! changes how fast its mean reading advances relative to laboratory time,
//! broadens its reading, and leaves interference signatures when the particle
//! is in a superposition of heights.

pub mod cli;
pub mod clocks;
pub mod constants;
pub mod dilation;
pub mod error;
pub mod kinematics;
pub mod linalg;
pub mod measurement;
pub mod oracle;
pub mod precision;
pub mod quadrature;

pub use error::{Error, Result};
