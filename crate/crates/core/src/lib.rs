//! Pulse-level simulation of a three-spin NMR quantum Fourier transform.
//!
//! The crate builds the ideal QFT and its Coppersmith gate decomposition,
//! compiles gates into RF pulse programs for a J-coupled spin system,
//! evolves deviation density matrices through those programs, and reads
//! out spectra, tomograms and overlap fidelities.

pub mod analysis;
pub mod cli;
pub mod compiler;
pub mod error;
pub mod nmr;
pub mod operator;
pub mod pulse;
pub mod qft;

pub use error::{Error, Result};
