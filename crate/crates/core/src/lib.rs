//! Noise-aware variational quantum state preparation.
//!
//! The crate is organised bottom-up:
//!
//! - [`qcore`]: states, gates, circuits and state-quality metrics.
//! - [`sim`]: noiseless statevector simulator with adjoint gradients.
//! - [`device`]: emulated noisy machine that only reports measurement counts.
//! - [`tomo`]: classical shadow tomography with readout mitigation.
//! - [`prep`]: target states, the topology-aware ansatz and the Mottonen baseline.
//! - [`train`]: losses, optimizers and the hybrid device-forward / simulator-backward loop.
//! - [`experiments`]: the comparison studies driven by the command-line tool.
//!
//! Qubit ordering is little-endian throughout: qubit 0 is the least significant
//! bit of a basis index. Rotations use the half-angle convention
//! `R_P(θ) = exp(-iθP/2)`.

pub mod device;
mod error;
pub mod experiments;
pub mod prep;
pub mod qcore;
pub mod sim;
pub mod tomo;
pub mod train;
pub(crate) mod util;

pub use error::{Error, Result};
pub use util::derive_seed;
