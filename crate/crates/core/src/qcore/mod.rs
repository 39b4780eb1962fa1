//! Core quantum data types, gate definitions and state-quality metrics.

mod circuit;
mod gates;
pub mod linalg;
mod metrics;
mod pauli;
mod state;

pub use circuit::{random_circuit, Binding, Circuit, CircuitOp};
pub use gates::{gate_unitary, pauli_matrix, GateKind, GateMatrix, Mat2, Mat4};
pub(crate) use gates::{generator_matrix, rotation};
pub use linalg::CMatrix;
pub use metrics::{
    coherent_error, fidelity, incoherent_strength, purity, trace_distance, IncoherentEstimate,
    StateRef,
};
pub use pauli::{Pauli, PauliString};
pub use state::{DensityMatrix, HermitianEstimate, StateVector};

pub use num_complex::Complex64;

pub(crate) const C0: Complex64 = Complex64::new(0.0, 0.0);
pub(crate) const C1: Complex64 = Complex64::new(1.0, 0.0);
pub(crate) const CI: Complex64 = Complex64::new(0.0, 1.0);
