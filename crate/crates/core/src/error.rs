use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter count mismatch: circuit declares {expected} parameters, got {got}")]
    ParamCount { expected: usize, got: usize },

    #[error("{n_qubits} qubits exceeds the simulator cap of {cap}")]
    QubitCap { n_qubits: usize, cap: usize },

    #[error("invalid gate: {0}")]
    InvalidGate(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid Pauli string {0:?}")]
    InvalidPauli(String),

    #[error("invalid noise model: {0}")]
    InvalidNoise(String),

    #[error("invalid measurement setting: {0}")]
    InvalidSetting(String),

    #[error("confusion matrix for qubit {qubit} is singular (|det| = {det:.3e})")]
    SingularConfusion { qubit: usize, det: f64 },

    #[error("no counts to estimate from")]
    EmptyCounts,

    #[error("invalid tomography plan: {0}")]
    InvalidPlan(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
