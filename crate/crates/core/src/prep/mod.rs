//! Target states, the hardware-efficient ansatz, and the arithmetic
//! decomposition baseline.

mod ansatz;
mod mottonen;
mod targets;

pub use ansatz::{build_ansatz, two_qubit_gate_count, AnsatzSpec, CouplingMap, Entangler};
pub use mottonen::mottonen_decompose;
pub use targets::{gen_target, read_amplitudes, write_amplitudes, TargetKind, QEC5_STABILIZERS, SYNTHETIC_IMAGE};
