//! Noiseless differentiable statevector simulator.
//!
//! [`forward`] runs a circuit from `|0…0⟩` and keeps a [`ForwardTape`];
//! [`backward`] computes `2·Re⟨ξ|∂ψ/∂θ_k⟩` for every parameter in one reverse
//! sweep. Intermediate states are not stored: the sweep un-applies each gate
//! to the final state, so memory stays at two state vectors.

use std::ops::Deref;

use crate::qcore::linalg::{self, CMatrix};
use crate::qcore::{gate_unitary, generator_matrix, Circuit, CircuitOp, Complex64, GateMatrix, PauliString, StateVector};
use crate::{Error, Result};

pub const DEFAULT_QUBIT_CAP: usize = 14;

/// In-place gate kernels over little-endian amplitude arrays.
pub(crate) mod kernel {
    use crate::qcore::{Complex64, GateMatrix, Mat2, Mat4};

    pub(crate) fn apply_1q(amps: &mut [Complex64], q: usize, m: &Mat2) {
        let stride = 1usize << q;
        for base in (0..amps.len()).step_by(stride << 1) {
            for i0 in base..base + stride {
                let i1 = i0 + stride;
                let (a, b) = (amps[i0], amps[i1]);
                amps[i0] = m[0][0] * a + m[0][1] * b;
                amps[i1] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    /// `first` is the more significant bit of the local 4×4 basis.
    pub(crate) fn apply_2q(amps: &mut [Complex64], first: usize, second: usize, m: &Mat4) {
        let hi = 1usize << first;
        let lo = 1usize << second;
        let both = hi | lo;
        for i in 0..amps.len() {
            if i & both != 0 {
                continue;
            }
            let idx = [i, i | lo, i | hi, i | both];
            let v = [amps[idx[0]], amps[idx[1]], amps[idx[2]], amps[idx[3]]];
            for (r, &target) in idx.iter().enumerate() {
                amps[target] = m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2] + m[r][3] * v[3];
            }
        }
    }

    pub(crate) fn apply(amps: &mut [Complex64], qubits: &[usize], m: &GateMatrix) {
        match m {
            GateMatrix::One(m) => apply_1q(amps, qubits[0], m),
            GateMatrix::Two(m) => apply_2q(amps, qubits[0], qubits[1], m),
        }
    }
}

/// Parameter gradient, one entry per circuit parameter (per radian).
#[derive(Debug, Clone, PartialEq)]
pub struct GradientVector(pub Vec<f64>);

impl GradientVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|g| g * g).sum::<f64>().sqrt()
    }

    /// Cosine of the angle between two gradients; 0 when either is zero.
    pub fn cosine_similarity(&self, other: &GradientVector) -> f64 {
        let dot: f64 = self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum();
        let denom = self.norm() * other.norm();
        if denom == 0.0 {
            0.0
        } else {
            dot / denom
        }
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for GradientVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Result of a forward run: the bound parameters and the final state.
#[derive(Debug, Clone)]
pub struct ForwardTape<'c> {
    circuit: &'c Circuit,
    params: Vec<f64>,
    initial: StateVector,
    state: StateVector,
}

impl<'c> ForwardTape<'c> {
    pub fn circuit(&self) -> &'c Circuit {
        self.circuit
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn initial_state(&self) -> &StateVector {
        &self.initial
    }

    /// Re-runs the circuit from the recorded initial state.
    pub fn replay(&self) -> StateVector {
        run_ops(self.circuit, &self.params, self.initial.clone())
    }
}

/// Simulator with a configurable qubit cap.
#[derive(Debug, Clone, Copy)]
pub struct Simulator {
    pub qubit_cap: usize,
}

impl Default for Simulator {
    fn default() -> Self {
        Self { qubit_cap: DEFAULT_QUBIT_CAP }
    }
}

fn op_unitary(op: &CircuitOp, params: &[f64]) -> GateMatrix {
    gate_unitary(op.kind, op.angle(params)).expect("circuit ops are validated on construction")
}

fn run_ops(circuit: &Circuit, params: &[f64], mut state: StateVector) -> StateVector {
    for op in circuit.ops() {
        kernel::apply(state.amplitudes_mut(), &op.qubits, &op_unitary(op, params));
    }
    state
}

impl Simulator {
    pub fn forward<'c>(&self, circuit: &'c Circuit, params: &[f64]) -> Result<ForwardTape<'c>> {
        self.forward_from(circuit, params, &StateVector::zero(circuit.n_qubits()))
    }

    /// Forward run from an arbitrary input state.
    pub fn forward_from<'c>(
        &self,
        circuit: &'c Circuit,
        params: &[f64],
        initial: &StateVector,
    ) -> Result<ForwardTape<'c>> {
        circuit.check_params(params)?;
        if circuit.n_qubits() > self.qubit_cap {
            return Err(Error::QubitCap { n_qubits: circuit.n_qubits(), cap: self.qubit_cap });
        }
        if initial.n_qubits() != circuit.n_qubits() {
            return Err(Error::DimensionMismatch { expected: circuit.n_qubits(), got: initial.n_qubits() });
        }
        if let Some(bad) = params.iter().find(|p| !p.is_finite()) {
            return Err(Error::Numerical(format!("non-finite parameter {bad}")));
        }
        let state = run_ops(circuit, params, initial.clone());
        Ok(ForwardTape { circuit, params: params.to_vec(), initial: initial.clone(), state })
    }
}

pub fn forward<'c>(circuit: &'c Circuit, params: &[f64]) -> Result<ForwardTape<'c>> {
    Simulator::default().forward(circuit, params)
}

pub fn forward_from<'c>(circuit: &'c Circuit, params: &[f64], initial: &StateVector) -> Result<ForwardTape<'c>> {
    Simulator::default().forward_from(circuit, params, initial)
}

/// Adjoint gradient `g_k = 2·Re⟨ξ|∂ψ/∂θ_k⟩`.
pub fn backward(tape: &ForwardTape<'_>, cotangent: &[Complex64]) -> Result<GradientVector> {
    backward_counted(tape, cotangent).map(|(g, _)| g)
}

/// As [`backward`], also returning the number of gate applications performed.
pub fn backward_counted(tape: &ForwardTape<'_>, cotangent: &[Complex64]) -> Result<(GradientVector, usize)> {
    let dim = tape.state.dim();
    if cotangent.len() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: cotangent.len() });
    }
    let circuit = tape.circuit;
    let params = &tape.params;
    let mut grad = vec![0.0; circuit.n_params()];
    let mut applications = 0usize;

    // phi walks backwards through the intermediate states, lambda carries U_{>i}†ξ
    let mut phi = tape.state.amplitudes().to_vec();
    let mut lambda = cotangent.to_vec();
    let mut scratch = vec![Complex64::new(0.0, 0.0); dim];

    for op in circuit.ops().iter().rev() {
        if let Some(k) = op.param_index() {
            // ∂U/∂θ = -(i/2)·P·U, and phi is currently U·ψ_{i-1}
            let gen = generator_matrix(op.kind).expect("parameterized kinds have generators");
            scratch.copy_from_slice(&phi);
            kernel::apply(&mut scratch, &op.qubits, &gen);
            applications += 1;
            let overlap: Complex64 = lambda.iter().zip(&scratch).map(|(l, s)| l.conj() * s).sum();
            // 2·Re(⟨λ|(-i/2)Pφ⟩) = Im⟨λ|Pφ⟩
            grad[k] += overlap.im;
        }
        let inv = op_unitary(op, params).adjoint();
        kernel::apply(&mut phi, &op.qubits, &inv);
        kernel::apply(&mut lambda, &op.qubits, &inv);
        applications += 2;
    }

    if let Some(bad) = grad.iter().find(|g| !g.is_finite()) {
        return Err(Error::Numerical(format!("non-finite gradient entry {bad}")));
    }
    Ok((GradientVector(grad), applications))
}

/// `⟨ψ|P|ψ⟩`.
pub fn expectation(state: &StateVector, observable: &PauliString) -> Result<f64> {
    if observable.len() != state.n_qubits() {
        return Err(Error::InvalidPauli(format!(
            "{observable} has {} letters for a {}-qubit state",
            observable.len(),
            state.n_qubits()
        )));
    }
    let p_psi = observable.apply(state.amplitudes())?;
    Ok(state.amplitudes().iter().zip(&p_psi).map(|(a, b)| a.conj() * b).sum::<Complex64>().re)
}

/// Gradient of `tr(M·ρ(θ))` for `ρ = |ψ⟩⟨ψ|` and Hermitian `M`.
///
/// Since `∂ρ = |∂ψ⟩⟨ψ| + |ψ⟩⟨∂ψ|`, this equals `backward(tape, M·ψ)`.
pub fn state_gradient_cotangent(tape: &ForwardTape<'_>, m: &CMatrix) -> Result<GradientVector> {
    let dim = tape.state.dim();
    if m.nrows() != dim || m.ncols() != dim {
        return Err(Error::DimensionMismatch { expected: dim, got: m.nrows() });
    }
    let herm = linalg::hermiticity_error(m);
    if herm > 1e-8 {
        return Err(Error::InvalidState(format!("cotangent matrix is not Hermitian (error {herm:.2e})")));
    }
    let xi = linalg::mat_vec(m, tape.state.amplitudes());
    backward(tape, &xi)
}

/// Gradient of `⟨ψ(θ)|P|ψ(θ)⟩`.
pub fn expectation_gradient(tape: &ForwardTape<'_>, observable: &PauliString) -> Result<GradientVector> {
    let xi = observable.apply(tape.state.amplitudes())?;
    backward(tape, &xi)
}
