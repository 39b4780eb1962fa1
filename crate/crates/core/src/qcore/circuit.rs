use rand::Rng;
use serde::{Deserialize, Serialize};

use super::GateKind;
use crate::{Error, Result};

/// Where a parameterized gate takes its angle from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Binding {
    /// Trainable parameter `θ[k]`.
    Param(usize),
    /// Constant angle in radians.
    Fixed(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CircuitOp {
    pub kind: GateKind,
    /// Control first for `CNOT`, Z-qubit first for `RZX`.
    pub qubits: Vec<usize>,
    pub binding: Option<Binding>,
}

impl CircuitOp {
    /// Resolved rotation angle, or `None` for fixed gates.
    #[inline]
    pub fn angle(&self, params: &[f64]) -> Option<f64> {
        self.binding.map(|b| match b {
            Binding::Param(k) => params[k],
            Binding::Fixed(a) => a,
        })
    }

    pub fn param_index(&self) -> Option<usize> {
        match self.binding {
            Some(Binding::Param(k)) => Some(k),
            _ => None,
        }
    }
}

/// Ordered gate list over `n_qubits` with `n_params` trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Circuit {
    n_qubits: usize,
    ops: Vec<CircuitOp>,
    n_params: usize,
}

impl Circuit {
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, ops: Vec::new(), n_params: 0 }
    }

    /// Builds a circuit from parts and checks every invariant, including that
    /// no declared parameter is left unreferenced.
    pub fn from_parts(n_qubits: usize, ops: Vec<CircuitOp>, n_params: usize) -> Result<Self> {
        let mut c = Self { n_qubits, ops: Vec::with_capacity(ops.len()), n_params };
        for op in ops {
            c.check_op(&op)?;
            c.ops.push(op);
        }
        c.validate()?;
        Ok(c)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn ops(&self) -> &[CircuitOp] {
        &self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    fn check_op(&self, op: &CircuitOp) -> Result<()> {
        if op.qubits.len() != op.kind.arity() {
            return Err(Error::InvalidCircuit(format!(
                "{} acts on {} qubits, got {:?}",
                op.kind,
                op.kind.arity(),
                op.qubits
            )));
        }
        if let Some(&q) = op.qubits.iter().find(|&&q| q >= self.n_qubits) {
            return Err(Error::InvalidCircuit(format!(
                "qubit {q} out of range for a {}-qubit circuit",
                self.n_qubits
            )));
        }
        if op.qubits.len() == 2 && op.qubits[0] == op.qubits[1] {
            return Err(Error::InvalidCircuit(format!("{} on repeated qubit {}", op.kind, op.qubits[0])));
        }
        match (op.kind.is_parameterized(), op.binding) {
            (true, None) => Err(Error::InvalidCircuit(format!("{} needs a binding", op.kind))),
            (false, Some(_)) => Err(Error::InvalidCircuit(format!("{} takes no binding", op.kind))),
            (true, Some(Binding::Param(k))) if k >= self.n_params => Err(Error::InvalidCircuit(format!(
                "parameter index {k} >= n_params {}",
                self.n_params
            ))),
            (true, Some(Binding::Fixed(a))) if !a.is_finite() => {
                Err(Error::InvalidCircuit(format!("non-finite fixed angle {a}")))
            }
            _ => Ok(()),
        }
    }

    /// Checks that every parameter index is referenced at least once.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.n_params];
        for op in &self.ops {
            if let Some(k) = op.param_index() {
                used[k] = true;
            }
        }
        match used.iter().position(|u| !u) {
            Some(k) => Err(Error::InvalidCircuit(format!("parameter {k} is never used"))),
            None => Ok(()),
        }
    }

    /// Appends a parameterized gate bound to a freshly allocated parameter.
    pub fn push_param(&mut self, kind: GateKind, qubits: &[usize]) -> Result<usize> {
        let k = self.n_params;
        self.n_params += 1;
        let op = CircuitOp { kind, qubits: qubits.to_vec(), binding: Some(Binding::Param(k)) };
        if let Err(e) = self.check_op(&op) {
            self.n_params -= 1;
            return Err(e);
        }
        self.ops.push(op);
        Ok(k)
    }

    /// Appends a parameterized gate bound to an existing parameter.
    pub fn push_shared(&mut self, kind: GateKind, qubits: &[usize], param: usize) -> Result<()> {
        self.push(CircuitOp { kind, qubits: qubits.to_vec(), binding: Some(Binding::Param(param)) })
    }

    pub fn push_fixed(&mut self, kind: GateKind, qubits: &[usize], angle: f64) -> Result<()> {
        self.push(CircuitOp { kind, qubits: qubits.to_vec(), binding: Some(Binding::Fixed(angle)) })
    }

    pub fn push_gate(&mut self, kind: GateKind, qubits: &[usize]) -> Result<()> {
        self.push(CircuitOp { kind, qubits: qubits.to_vec(), binding: None })
    }

    pub fn push(&mut self, op: CircuitOp) -> Result<()> {
        self.check_op(&op)?;
        self.ops.push(op);
        Ok(())
    }

    /// Concatenation; parameters of `other` are renumbered after ours.
    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        if other.n_qubits != self.n_qubits {
            return Err(Error::DimensionMismatch { expected: self.n_qubits, got: other.n_qubits });
        }
        let offset = self.n_params;
        self.n_params += other.n_params;
        for op in &other.ops {
            let mut op = op.clone();
            if let Some(Binding::Param(k)) = op.binding {
                op.binding = Some(Binding::Param(k + offset));
            }
            self.ops.push(op);
        }
        Ok(())
    }

    /// Number of ops acting on two qubits.
    pub fn two_qubit_count(&self) -> usize {
        self.ops.iter().filter(|op| op.kind.arity() == 2).count()
    }

    pub fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.n_params {
            return Err(Error::ParamCount { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }
}

/// Random circuit over every gate kind with `n_params` parameters, some of which
/// are shared between several gates. Used by gradient sweeps.
pub fn random_circuit<R: Rng + ?Sized>(n_qubits: usize, n_params: usize, rng: &mut R) -> Circuit {
    assert!(n_qubits >= 2, "random circuits need at least two qubits");
    let mut c = Circuit::new(n_qubits);
    let two = |rng: &mut R| {
        let a = rng.random_range(0..n_qubits);
        let mut b = rng.random_range(0..n_qubits - 1);
        if b >= a {
            b += 1;
        }
        [a, b]
    };
    let fixed = [GateKind::CNOT, GateKind::SX, GateKind::X, GateKind::H, GateKind::SDG];
    while c.n_params() < n_params {
        let kind = GateKind::PARAMETERIZED[rng.random_range(0..4)];
        let qubits: Vec<usize> =
            if kind.arity() == 2 { two(rng).to_vec() } else { vec![rng.random_range(0..n_qubits)] };
        c.push_param(kind, &qubits).expect("valid random op");
        if rng.random_bool(0.5) {
            let kind = fixed[rng.random_range(0..fixed.len())];
            let qubits: Vec<usize> =
                if kind.arity() == 2 { two(rng).to_vec() } else { vec![rng.random_range(0..n_qubits)] };
            c.push_gate(kind, &qubits).expect("valid random op");
        }
        if rng.random_bool(0.1) && c.n_params() > 0 {
            let k = rng.random_range(0..c.n_params());
            let kind = GateKind::PARAMETERIZED[rng.random_range(0..3)];
            c.push_shared(kind, &[rng.random_range(0..n_qubits)], k).expect("valid random op");
        }
    }
    c
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_ops() {
        let mut c = Circuit::new(2);
        assert!(c.push_gate(GateKind::CNOT, &[0, 0]).is_err());
        assert!(c.push_gate(GateKind::H, &[2]).is_err());
        assert!(c.push_gate(GateKind::RX, &[0]).is_err());
        assert!(c.push_fixed(GateKind::H, &[0], 1.0).is_err());
        assert!(c.push_shared(GateKind::RX, &[0], 0).is_err());
        assert!(c.push_param(GateKind::RZX, &[0]).is_err());
        assert_eq!(c.n_params(), 0);
    }

    #[test]
    fn dead_parameters_are_rejected() {
        let ops = vec![CircuitOp { kind: GateKind::RX, qubits: vec![0], binding: Some(Binding::Param(0)) }];
        assert!(Circuit::from_parts(1, ops.clone(), 1).is_ok());
        assert!(Circuit::from_parts(1, ops, 2).is_err());
    }

    #[test]
    fn append_renumbers_parameters() {
        let mut a = Circuit::new(2);
        a.push_param(GateKind::RX, &[0]).unwrap();
        let mut b = Circuit::new(2);
        b.push_param(GateKind::RZX, &[0, 1]).unwrap();
        a.append(&b).unwrap();
        assert_eq!(a.n_params(), 2);
        assert_eq!(a.ops()[1].param_index(), Some(1));
        assert_eq!(a.two_qubit_count(), 1);
        a.validate().unwrap();
    }
}
