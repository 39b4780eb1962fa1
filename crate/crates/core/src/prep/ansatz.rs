use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::qcore::{Circuit, GateKind};
use crate::{Error, Result};

/// Undirected hardware connectivity graph.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "CouplingMapRaw", into = "CouplingMapRaw")]
pub struct CouplingMap {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

#[derive(Serialize, Deserialize)]
struct CouplingMapRaw {
    n_qubits: usize,
    edges: Vec<(usize, usize)>,
}

impl TryFrom<CouplingMapRaw> for CouplingMap {
    type Error = Error;

    fn try_from(raw: CouplingMapRaw) -> Result<Self> {
        CouplingMap::from_edges(raw.n_qubits, &raw.edges)
    }
}

impl From<CouplingMap> for CouplingMapRaw {
    fn from(m: CouplingMap) -> Self {
        CouplingMapRaw { n_qubits: m.n_qubits, edges: m.edges }
    }
}

impl CouplingMap {
    /// Edges are stored sorted with `a < b`; duplicates collapse.
    pub fn from_edges(n_qubits: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if n_qubits == 0 {
            return Err(Error::InvalidConfig("coupling map needs at least one qubit".into()));
        }
        let mut set = BTreeSet::new();
        for &(a, b) in edges {
            if a == b {
                return Err(Error::InvalidConfig(format!("self-loop on qubit {a}")));
            }
            if a >= n_qubits || b >= n_qubits {
                return Err(Error::InvalidConfig(format!("edge ({a}, {b}) outside {n_qubits} qubits")));
            }
            set.insert((a.min(b), a.max(b)));
        }
        let map = Self { n_qubits, edges: set.into_iter().collect() };
        if !map.is_connected() {
            return Err(Error::InvalidConfig("coupling map is not connected".into()));
        }
        Ok(map)
    }

    /// Linear chain 0-1-…-(n-1).
    pub fn path(n_qubits: usize) -> Result<Self> {
        let edges: Vec<_> = (1..n_qubits).map(|q| (q - 1, q)).collect();
        Self::from_edges(n_qubits, &edges)
    }

    /// Every qubit attached to `center`.
    pub fn star(n_qubits: usize, center: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n_qubits).filter(|&q| q != center).map(|q| (center, q)).collect();
        Self::from_edges(n_qubits, &edges)
    }

    /// The 5-qubit T shape 0-1-2 with 3 hanging off 1 and 4 off 3.
    pub fn t_shape() -> Self {
        Self::from_edges(5, &[(0, 1), (1, 2), (1, 3), (3, 4)]).expect("valid T map")
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.binary_search(&(a.min(b), a.max(b))).is_ok()
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n_qubits];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(q) = queue.pop_front() {
            for &(a, b) in &self.edges {
                let other = if a == q { b } else if b == q { a } else { continue };
                if !seen[other] {
                    seen[other] = true;
                    queue.push_back(other);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Layers of disjoint edges: each layer is a greedy maximal matching over
    /// the edges not yet scheduled, scanned in sorted order.
    pub fn matching_layers(&self) -> Vec<Vec<(usize, usize)>> {
        let mut remaining = self.edges.clone();
        let mut layers = Vec::new();
        while !remaining.is_empty() {
            let mut busy = vec![false; self.n_qubits];
            let mut layer = Vec::new();
            remaining.retain(|&(a, b)| {
                if busy[a] || busy[b] {
                    return true;
                }
                busy[a] = true;
                busy[b] = true;
                layer.push((a, b));
                false
            });
            layers.push(layer);
        }
        layers
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Entangler {
    #[default]
    Cnot,
    Rzx,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnsatzSpec {
    pub coupling: CouplingMap,
    pub n_blocks: usize,
    #[serde(default)]
    pub entangler: Entangler,
}

impl AnsatzSpec {
    pub fn path(n_qubits: usize, n_blocks: usize, entangler: Entangler) -> Result<Self> {
        Ok(Self { coupling: CouplingMap::path(n_qubits)?, n_blocks, entangler })
    }

    pub fn n_qubits(&self) -> usize {
        self.coupling.n_qubits()
    }

    pub fn n_params(&self) -> usize {
        let per_block = if self.entangler == Entangler::Rzx { 5 } else { 4 };
        2 * self.n_qubits() + per_block * self.n_blocks
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_blocks == 0 {
            return Err(Error::InvalidConfig("ansatz needs at least one block".into()));
        }
        if self.coupling.edges().is_empty() {
            return Err(Error::InvalidConfig("ansatz needs a coupling map with at least one edge".into()));
        }
        Ok(())
    }

    /// Edge of every block, in circuit order.
    pub fn schedule(&self) -> Vec<(usize, usize)> {
        self.coupling.matching_layers().into_iter().flatten().cycle().take(self.n_blocks).collect()
    }
}

/// Hardware-efficient ansatz: an RY·RZ layer, then `n_blocks` two-qubit blocks
/// laid out in matching layers over the coupling map.
pub fn build_ansatz(spec: &AnsatzSpec) -> Result<Circuit> {
    spec.validate()?;
    let mut c = Circuit::new(spec.n_qubits());
    for q in 0..spec.n_qubits() {
        c.push_param(GateKind::RY, &[q])?;
        c.push_param(GateKind::RZ, &[q])?;
    }
    for (a, b) in spec.schedule() {
        for q in [a, b] {
            c.push_param(GateKind::RY, &[q])?;
            c.push_param(GateKind::RZ, &[q])?;
        }
        match spec.entangler {
            Entangler::Cnot => c.push_gate(GateKind::CNOT, &[a, b])?,
            Entangler::Rzx => {
                c.push_param(GateKind::RZX, &[a, b])?;
            }
        }
    }
    Ok(c)
}

/// Number of two-qubit operations.
pub fn two_qubit_gate_count(circuit: &Circuit) -> usize {
    circuit.two_qubit_count()
}
