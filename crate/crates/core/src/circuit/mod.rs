//! Gate-list IR with partition awareness, simulation oracles, lowering of
//! macro gates, the straddling-gate fusion pass and the straddling counter.

mod count;
mod format;
mod fuse;
mod gate;
mod lower;
mod partition;
mod sim;
mod state;

pub use count::{count_straddling, StraddleCount};
pub use format::{parse_sqc, to_sqc};
pub use fuse::fuse_straddling;
pub use gate::{embed, Axis, Gate};
pub use lower::{lower, lower_full};
pub use partition::PartitionSpec;
pub use sim::{apply_circuit, apply_gate, apply_matrix, circuit_unitary, circuit_unitary_capped};
pub use state::PureState;

use crate::error::{invalid, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Circuit {
    n: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(n: usize) -> Self {
        Self { n, gates: Vec::new() }
    }

    pub fn from_gates(n: usize, gates: Vec<Gate>) -> Self {
        Self { n, gates }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn into_gates(self) -> Vec<Gate> {
        self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn push(&mut self, g: Gate) {
        self.gates.push(g);
    }

    pub fn extend(&mut self, gates: impl IntoIterator<Item = Gate>) {
        self.gates.extend(gates);
    }

    pub fn append(&mut self, other: Circuit) {
        self.gates.extend(other.gates);
    }

    /// Reversed gate order with every gate inverted.
    pub fn inverse(&self) -> Circuit {
        Circuit { n: self.n, gates: self.gates.iter().rev().map(Gate::inverse).collect() }
    }

    /// Contains only SingleQubit, TwoQubit, Cnot and LocalBlock gates.
    pub fn is_lowered(&self) -> bool {
        !self.gates.iter().any(Gate::is_macro)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, g) in self.gates.iter().enumerate() {
            g.validate(self.n).map_err(|e| crate::Error::InvalidInput(format!("gate {i}: {e}")))?;
        }
        Ok(())
    }

    /// Check every LocalBlock against the partition.
    pub fn validate_against(&self, p: &PartitionSpec) -> Result<()> {
        if p.n() != self.n {
            return invalid(format!("partition covers {} qubits but the circuit has {}", p.n(), self.n));
        }
        self.validate()?;
        for (i, g) in self.gates.iter().enumerate() {
            if let Gate::LocalBlock { party, qubits, .. } = g {
                if *party >= p.m() || qubits.iter().any(|&q| p.party_of(q) != *party) {
                    return invalid(format!("gate {i}: local block qubits {qubits:?} are not all in party {party}"));
                }
            }
        }
        Ok(())
    }

    /// Apply a qubit relabeling `q -> perm[q]` to every gate.
    pub fn relabeled(&self, perm: &[usize], p_new: &PartitionSpec) -> Circuit {
        let gates = self
            .gates
            .iter()
            .map(|g| match g {
                Gate::SingleQubit { qubit, matrix } => Gate::SingleQubit { qubit: perm[*qubit], matrix: matrix.clone() },
                Gate::TwoQubit { qubits, matrix } => {
                    Gate::TwoQubit { qubits: [perm[qubits[0]], perm[qubits[1]]], matrix: matrix.clone() }
                }
                Gate::Cnot { control, target } => Gate::cnot(perm[*control], perm[*target]),
                Gate::MuxRot { axis, target, controls, angles } => Gate::MuxRot {
                    axis: *axis,
                    target: perm[*target],
                    controls: controls.iter().map(|&c| perm[c]).collect(),
                    angles: angles.clone(),
                },
                Gate::LocalBlock { qubits, matrix, .. } => {
                    let qubits: Vec<usize> = qubits.iter().map(|&q| perm[q]).collect();
                    Gate::LocalBlock { party: p_new.party_of(qubits[0]), qubits, matrix: matrix.clone() }
                }
            })
            .collect();
        Circuit { n: self.n, gates }
    }
}
