use std::collections::BTreeMap;

use crate::error::{invalid, Result};

use super::{Circuit, Gate, PartitionSpec};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StraddleCount {
    pub total: usize,
    /// Keyed by party pair `(i, j)` with `i < j`.
    pub per_pair: BTreeMap<(usize, usize), usize>,
}

/// Count two-qubit gates whose qubits lie in different parties.
pub fn count_straddling(c: &Circuit, p: &PartitionSpec) -> Result<StraddleCount> {
    if c.n() != p.n() {
        return invalid(format!("partition covers {} qubits but the circuit has {}", p.n(), c.n()));
    }
    let mut out = StraddleCount::default();
    for (i, g) in c.gates().iter().enumerate() {
        let (a, b) = match g {
            Gate::MuxRot { .. } => {
                return invalid(format!(
                    "gate {i} is a multiplexed rotation; lower the circuit first so straddling gates are explicit"
                ))
            }
            Gate::Cnot { control, target } => (*control, *target),
            Gate::TwoQubit { qubits, .. } => (qubits[0], qubits[1]),
            Gate::SingleQubit { .. } | Gate::LocalBlock { .. } => continue,
        };
        let (pa, pb) = (p.party_of(a), p.party_of(b));
        if pa != pb {
            out.total += 1;
            *out.per_pair.entry((pa.min(pb), pa.max(pb))).or_default() += 1;
        }
    }
    Ok(out)
}
