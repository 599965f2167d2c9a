use crate::config::TOLERANCES;

use super::{Circuit, Gate, PartitionSpec};

/// Peephole pass merging runs of two-qubit gates on the same unordered pair.
///
/// Starting at a two-qubit gate on `{a, b}`, the run extends over every later
/// gate supported inside `{a, b}` and skips gates disjoint from it; it stops at
/// the first gate touching `a` or `b` together with another qubit. A run holding
/// at least two two-qubit gates collapses into one `TwoQubit` gate placed at the
/// run start, or disappears if the product is the identity up to phase. Gates
/// after the last two-qubit gate of the run are left in place. The pass repeats
/// until nothing changes, so applying it twice is the same as applying it once.
pub fn fuse_straddling(c: &Circuit, _p: &PartitionSpec) -> Circuit {
    let mut gates: Vec<Option<Gate>> = c.gates().iter().cloned().map(Some).collect();
    loop {
        let mut changed = false;
        for i in 0..gates.len() {
            let Some(first) = &gates[i] else { continue };
            if !first.is_two_qubit() {
                continue;
            }
            let qs = first.qubits();
            let (a, b) = (qs[0].min(qs[1]), qs[0].max(qs[1]));
            let mut run = vec![i];
            let mut last_two = i;
            let mut two_count = 1;
            for (j, slot) in gates.iter().enumerate().skip(i + 1) {
                let Some(g) = slot else { continue };
                let support = g.qubits();
                let touches = support.iter().any(|&q| q == a || q == b);
                if !touches {
                    continue;
                }
                if support.iter().all(|&q| q == a || q == b) {
                    run.push(j);
                    if g.is_two_qubit() {
                        two_count += 1;
                        last_two = j;
                    }
                } else {
                    break;
                }
            }
            if two_count < 2 {
                continue;
            }
            let order = [a, b];
            let mut product = crate::linalg::ComplexMatrix::identity(4);
            for &j in run.iter().filter(|&&j| j <= last_two) {
                let g = gates[j].take().expect("run members are present");
                product = g.dense_on(&order).matmul(&product);
            }
            if !product.is_identity_up_to_phase(TOLERANCES.unitarity) {
                gates[i] = Some(Gate::TwoQubit { qubits: order, matrix: product });
            }
            changed = true;
        }
        if !changed {
            break;
        }
    }
    Circuit::from_gates(c.n(), gates.into_iter().flatten().collect())
}
