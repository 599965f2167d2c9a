use crate::error::{invalid, Result};
use crate::multiplexor::synth_mux_rotation;

use super::{Circuit, Gate, PartitionSpec};

/// Expand every `MuxRot` into Cnot, TwoQubit and LocalBlock gates.
///
/// Controls in the target's party stay inside free LocalBlock sub-multiplexors;
/// only the remote controls drive the Gray-code Cnot ladder. LocalBlocks are
/// kept as they are.
pub fn lower(c: &Circuit, p: &PartitionSpec) -> Result<Circuit> {
    c.validate_against(p)?;
    let mut out = Circuit::new(c.n());
    for g in c.gates() {
        match g {
            Gate::MuxRot { axis, target, controls, angles } => {
                let (remote, local): (Vec<usize>, Vec<usize>) =
                    controls.iter().partition(|&&q| !p.same_party(q, *target));
                let reordered = reorder_angles(controls, angles, &remote, &local);
                out.append(synth_mux_rotation(*axis, *target, &remote, &local, &reordered, p)?);
            }
            other => out.push(other.clone()),
        }
    }
    Ok(out)
}

/// `lower` followed by expansion of every LocalBlock into one- and two-qubit
/// gates (blocks of three or more qubits go through QSD on singleton parties).
pub fn lower_full(c: &Circuit, p: &PartitionSpec) -> Result<Circuit> {
    let lowered = lower(c, p)?;
    let mut out = Circuit::new(c.n());
    for g in lowered.into_gates() {
        match g {
            Gate::LocalBlock { qubits, matrix, .. } => match qubits.len() {
                1 => out.push(Gate::SingleQubit { qubit: qubits[0], matrix }),
                2 => out.push(Gate::TwoQubit { qubits: [qubits[0], qubits[1]], matrix }),
                _ => {
                    let sub = crate::qsd::decompose_on_qubits(&matrix, &qubits, c.n())?;
                    let singles = PartitionSpec::singletons(c.n());
                    let sub = lower_full(&sub, &singles)?;
                    out.append(sub);
                }
            },
            other => out.push(other),
        }
    }
    if !out.is_lowered() {
        return invalid("full lowering left a macro gate behind");
    }
    Ok(out)
}

/// Permute MuxRot angles from the gate's control order to `remote ++ local`
/// order, first listed control most significant in both.
fn reorder_angles(controls: &[usize], angles: &[f64], remote: &[usize], local: &[usize]) -> Vec<f64> {
    let k = controls.len();
    let new_order: Vec<usize> = remote.iter().chain(local).copied().collect();
    let old_pos: Vec<usize> =
        new_order.iter().map(|q| controls.iter().position(|c| c == q).expect("same control set")).collect();
    (0..1usize << k)
        .map(|b_new| {
            let b_old = (0..k).fold(0, |acc, i| {
                let bit = b_new >> (k - 1 - i) & 1;
                acc | (bit << (k - 1 - old_pos[i]))
            });
            angles[b_old]
        })
        .collect()
}
