//! Multiplexed rotations across a cut: Gray-code synthesis, the Barenco-style
//! multi-controlled rotation, and the closed-form cost model `T(p, q)`.
//!
//! Angle vectors for a multiplexor with `p` remote and `q` local controls are
//! indexed with the remote controls as the high bits (first remote control most
//! significant) followed by the local controls.

use serde::{Deserialize, Serialize};

use crate::circuit::{Axis, Circuit, Gate, PartitionSpec};
use crate::error::{invalid, Result};
use crate::linalg::{ComplexMatrix, ONE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MuxStrategy {
    /// Peel local controls first: `T(p, q) = 2·T(p, q-1)`.
    RecursionD1,
    /// Peel remote controls first: `T(p, q) = 2·T(p-1, q) + 2`.
    RecursionD2,
    GrayCode,
    /// Single multi-controlled rotation, no local controls.
    BarencoControlled,
}

impl std::str::FromStr for MuxStrategy {
    type Err = crate::Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "recursion-d1" => Ok(Self::RecursionD1),
            "recursion-d2" => Ok(Self::RecursionD2),
            "graycode" => Ok(Self::GrayCode),
            "barenco-controlled" => Ok(Self::BarencoControlled),
            other => invalid(format!("unknown multiplexor strategy {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MuxCostQuery {
    pub p: u32,
    pub q: u32,
    pub strategy: MuxStrategy,
}

/// Closed-form straddling count of a multiplexor with `p` remote and `q` local controls.
pub fn cost_model_t(query: MuxCostQuery) -> Result<u64> {
    let MuxCostQuery { p, q, strategy } = query;
    if p + q > 62 {
        return invalid("control count too large for the cost model");
    }
    if strategy == MuxStrategy::BarencoControlled && q > 0 {
        return invalid("the controlled-rotation construction has no local controls (q must be 0)");
    }
    if p == 0 {
        return Ok(0);
    }
    let (p64, q64) = (p as u64, q as u64);
    Ok(match strategy {
        MuxStrategy::RecursionD1 => (2 * p64 - 1) << q64,
        MuxStrategy::RecursionD2 => (1 << (p64 + 1)) - 2,
        MuxStrategy::GrayCode => 1 << p64,
        MuxStrategy::BarencoControlled => 2 * p64 - 1,
    })
}

fn gray(j: usize) -> usize {
    j ^ (j >> 1)
}

/// Solve `θ_x = Σ_j (-1)^{x·gray(j)} α_j` over the `p` remote bits of the
/// angle index. Returns `2^p` vectors of `2^q` local angles, one per Gray segment.
pub fn mux_angles_graycode(angles: &[f64], p: usize) -> Result<Vec<Vec<f64>>> {
    let total = angles.len();
    if total == 0 || !total.is_power_of_two() || (total.trailing_zeros() as usize) < p {
        return invalid(format!("angle vector of length {total} does not fit {p} remote controls"));
    }
    let segs = 1usize << p;
    let local = total / segs;
    let scale = 1.0 / segs as f64;
    Ok((0..segs)
        .map(|j| {
            let g = gray(j);
            (0..local)
                .map(|l| {
                    let sum: f64 = (0..segs)
                        .map(|x| {
                            let sign = if (x & g).count_ones().is_multiple_of(2) { 1.0 } else { -1.0 };
                            sign * angles[x * local + l]
                        })
                        .sum();
                    sum * scale
                })
                .collect()
        })
        .collect())
}

fn check_mux_layout(
    target: usize,
    remote: &[usize],
    local: &[usize],
    p: &PartitionSpec,
    angles_len: usize,
) -> Result<()> {
    let n = p.n();
    let mut seen = vec![false; n];
    for &q in std::iter::once(&target).chain(remote).chain(local) {
        if q >= n {
            return invalid(format!("qubit {q} outside the {n}-qubit partition"));
        }
        if seen[q] {
            return invalid(format!("qubit {q} used twice in a multiplexor"));
        }
        seen[q] = true;
    }
    if let Some(&r) = remote.iter().find(|&&r| p.same_party(r, target)) {
        return invalid(format!("remote control {r} sits in the target's party"));
    }
    if let Some(&l) = local.iter().find(|&&l| !p.same_party(l, target)) {
        return invalid(format!("local control {l} is not in the target's party"));
    }
    let need = 1usize << (remote.len() + local.len());
    if angles_len != need {
        return invalid(format!("multiplexor needs {need} angles, got {angles_len}"));
    }
    Ok(())
}

fn local_mux(axis: Axis, target: usize, local: &[usize], angles: Vec<f64>, p: &PartitionSpec) -> Gate {
    let g = Gate::MuxRot { axis, target, controls: local.to_vec(), angles };
    Gate::LocalBlock { party: p.party_of(target), qubits: g.qubits(), matrix: g.dense() }
}

/// Gray-code synthesis of a multiplexed rotation.
///
/// `p = 0` gives one LocalBlock; one remote control without local controls gives
/// one TwoQubit gate; otherwise `2^p` segments of (local sub-multiplexor, Cnot
/// from the remote control whose Gray bit flips next).
pub fn synth_mux_rotation(
    axis: Axis,
    target: usize,
    remote: &[usize],
    local: &[usize],
    angles: &[f64],
    p: &PartitionSpec,
) -> Result<Circuit> {
    check_mux_layout(target, remote, local, p, angles.len())?;
    let n = p.n();
    let rp = remote.len();
    if rp == 0 {
        return Ok(Circuit::from_gates(n, vec![local_mux(axis, target, local, angles.to_vec(), p)]));
    }
    if rp == 1 && local.is_empty() {
        let g = Gate::MuxRot { axis, target, controls: remote.to_vec(), angles: angles.to_vec() };
        return Ok(Circuit::from_gates(n, vec![Gate::TwoQubit { qubits: [target, remote[0]], matrix: g.dense() }]));
    }
    let alphas = mux_angles_graycode(angles, rp)?;
    let segs = alphas.len();
    let mut c = Circuit::new(n);
    for (j, alpha) in alphas.into_iter().enumerate() {
        c.push(local_mux(axis, target, local, alpha, p));
        let bit = if j + 1 < segs { (j + 1).trailing_zeros() as usize } else { rp - 1 };
        c.push(Gate::cnot(remote[rp - 1 - bit], target));
    }
    Ok(c)
}

/// `C^k X` on `qubits = [target, controls...]` (first qubit least significant).
fn multi_controlled_x(k: usize) -> ComplexMatrix {
    let dim = 2usize << k;
    let all = dim - 2;
    let mut m = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let row = if col & all == all { col ^ 1 } else { col };
        m[(row, col)] = ONE;
    }
    m
}

/// Multi-controlled rotation with all controls in one party and the target in
/// another, using `2p - 1` straddling gates.
pub fn synth_controlled_rotation_cross(
    controls: &[usize],
    target: usize,
    axis: Axis,
    angle: f64,
    p: &PartitionSpec,
) -> Result<Circuit> {
    if controls.is_empty() {
        return invalid("controlled rotation needs at least one control; use a local gate instead");
    }
    if !angle.is_finite() {
        return invalid("non-finite rotation angle");
    }
    check_mux_layout(target, controls, &[], p, 1 << controls.len())?;
    let party = p.party_of(controls[0]);
    if controls.iter().any(|&c| p.party_of(c) != party) {
        return invalid("controls of a cross-cut controlled rotation must share one party");
    }
    let mut c = Circuit::new(p.n());
    emit_controlled_rotation(&mut c, controls, target, axis, angle, party);
    Ok(c)
}

fn emit_controlled_rotation(c: &mut Circuit, controls: &[usize], target: usize, axis: Axis, angle: f64, party: usize) {
    let k = controls.len();
    let last = controls[k - 1];
    let c1r = |theta: f64| {
        let g = Gate::MuxRot { axis, target, controls: vec![last], angles: vec![0.0, theta] };
        Gate::TwoQubit { qubits: [target, last], matrix: g.dense() }
    };
    if k == 1 {
        c.push(c1r(angle));
        return;
    }
    let mut qs = vec![last];
    qs.extend_from_slice(&controls[..k - 1]);
    let cx = Gate::LocalBlock { party, qubits: qs, matrix: multi_controlled_x(k - 1) };
    c.push(c1r(angle / 2.0));
    c.push(cx.clone());
    c.push(c1r(-angle / 2.0));
    c.push(cx);
    emit_controlled_rotation(c, &controls[..k - 1], target, axis, angle / 2.0, party);
}
