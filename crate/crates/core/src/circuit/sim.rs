//! Statevector simulation and dense circuit matrices (verification oracles).

use crate::config::{MAX_DENSE_QUBITS, TOLERANCES};
use crate::error::{invalid, Error, Result};
use crate::linalg::{ComplexMatrix, C64, ZERO};
use crate::par;

use super::{Circuit, Gate, PureState};

/// Apply a dense `2^k × 2^k` matrix to `qubits` of an amplitude vector in place.
pub fn apply_matrix(amps: &mut [C64], qubits: &[usize], matrix: &ComplexMatrix) {
    let k = qubits.len();
    let dim = 1usize << k;
    let mask: usize = qubits.iter().map(|&q| 1 << q).sum();
    let offsets: Vec<usize> = (0..dim)
        .map(|l| qubits.iter().enumerate().fold(0, |acc, (j, &q)| acc | ((l >> j & 1) << q)))
        .collect();
    let mut buf = vec![ZERO; dim];
    let m = matrix.as_slice();
    for base in 0..amps.len() {
        if base & mask != 0 {
            continue;
        }
        for (b, &o) in buf.iter_mut().zip(&offsets) {
            *b = amps[base | o];
        }
        for (r, &o) in offsets.iter().enumerate() {
            let row = &m[r * dim..(r + 1) * dim];
            amps[base | o] = row.iter().zip(&buf).map(|(&a, &x)| a * x).sum();
        }
    }
}

fn apply_cnot(amps: &mut [C64], control: usize, target: usize) {
    let (cm, tm) = (1usize << control, 1usize << target);
    for i in 0..amps.len() {
        if i & cm != 0 && i & tm == 0 {
            amps.swap(i, i | tm);
        }
    }
}

fn apply_mux(amps: &mut [C64], axis: super::Axis, target: usize, controls: &[usize], angles: &[f64]) {
    let tm = 1usize << target;
    let k = controls.len();
    let rotations: Vec<[C64; 4]> = angles.iter().map(|&a| axis.rotation(a)).collect();
    for i in 0..amps.len() {
        if i & tm != 0 {
            continue;
        }
        let b = controls.iter().enumerate().fold(0, |acc, (j, &c)| acc | ((i >> c & 1) << (k - 1 - j)));
        let r = &rotations[b];
        let (a0, a1) = (amps[i], amps[i | tm]);
        amps[i] = r[0] * a0 + r[1] * a1;
        amps[i | tm] = r[2] * a0 + r[3] * a1;
    }
}

/// Apply one gate without validation.
pub fn apply_gate(amps: &mut [C64], gate: &Gate) {
    match gate {
        Gate::SingleQubit { qubit, matrix } => apply_matrix(amps, &[*qubit], matrix),
        Gate::TwoQubit { qubits, matrix } => apply_matrix(amps, qubits, matrix),
        Gate::LocalBlock { qubits, matrix, .. } => apply_matrix(amps, qubits, matrix),
        Gate::Cnot { control, target } => apply_cnot(amps, *control, *target),
        Gate::MuxRot { axis, target, controls, angles } => apply_mux(amps, *axis, *target, controls, angles),
    }
}

fn check_gates(c: &Circuit) -> Result<()> {
    c.validate()?;
    for (i, g) in c.gates().iter().enumerate() {
        let err = g.unitarity_error();
        if err > TOLERANCES.unitarity {
            return invalid(format!("gate {i} is not unitary (error {err:.3e})"));
        }
    }
    Ok(())
}

/// Run the circuit on `s`, applying gates in list order.
pub fn apply_circuit(c: &Circuit, s: &PureState) -> Result<PureState> {
    if c.n() != s.n() {
        return invalid(format!("circuit has {} qubits but the state has {}", c.n(), s.n()));
    }
    check_gates(c)?;
    let mut out = s.clone();
    for g in c.gates() {
        apply_gate(out.amplitudes_mut(), g);
    }
    Ok(out)
}

/// Dense unitary of the whole circuit, built column by column.
pub fn circuit_unitary(c: &Circuit) -> Result<ComplexMatrix> {
    circuit_unitary_capped(c, MAX_DENSE_QUBITS)
}

pub fn circuit_unitary_capped(c: &Circuit, max_qubits: usize) -> Result<ComplexMatrix> {
    if c.n() > max_qubits {
        return Err(Error::ResourceLimit(format!(
            "dense matrix of a {}-qubit circuit exceeds the {max_qubits}-qubit cap",
            c.n()
        )));
    }
    check_gates(c)?;
    let dim = 1usize << c.n();
    let columns = par::map_indexed(dim, |col| {
        let mut amps = vec![ZERO; dim];
        amps[col] = crate::linalg::ONE;
        for g in c.gates() {
            apply_gate(&mut amps, g);
        }
        amps
    });
    Ok(ComplexMatrix::from_columns(&columns))
}
