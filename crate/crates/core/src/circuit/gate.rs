use std::fmt;

use crate::error::{invalid, Result};
use crate::linalg::{ComplexMatrix, C64, ONE, ZERO};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Axis {
    Y,
    Z,
}

impl Axis {
    /// `R_y(θ) = exp(-iθY/2)`, `R_z(θ) = exp(-iθZ/2)`.
    pub fn rotation(self, theta: f64) -> [C64; 4] {
        let (s, c) = (theta / 2.0).sin_cos();
        match self {
            Axis::Y => [C64::new(c, 0.0), C64::new(-s, 0.0), C64::new(s, 0.0), C64::new(c, 0.0)],
            Axis::Z => [C64::new(c, -s), ZERO, ZERO, C64::new(c, s)],
        }
    }

    pub fn rotation_matrix(self, theta: f64) -> ComplexMatrix {
        ComplexMatrix::from_row_major(2, 2, self.rotation(theta).to_vec()).expect("finite")
    }
}

impl fmt::Display for Axis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Axis::Y => "y",
            Axis::Z => "z",
        })
    }
}

/// One instruction of the gate-list IR.
///
/// Dense matrices act on their qubit list with the first listed qubit as the
/// least significant bit of the local index. `MuxRot` is the exception: its
/// angle index uses the first listed control as the *most* significant bit.
#[derive(Debug, Clone, PartialEq)]
pub enum Gate {
    SingleQubit { qubit: usize, matrix: ComplexMatrix },
    TwoQubit { qubits: [usize; 2], matrix: ComplexMatrix },
    Cnot { control: usize, target: usize },
    /// Multiplexed rotation: for control assignment `b`, apply `R_axis(angles[b])` to `target`.
    MuxRot { axis: Axis, target: usize, controls: Vec<usize>, angles: Vec<f64> },
    /// Arbitrary unitary confined to one party. Never straddling.
    LocalBlock { party: usize, qubits: Vec<usize>, matrix: ComplexMatrix },
}

impl Gate {
    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    /// Qubits touched, in the gate's own order.
    pub fn qubits(&self) -> Vec<usize> {
        match self {
            Gate::SingleQubit { qubit, .. } => vec![*qubit],
            Gate::TwoQubit { qubits, .. } => qubits.to_vec(),
            Gate::Cnot { control, target } => vec![*control, *target],
            Gate::MuxRot { target, controls, .. } => {
                let mut v = vec![*target];
                v.extend_from_slice(controls);
                v
            }
            Gate::LocalBlock { qubits, .. } => qubits.clone(),
        }
    }

    /// Macro gates must be lowered before counting.
    pub fn is_macro(&self) -> bool {
        matches!(self, Gate::MuxRot { .. })
    }

    pub fn is_two_qubit(&self) -> bool {
        matches!(self, Gate::TwoQubit { .. } | Gate::Cnot { .. })
    }

    pub fn inverse(&self) -> Gate {
        match self {
            Gate::SingleQubit { qubit, matrix } => Gate::SingleQubit { qubit: *qubit, matrix: matrix.adjoint() },
            Gate::TwoQubit { qubits, matrix } => Gate::TwoQubit { qubits: *qubits, matrix: matrix.adjoint() },
            Gate::Cnot { .. } => self.clone(),
            Gate::MuxRot { axis, target, controls, angles } => Gate::MuxRot {
                axis: *axis,
                target: *target,
                controls: controls.clone(),
                angles: angles.iter().map(|a| -a).collect(),
            },
            Gate::LocalBlock { party, qubits, matrix } => {
                Gate::LocalBlock { party: *party, qubits: qubits.clone(), matrix: matrix.adjoint() }
            }
        }
    }

    /// Structural checks: indices in range and distinct, matrix shapes, angle count.
    pub fn validate(&self, n: usize) -> Result<()> {
        let qs = self.qubits();
        for (i, &q) in qs.iter().enumerate() {
            if q >= n {
                return invalid(format!("gate touches qubit {q} but the circuit has {n} qubits"));
            }
            if qs[..i].contains(&q) {
                return invalid(format!("gate lists qubit {q} twice"));
            }
        }
        let dim = 1usize << qs.len();
        match self {
            Gate::SingleQubit { matrix, .. } | Gate::TwoQubit { matrix, .. } | Gate::LocalBlock { matrix, .. } => {
                if matrix.rows() != dim || matrix.cols() != dim {
                    return invalid(format!(
                        "gate on {} qubits needs a {dim}x{dim} matrix, got {}x{}",
                        qs.len(),
                        matrix.rows(),
                        matrix.cols()
                    ));
                }
                matrix.check_finite()?;
            }
            Gate::MuxRot { controls, angles, .. } => {
                if angles.len() != 1 << controls.len() {
                    return invalid(format!(
                        "multiplexed rotation with {} controls needs {} angles, got {}",
                        controls.len(),
                        1usize << controls.len(),
                        angles.len()
                    ));
                }
                if angles.iter().any(|a| !a.is_finite()) {
                    return invalid("non-finite rotation angle");
                }
            }
            Gate::Cnot { .. } => {}
        }
        Ok(())
    }

    /// Unitarity of the stored matrix, if any.
    pub fn unitarity_error(&self) -> f64 {
        match self {
            Gate::SingleQubit { matrix, .. } | Gate::TwoQubit { matrix, .. } | Gate::LocalBlock { matrix, .. } => {
                matrix.unitarity_error()
            }
            _ => 0.0,
        }
    }

    /// Dense matrix over `self.qubits()` (first qubit least significant).
    pub fn dense(&self) -> ComplexMatrix {
        match self {
            Gate::SingleQubit { matrix, .. } | Gate::TwoQubit { matrix, .. } | Gate::LocalBlock { matrix, .. } => {
                matrix.clone()
            }
            Gate::Cnot { .. } => {
                // qubits = [control, target]: control is bit 0
                let mut m = ComplexMatrix::zeros(4, 4);
                for (from, to) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
                    m[(to, from)] = ONE;
                }
                m
            }
            Gate::MuxRot { axis, controls, angles, .. } => {
                let k = controls.len();
                let dim = 2usize << k;
                let mut m = ComplexMatrix::zeros(dim, dim);
                for local in (0..dim).step_by(2) {
                    // bit 0 = target, bit 1+i = controls[i]; controls[0] is the MSB of b
                    let b = (0..k).fold(0, |acc, i| acc | ((local >> (1 + i) & 1) << (k - 1 - i)));
                    let r = axis.rotation(angles[b]);
                    m[(local, local)] = r[0];
                    m[(local, local + 1)] = r[1];
                    m[(local + 1, local)] = r[2];
                    m[(local + 1, local + 1)] = r[3];
                }
                m
            }
        }
    }

    /// Dense matrix over an arbitrary superset ordering of the gate's qubits.
    pub fn dense_on(&self, order: &[usize]) -> ComplexMatrix {
        embed(&self.dense(), &self.qubits(), order)
    }
}

/// Re-express `matrix` (acting on `qubits`) over the ordering `order`, which
/// must contain every qubit in `qubits`.
pub fn embed(matrix: &ComplexMatrix, qubits: &[usize], order: &[usize]) -> ComplexMatrix {
    let pos: Vec<usize> = qubits
        .iter()
        .map(|q| order.iter().position(|o| o == q).expect("qubit missing from ordering"))
        .collect();
    let dim = 1usize << order.len();
    let k = qubits.len();
    let gate_mask: usize = pos.iter().map(|&p| 1 << p).sum();
    let to_local = |idx: usize| pos.iter().enumerate().fold(0, |acc, (j, &p)| acc | ((idx >> p & 1) << j));
    let mut out = ComplexMatrix::zeros(dim, dim);
    for col in 0..dim {
        let rest = col & !gate_mask;
        let lc = to_local(col);
        for lr in 0..1usize << k {
            let v = matrix[(lr, lc)];
            if v == ZERO {
                continue;
            }
            let row = pos.iter().enumerate().fold(rest, |acc, (j, &p)| acc | ((lr >> j & 1) << p));
            out[(row, col)] = v;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mux_dense_definition() {
        let g = Gate::MuxRot { axis: Axis::Z, target: 0, controls: vec![1], angles: vec![0.3, -1.1] };
        let m = g.dense();
        let expect = [
            C64::from_polar(1.0, -0.15),
            C64::from_polar(1.0, 0.15),
            C64::from_polar(1.0, 0.55),
            C64::from_polar(1.0, -0.55),
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!((m[(i, i)] - e).norm() < 1e-15);
        }
    }

    #[test]
    fn embed_swaps_order() {
        let g = Gate::cnot(0, 1);
        let swapped = g.dense_on(&[1, 0]);
        // control is now bit 1: |10> (index 2) -> |11> (index 3)
        assert_eq!(swapped[(3, 2)], ONE);
        assert_eq!(swapped[(1, 1)], ONE);
    }

    #[test]
    fn validation_rejects_duplicates() {
        assert!(Gate::cnot(1, 1).validate(2).is_err());
        assert!(Gate::cnot(0, 2).validate(2).is_err());
        let g = Gate::MuxRot { axis: Axis::Y, target: 0, controls: vec![1], angles: vec![0.0] };
        assert!(g.validate(2).is_err());
    }
}
