//! Numerical tolerances shared by every module.

/// Tolerance record. All checks in the crate read from [`TOLERANCES`] unless a
/// caller passes its own value explicitly.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    /// Max-norm bound on `U†U - I` for a matrix to count as unitary.
    pub unitarity: f64,
    /// Max deviation of pairwise inner products from `δ_ij` for input vector families.
    pub orthonormality: f64,
    /// Singular values at or below this are treated as zero.
    pub rank_cutoff: f64,
    /// Allowed `|‖ψ‖ - 1|` for a pure state.
    pub state_norm: f64,
    /// Required fidelity margin for a preparation to count as verified.
    pub fidelity: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        TOLERANCES
    }
}

pub const TOLERANCES: Tolerances = Tolerances {
    unitarity: 1e-10,
    orthonormality: 1e-8,
    rank_cutoff: 1e-9,
    state_norm: 1e-10,
    fidelity: 1e-8,
};

/// Largest qubit count for which dense matrices are built.
pub const MAX_DENSE_QUBITS: usize = 10;
