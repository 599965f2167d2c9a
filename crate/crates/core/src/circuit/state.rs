use serde::{Deserialize, Serialize};

use crate::config::TOLERANCES;
use crate::error::{invalid, Result};
use crate::linalg::{inner, norm, C64, ONE, ZERO};

/// Normalized amplitude vector over `n` qubits; index = basis integer with
/// qubit 0 as the least significant bit.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    n: usize,
    amps: Vec<C64>,
}

#[derive(Serialize, Deserialize)]
struct StateFile {
    n: usize,
    amplitudes: Vec<[f64; 2]>,
}

impl PureState {
    pub fn new(n: usize, amps: Vec<C64>) -> Result<Self> {
        if amps.len() != 1usize << n {
            return invalid(format!("a {n}-qubit state needs {} amplitudes, got {}", 1usize << n, amps.len()));
        }
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return invalid("state contains non-finite amplitudes");
        }
        let nrm = norm(&amps);
        if (nrm - 1.0).abs() > TOLERANCES.state_norm {
            return invalid(format!("state is not normalized (norm {nrm:.12})"));
        }
        Ok(Self { n, amps })
    }

    /// Normalize an arbitrary nonzero vector.
    pub fn normalized(n: usize, mut amps: Vec<C64>) -> Result<Self> {
        let nrm = norm(&amps);
        if !(nrm > 0.0 && nrm.is_finite()) {
            return invalid("cannot normalize a zero or non-finite vector");
        }
        amps.iter_mut().for_each(|z| *z /= nrm);
        Self::new(n, amps)
    }

    pub fn zero(n: usize) -> Self {
        Self::basis(n, 0)
    }

    pub fn basis(n: usize, index: usize) -> Self {
        let mut amps = vec![ZERO; 1 << n];
        amps[index] = ONE;
        Self { n, amps }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amplitudes_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn into_amplitudes(self) -> Vec<C64> {
        self.amps
    }

    pub fn overlap(&self, other: &Self) -> C64 {
        inner(&self.amps, &other.amps)
    }

    /// `|⟨self|other⟩|²`.
    pub fn fidelity(&self, other: &Self) -> f64 {
        self.overlap(other).norm_sqr()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.amps.iter().zip(&other.amps).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: StateFile = serde_json::from_str(text)?;
        Self::new(f.n, f.amplitudes.iter().map(|&[re, im]| C64::new(re, im)).collect())
    }

    pub fn to_json_value(&self) -> serde_json::Value {
        serde_json::to_value(StateFile { n: self.n, amplitudes: self.amps.iter().map(|z| [z.re, z.im]).collect() })
            .expect("serializable")
    }
}
