//! Schmidt analysis across bipartitions and multipartitions.
//!
//! Internally states are handled in party-major layout: index
//! `l_0 + d_0·(l_1 + d_1·(l_2 + …))` where `l_j` is the local index of party
//! `j` (its lowest qubit least significant) and `d_j = 2^{k_j}`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::circuit::{Gate, PartitionSpec, PureState};
use crate::config::TOLERANCES;
use crate::error::{invalid, Result};
use crate::linalg::{complete_basis, eigh, inner, svd, ComplexMatrix, C64, ZERO};

#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposition {
    /// Nonzero weights, descending.
    pub weights: Vec<f64>,
    pub left: Vec<Vec<C64>>,
    pub right: Vec<Vec<C64>>,
    pub rank: usize,
    pub tolerance: f64,
}

impl SchmidtDecomposition {
    /// `Σ_i w_i |left_i⟩ ⊗ |right_i⟩` with the left index least significant.
    pub fn reconstruct(&self) -> Vec<C64> {
        let (da, db) = (self.left.first().map_or(1, Vec::len), self.right.first().map_or(1, Vec::len));
        let mut out = vec![ZERO; da * db];
        for ((w, a), b) in self.weights.iter().zip(&self.left).zip(&self.right) {
            for (j, bj) in b.iter().enumerate() {
                for (i, ai) in a.iter().enumerate() {
                    out[i + da * j] += ai * bj * w;
                }
            }
        }
        out
    }
}

/// Per-party factorization `Σ_i w_i ⊗_j |ψ_j^i⟩` with orthonormal families.
#[derive(Debug, Clone, PartialEq)]
pub struct SchmidtDecomposableForm {
    pub weights: Vec<f64>,
    /// `bases[j][i]` is party `j`'s vector for term `i`.
    pub bases: Vec<Vec<Vec<C64>>>,
}

impl SchmidtDecomposableForm {
    pub fn rank(&self) -> usize {
        self.weights.len()
    }

    /// Amplitudes in the global qubit layout of `p`.
    pub fn to_state(&self, p: &PartitionSpec) -> Result<PureState> {
        if self.bases.len() != p.m() {
            return invalid("form and partition disagree on the party count");
        }
        let mut pm = vec![ZERO; 1 << p.n()];
        for (i, &w) in self.weights.iter().enumerate() {
            let factors: Vec<&Vec<C64>> = self.bases.iter().map(|b| &b[i]).collect();
            let term = tensor(&factors);
            for (x, t) in pm.iter_mut().zip(term) {
                *x += t * w;
            }
        }
        PureState::normalized(p.n(), from_party_major(&pm, p))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Decomposability {
    Yes(SchmidtDecomposableForm),
    /// Names the first failed check.
    No(String),
    Indeterminate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Branch {
    /// Index of the term in the previous level this branch expands, as (branch, term).
    pub parent: Option<(usize, usize)>,
    pub decomposition: SchmidtDecomposition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IteratedDecomposition {
    pub levels: Vec<Vec<Branch>>,
}

impl IteratedDecomposition {
    /// Total number of terms per level.
    pub fn level_ranks(&self) -> Vec<usize> {
        self.levels.iter().map(|l| l.iter().map(|b| b.decomposition.rank).sum()).collect()
    }
}

/// Kronecker product with the first factor least significant.
fn tensor(factors: &[&Vec<C64>]) -> Vec<C64> {
    let mut out = vec![C64::new(1.0, 0.0)];
    for f in factors {
        let mut next = Vec::with_capacity(out.len() * f.len());
        for fj in f.iter() {
            for o in &out {
                next.push(o * fj);
            }
        }
        out = next;
    }
    out
}

pub(crate) fn to_party_major(amps: &[C64], p: &PartitionSpec) -> Vec<C64> {
    let dims: Vec<usize> = p.parties().iter().map(|q| 1 << q.len()).collect();
    let mut out = vec![ZERO; amps.len()];
    for (g, &a) in amps.iter().enumerate() {
        let mut idx = 0;
        for j in (0..p.m()).rev() {
            idx = idx * dims[j] + p.local_index(g, j);
        }
        out[idx] = a;
    }
    out
}

pub(crate) fn from_party_major(pm: &[C64], p: &PartitionSpec) -> Vec<C64> {
    let dims: Vec<usize> = p.parties().iter().map(|q| 1 << q.len()).collect();
    let mut out = vec![ZERO; pm.len()];
    let mut locals = vec![0; p.m()];
    for (idx, &a) in pm.iter().enumerate() {
        let mut rem = idx;
        for (j, d) in dims.iter().enumerate() {
            locals[j] = rem % d;
            rem /= d;
        }
        out[p.compose_index(&locals)] = a;
    }
    out
}

/// SVD of a vector viewed as a `da × (len/da)` matrix, first factor least significant.
fn split(v: &[C64], da: usize, cutoff: f64) -> Result<SchmidtDecomposition> {
    let db = v.len() / da;
    let m = ComplexMatrix::from_fn(da, db, |a, b| v[a + da * b]);
    let s = svd(&m)?;
    let rank = s.rank(cutoff).max(1);
    Ok(SchmidtDecomposition {
        weights: s.s[..rank].to_vec(),
        left: (0..rank).map(|i| s.u.column(i)).collect(),
        right: (0..rank).map(|i| s.vdag.row(i).to_vec()).collect(),
        rank,
        tolerance: cutoff,
    })
}

fn check_state(s: &PureState, p: &PartitionSpec) -> Result<()> {
    if s.n() != p.n() {
        return invalid(format!("state has {} qubits but the partition covers {}", s.n(), p.n()));
    }
    Ok(())
}

/// Schmidt decomposition across a two-party cut; left vectors live on party 0.
pub fn schmidt_decompose(s: &PureState, cut: &PartitionSpec) -> Result<SchmidtDecomposition> {
    check_state(s, cut)?;
    cut.require_parties(2)?;
    let pm = to_party_major(s.amplitudes(), cut);
    split(&pm, 1 << cut.party(0).len(), TOLERANCES.rank_cutoff)
}

/// Entropy of entanglement in bits.
pub fn entanglement_entropy(s: &PureState, cut: &PartitionSpec) -> Result<f64> {
    let d = schmidt_decompose(s, cut)?;
    Ok(d
        .weights
        .iter()
        .map(|w| w * w)
        .filter(|&l| l > 0.0)
        .map(|l| -l * l.log2())
        .sum())
}

/// Branch waiting for the next level: parent link and party-major amplitudes.
type Pending = (Option<(usize, usize)>, Vec<C64>);

/// Cut party 0 | rest, then party 1 | rest inside each term, and so on.
pub fn iterated_decompose(s: &PureState, p: &PartitionSpec) -> Result<IteratedDecomposition> {
    check_state(s, p)?;
    if p.m() < 2 {
        return invalid("iterated decomposition needs at least two parties");
    }
    let pm = to_party_major(s.amplitudes(), p);
    let mut levels: Vec<Vec<Branch>> = Vec::new();
    let mut frontier: Vec<Pending> = vec![(None, pm)];
    for j in 0..p.m() - 1 {
        let da = 1 << p.party(j).len();
        let mut level = Vec::new();
        let mut next = Vec::new();
        for (parent, v) in frontier {
            let d = split(&v, da, TOLERANCES.rank_cutoff)?;
            let b = level.len();
            for (t, r) in d.right.iter().enumerate() {
                next.push((Some((b, t)), r.clone()));
            }
            level.push(Branch { parent, decomposition: d });
        }
        levels.push(level);
        frontier = next;
    }
    Ok(IteratedDecomposition { levels })
}

/// Factor `v` (party-major over `dims`) into one vector per party if it is a
/// product state; the last factor carries the norm and phase.
fn factor_product(v: &[C64], dims: &[usize]) -> std::result::Result<Vec<Vec<C64>>, usize> {
    let mut factors = Vec::with_capacity(dims.len());
    let mut rest = v.to_vec();
    for (j, &d) in dims.iter().enumerate().take(dims.len() - 1) {
        let sd = split(&rest, d, 0.0).map_err(|_| j)?;
        if sd.weights.len() > 1 && sd.weights[1] > TOLERANCES.orthonormality {
            return Err(j);
        }
        factors.push(sd.left[0].clone());
        rest = sd.right[0].iter().map(|x| x * sd.weights[0]).collect();
    }
    factors.push(rest);
    Ok(factors)
}

/// Rotate a degenerate block so the party-1 factors become distinguishable.
/// Returns `None` when the probe spectrum is itself degenerate.
fn resolve_block(
    lefts: &mut [Vec<C64>],
    rights: &mut [Vec<C64>],
    d1: usize,
    seed: u64,
) -> Result<bool> {
    let k = rights.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let a = crate::linalg::random_unitary(d1, &mut rng);
    let spectrum: Vec<C64> = (0..d1).map(|i| C64::new(i as f64 + 1.0, 0.0)).collect();
    let h = a.matmul(&ComplexMatrix::from_diagonal(&spectrum)).matmul(&a.adjoint());
    let apply_h = |r: &[C64]| -> Vec<C64> {
        let mut out = vec![ZERO; r.len()];
        for (base, chunk) in r.chunks(d1).enumerate() {
            let hv = h.mul_vec(chunk);
            out[base * d1..(base + 1) * d1].copy_from_slice(&hv);
        }
        out
    };
    let hr: Vec<Vec<C64>> = rights.iter().map(|r| apply_h(r)).collect();
    let g = ComplexMatrix::from_fn(k, k, |i, j| inner(&rights[i], &hr[j]));
    let (vals, v) = eigh(&g)?;
    if vals.windows(2).any(|w| (w[1] - w[0]).abs() < 1e-6) {
        return Ok(false);
    }
    let new_r: Vec<Vec<C64>> = (0..k)
        .map(|c| {
            let mut acc = vec![ZERO; rights[0].len()];
            for l in 0..k {
                for (x, y) in acc.iter_mut().zip(&rights[l]) {
                    *x += v[(l, c)] * y;
                }
            }
            acc
        })
        .collect();
    let new_l: Vec<Vec<C64>> = (0..k)
        .map(|c| {
            let mut acc = vec![ZERO; lefts[0].len()];
            for l in 0..k {
                for (x, y) in acc.iter_mut().zip(&lefts[l]) {
                    *x += v[(l, c)].conj() * y;
                }
            }
            acc
        })
        .collect();
    rights.clone_from_slice(&new_r);
    lefts.clone_from_slice(&new_l);
    Ok(true)
}

const PROBE_SEEDS: u64 = 4;
const DEGENERACY_GAP: f64 = 1e-8;

/// Decide whether `s` is Schmidt decomposable across all parties of `p`.
pub fn is_schmidt_decomposable(s: &PureState, p: &PartitionSpec) -> Result<Decomposability> {
    check_state(s, p)?;
    if p.m() < 2 {
        return invalid("decomposability needs at least two parties");
    }
    let dims: Vec<usize> = p.parties().iter().map(|q| 1usize << q.len()).collect();
    let pm = to_party_major(s.amplitudes(), p);
    let top = split(&pm, dims[0], TOLERANCES.rank_cutoff)?;
    let r = top.rank;
    if p.m() == 2 {
        return Ok(Decomposability::Yes(SchmidtDecomposableForm {
            weights: top.weights,
            bases: vec![top.left, top.right],
        }));
    }
    let mut lefts = top.left;
    let mut rights = top.right;
    let w = &top.weights;
    let mut start = 0;
    while start < r {
        let mut end = start + 1;
        while end < r && (w[start] - w[end]).abs() <= DEGENERACY_GAP {
            end += 1;
        }
        if end - start > 1 {
            let mut resolved = false;
            for seed in 0..PROBE_SEEDS {
                let (mut bl, mut br) = (lefts[start..end].to_vec(), rights[start..end].to_vec());
                if resolve_block(&mut bl, &mut br, dims[1], seed)? {
                    lefts[start..end].clone_from_slice(&bl);
                    rights[start..end].clone_from_slice(&br);
                    resolved = true;
                    break;
                }
            }
            if !resolved {
                return Ok(Decomposability::Indeterminate(format!(
                    "weights {start}..{end} are degenerate and the probe could not separate them"
                )));
            }
        }
        start = end;
    }
    let mut bases: Vec<Vec<Vec<C64>>> = vec![lefts];
    bases.extend((1..p.m()).map(|_| Vec::with_capacity(r)));
    for (i, rv) in rights.iter().enumerate() {
        match factor_product(rv, &dims[1..]) {
            Ok(fs) => {
                for (j, f) in fs.into_iter().enumerate() {
                    bases[j + 1].push(f);
                }
            }
            Err(j) => {
                return Ok(Decomposability::No(format!(
                    "term {i} is entangled between party {} and the parties after it",
                    j + 1
                )))
            }
        }
    }
    for (j, family) in bases.iter().enumerate() {
        for a in 0..r {
            for b in 0..=a {
                let ip = inner(&family[a], &family[b]);
                let want = if a == b { 1.0 } else { 0.0 };
                if (ip - C64::new(want, 0.0)).norm() > TOLERANCES.orthonormality {
                    return Ok(Decomposability::No(format!(
                        "party {j} vectors for terms {b} and {a} are not orthonormal"
                    )));
                }
            }
        }
    }
    let form = SchmidtDecomposableForm { weights: top.weights, bases };
    let rebuilt = form.to_state(p)?;
    if rebuilt.max_abs_diff(s) > 1e-8 {
        return Ok(Decomposability::No("reconstruction from the per-party form does not match".into()));
    }
    Ok(Decomposability::Yes(form))
}

/// Local unitary on party `side` mapping its Schmidt vectors to the lowest
/// basis states, plus the transformed state.
pub fn compress_support(s: &PureState, cut: &PartitionSpec, side: usize) -> Result<(Gate, PureState)> {
    if side > 1 {
        return invalid(format!("side must be 0 or 1, got {side}"));
    }
    let d = schmidt_decompose(s, cut)?;
    let vecs = if side == 0 { &d.left } else { &d.right };
    let dim = 1 << cut.party(side).len();
    let w = complete_basis(vecs, dim)?.adjoint();
    let gate = Gate::LocalBlock { party: side, qubits: cut.party(side).to_vec(), matrix: w };
    let mut amps = s.amplitudes().to_vec();
    crate::circuit::apply_gate(&mut amps, &gate);
    Ok((gate, PureState::normalized(s.n(), amps)?))
}

/// Number of qubits needed to hold `rank` basis states.
pub fn active_qubits(rank: usize) -> usize {
    if rank <= 1 {
        0
    } else {
        (usize::BITS - (rank - 1).leading_zeros()) as usize
    }
}
