//! State preparation engines and the named-state library.
//!
//! Every engine returns a circuit that maps `|0…0⟩` to the target (up to
//! global phase) together with a [`SynthesisReport`] whose straddling count is
//! taken from the lowered, fused circuit.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::circuit::{apply_circuit, apply_gate, Axis, Circuit, Gate, PartitionSpec, PureState};
use crate::config::TOLERANCES;
use crate::error::{invalid, Error, Result};
use crate::linalg::{complete_basis, random_complex_vector, random_unitary, C64, ONE, ZERO};
use crate::report::{measured_count, SynthesisReport};
use crate::schmidt::{
    active_qubits, compress_support, is_schmidt_decomposable, schmidt_decompose, Decomposability,
    SchmidtDecomposableForm,
};

pub use crate::report::QuotedBound;

/// Named states. Random states draw complex Gaussian amplitudes from
/// `ChaCha8Rng::seed_from_u64(seed)` and normalize.
#[derive(Debug, Clone, PartialEq)]
pub enum LibraryState {
    Ghz { n: usize },
    W { n: usize },
    /// Product of seeded random single-qubit states.
    Product { n: usize, seed: u64 },
    Random { n: usize, seed: u64 },
    /// `Σ_i w_i |a_i⟩|b_i⟩` across a two-party cut with exactly `rank` terms.
    RandomRank { cut: PartitionSpec, rank: usize, seed: u64 },
    /// `Σ_i w_i ⊗_j |ψ_j^i⟩` with orthonormal per-party families.
    RandomDecomposable { partition: PartitionSpec, rank: usize, seed: u64 },
}

impl std::str::FromStr for LibraryState {
    type Err = Error;

    /// `ghz:N`, `w:N`, `product:N[:SEED]`, `random:N[:SEED]`,
    /// `random-rank:PARTITION:RANK[:SEED]`, `random-decomposable:PARTITION:RANK[:SEED]`.
    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        let num = |i: usize, what: &str| -> Result<u64> {
            let t = parts.get(i).ok_or_else(|| Error::InvalidInput(format!("state spec {s:?} is missing {what}")))?;
            t.parse().map_err(|_| Error::InvalidInput(format!("bad {what} {t:?} in state spec")))
        };
        let seed = |i: usize| if parts.len() > i { num(i, "seed") } else { Ok(0) };
        let max_len = match parts[0] {
            "ghz" | "w" => 2,
            "product" | "random" => 3,
            "random-rank" | "random-decomposable" => 4,
            other => return invalid(format!("unknown library state {other:?}")),
        };
        if parts.len() > max_len {
            return invalid(format!("too many fields in state spec {s:?}"));
        }
        Ok(match parts[0] {
            "ghz" => LibraryState::Ghz { n: num(1, "qubit count")? as usize },
            "w" => LibraryState::W { n: num(1, "qubit count")? as usize },
            "product" => LibraryState::Product { n: num(1, "qubit count")? as usize, seed: seed(2)? },
            "random" => LibraryState::Random { n: num(1, "qubit count")? as usize, seed: seed(2)? },
            kind => {
                let partition: PartitionSpec =
                    parts.get(1).ok_or_else(|| Error::InvalidInput("state spec is missing the partition".into()))?.parse()?;
                let rank = num(2, "rank")? as usize;
                if kind == "random-rank" {
                    LibraryState::RandomRank { cut: partition, rank, seed: seed(3)? }
                } else {
                    LibraryState::RandomDecomposable { partition, rank, seed: seed(3)? }
                }
            }
        })
    }
}

fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > 24 {
        return invalid(format!("qubit count must be in 1..=24, got {n}"));
    }
    Ok(())
}

fn random_weights(rank: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..rank).map(|_| rng.random_range(0.2..1.0)).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    let s = w.iter().map(|x| x * x).sum::<f64>().sqrt();
    w.iter().map(|x| x / s).collect()
}

pub fn state_library(spec: &LibraryState) -> Result<PureState> {
    match spec {
        LibraryState::Ghz { n } => {
            check_n(*n)?;
            let mut amps = vec![ZERO; 1 << n];
            let h = C64::new(0.5f64.sqrt(), 0.0);
            amps[0] = h;
            amps[(1 << n) - 1] = h;
            PureState::new(*n, amps)
        }
        LibraryState::W { n } => {
            check_n(*n)?;
            let mut amps = vec![ZERO; 1 << n];
            let a = C64::new(1.0 / (*n as f64).sqrt(), 0.0);
            for q in 0..*n {
                amps[1 << q] = a;
            }
            PureState::new(*n, amps)
        }
        LibraryState::Product { n, seed } => {
            check_n(*n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            let mut amps = vec![ONE];
            for _ in 0..*n {
                let f = random_complex_vector(2, &mut rng);
                amps = f.iter().flat_map(|fj| amps.iter().map(move |a| a * fj)).collect();
            }
            PureState::normalized(*n, amps)
        }
        LibraryState::Random { n, seed } => {
            check_n(*n)?;
            let mut rng = ChaCha8Rng::seed_from_u64(*seed);
            PureState::normalized(*n, random_complex_vector(1 << n, &mut rng))
        }
        LibraryState::RandomRank { cut, rank, seed } => {
            cut.require_parties(2)?;
            let form = random_form(cut, *rank, *seed)?;
            form.to_state(cut)
        }
        LibraryState::RandomDecomposable { partition, rank, seed } => {
            if partition.m() < 2 {
                return invalid("random-decomposable needs at least two parties");
            }
            random_form(partition, *rank, *seed)?.to_state(partition)
        }
    }
}

fn random_form(p: &PartitionSpec, rank: usize, seed: u64) -> Result<SchmidtDecomposableForm> {
    check_n(p.n())?;
    let kmin = p.sorted_sizes()[0];
    if rank == 0 || rank > 1 << kmin {
        return invalid(format!("rank {rank} is outside 1..={} for the smallest party of {kmin} qubits", 1usize << kmin));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let weights = random_weights(rank, &mut rng);
    let bases = p
        .parties()
        .iter()
        .map(|q| {
            let u = random_unitary(1 << q.len(), &mut rng);
            (0..rank).map(|i| u.column(i)).collect()
        })
        .collect();
    Ok(SchmidtDecomposableForm { weights, bases })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrepMethod {
    Auto,
    SchmidtPath,
    MuxDisentangle,
    Multipartite,
    SchmidtDecomposable,
}

impl std::str::FromStr for PrepMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "auto" => Self::Auto,
            "schmidt-path" => Self::SchmidtPath,
            "mux-disentangle" => Self::MuxDisentangle,
            "multipartite" => Self::Multipartite,
            "schmidt-decomposable" => Self::SchmidtDecomposable,
            other => return invalid(format!("unknown preparation method {other:?}")),
        })
    }
}

/// Dispatch to an engine. `Auto` picks the decomposable path when the state
/// qualifies, the Schmidt path for two parties, and the multipartite path otherwise.
pub fn prepare(target: &PureState, p: &PartitionSpec, method: PrepMethod) -> Result<(Circuit, SynthesisReport)> {
    match method {
        PrepMethod::SchmidtPath => prep_schmidt_path(target, p),
        PrepMethod::MuxDisentangle => prep_mux_disentangle(target, p),
        PrepMethod::Multipartite => prep_multipartite(target, p),
        PrepMethod::SchmidtDecomposable => prep_schmidt_decomposable(&DecomposableInput::State(target.clone()), p),
        PrepMethod::Auto => {
            if p.m() >= 3 {
                if let Decomposability::Yes(form) = is_schmidt_decomposable(target, p)? {
                    return prep_schmidt_decomposable(&DecomposableInput::Form(form), p);
                }
                return prep_multipartite(target, p);
            }
            prep_schmidt_path(target, p)
        }
    }
}

fn check_target(target: &PureState, p: &PartitionSpec) -> Result<()> {
    if target.n() != p.n() {
        return invalid(format!("state has {} qubits but the partition covers {}", target.n(), p.n()));
    }
    Ok(())
}

fn finish(
    method: &str,
    c: Circuit,
    target: &PureState,
    p: &PartitionSpec,
    predicted: usize,
) -> Result<(Circuit, SynthesisReport)> {
    let prepared = apply_circuit(&c, &PureState::zero(p.n()))?;
    let fidelity = prepared.fidelity(target);
    if fidelity < 1.0 - TOLERANCES.fidelity {
        return Err(Error::Verification(format!("{method}: prepared state has fidelity {fidelity:.12} with the target")));
    }
    let measured = measured_count(&c, p)?;
    Ok((c, SynthesisReport::new(method, measured, predicted, fidelity)))
}

/// Local unitary on `qubits` whose first column is `v`.
fn local_prep(party: usize, qubits: &[usize], v: &[C64]) -> Result<Option<Gate>> {
    let m = complete_basis(&[v.to_vec()], 1 << qubits.len())?;
    if m.is_identity_up_to_phase(1e-12) {
        return Ok(None);
    }
    Ok(Some(Gate::LocalBlock { party, qubits: qubits.to_vec(), matrix: m }))
}

/// Local unitary on `qubits` with the given orthonormal leading columns.
fn local_basis(party: usize, qubits: &[usize], cols: &[Vec<C64>]) -> Result<Option<Gate>> {
    let m = complete_basis(cols, 1 << qubits.len())?;
    if m.max_abs_diff(&crate::linalg::ComplexMatrix::identity(m.rows())) <= 1e-12 {
        return Ok(None);
    }
    Ok(Some(Gate::LocalBlock { party, qubits: qubits.to_vec(), matrix: m }))
}

/// Parties of a two-party cut as (smaller, larger); ties keep the listed order.
fn orient(p: &PartitionSpec) -> Result<(usize, usize)> {
    p.require_parties(2)?;
    Ok(if p.party(1).len() < p.party(0).len() { (1, 0) } else { (0, 1) })
}

fn weights_register(weights: &[f64], dim: usize) -> Vec<C64> {
    let mut v = vec![ZERO; dim];
    for (i, &w) in weights.iter().enumerate() {
        v[i] = C64::new(w, 0.0);
    }
    v
}

/// Schmidt path: prepare the weights on `⌈log₂ r⌉` qubits of the smaller
/// party, copy them across with transversal Cnots, rotate each side into its
/// Schmidt basis.
pub fn prep_schmidt_path(target: &PureState, p: &PartitionSpec) -> Result<(Circuit, SynthesisReport)> {
    check_target(target, p)?;
    let (ja, jb) = orient(p)?;
    let (qa, qb) = (p.party(ja).to_vec(), p.party(jb).to_vec());
    let oriented = PartitionSpec::new(vec![qa.clone(), qb.clone()])?;
    let d = schmidt_decompose(target, &oriented)?;
    let ell = active_qubits(d.rank);
    let mut c = Circuit::new(p.n());
    c.extend(local_prep(ja, &qa, &weights_register(&d.weights, 1 << qa.len()))?);
    for j in 0..ell {
        c.push(Gate::cnot(qa[j], qb[j]));
    }
    c.extend(local_basis(ja, &qa, &d.left)?);
    c.extend(local_basis(jb, &qb, &d.right)?);
    let (c, report) = finish("schmidt-path", c, target, p, ell)?;
    let report = report
        .with_bound(d.rank as f64, "rank lower-bound claim (report-only)", false)
        .with_extra("schmidt_rank", json!(d.rank));
    Ok((c, report))
}

/// Compress the Schmidt support of `side` of `cut` onto its lowest qubits.
/// Returns the gate (if not the identity) and the Schmidt rank.
fn compress(
    amps: &mut Vec<C64>,
    n: usize,
    cut: &PartitionSpec,
    side: usize,
    party_in_p: usize,
) -> Result<(Option<Gate>, usize)> {
    let s = PureState::normalized(n, amps.clone())?;
    let rank = schmidt_decompose(&s, cut)?.rank;
    let (g, out) = compress_support(&s, cut, side)?;
    let Gate::LocalBlock { qubits, matrix, .. } = g else { unreachable!("compress returns a local block") };
    if matrix.max_abs_diff(&crate::linalg::ComplexMatrix::identity(matrix.rows())) <= 1e-12 {
        return Ok((None, rank));
    }
    *amps = out.into_amplitudes();
    Ok((Some(Gate::LocalBlock { party: party_in_p, qubits, matrix }), rank))
}

const ZERO_AMPLITUDE: f64 = 1e-12;

/// Angles of the z and y multiplexors that rotate `t` to `|0⟩` for every
/// assignment of `controls` (first control most significant), with all other
/// qubits at 0. `None` marks an angle the amplitudes leave unconstrained.
fn disentangle_angles(amps: &[C64], t: usize, controls: &[usize]) -> Vec<[Option<f64>; 2]> {
    let k = controls.len();
    (0..1usize << k)
        .map(|b| {
            let idx = (0..k).fold(0, |acc, i| acc | ((b >> (k - 1 - i) & 1) << controls[i]));
            let (r0, r1) = (amps[idx], amps[idx | 1 << t]);
            let (m0, m1) = (r0.norm(), r1.norm());
            let z = (m0 > ZERO_AMPLITUDE && m1 > ZERO_AMPLITUDE).then(|| r0.arg() - r1.arg());
            let y = (m0 > ZERO_AMPLITUDE || m1 > ZERO_AMPLITUDE).then(|| -2.0 * m1.atan2(m0));
            [z, y]
        })
        .collect()
}

fn merge_angle(a: Option<f64>, b: Option<f64>) -> Option<Option<f64>> {
    match (a, b) {
        (Some(x), Some(y)) if (x - y).abs() > 1e-12 => None,
        (Some(x), _) | (_, Some(x)) => Some(Some(x)),
        (None, None) => Some(None),
    }
}

/// Drop every control the angle table does not depend on.
fn prune_controls(mut controls: Vec<usize>, mut table: Vec<[Option<f64>; 2]>) -> (Vec<usize>, Vec<[Option<f64>; 2]>) {
    let mut i = 0;
    while i < controls.len() {
        let k = controls.len();
        let bit = 1usize << (k - 1 - i);
        let merged: Option<Vec<[Option<f64>; 2]>> = (0..1usize << k)
            .filter(|b| b & bit == 0)
            .map(|b| Some([merge_angle(table[b][0], table[b | bit][0])?, merge_angle(table[b][1], table[b | bit][1])?]))
            .collect();
        match merged {
            Some(t) => {
                table = t;
                controls.remove(i);
            }
            None => i += 1,
        }
    }
    (controls, table)
}

/// Straddling cost of a z/y multiplexor pair after lowering and fusion.
fn pair_cost(remote: usize, local: usize) -> usize {
    match (remote, local) {
        (0, _) => 0,
        (1, 0) => 1,
        (1, _) => 4,
        (r, _) => 2 << r,
    }
}

/// Disentangle `t` with a z then y multiplexor controlled by the subset of
/// `controls` the amplitudes depend on. Returns the controls kept.
fn disentangle_step(d: &mut Circuit, amps: &mut [C64], t: usize, controls: &[usize]) -> Vec<usize> {
    let table = disentangle_angles(amps, t, controls);
    let (kept, table) = prune_controls(controls.to_vec(), table);
    for (axis, col) in [(Axis::Z, 0), (Axis::Y, 1)] {
        let angles: Vec<f64> = table.iter().map(|row| row[col].unwrap_or(0.0)).collect();
        if kept.is_empty() && angles[0] == 0.0 {
            continue;
        }
        let g = Gate::MuxRot { axis, target: t, controls: kept.clone(), angles };
        apply_gate(amps, &g);
        d.push(g);
    }
    kept
}

fn split_counts(p: &PartitionSpec, t: usize, controls: &[usize]) -> (usize, usize) {
    let remote = controls.iter().filter(|&&q| !p.same_party(q, t)).count();
    (remote, controls.len() - remote)
}

/// Multiplexor disentangling across a bipartition: compress the larger side
/// onto `k₁` qubits, zero its highest active qubit with two multiplexors
/// controlled by every other active qubit, re-compress the smaller side,
/// repeat, then invert.
pub fn prep_mux_disentangle(target: &PureState, p: &PartitionSpec) -> Result<(Circuit, SynthesisReport)> {
    check_target(target, p)?;
    let (ja, jb) = orient(p)?;
    let (qa, qb) = (p.party(ja).to_vec(), p.party(jb).to_vec());
    let oriented = PartitionSpec::new(vec![qa.clone(), qb.clone()])?;
    let n = p.n();
    let mut amps = target.amplitudes().to_vec();
    let mut d = Circuit::new(n);
    let mut predicted = 0;
    let (gb, rank) = compress(&mut amps, n, &oriented, 1, jb)?;
    d.extend(gb);
    let mut active_a = qa.len();
    let mut active_b = settle(&amps, &qb, active_qubits(rank));
    while active_b > 0 {
        let t = qb[active_b - 1];
        let mut controls: Vec<usize> = qa[..active_a].to_vec();
        controls.extend(&qb[..active_b - 1]);
        let kept = disentangle_step(&mut d, &mut amps, t, &controls);
        let (remote, local) = split_counts(p, t, &kept);
        predicted += pair_cost(remote, local);
        active_b -= 1;
        let (ga, rank) = compress(&mut amps, n, &oriented, 0, ja)?;
        d.extend(ga);
        active_a = settle(&amps, &qa, active_qubits(rank));
    }
    let phi: Vec<C64> = (0..1usize << qa.len()).map(|l| amps[oriented.compose_index(&[l, 0])]).collect();
    let mut c = Circuit::new(n);
    c.extend(local_prep(ja, &qa, &normalize(phi))?);
    c.append(d.inverse());
    let k1 = qa.len();
    let (c, report) = finish("mux-disentangle", c, target, p, predicted)?;
    let report = report
        .with_bound(((1u64 << k1) - 2) as f64, "published constant 2^k1 - 2 (report-only)", false)
        .with_extra("construction_bound", json!(1u64 << (k1 + 2)));
    Ok((c, report))
}

fn normalize(v: Vec<C64>) -> Vec<C64> {
    let nv = crate::linalg::norm(&v);
    v.into_iter().map(|z| z / nv).collect()
}

/// Active qubit count of a compressed side: `active` unless a qubit above it
/// still carries amplitude, in which case the whole side.
fn settle(amps: &[C64], side: &[usize], active: usize) -> usize {
    if active < side.len() && is_active(amps, side[active..].iter().copied()) {
        side.len()
    } else {
        active
    }
}

/// True if any amplitude with one of `qubits` set is nonzero.
fn is_active(amps: &[C64], qubits: impl Iterator<Item = usize>) -> bool {
    let mask = qubits.fold(0usize, |m, q| m | 1 << q);
    amps.iter().enumerate().any(|(i, a)| i & mask != 0 && a.norm() > ZERO_AMPLITUDE)
}

/// Multipartite disentangling: keep the largest party compressed against the
/// rest and zero every other qubit with multiplexor pairs, then invert.
/// Non-largest parties are processed by size descending, qubits descending.
pub fn prep_multipartite(target: &PureState, p: &PartitionSpec) -> Result<(Circuit, SynthesisReport)> {
    check_target(target, p)?;
    if p.m() < 2 {
        return invalid("multipartite preparation needs at least two parties");
    }
    let n = p.n();
    let big = (0..p.m()).rev().max_by_key(|&j| p.party(j).len()).expect("nonempty");
    let qm = p.party(big).to_vec();
    let rest: Vec<usize> = (0..n).filter(|&q| p.party_of(q) != big).collect();
    let cut = PartitionSpec::new(vec![rest, qm.clone()])?;
    let mut others: Vec<usize> = (0..p.m()).filter(|&j| j != big).collect();
    others.sort_by_key(|&j| std::cmp::Reverse(p.party(j).len()));
    let order: Vec<usize> = others.iter().flat_map(|&j| p.party(j).iter().rev().copied().collect::<Vec<_>>()).collect();

    let mut amps = target.amplitudes().to_vec();
    let mut d = Circuit::new(n);
    let mut predicted = 0;
    let mut remaining: Vec<usize> = order.clone();
    for &t in &order {
        let (g, rank) = compress(&mut amps, n, &cut, 1, big)?;
        d.extend(g);
        remaining.retain(|&q| q != t);
        let active_m = settle(&amps, &qm, active_qubits(rank));
        let mut controls: Vec<usize> = remaining.clone();
        controls.extend(&qm[..active_m]);
        controls.sort_unstable();
        let kept = disentangle_step(&mut d, &mut amps, t, &controls);
        let (remote, local) = split_counts(p, t, &kept);
        predicted += pair_cost(remote, local);
    }
    let phi: Vec<C64> = (0..1usize << qm.len()).map(|l| amps[cut.compose_index(&[0, l])]).collect();
    let mut c = Circuit::new(n);
    c.extend(local_prep(big, &qm, &normalize(phi))?);
    c.append(d.inverse());
    let scale = 1u64 << (n - qm.len());
    let (c, report) = finish("multipartite", c, target, p, predicted)?;
    let report = report
        .with_bound(scale as f64, "2^(n - k_m) scaling (report-only)", false)
        .with_extra("construction_bound", json!(8 * scale));
    Ok((c, report))
}

#[derive(Debug, Clone)]
pub enum DecomposableInput {
    Form(SchmidtDecomposableForm),
    State(PureState),
}

/// Register in party 0, transversal Cnot copies into every other party,
/// per-party basis rotations.
pub fn prep_schmidt_decomposable(input: &DecomposableInput, p: &PartitionSpec) -> Result<(Circuit, SynthesisReport)> {
    if p.m() < 2 {
        return invalid("decomposable preparation needs at least two parties");
    }
    let form = match input {
        DecomposableInput::Form(f) => f.clone(),
        DecomposableInput::State(s) => {
            check_target(s, p)?;
            match is_schmidt_decomposable(s, p)? {
                Decomposability::Yes(f) => f,
                Decomposability::No(why) => return invalid(format!("state is not Schmidt decomposable: {why}")),
                Decomposability::Indeterminate(why) => {
                    return invalid(format!("decomposability is indeterminate, refusing to prepare: {why}"))
                }
            }
        }
    };
    if form.bases.len() != p.m() {
        return invalid("form and partition disagree on the party count");
    }
    let target = form.to_state(p)?;
    let r = form.rank();
    let ell = active_qubits(r);
    let mut c = Circuit::new(p.n());
    let q0 = p.party(0);
    c.extend(local_prep(0, q0, &weights_register(&form.weights, 1 << q0.len()))?);
    for j in 1..p.m() {
        let qj = p.party(j);
        if qj.len() < ell {
            return invalid(format!("party {j} has {} qubits, too few for rank {r}", qj.len()));
        }
        for b in 0..ell {
            c.push(Gate::cnot(q0[b], qj[b]));
        }
    }
    for (j, family) in form.bases.iter().enumerate() {
        c.extend(local_basis(j, p.party(j), family)?);
    }
    let (c, report) = finish("schmidt-decomposable", c, &target, p, (p.m() - 1) * ell)?;
    let report = report
        .with_bound((p.m() * r) as f64, "m * r_S scaling (report-only)", false)
        .with_extra("schmidt_rank", json!(r));
    Ok((c, report))
}
