//! Acceptance suite. Runs every criterion, prints one PASS/FAIL line each and
//! exits nonzero if any failed.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use straddle::certifier::{certificate_count, certify_min_straddle, Verdict};
use straddle::circuit::{
    circuit_unitary, count_straddling, fuse_straddling, lower, Axis, Circuit, Gate, PartitionSpec, PureState,
};
use straddle::linalg::{random_unitary, C64, ZERO};
use straddle::qsd::{cost_model_qsd, param_lower_bound, synth_unitary_qsd, QsdConfig, SplitOrder};
use straddle::schmidt::{entanglement_entropy, is_schmidt_decomposable, Decomposability};
use straddle::stateprep::{
    prep_multipartite, prep_mux_disentangle, prep_schmidt_decomposable, prep_schmidt_path, state_library,
    DecomposableInput, LibraryState,
};

const PREP_FIDELITY: f64 = 1.0 - 1e-8;
const CERT_FIDELITY: f64 = 1.0 - 1e-6;
const NOT_FOUND_CEILING: f64 = 1.0 - 1e-4;
const QSD_DISTANCE: f64 = 1e-8;
const ORACLE_DISTANCE: f64 = 1e-10;
const ENTROPY_TOL: f64 = 1e-12;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn lib(spec: LibraryState) -> PureState {
    state_library(&spec).expect("library state")
}

/// Random split of `0..n` into parties of the given sizes.
fn random_partition(sizes: &[usize], rng: &mut ChaCha8Rng) -> PartitionSpec {
    let n: usize = sizes.iter().sum();
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    let mut parties = Vec::new();
    let mut at = 0;
    for &k in sizes {
        parties.push(qubits[at..at + k].to_vec());
        at += k;
    }
    PartitionSpec::new(parties).expect("valid partition")
}

fn ceil_log2(r: usize) -> usize {
    let mut l = 0;
    while 1usize << l < r {
        l += 1;
    }
    l
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let p3 = PartitionSpec::singletons(3);
    let ghz = lib(LibraryState::Ghz { n: 3 });
    let w = lib(LibraryState::W { n: 3 });

    let g2 = certify_min_straddle(&ghz, &p3, 2, 50, 7).map_err(|e| e.to_string())?;
    ensure(g2.verdict == Verdict::Achievable && g2.best_fidelity >= CERT_FIDELITY, || {
        format!("GHZ3 budget 2: {:?} fidelity {}", g2.verdict, g2.best_fidelity)
    })?;
    let gc = certificate_count(g2.circuit.as_ref().unwrap(), &p3).map_err(|e| e.to_string())?;
    ensure(gc == 2, || format!("GHZ3 certificate circuit has {gc} straddling gates"))?;
    let (_, rep) = prep_schmidt_decomposable(&DecomposableInput::State(ghz.clone()), &p3).map_err(|e| e.to_string())?;
    ensure(rep.straddling_total == 2, || format!("GHZ3 decomposable prep emitted {}", rep.straddling_total))?;

    let w3 = certify_min_straddle(&w, &p3, 3, 50, 7).map_err(|e| e.to_string())?;
    ensure(w3.verdict == Verdict::Achievable && w3.best_fidelity >= CERT_FIDELITY, || {
        format!("W3 budget 3: {:?} fidelity {}", w3.verdict, w3.best_fidelity)
    })?;
    let w2 = certify_min_straddle(&w, &p3, 2, 50, 7).map_err(|e| e.to_string())?;
    ensure(w2.verdict == Verdict::NotFound && w2.best_fidelity < NOT_FOUND_CEILING, || {
        format!("W3 budget 2: {:?} fidelity {}", w2.verdict, w2.best_fidelity)
    })?;
    ensure(w2.restarts_used >= 50, || format!("only {} restarts", w2.restarts_used))?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 600.0, || format!("runtime {secs:.1}s"))?;
    Ok(format!(
        "GHZ3 b=2 fid {:.10}, decomposable prep 2 gates; W3 b=3 fid {:.10}; W3 b=2 not_found best {:.6} over {} restarts; {secs:.1}s",
        g2.best_fidelity, w3.best_fidelity, w2.best_fidelity, w2.restarts_used
    ))
}

fn criterion_2() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut min_fid: f64 = 1.0;
    for i in 0..100u64 {
        let n = 2 + (i as usize % 9);
        let k = rng.random_range(1..n);
        let cut = random_partition(&[k, n - k], &mut rng);
        let kmin = k.min(n - k);
        // odd seeds: generic random state (full rank); even seeds: prescribed rank
        let (state, rank) = if i % 2 == 1 {
            (lib(LibraryState::Random { n, seed: i }), 1usize << kmin)
        } else {
            let rank = rng.random_range(1..=1usize << kmin);
            (lib(LibraryState::RandomRank { cut: cut.clone(), rank, seed: i }), rank)
        };
        let (_, rep) = prep_schmidt_path(&state, &cut).map_err(|e| format!("seed {i}: {e}"))?;
        min_fid = min_fid.min(rep.fidelity);
        ensure(rep.fidelity >= PREP_FIDELITY, || format!("seed {i}: fidelity {}", rep.fidelity))?;
        ensure(rep.straddling_total == ceil_log2(rank), || {
            format!("seed {i} cut {cut}: rank {rank} count {}", rep.straddling_total)
        })?;
    }
    let cut = PartitionSpec::singletons(2);
    let mut entropies = Vec::new();
    for eps in [0.1f64, 0.25, 0.4] {
        let mut amps = vec![ZERO; 4];
        amps[0] = C64::new((1.0 - eps).sqrt(), 0.0);
        amps[3] = C64::new(eps.sqrt(), 0.0);
        let s = PureState::new(2, amps).map_err(|e| e.to_string())?;
        let (_, rep) = prep_schmidt_path(&s, &cut).map_err(|e| e.to_string())?;
        ensure(rep.straddling_total == 1, || format!("eps {eps}: count {}", rep.straddling_total))?;
        let h = entanglement_entropy(&s, &cut).map_err(|e| e.to_string())?;
        let formula = (eps - 1.0) * (1.0 - eps).log2() - eps * eps.log2();
        ensure((h - formula).abs() <= ENTROPY_TOL, || format!("eps {eps}: entropy {h} vs {formula}"))?;
        entropies.push(h);
    }
    ensure(entropies.windows(2).all(|w| (w[1] - w[0]).abs() > 1e-3), || "entropy does not vary".into())?;
    Ok(format!(
        "100 states, count = ceil(log2 r) in all, min fidelity {min_fid:.12}; eps-family count 1, entropies {:.6} {:.6} {:.6} within {ENTROPY_TOL:e}",
        entropies[0], entropies[1], entropies[2]
    ))
}

fn criterion_3() -> Outcome {
    let mut max_ratio: f64 = 0.0;
    let mut min_fid: f64 = 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for k1 in 1..=5usize {
        for seed in 0..20u64 {
            let n = 2 * k1;
            let cut = random_partition(&[k1, k1], &mut rng);
            let s = lib(LibraryState::Random { n, seed: 1000 * k1 as u64 + seed });
            let (_, rep) = prep_mux_disentangle(&s, &cut).map_err(|e| format!("k1 {k1} seed {seed}: {e}"))?;
            ensure(rep.fidelity >= PREP_FIDELITY, || format!("k1 {k1} seed {seed}: fidelity {}", rep.fidelity))?;
            ensure(rep.straddling_total == rep.predicted, || {
                format!("k1 {k1} seed {seed}: measured {} predicted {}", rep.straddling_total, rep.predicted)
            })?;
            min_fid = min_fid.min(rep.fidelity);
            max_ratio = max_ratio.max(rep.straddling_total as f64 / (1u64 << k1) as f64);
        }
    }
    ensure(max_ratio <= 8.0, || format!("max ratio {max_ratio}"))?;
    Ok(format!("k1 = 1..5 x 20 seeds, measured = model, max count/2^k1 = {max_ratio:.4}, min fidelity {min_fid:.12}"))
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let shapes = [(1, 1), (1, 2), (1, 3), (2, 2), (1, 4), (2, 3), (1, 5), (2, 4), (3, 3)];
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_dist: f64 = 0.0;
    let mut covered = std::collections::BTreeSet::new();
    for i in 0..50usize {
        let (a, b) = shapes[i % shapes.len()];
        // alternate which side is listed first
        let sizes = if (i / shapes.len()) % 2 == 0 { [a, b] } else { [b, a] };
        let n = a + b;
        let p = random_partition(&sizes, &mut rng);
        let u = random_unitary(1 << n, &mut rng);
        let (_, rep) = synth_unitary_qsd(&u, &p, &QsdConfig::default()).map_err(|e| format!("unitary {i}: {e}"))?;
        let dist = rep.extras["operator_distance"].as_f64().unwrap();
        max_dist = max_dist.max(dist);
        ensure(dist <= QSD_DISTANCE, || format!("unitary {i}: distance {dist:e}"))?;
        let model = cost_model_qsd(sizes[0], sizes[1], &SplitOrder::SmallerFirst);
        ensure(rep.straddling_total == model, || {
            format!("unitary {i} {p}: measured {} model {model}", rep.straddling_total)
        })?;
        let lb = param_lower_bound(sizes[0] as u32, sizes[1] as u32);
        ensure(rep.straddling_total as u64 >= lb, || format!("unitary {i}: {} < bound {lb}", rep.straddling_total))?;
        covered.insert((a, b));
    }
    ensure(param_lower_bound(2, 2) == 5, || "param_lower_bound(2,2) != 5".into())?;
    let secs = start.elapsed().as_secs_f64();
    ensure(secs < 900.0, || format!("runtime {secs:.1}s"))?;
    Ok(format!(
        "50 unitaries over {} bipartition shapes, max distance {max_dist:.2e}, measured = model, >= lower bound; {secs:.1}s",
        covered.len()
    ))
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = String::new();
    let mut worst_ratio: f64 = 0.0;
    for sizes in [[1usize, 1, 2], [1, 2, 3], [2, 2, 2], [1, 1, 4]] {
        let n: usize = sizes.iter().sum();
        let km = *sizes.iter().max().unwrap();
        let bound = 8usize << (n - km);
        for seed in 0..10u64 {
            let p = random_partition(&sizes, &mut rng);
            let s = lib(LibraryState::Random { n, seed: 500 + seed });
            let (_, rep) = prep_multipartite(&s, &p).map_err(|e| format!("{p}: {e}"))?;
            ensure(rep.fidelity >= PREP_FIDELITY, || format!("{p}: fidelity {}", rep.fidelity))?;
            ensure(rep.straddling_total <= bound, || format!("{p}: {} > {bound}", rep.straddling_total))?;
            let ratio = rep.straddling_total as f64 / bound as f64;
            if ratio > worst_ratio {
                worst_ratio = ratio;
                worst = format!("{:?}: {} of {bound}", sizes, rep.straddling_total);
            }
        }
    }
    Ok(format!("40 runs within 8*2^(n-k_m), tightest {worst}"))
}

fn criterion_6() -> Outcome {
    for m in 3..=8 {
        let p = PartitionSpec::singletons(m);
        let s = lib(LibraryState::Ghz { n: m });
        let (_, rep) = prep_schmidt_decomposable(&DecomposableInput::State(s), &p).map_err(|e| e.to_string())?;
        ensure(rep.straddling_total == m - 1, || format!("GHZ{m}: {}", rep.straddling_total))?;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for seed in 0..5u64 {
        let p = random_partition(&[2, 2, 2, 2], &mut rng);
        let s = lib(LibraryState::RandomDecomposable { partition: p.clone(), rank: 4, seed });
        ensure(matches!(is_schmidt_decomposable(&s, &p), Ok(Decomposability::Yes(_))), || {
            format!("seed {seed}: detection did not say yes")
        })?;
        let (_, rep) = prep_schmidt_decomposable(&DecomposableInput::State(s), &p).map_err(|e| e.to_string())?;
        ensure(rep.straddling_total == 6, || format!("seed {seed}: {}", rep.straddling_total))?;
    }
    for m in 3..=6 {
        let p = PartitionSpec::singletons(m);
        let s = lib(LibraryState::Ghz { n: m });
        ensure(matches!(is_schmidt_decomposable(&s, &p), Ok(Decomposability::Yes(_))), || format!("GHZ{m} not yes"))?;
    }
    let w = lib(LibraryState::W { n: 3 });
    ensure(matches!(is_schmidt_decomposable(&w, &PartitionSpec::singletons(3)), Ok(Decomposability::No(_))), || {
        "W3 not no".into()
    })?;
    Ok("GHZ_m = m-1 for m = 3..8; (2,2,2,2) rank 4 = 6 over 5 seeds; detection yes on constructed states, no on W3".into())
}

fn random_macro_circuit(rng: &mut ChaCha8Rng) -> (Circuit, PartitionSpec) {
    let n = rng.random_range(2..=6);
    let m = rng.random_range(2..=n);
    let mut qubits: Vec<usize> = (0..n).collect();
    qubits.shuffle(rng);
    let mut parties: Vec<Vec<usize>> = vec![Vec::new(); m];
    for (i, &q) in qubits.iter().enumerate() {
        let j = if i < m { i } else { rng.random_range(0..m) };
        parties[j].push(q);
    }
    let p = PartitionSpec::new(parties).unwrap();
    let mut c = Circuit::new(n);
    for _ in 0..rng.random_range(4..12) {
        let g = match rng.random_range(0..5) {
            0 => {
                let q = rng.random_range(0..n);
                Gate::SingleQubit { qubit: q, matrix: random_unitary(2, rng) }
            }
            1 => {
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                Gate::cnot(a, b)
            }
            2 => {
                let a = rng.random_range(0..n);
                let b = (a + rng.random_range(1..n)) % n;
                Gate::TwoQubit { qubits: [a, b], matrix: random_unitary(4, rng) }
            }
            3 => {
                let j = rng.random_range(0..m);
                let qs = p.party(j).to_vec();
                Gate::LocalBlock { party: j, qubits: qs.clone(), matrix: random_unitary(1 << qs.len(), rng) }
            }
            _ => {
                let mut order: Vec<usize> = (0..n).collect();
                order.shuffle(rng);
                let k = rng.random_range(1..n);
                let controls = order[1..=k].to_vec();
                let angles = (0..1 << k).map(|_| rng.random_range(-3.0..3.0)).collect();
                let axis = if rng.random_bool(0.5) { Axis::Y } else { Axis::Z };
                Gate::MuxRot { axis, target: order[0], controls, angles }
            }
        };
        c.push(g);
    }
    (c, p)
}

fn criterion_7() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut max_dist: f64 = 0.0;
    let mut muxes = 0;
    for i in 0..200 {
        let (c, p) = random_macro_circuit(&mut rng);
        let u = circuit_unitary(&c).map_err(|e| e.to_string())?;
        let lowered = lower(&c, &p).map_err(|e| e.to_string())?;
        let fused = fuse_straddling(&lowered, &p);
        for (label, v) in [("lower", &lowered), ("fuse", &fused)] {
            let d = circuit_unitary(v).map_err(|e| e.to_string())?.distance_up_to_phase(&u);
            max_dist = max_dist.max(d);
            ensure(d <= ORACLE_DISTANCE, || format!("circuit {i}: {label} distance {d:e}"))?;
        }
        for g in c.gates() {
            if let Gate::MuxRot { target, controls, .. } = g {
                let remote = controls.iter().filter(|&&q| !p.same_party(q, *target)).count();
                if remote >= 2 {
                    let single = Circuit::from_gates(c.n(), vec![g.clone()]);
                    let count = count_straddling(&lower(&single, &p).unwrap(), &p).unwrap().total;
                    ensure(count == 1 << remote, || format!("circuit {i}: mux with {remote} remote controls gave {count}"))?;
                    muxes += 1;
                }
            }
        }
    }
    Ok(format!("200 circuits, max distance {max_dist:.2e} (tol {ORACLE_DISTANCE:e}); {muxes} multiplexors with p >= 2 all cost 2^p"))
}

fn run_cli(args: &[&str]) -> Result<i32, String> {
    let out = Command::new(env!("CARGO_BIN_EXE_straddle")).args(args).output().map_err(|e| e.to_string())?;
    Ok(out.status.code().unwrap_or(-1))
}

fn criterion_8() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let f = |name: &str| dir.path().join(name).to_string_lossy().into_owned();
    let runs: Vec<(Vec<String>, i32)> = vec![
        (
            vec!["prep", "--state", "lib:random:6:11", "--partition", "0,1|2,3|4,5", "--method", "multipartite"]
                .into_iter()
                .map(String::from)
                .collect(),
            0,
        ),
        (
            vec!["prep", "--state", "lib:random:6:12", "--partition", "0,2,4|1,3,5", "--method", "mux-disentangle"]
                .into_iter()
                .map(String::from)
                .collect(),
            0,
        ),
        (
            vec!["certify", "--state", "lib:ghz:3", "--partition", "0|1|2", "--budget", "2", "--restarts", "16", "--seed", "7"]
                .into_iter()
                .map(String::from)
                .collect(),
            0,
        ),
    ];
    let mut compared = 0;
    for (k, (args, expect)) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for rep in 0..2 {
            let (sqc, json) = (f(&format!("c{k}_{rep}.sqc")), f(&format!("r{k}_{rep}.json")));
            let mut full: Vec<&str> = args.iter().map(String::as_str).collect();
            full.extend(["--out", &sqc, "--report", &json]);
            let code = run_cli(&full)?;
            ensure(code == *expect, || format!("{args:?}: exit {code}"))?;
            outputs.push((std::fs::read(&sqc).map_err(|e| e.to_string())?, std::fs::read(&json).map_err(|e| e.to_string())?));
        }
        ensure(outputs[0] == outputs[1], || format!("{args:?}: outputs differ between runs"))?;
        compared += 2;
    }
    // synth needs a unitary file
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let u = random_unitary(8, &mut rng);
    let upath = f("u.json");
    std::fs::write(&upath, straddle::report::canonical_json(&straddle::cli::unitary_json(&u))).map_err(|e| e.to_string())?;
    let mut outs = Vec::new();
    for rep in 0..2 {
        let (sqc, json) = (f(&format!("s_{rep}.sqc")), f(&format!("s_{rep}.json")));
        let code = run_cli(&["synth", "--unitary", &upath, "--partition", "0|1,2", "--out", &sqc, "--report", &json])?;
        ensure(code == 0, || format!("synth exit {code}"))?;
        outs.push((std::fs::read(&sqc).unwrap(), std::fs::read(&json).unwrap()));
    }
    ensure(outs[0] == outs[1], || "synth outputs differ".into())?;
    compared += 2;
    ensure(Path::new(&f("c0_0.sqc")).exists(), || "missing output".into())?;
    Ok(format!("{compared} file pairs byte-identical across repeated invocations (prep, certify, synth)"))
}

fn main() {
    // cargo passes libtest flags; a name filter selects criteria by number
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 8] = [
        ("1", criterion_1),
        ("2", criterion_2),
        ("3", criterion_3),
        ("4", criterion_4),
        ("5", criterion_5),
        ("6", criterion_6),
        ("7", criterion_7),
        ("8", criterion_8),
    ];
    let mut failed = 0;
    for (id, f) in criteria {
        if !filter.is_empty() && !filter.iter().any(|x| x == id) {
            continue;
        }
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS criterion {id} ({secs:.1}s): {detail}"),
            Err(detail) => {
                failed += 1;
                println!("FAIL criterion {id} ({secs:.1}s): {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
