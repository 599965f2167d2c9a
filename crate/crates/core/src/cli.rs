//! Command-line front end. [`run`] parses arguments, executes one subcommand
//! and returns the process exit code:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success, or certify found a circuit |
//! | 1 | invalid input (bad flags, files, caps) |
//! | 2 | verification failure |
//! | 3 | certify found nothing within the budget |

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Deserialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::certifier::{certify_min_straddle_with, CertifyOptions, SlotKind, Verdict};
use crate::circuit::{
    apply_circuit, count_straddling, fuse_straddling, lower, parse_sqc, to_sqc, Circuit, PartitionSpec, PureState,
};
use crate::error::{invalid, Error, Result};
use crate::linalg::{ComplexMatrix, C64};
use crate::qsd::{synth_unitary_qsd, QsdConfig, SplitOrder};
use crate::report::canonical_json;
use crate::schmidt::{entanglement_entropy, is_schmidt_decomposable, iterated_decompose, schmidt_decompose, Decomposability};
use crate::stateprep::{prepare, state_library, PrepMethod};

#[derive(Parser, Debug)]
#[command(name = "straddle", version, about = "Partition-aware circuit synthesis with straddling-gate accounting")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Prepare a state and report straddling gates.
    Prep(PrepArgs),
    /// Decompose a unitary with the partition-aware QSD.
    Synth(SynthArgs),
    /// Schmidt ranks, entropies and decomposability of a state.
    Analyze(AnalyzeArgs),
    /// Search for a preparation within a straddling budget.
    Certify(CertifyArgs),
    /// Apply a circuit to a state.
    Simulate(SimulateArgs),
    /// Count straddling gates of a lowered circuit.
    Count(CountArgs),
}

#[derive(Args, Debug)]
struct Output {
    /// Circuit output (.sqc).
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report output.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PrepArgs {
    /// State JSON file, or `lib:<name>:...` for a library state.
    #[arg(long)]
    state: String,
    /// Partition JSON file or inline `0,1|2,3`.
    #[arg(long)]
    partition: String,
    /// auto | schmidt-path | mux-disentangle | multipartite | schmidt-decomposable
    #[arg(long, default_value = "auto")]
    method: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SynthArgs {
    /// Unitary JSON file.
    #[arg(long)]
    unitary: PathBuf,
    #[arg(long)]
    partition: String,
    /// qsd (smaller party first) | qsd-larger-first
    #[arg(long, default_value = "qsd")]
    method: String,
    #[arg(long, default_value_t = 8)]
    max_qubits: usize,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct AnalyzeArgs {
    #[arg(long)]
    state: String,
    #[arg(long)]
    partition: String,
    /// Extra bipartition to analyze, e.g. `0|1,2`.
    #[arg(long)]
    cut: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CertifyArgs {
    #[arg(long)]
    state: String,
    #[arg(long)]
    partition: String,
    #[arg(long)]
    budget: usize,
    #[arg(long, default_value_t = 50)]
    restarts: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// cnot | su4
    #[arg(long, default_value = "cnot")]
    slot: String,
    #[command(flatten)]
    output: Output,
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Initial state; defaults to |0...0>.
    #[arg(long)]
    state: Option<String>,
    /// Output state JSON.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Expected output state; exit 2 if it differs (up to global phase).
    #[arg(long)]
    check_against: Option<String>,
    #[arg(long, default_value_t = 1e-10)]
    tolerance: f64,
}

#[derive(Args, Debug)]
struct CountArgs {
    #[arg(long)]
    circuit: PathBuf,
    /// Defaults to the partition line of the circuit file.
    #[arg(long)]
    partition: Option<String>,
    #[arg(long)]
    report: Option<PathBuf>,
}

/// Input files read so far, hashed into the report digest.
#[derive(Default)]
struct Inputs {
    hasher: Sha256,
}

impl Inputs {
    fn add(&mut self, label: &str, bytes: &[u8]) {
        self.hasher.update(label.as_bytes());
        self.hasher.update((bytes.len() as u64).to_le_bytes());
        self.hasher.update(bytes);
    }

    fn read(&mut self, path: &Path) -> Result<String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::InvalidInput(format!("cannot read {}: {e}", path.display())))?;
        self.add("file", text.as_bytes());
        Ok(text)
    }

    fn state(&mut self, arg: &str) -> Result<PureState> {
        if let Some(spec) = arg.strip_prefix("lib:") {
            self.add("lib", spec.as_bytes());
            return state_library(&spec.parse()?);
        }
        PureState::from_json(&self.read(Path::new(arg))?)
    }

    fn partition(&mut self, arg: &str) -> Result<PartitionSpec> {
        let path = Path::new(arg);
        if path.is_file() {
            return PartitionSpec::from_json(&self.read(path)?);
        }
        self.add("inline", arg.as_bytes());
        arg.parse()
    }

    fn digest(self) -> String {
        self.hasher.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

#[derive(Deserialize)]
struct UnitaryFile {
    n: usize,
    matrix: Vec<Vec<[f64; 2]>>,
}

pub fn parse_unitary_json(text: &str) -> Result<ComplexMatrix> {
    let f: UnitaryFile = serde_json::from_str(text)?;
    let d = 1usize << f.n;
    if f.matrix.len() != d || f.matrix.iter().any(|r| r.len() != d) {
        return invalid(format!("a {}-qubit unitary needs a {d}x{d} matrix", f.n));
    }
    let data = f.matrix.iter().flatten().map(|&[re, im]| C64::new(re, im)).collect();
    let m = ComplexMatrix::from_row_major(d, d, data)?;
    m.check_finite()?;
    if !m.is_unitary(1e-10) {
        return invalid(format!("matrix is not unitary (error {:.3e})", m.unitarity_error()));
    }
    Ok(m)
}

pub fn unitary_json(m: &ComplexMatrix) -> Value {
    let rows: Vec<Value> = (0..m.rows()).map(|r| json!(m.row(r).iter().map(|z| [z.re, z.im]).collect::<Vec<_>>())).collect();
    json!({ "n": m.rows().trailing_zeros(), "matrix": rows })
}

fn run_report(command: &str, inputs: Inputs, seed: Option<u64>, payload: Value) -> Value {
    json!({
        "command": command,
        "inputs_digest": inputs.digest(),
        "tool_version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "report": payload,
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::InvalidInput(format!("cannot write {}: {e}", path.display())))
}

fn emit(report_path: Option<&Path>, report: &Value) -> Result<()> {
    let text = canonical_json(report);
    match report_path {
        Some(p) => write_text(p, &text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

/// Lower and fuse before writing, so circuit files hold primitive gates.
fn write_circuit(path: Option<&Path>, c: &Circuit, p: &PartitionSpec) -> Result<()> {
    if let Some(path) = path {
        let out = fuse_straddling(&lower(c, p)?, p);
        write_text(path, &to_sqc(&out, Some(p)))?;
    }
    Ok(())
}

fn cmd_prep(a: &PrepArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let target = inputs.state(&a.state)?;
    let p = inputs.partition(&a.partition)?;
    inputs.add("method", a.method.as_bytes());
    let method: PrepMethod = a.method.parse()?;
    let (c, report) = prepare(&target, &p, method)?;
    write_circuit(a.output.out.as_deref(), &c, &p)?;
    emit(a.output.report.as_deref(), &run_report("prep", inputs, None, report.to_json()))?;
    Ok(0)
}

fn cmd_synth(a: &SynthArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let u = parse_unitary_json(&inputs.read(&a.unitary)?)?;
    let p = inputs.partition(&a.partition)?;
    inputs.add("method", a.method.as_bytes());
    let split_order = match a.method.as_str() {
        "qsd" => SplitOrder::SmallerFirst,
        "qsd-larger-first" => SplitOrder::LargerFirst,
        other => return invalid(format!("unknown synthesis method {other:?}")),
    };
    if u.rows() != 1 << p.n() {
        return invalid(format!("unitary acts on {} qubits but the partition covers {}", u.rows().trailing_zeros(), p.n()));
    }
    let (c, report) = synth_unitary_qsd(&u, &p, &QsdConfig { split_order, max_qubits: a.max_qubits })?;
    write_circuit(a.output.out.as_deref(), &c, &p)?;
    emit(a.output.report.as_deref(), &run_report("synth", inputs, None, report.to_json()))?;
    Ok(0)
}

fn cut_summary(s: &PureState, cut: &PartitionSpec) -> Result<Value> {
    let d = schmidt_decompose(s, cut)?;
    Ok(json!({
        "cut": cut.to_string(),
        "rank": d.rank,
        "weights": d.weights,
        "entropy": entanglement_entropy(s, cut)?,
    }))
}

fn cmd_analyze(a: &AnalyzeArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let s = inputs.state(&a.state)?;
    let p = inputs.partition(&a.partition)?;
    if s.n() != p.n() {
        return invalid(format!("state has {} qubits but the partition covers {}", s.n(), p.n()));
    }
    let mut cuts = Vec::new();
    if p.m() >= 2 {
        for j in 0..p.m() {
            let rest: Vec<usize> = (0..p.n()).filter(|&q| p.party_of(q) != j).collect();
            cuts.push(cut_summary(&s, &PartitionSpec::bipartition(p.party(j).to_vec(), rest)?)?);
        }
    }
    let mut payload = json!({ "n": s.n(), "partition": p.to_string(), "party_cuts": cuts });
    if let Some(cut) = &a.cut {
        let cut = inputs.partition(cut)?;
        payload["cut"] = cut_summary(&s, &cut)?;
    }
    if p.m() >= 2 {
        payload["iterated_ranks"] = json!(iterated_decompose(&s, &p)?.level_ranks());
        payload["decomposable"] = match is_schmidt_decomposable(&s, &p)? {
            Decomposability::Yes(f) => json!({ "verdict": "yes", "rank": f.rank(), "weights": f.weights }),
            Decomposability::No(why) => json!({ "verdict": "no", "reason": why }),
            Decomposability::Indeterminate(why) => json!({ "verdict": "indeterminate", "reason": why }),
        };
    }
    emit(a.report.as_deref(), &run_report("analyze", inputs, None, payload))?;
    Ok(0)
}

fn cmd_certify(a: &CertifyArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let s = inputs.state(&a.state)?;
    let p = inputs.partition(&a.partition)?;
    let slot = match a.slot.as_str() {
        "cnot" => SlotKind::Cnot,
        "su4" => SlotKind::Su4,
        other => return invalid(format!("unknown slot kind {other:?}")),
    };
    inputs.add("slot", a.slot.as_bytes());
    let opts = CertifyOptions { slot, ..CertifyOptions::default() };
    let r = certify_min_straddle_with(&s, &p, a.budget, a.restarts, a.seed, &opts)?;
    eprintln!("best fidelity: {:.12}", r.best_fidelity);
    if let Some(c) = &r.circuit {
        write_circuit(a.output.out.as_deref(), c, &p)?;
    }
    emit(a.output.report.as_deref(), &run_report("certify", inputs, Some(a.seed), r.to_json()))?;
    Ok(if r.verdict == Verdict::Achievable { 0 } else { 3 })
}

fn cmd_simulate(a: &SimulateArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let (c, _) = parse_sqc(&inputs.read(&a.circuit)?)?;
    let init = match &a.state {
        Some(s) => inputs.state(s)?,
        None => PureState::zero(c.n()),
    };
    let out = apply_circuit(&c, &init)?;
    if let Some(path) = &a.out {
        write_text(path, &canonical_json(&out.to_json_value()))?;
    } else if a.check_against.is_none() {
        print!("{}", canonical_json(&out.to_json_value()));
    }
    if let Some(expect) = &a.check_against {
        let expect = inputs.state(expect)?;
        if expect.n() != out.n() {
            return invalid("expected state has a different qubit count");
        }
        let phase = expect.overlap(&out);
        let phase = if phase.norm() > 0.0 { phase / phase.norm() } else { C64::new(1.0, 0.0) };
        let diff = out
            .amplitudes()
            .iter()
            .zip(expect.amplitudes())
            .map(|(o, e)| (o - e * phase).norm())
            .fold(0.0, f64::max);
        eprintln!("max amplitude difference: {diff:.3e}");
        if diff > a.tolerance {
            return Err(Error::Verification(format!("simulated state differs by {diff:.3e} > {:.1e}", a.tolerance)));
        }
    }
    Ok(0)
}

fn cmd_count(a: &CountArgs) -> Result<i32> {
    let mut inputs = Inputs::default();
    let (c, embedded) = parse_sqc(&inputs.read(&a.circuit)?)?;
    let p = match &a.partition {
        Some(s) => inputs.partition(s)?,
        None => embedded.ok_or_else(|| Error::InvalidInput("no partition given and none in the circuit file".into()))?,
    };
    if !c.is_lowered() {
        return invalid("circuit contains macro gates (muxry/muxrz); lower first");
    }
    let count = count_straddling(&c, &p)?;
    let per_pair: serde_json::Map<String, Value> =
        count.per_pair.iter().map(|(&(x, y), &k)| (format!("{x}-{y}"), json!(k))).collect();
    let payload = json!({ "straddling_total": count.total, "per_pair": per_pair, "gates": c.len() });
    emit(a.report.as_deref(), &run_report("count", inputs, None, payload))?;
    Ok(0)
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Verification(_) => 2,
        _ => 1,
    }
}

/// Parse `args` (including the program name) and run. Diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            eprint!("{}", e.render());
            return 1;
        }
    };
    let start = Instant::now();
    let result = match &cli.command {
        Command::Prep(a) => cmd_prep(a),
        Command::Synth(a) => cmd_synth(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Certify(a) => cmd_certify(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Count(a) => cmd_count(a),
    };
    eprintln!("wall time: {:.3}s", start.elapsed().as_secs_f64());
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
