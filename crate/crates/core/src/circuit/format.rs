//! Text circuit format (`.sqc`).
//!
//! ```text
//! sqc 1
//! qubits 4
//! partition 0,1|2,3
//! cnot 0 2
//! u1 3 (re,im) (re,im) (re,im) (re,im)
//! u2 0 2 <16 complex entries>
//! muxry 2 ctrls=0,1 angles=a0,a1,a2,a3
//! local party=0 qubits=0,1 <16 complex entries>
//! ```
//!
//! Matrices are row-major over the listed qubits, first qubit least
//! significant. Reals are written with 17 significant digits so that a
//! parse/serialize cycle reproduces the file byte for byte.

use std::fmt::Write;

use crate::error::{Error, Result};
use crate::linalg::{ComplexMatrix, C64};

use super::{Axis, Circuit, Gate, PartitionSpec};

pub(crate) fn fmt_real(x: f64) -> String {
    format!("{x:.16e}")
}

fn fmt_complex(z: C64) -> String {
    format!("({},{})", fmt_real(z.re), fmt_real(z.im))
}

fn fmt_matrix(m: &ComplexMatrix) -> String {
    m.as_slice().iter().map(|&z| fmt_complex(z)).collect::<Vec<_>>().join(" ")
}

fn fmt_list(xs: &[usize]) -> String {
    xs.iter().map(usize::to_string).collect::<Vec<_>>().join(",")
}

pub fn to_sqc(c: &Circuit, partition: Option<&PartitionSpec>) -> String {
    let mut out = String::new();
    writeln!(out, "sqc 1").unwrap();
    writeln!(out, "qubits {}", c.n()).unwrap();
    if let Some(p) = partition {
        writeln!(out, "partition {p}").unwrap();
    }
    for g in c.gates() {
        match g {
            Gate::Cnot { control, target } => writeln!(out, "cnot {control} {target}"),
            Gate::SingleQubit { qubit, matrix } => writeln!(out, "u1 {qubit} {}", fmt_matrix(matrix)),
            Gate::TwoQubit { qubits, matrix } => {
                writeln!(out, "u2 {} {} {}", qubits[0], qubits[1], fmt_matrix(matrix))
            }
            Gate::MuxRot { axis, target, controls, angles } => {
                let angles: Vec<String> = angles.iter().map(|&a| fmt_real(a)).collect();
                writeln!(out, "muxr{axis} {target} ctrls={} angles={}", fmt_list(controls), angles.join(","))
            }
            Gate::LocalBlock { party, qubits, matrix } => {
                writeln!(out, "local party={party} qubits={} {}", fmt_list(qubits), fmt_matrix(matrix))
            }
        }
        .unwrap();
    }
    out
}

struct LineParser<'a> {
    line: usize,
    tokens: std::str::SplitWhitespace<'a>,
}

impl<'a> LineParser<'a> {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T> {
        Err(Error::Parse { line: self.line, msg: msg.into() })
    }

    fn next(&mut self, what: &str) -> Result<&'a str> {
        match self.tokens.next() {
            Some(t) => Ok(t),
            None => self.err(format!("missing {what}")),
        }
    }

    fn usize(&mut self, what: &str) -> Result<usize> {
        let t = self.next(what)?;
        t.parse().or_else(|_| self.err(format!("bad {what}: {t:?}")))
    }

    fn keyed(&mut self, key: &str) -> Result<&'a str> {
        let t = self.next(key)?;
        match t.strip_prefix(key).and_then(|r| r.strip_prefix('=')) {
            Some(v) => Ok(v),
            None => self.err(format!("expected {key}=…, got {t:?}")),
        }
    }

    fn list(&self, s: &str, what: &str) -> Result<Vec<usize>> {
        if s.is_empty() {
            return Ok(Vec::new());
        }
        s.split(',')
            .map(|x| x.parse().or_else(|_| self.err(format!("bad {what} entry {x:?}"))))
            .collect()
    }

    fn real(&self, s: &str) -> Result<f64> {
        match s.parse::<f64>() {
            Ok(x) if x.is_finite() => Ok(x),
            _ => self.err(format!("bad real {s:?}")),
        }
    }

    fn matrix(&mut self, dim: usize) -> Result<ComplexMatrix> {
        let mut data = Vec::with_capacity(dim * dim);
        for _ in 0..dim * dim {
            let t = self.next("matrix entry")?;
            let inner = t.strip_prefix('(').and_then(|t| t.strip_suffix(')'));
            let Some((re, im)) = inner.and_then(|t| t.split_once(',')) else {
                return self.err(format!("bad complex literal {t:?}"));
            };
            data.push(C64::new(self.real(re)?, self.real(im)?));
        }
        ComplexMatrix::from_row_major(dim, dim, data).or_else(|e| self.err(e.to_string()))
    }

    fn finish(mut self) -> Result<()> {
        match self.tokens.next() {
            Some(t) => self.err(format!("unexpected trailing token {t:?}")),
            None => Ok(()),
        }
    }
}

/// Parse a circuit file. Returns the circuit and the optional partition header.
pub fn parse_sqc(text: &str) -> Result<(Circuit, Option<PartitionSpec>)> {
    let mut n: Option<usize> = None;
    let mut partition = None;
    let mut gates = Vec::new();
    let mut saw_magic = false;
    for (idx, raw) in text.lines().enumerate() {
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut lp = LineParser { line: idx + 1, tokens: content.split_whitespace() };
        let head = lp.next("keyword")?;
        if !saw_magic {
            if head != "sqc" || lp.next("version")? != "1" {
                return lp.err("file must start with `sqc 1`");
            }
            saw_magic = true;
            lp.finish()?;
            continue;
        }
        match head {
            "qubits" => {
                n = Some(lp.usize("qubit count")?);
                lp.finish()?;
                continue;
            }
            "partition" => {
                let spec = lp.next("partition")?;
                partition = Some(spec.parse::<PartitionSpec>().or_else(|e| lp.err(e.to_string()))?);
                lp.finish()?;
                continue;
            }
            _ => {}
        }
        if n.is_none() {
            return lp.err("gate before `qubits` header");
        }
        let gate = match head {
            "cnot" => Gate::cnot(lp.usize("control")?, lp.usize("target")?),
            "u1" => {
                let qubit = lp.usize("qubit")?;
                Gate::SingleQubit { qubit, matrix: lp.matrix(2)? }
            }
            "u2" => {
                let q1 = lp.usize("qubit")?;
                let q2 = lp.usize("qubit")?;
                Gate::TwoQubit { qubits: [q1, q2], matrix: lp.matrix(4)? }
            }
            "muxry" | "muxrz" => {
                let axis = if head == "muxry" { Axis::Y } else { Axis::Z };
                let target = lp.usize("target")?;
                let ctrls = lp.keyed("ctrls")?;
                let controls = lp.list(ctrls, "control")?;
                let angles_s = lp.keyed("angles")?;
                let angles = angles_s.split(',').map(|a| lp.real(a)).collect::<Result<Vec<_>>>()?;
                Gate::MuxRot { axis, target, controls, angles }
            }
            "local" => {
                let party_s = lp.keyed("party")?;
                let party = party_s.parse().or_else(|_| lp.err(format!("bad party {party_s:?}")))?;
                let qs = lp.keyed("qubits")?;
                let qubits = lp.list(qs, "qubit")?;
                if qubits.is_empty() || qubits.len() > 16 {
                    return lp.err("local block needs 1..=16 qubits");
                }
                let matrix = lp.matrix(1 << qubits.len())?;
                Gate::LocalBlock { party, qubits, matrix }
            }
            other => return lp.err(format!("unknown gate {other:?}")),
        };
        let line = lp.line;
        lp.finish()?;
        gate.validate(n.unwrap()).map_err(|e| Error::Parse { line, msg: e.to_string() })?;
        gates.push(gate);
    }
    if !saw_magic {
        return Err(Error::Parse { line: 0, msg: "empty circuit file".into() });
    }
    let n = n.ok_or(Error::Parse { line: 0, msg: "missing `qubits` header".into() })?;
    let c = Circuit::from_gates(n, gates);
    if let Some(p) = &partition {
        c.validate_against(p)?;
    }
    Ok((c, partition))
}
