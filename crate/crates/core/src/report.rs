//! Synthesis reports and the canonical JSON writer used for every report file.

use std::collections::BTreeMap;
use std::fmt::Write;

use serde_json::{json, Map, Value};

use crate::circuit::{count_straddling, fuse_straddling, lower, Circuit, PartitionSpec, StraddleCount};
use crate::error::Result;

/// Bound quoted for comparison. `asserted` is false for report-only values.
#[derive(Debug, Clone, PartialEq)]
pub struct QuotedBound {
    pub value: f64,
    pub label: String,
    pub asserted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisReport {
    pub method: String,
    pub straddling_total: usize,
    pub per_pair: BTreeMap<(usize, usize), usize>,
    pub predicted: usize,
    pub quoted_bound: Option<QuotedBound>,
    /// `|<target|prepared>|^2` for states, `|tr(U^† V)|^2 / d^2` for unitaries.
    pub fidelity: f64,
    /// Method-specific comparison values.
    pub extras: BTreeMap<String, Value>,
}

impl SynthesisReport {
    pub fn new(method: &str, measured: StraddleCount, predicted: usize, fidelity: f64) -> Self {
        Self {
            method: method.to_string(),
            straddling_total: measured.total,
            per_pair: measured.per_pair,
            predicted,
            quoted_bound: None,
            fidelity,
            extras: BTreeMap::new(),
        }
    }

    pub fn with_bound(mut self, value: f64, label: &str, asserted: bool) -> Self {
        self.quoted_bound = Some(QuotedBound { value, label: label.to_string(), asserted });
        self
    }

    pub fn with_extra(mut self, key: &str, value: Value) -> Self {
        self.extras.insert(key.to_string(), value);
        self
    }

    pub fn to_json(&self) -> Value {
        let per_pair: Map<String, Value> =
            self.per_pair.iter().map(|(&(a, b), &c)| (format!("{a}-{b}"), json!(c))).collect();
        let mut v = json!({
            "method": self.method,
            "straddling_total": self.straddling_total,
            "per_pair": per_pair,
            "predicted": self.predicted,
            "fidelity": self.fidelity,
        });
        if let Some(b) = &self.quoted_bound {
            v["quoted_bound"] = json!({ "value": b.value, "label": b.label, "asserted": b.asserted });
        }
        if !self.extras.is_empty() {
            v["extras"] = Value::Object(self.extras.clone().into_iter().collect());
        }
        v
    }
}

/// Straddling count of `fuse_straddling(lower(c))`, the number every report quotes.
pub fn measured_count(c: &Circuit, p: &PartitionSpec) -> Result<StraddleCount> {
    let lowered = lower(c, p)?;
    count_straddling(&fuse_straddling(&lowered, p), p)
}

/// Serialize with sorted keys, two-space indentation and floats in
/// `{:.16e}` form, so equal values always produce identical bytes.
pub fn canonical_json(v: &Value) -> String {
    let mut out = String::new();
    write_value(&mut out, v, 0);
    out.push('\n');
    out
}

fn write_value(out: &mut String, v: &Value, depth: usize) {
    match v {
        Value::Null => out.push_str("null"),
        Value::Bool(b) => write!(out, "{b}").unwrap(),
        Value::Number(n) => {
            if n.is_f64() {
                let x = n.as_f64().unwrap();
                write!(out, "{x:.16e}").unwrap();
            } else {
                write!(out, "{n}").unwrap();
            }
        }
        Value::String(s) => out.push_str(&Value::String(s.clone()).to_string()),
        Value::Array(items) => {
            if items.is_empty() {
                out.push_str("[]");
                return;
            }
            out.push_str("[\n");
            for (i, item) in items.iter().enumerate() {
                indent(out, depth + 1);
                write_value(out, item, depth + 1);
                if i + 1 < items.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push(']');
        }
        Value::Object(map) => {
            if map.is_empty() {
                out.push_str("{}");
                return;
            }
            let mut keys: Vec<&String> = map.keys().collect();
            keys.sort();
            out.push_str("{\n");
            for (i, k) in keys.iter().enumerate() {
                indent(out, depth + 1);
                out.push_str(&Value::String((*k).clone()).to_string());
                out.push_str(": ");
                write_value(out, &map[*k], depth + 1);
                if i + 1 < keys.len() {
                    out.push(',');
                }
                out.push('\n');
            }
            indent(out, depth);
            out.push('}');
        }
    }
}

fn indent(out: &mut String, depth: usize) {
    for _ in 0..depth {
        out.push_str("  ");
    }
}
