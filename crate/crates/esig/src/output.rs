//! JSON documents and CSV word tables.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use esig_core::diagrams::Diagram;
use esig_core::words::{TensorPolynomial, Word};
use serde_json::{json, Map, Value};

use crate::config::RunConfig;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Words are rendered as comma-joined 1-based letters; the empty word is
/// the empty string.
pub fn word_key(w: &Word) -> String {
    w.letters().iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

/// All coefficients of levels `1..=depth` keyed by word.
pub fn word_map(p: &TensorPolynomial) -> Map<String, Value> {
    p.iter()
        .filter(|(w, _)| !w.is_empty())
        .map(|(w, v)| (word_key(&w), json!(v)))
        .collect()
}

pub fn diagram_json(d: &Diagram) -> Value {
    json!({
        "n": d.n(),
        "pairs": d.pairs().iter().map(|&(i, j)| [i, j]).collect::<Vec<_>>(),
        "singles": d.singles(),
    })
}

/// `{"esig_version", "config", "result"}`.
pub fn document(cfg: &RunConfig, result: Value) -> Value {
    json!({
        "esig_version": VERSION,
        "config": cfg,
        "result": result,
    })
}

/// Writes `doc` to `path`, or to standard output when `path` is `None`.
pub fn emit(doc: &Value, path: Option<&Path>) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(doc)?;
    match path {
        Some(p) => std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display())),
        None => {
            let mut out = std::io::stdout().lock();
            writeln!(out, "{text}")?;
            Ok(())
        }
    }
}

/// Writes `word,level,<names…>` rows for every word of levels `1..=depth`.
pub fn write_word_csv(path: &Path, names: &[&str], columns: &[&TensorPolynomial]) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    let mut header = vec!["word", "level"];
    header.extend_from_slice(names);
    w.write_record(&header)?;
    let Some(first) = columns.first() else {
        return Ok(w.flush()?);
    };
    for (word, _) in first.iter().filter(|(w, _)| !w.is_empty()) {
        let mut row = vec![word_key(&word), word.len().to_string()];
        row.extend(columns.iter().map(|c| format!("{:e}", c.get(&word))));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Machine-readable description of a failed run.
pub fn error_document(err: &anyhow::Error) -> Value {
    use esig_core::Error as E;
    let message = format!("{err:#}");
    let detail = match err.downcast_ref::<E>() {
        Some(E::DimensionMismatch { left, right }) => json!({"kind": "dimension_mismatch", "left": left, "right": right}),
        Some(E::TruncationMismatch { left, right }) => json!({"kind": "truncation_mismatch", "left": left, "right": right}),
        Some(E::InvalidLetter { letter, dim }) => json!({"kind": "invalid_letter", "letter": letter, "dim": dim}),
        Some(E::LengthMismatch { expected, got }) => json!({"kind": "length_mismatch", "expected": expected, "got": got}),
        Some(E::InvalidDiagram(_)) => json!({"kind": "invalid_diagram"}),
        Some(E::InvalidParameter { name, value, .. }) => json!({"kind": "invalid_parameter", "name": name, "value": value}),
        Some(E::Domain(_)) => json!({"kind": "domain"}),
        Some(E::Capability { what, value, limit }) => {
            json!({"kind": "capability", "what": what, "value": value, "limit": limit})
        }
        Some(E::Quadrature { estimate, error }) => json!({"kind": "quadrature", "estimate": estimate, "error_bound": error}),
        Some(E::NotPositiveDefinite { index, pivot }) => {
            json!({"kind": "not_positive_definite", "index": index, "pivot": pivot})
        }
        None => json!({"kind": "invalid_input"}),
    };
    let mut obj = detail.as_object().cloned().unwrap_or_default();
    obj.insert("message".into(), json!(message));
    json!({"esig_version": VERSION, "error": obj})
}
