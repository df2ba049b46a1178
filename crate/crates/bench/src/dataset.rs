use std::collections::BTreeMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use pcdisco_core::graph::{
    ci_set_of, ci_signature, consistent_extensions, dedup_isomorphic, enumerate_ordered_dags,
    RelationKind,
};
use pcdisco_core::pc::{solve_sample, solve_structure, PremiseFacts};
use pcdisco_core::Hypothesis;

use crate::error::BenchError;
use crate::text::{parse_hypothesis, parse_premise, verbalize_hypothesis, verbalize_premise};

/// One premise/hypothesis pair with its ground-truth label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "SampleRecord", try_from = "SampleRecord")]
pub struct Sample {
    pub id: String,
    pub n: usize,
    pub premise: String,
    pub hypothesis_text: String,
    pub hypothesis: Hypothesis,
    pub label: bool,
    pub facts: PremiseFacts,
    pub mec_id: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct SampleRecord {
    id: String,
    n: usize,
    premise: String,
    hypothesis: String,
    label: bool,
    facts: PremiseFacts,
    mec_id: Option<String>,
}

impl From<Sample> for SampleRecord {
    fn from(s: Sample) -> Self {
        SampleRecord {
            id: s.id,
            n: s.n,
            premise: s.premise,
            hypothesis: s.hypothesis_text,
            label: s.label,
            facts: s.facts,
            mec_id: s.mec_id,
        }
    }
}

impl TryFrom<SampleRecord> for Sample {
    type Error = BenchError;

    fn try_from(r: SampleRecord) -> Result<Self, Self::Error> {
        Ok(Sample {
            hypothesis: parse_hypothesis(&r.hypothesis)?,
            id: r.id,
            n: r.n,
            premise: r.premise,
            hypothesis_text: r.hypothesis,
            label: r.label,
            facts: r.facts,
            mec_id: r.mec_id,
        })
    }
}

impl Sample {
    /// The single-prompt rendering used by external benchmark files.
    pub fn input_text(&self) -> String {
        format!(
            "Premise: {}\nHypothesis: {}",
            self.premise, self.hypothesis_text
        )
    }
}

#[derive(Debug, Clone)]
pub struct GenerateConfig {
    pub n: usize,
    pub kinds: Vec<RelationKind>,
}

impl GenerateConfig {
    pub fn new(n: usize) -> Self {
        GenerateConfig {
            n,
            kinds: RelationKind::ALL.to_vec(),
        }
    }
}

/// Enumerates DAGs over `n` variables up to isomorphism, groups them by CI
/// set and emits one sample per (class, ordered pair, relation kind).
///
/// Symmetric kinds are emitted once per unordered pair.
pub fn generate_dataset(cfg: &GenerateConfig) -> Result<Vec<Sample>, BenchError> {
    let reps = dedup_isomorphic(&enumerate_ordered_dags(cfg.n)?)?;
    let mut classes: Vec<(Vec<_>, &pcdisco_core::graph::Dag)> = Vec::new();
    let mut index = BTreeMap::new();
    for g in &reps {
        let sig = ci_signature(g);
        if !index.contains_key(&sig) {
            index.insert(sig.clone(), classes.len());
            classes.push((sig, g));
        }
    }

    let mut out = Vec::new();
    for (m, (_, g)) in classes.iter().enumerate() {
        let facts = PremiseFacts::from_ci_set(g.nodes().iter().cloned(), &ci_set_of(g))?;
        let premise = verbalize_premise(&facts);
        let (_, _, _, cpdag) = solve_structure(&facts)?;
        let extensions = consistent_extensions(&cpdag);
        let mec_id = format!("n{}-m{:03}", cfg.n, m);
        let nodes = g.nodes();
        for (i, x) in nodes.iter().enumerate() {
            for y in &nodes[i + 1..] {
                for &kind in &cfg.kinds {
                    let orders: &[(_, _)] = if kind.is_symmetric() {
                        &[(x, y)]
                    } else {
                        &[(x, y), (y, x)]
                    };
                    for &(a, b) in orders {
                        let h = Hypothesis::new(kind, a.clone(), b.clone())?;
                        let mut label = !extensions.is_empty();
                        for e in &extensions {
                            label &= h.holds_in(e)?;
                        }
                        out.push(Sample {
                            id: format!("{mec_id}-{a}-{b}-{kind}"),
                            n: cfg.n,
                            premise: premise.clone(),
                            hypothesis_text: verbalize_hypothesis(&h),
                            hypothesis: h,
                            label,
                            facts: facts.clone(),
                            mec_id: Some(mec_id.clone()),
                        });
                    }
                }
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    pub samples: usize,
    pub classes: usize,
    pub positives: usize,
    pub negatives: usize,
    pub positive_rate: f64,
}

pub fn summarize(samples: &[Sample]) -> DatasetSummary {
    let positives = samples.iter().filter(|s| s.label).count();
    let mut mecs: Vec<&str> = samples.iter().filter_map(|s| s.mec_id.as_deref()).collect();
    mecs.sort_unstable();
    mecs.dedup();
    DatasetSummary {
        samples: samples.len(),
        classes: mecs.len(),
        positives,
        negatives: samples.len() - positives,
        positive_rate: if samples.is_empty() {
            0.0
        } else {
            positives as f64 / samples.len() as f64
        },
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> BenchError + '_ {
    move |source| BenchError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes one JSON object per line. Refuses to replace an existing file
/// unless `overwrite` is set.
pub fn write_jsonl(path: &Path, samples: &[Sample], overwrite: bool) -> Result<(), BenchError> {
    let file = if overwrite {
        File::create(path)
    } else {
        OpenOptions::new().write(true).create_new(true).open(path)
    }
    .map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    for s in samples {
        let line = serde_json::to_string(s).expect("samples always serialize");
        writeln!(w, "{line}").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// A row that was skipped or loaded with caveats.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct RowDiagnostic {
    pub row: usize,
    pub id: Option<String>,
    pub message: String,
}

#[derive(Debug, Clone, Default)]
pub struct LoadReport {
    pub samples: Vec<Sample>,
    pub skipped: Vec<RowDiagnostic>,
    pub warnings: Vec<RowDiagnostic>,
}

impl LoadReport {
    pub fn rows(&self) -> usize {
        self.samples.len() + self.skipped.len()
    }

    /// Fraction of rows that parsed.
    pub fn coverage(&self) -> f64 {
        if self.rows() == 0 {
            return 0.0;
        }
        self.samples.len() as f64 / self.rows() as f64
    }
}

/// Loads a dataset in this crate's JSONL layout, or an external file whose
/// rows carry either `premise`/`hypothesis` or a combined `input` text
/// ("Premise: ... Hypothesis: ...") plus a `label`. Files ending in `.csv`
/// are read as CSV with a header row. Rows that fail to parse are reported,
/// not fatal.
pub fn load_dataset(path: &Path) -> Result<LoadReport, BenchError> {
    let is_csv = path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("csv"));
    let rows = if is_csv {
        read_csv_rows(path)?
    } else {
        read_jsonl_rows(path)?
    };
    let mut report = LoadReport::default();
    for (row, fields) in rows {
        let fields = match fields {
            Ok(f) => f,
            Err(message) => {
                report.skipped.push(RowDiagnostic {
                    row,
                    id: None,
                    message,
                });
                continue;
            }
        };
        let id = fields.get("id").and_then(value_as_string);
        match row_to_sample(row, &fields) {
            Ok((sample, notes)) => {
                for message in notes {
                    report.warnings.push(RowDiagnostic {
                        row,
                        id: Some(sample.id.clone()),
                        message,
                    });
                }
                report.samples.push(sample);
            }
            Err(message) => report.skipped.push(RowDiagnostic { row, id, message }),
        }
    }
    Ok(report)
}

type Rows = Vec<(usize, Result<Map<String, Value>, String>)>;

fn read_jsonl_rows(path: &Path) -> Result<Rows, BenchError> {
    let reader = BufReader::new(File::open(path).map_err(io_err(path))?);
    let mut rows = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(path))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed = match serde_json::from_str::<Value>(&line) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err("row is not a JSON object".to_string()),
            Err(e) => Err(format!("invalid JSON: {e}")),
        };
        rows.push((i + 1, parsed));
    }
    Ok(rows)
}

fn read_csv_rows(path: &Path) -> Result<Rows, BenchError> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| BenchError::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e),
    })?;
    let headers = reader
        .headers()
        .map_err(|e| BenchError::Row {
            row: 1,
            reason: e.to_string(),
        })?
        .clone();
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let parsed = rec.map_err(|e| e.to_string()).map(|rec| {
            headers
                .iter()
                .zip(rec.iter())
                .map(|(h, v)| (h.trim().to_string(), Value::String(v.to_string())))
                .collect()
        });
        // Header is line 1.
        rows.push((i + 2, parsed));
    }
    Ok(rows)
}

fn value_as_string(v: &Value) -> Option<String> {
    match v {
        Value::String(s) => Some(s.clone()),
        Value::Number(n) => Some(n.to_string()),
        _ => None,
    }
}

fn parse_label(v: &Value) -> Option<bool> {
    match v {
        Value::Bool(b) => Some(*b),
        Value::Number(n) => {
            let x = n.as_f64()?;
            if x == 1.0 {
                Some(true)
            } else if x == 0.0 {
                Some(false)
            } else {
                None
            }
        }
        Value::String(s) => match s.trim().to_ascii_lowercase().as_str() {
            "1" | "true" | "yes" | "valid" => Some(true),
            "0" | "false" | "no" | "invalid" => Some(false),
            _ => None,
        },
        _ => None,
    }
}

/// Splits a combined "Premise: ... Hypothesis: ..." text at the last
/// hypothesis marker.
pub fn split_input(input: &str) -> Option<(String, String)> {
    let lower = input.to_ascii_lowercase();
    let at = lower.rfind("hypothesis:")?;
    let premise = input[..at].trim();
    let premise = premise
        .strip_prefix("Premise:")
        .or_else(|| premise.strip_prefix("premise:"))
        .unwrap_or(premise)
        .trim();
    let hypothesis = input[at + "hypothesis:".len()..].trim();
    Some((premise.to_string(), hypothesis.to_string()))
}

fn row_to_sample(row: usize, f: &Map<String, Value>) -> Result<(Sample, Vec<String>), String> {
    let text = |k: &str| f.get(k).and_then(Value::as_str).map(str::to_string);
    let (premise, hypothesis_text) = match (text("premise"), text("hypothesis"), text("input")) {
        (Some(p), Some(h), _) => (p, h),
        (_, _, Some(input)) => split_input(&input).ok_or("input has no hypothesis marker")?,
        _ => return Err("row has neither premise/hypothesis nor input".into()),
    };
    let label = f
        .get("label")
        .ok_or("missing label")
        .and_then(|v| parse_label(v).ok_or("unreadable label"))?;
    let hypothesis = parse_hypothesis(&hypothesis_text).map_err(|e| e.to_string())?;

    let mut notes = Vec::new();
    let facts = match f.get("facts") {
        Some(v) if !v.is_null() => {
            let facts: PremiseFacts =
                serde_json::from_value(v.clone()).map_err(|e| format!("invalid facts: {e}"))?;
            if parse_premise(&premise).map(|p| p.facts).ok().as_ref() != Some(&facts) {
                notes.push("premise text does not parse to the stored facts".to_string());
            }
            facts
        }
        _ => {
            let parsed = parse_premise(&premise).map_err(|e| e.to_string())?;
            notes.extend(
                parsed
                    .diagnostics
                    .into_iter()
                    .map(|d| format!("unparsed sentence: {d}")),
            );
            parsed.facts
        }
    };
    for v in [hypothesis.x(), hypothesis.y()] {
        if !facts.variables().contains(v) {
            return Err(format!("hypothesis mentions undeclared variable {v}"));
        }
    }
    let n = f
        .get("n")
        .or_else(|| f.get("num_variables"))
        .and_then(|v| v.as_u64().or_else(|| v.as_str()?.trim().parse().ok()))
        .map(|n| n as usize)
        .unwrap_or(facts.variables().len());
    let id = f
        .get("id")
        .and_then(value_as_string)
        .unwrap_or_else(|| format!("row-{row}"));
    let mec_id = f.get("mec_id").and_then(value_as_string);
    Ok((
        Sample {
            id,
            n,
            premise,
            hypothesis_text,
            hypothesis,
            label,
            facts,
            mec_id,
        },
        notes,
    ))
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct AuditReport {
    pub checked: usize,
    pub agreed: usize,
    pub mismatches: Vec<String>,
    pub failures: Vec<RowDiagnostic>,
}

/// Re-derives every label with the exact PC engine and lists disagreements.
pub fn audit_labels(samples: &[Sample]) -> AuditReport {
    let mut report = AuditReport::default();
    for (i, s) in samples.iter().enumerate() {
        match solve_sample(&s.facts, &s.hypothesis) {
            Ok(out) => {
                report.checked += 1;
                if out.verdict == s.label {
                    report.agreed += 1;
                } else {
                    report.mismatches.push(s.id.clone());
                }
            }
            Err(e) => report.failures.push(RowDiagnostic {
                row: i + 1,
                id: Some(s.id.clone()),
                message: e.to_string(),
            }),
        }
    }
    report
}
