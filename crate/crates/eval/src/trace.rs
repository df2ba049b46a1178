//! Reasoning-trace statistics: micro-steps, self-check markers and how
//! often each edge is revisited.
//!
//! A trace is cut into micro-steps at blank lines and immediately before
//! every marker occurrence; whitespace-only pieces are dropped. Markers and
//! variable names only match on word boundaries, so `Await` is not a
//! `Wait` and `AB` mentions neither `A` nor `B`.

use std::collections::BTreeMap;

use serde::ser::SerializeMap;
use serde::{Deserialize, Serialize, Serializer};

use pcdisco_core::graph::{ordered_pair, Variable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct TraceConfig {
    pub markers: Vec<String>,
    pub case_insensitive: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            markers: vec!["Wait".into(), "Hold on".into()],
            case_insensitive: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct TraceStats {
    pub micro_steps: usize,
    pub self_check_markers: usize,
    /// Micro-steps naming both endpoints, keyed by `(a, b)` with `a < b`.
    #[serde(serialize_with = "edge_map")]
    pub revisit_counts: BTreeMap<(Variable, Variable), usize>,
}

fn edge_map<S: Serializer>(
    m: &BTreeMap<(Variable, Variable), usize>,
    s: S,
) -> Result<S::Ok, S::Error> {
    let mut out = s.serialize_map(Some(m.len()))?;
    for ((a, b), n) in m {
        out.serialize_entry(&format!("{a}-{b}"), n)?;
    }
    out.end()
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric() || c == '_'
}

/// Byte offsets where `needle` occurs as a whole word.
fn word_hits(text: &str, needle: &str, fold_case: bool) -> Vec<usize> {
    let (t, n) = (text.as_bytes(), needle.as_bytes());
    if n.is_empty() || n.len() > t.len() {
        return Vec::new();
    }
    let mut hits = Vec::new();
    for i in 0..=t.len() - n.len() {
        if !text.is_char_boundary(i) || !text.is_char_boundary(i + n.len()) {
            continue;
        }
        let window = &t[i..i + n.len()];
        let same = if fold_case {
            window.eq_ignore_ascii_case(n)
        } else {
            window == n
        };
        if !same {
            continue;
        }
        let before = text[..i].chars().next_back().is_some_and(is_word);
        let after = text[i + n.len()..].chars().next().is_some_and(is_word);
        if !before && !after {
            hits.push(i);
        }
    }
    hits
}

fn marker_hits(text: &str, cfg: &TraceConfig) -> Vec<usize> {
    let mut hits: Vec<usize> = cfg
        .markers
        .iter()
        .flat_map(|m| word_hits(text, m.trim(), cfg.case_insensitive))
        .collect();
    hits.sort_unstable();
    hits.dedup();
    hits
}

fn paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !cur.is_empty() {
                out.push(std::mem::take(&mut cur));
            }
        } else {
            if !cur.is_empty() {
                cur.push('\n');
            }
            cur.push_str(line);
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Micro-steps of a trace under `cfg`.
pub fn micro_steps(trace: &str, cfg: &TraceConfig) -> Vec<String> {
    let mut steps = Vec::new();
    for para in paragraphs(trace) {
        let mut cuts = marker_hits(&para, cfg);
        cuts.push(para.len());
        let mut start = 0;
        for cut in cuts {
            let piece = para[start..cut].trim();
            if !piece.is_empty() {
                steps.push(piece.to_string());
            }
            start = cut;
        }
    }
    steps
}

pub fn trace_stats_with(
    trace: &str,
    edges: &[(Variable, Variable)],
    cfg: &TraceConfig,
) -> TraceStats {
    let steps = micro_steps(trace, cfg);
    let mentions = |step: &str, v: &Variable| !word_hits(step, v.name(), false).is_empty();
    let revisit_counts = edges
        .iter()
        .map(|(a, b)| {
            let n = steps
                .iter()
                .filter(|s| mentions(s, a) && mentions(s, b))
                .count();
            (ordered_pair(a.clone(), b.clone()), n)
        })
        .collect();
    TraceStats {
        micro_steps: steps.len(),
        self_check_markers: marker_hits(trace, cfg).len(),
        revisit_counts,
    }
}

/// Statistics with the default lexicon (`Wait`, `Hold on`, any case).
pub fn trace_stats(trace: &str, edges: &[(Variable, Variable)]) -> TraceStats {
    trace_stats_with(trace, edges, &TraceConfig::default())
}

/// For each revisit count `k`: how many edges were revisited `k` times and
/// the fraction of those another model got wrong.
pub fn revisit_error_profile(edges: &[(usize, bool)]) -> BTreeMap<usize, (usize, f64)> {
    let mut tally: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    for &(k, wrong) in edges {
        let e = tally.entry(k).or_default();
        e.0 += 1;
        e.1 += usize::from(wrong);
    }
    tally
        .into_iter()
        .map(|(k, (n, w))| (k, (n, w as f64 / n as f64)))
        .collect()
}
