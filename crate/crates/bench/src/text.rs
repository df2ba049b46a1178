//! Natural-language rendering of premises and hypotheses, and a lenient
//! parser that reads them back.
//!
//! The canonical premise looks like
//!
//! ```text
//! Suppose there is a closed system of 3 variables, A, B and C. All the
//! statistical relations among these 3 variables are as follows: A correlates
//! with C. B correlates with C. However, A is independent of B.
//! ```
//!
//! The parser also accepts "X and Y are independent given ...", "conditional
//! on", comma lists with or without a final "and", and "X and Y are
//! correlated". Sentences it cannot place are returned as diagnostics.

use std::collections::BTreeSet;

use pcdisco_core::graph::{is_identifier, CiStatement, RelationKind, Variable};
use pcdisco_core::pc::PremiseFacts;
use pcdisco_core::Hypothesis;

use crate::error::BenchError;

/// "A", "A and B", "A, B and C".
pub fn join_variables<'a>(vars: impl IntoIterator<Item = &'a Variable>) -> String {
    let names: Vec<&str> = vars.into_iter().map(Variable::name).collect();
    match names.len() {
        0 => String::new(),
        1 => names[0].to_string(),
        k => format!("{} and {}", names[..k - 1].join(", "), names[k - 1]),
    }
}

pub fn verbalize_premise(facts: &PremiseFacts) -> String {
    let n = facts.variables().len();
    let mut out = format!(
        "Suppose there is a closed system of {n} variables, {}. All the statistical relations among these {n} variables are as follows:",
        join_variables(facts.variables())
    );
    for (a, b) in facts.correlations() {
        out.push_str(&format!(" {a} correlates with {b}."));
    }
    for (k, s) in facts.independencies().iter().enumerate() {
        let lead = if k == 0 && !facts.correlations().is_empty() {
            "However, "
        } else {
            ""
        };
        out.push_str(&format!(" {lead}{} is independent of {}", s.x(), s.y()));
        if !s.given().is_empty() {
            out.push_str(&format!(" given {}", join_variables(s.given())));
        }
        out.push('.');
    }
    out
}

pub fn verbalize_hypothesis(h: &Hypothesis) -> String {
    let (x, y) = (h.x(), h.y());
    let indirect = h.min_path_len() >= 2;
    match h.kind() {
        RelationKind::IsParent => format!("{x} directly causes {y}."),
        RelationKind::IsChild => format!("{x} is directly caused by {y}."),
        RelationKind::IsAncestor if indirect => {
            format!("{x} causes something else which causes {y}.")
        }
        RelationKind::IsAncestor => format!("{x} is an ancestor of {y}."),
        RelationKind::IsDescendant if indirect => {
            format!("{x} is caused by something else which is caused by {y}.")
        }
        RelationKind::IsDescendant => format!("{x} is a descendant of {y}."),
        RelationKind::HasCollider => {
            format!("There exists at least one collider (i.e., common effect) of {x} and {y}.")
        }
        RelationKind::HasConfounder => {
            format!("There exists at least one confounder (i.e., common cause) of {x} and {y}.")
        }
    }
}

/// Parsed premise plus every sentence the grammar could not place.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParsedPremise {
    pub facts: PremiseFacts,
    pub diagnostics: Vec<String>,
}

enum Sentence {
    Declaration(Vec<Variable>),
    Preamble,
    Correlation(Variable, Variable),
    Independence(Variable, Variable, Vec<Variable>),
}

pub fn parse_premise(text: &str) -> Result<ParsedPremise, BenchError> {
    let mut declared: Option<Vec<Variable>> = None;
    let mut correlations = Vec::new();
    let mut independencies = Vec::new();
    let mut diagnostics = Vec::new();
    let mut recognized = 0usize;

    for sentence in split_sentences(text) {
        match parse_sentence(&sentence) {
            Some(Sentence::Declaration(vs)) => declared = Some(vs),
            Some(Sentence::Preamble) => {}
            Some(Sentence::Correlation(a, b)) => {
                recognized += 1;
                correlations.push((a, b));
            }
            Some(Sentence::Independence(a, b, given)) => {
                recognized += 1;
                independencies.push((a, b, given));
            }
            None => diagnostics.push(sentence),
        }
    }
    if recognized == 0 {
        return Err(BenchError::EmptyPremise(text.to_string()));
    }
    let variables: BTreeSet<Variable> = match declared {
        Some(vs) => vs.into_iter().collect(),
        None => correlations
            .iter()
            .flat_map(|(a, b): &(Variable, Variable)| [a.clone(), b.clone()])
            .chain(independencies.iter().flat_map(
                |(a, b, g): &(Variable, Variable, Vec<Variable>)| {
                    [a.clone(), b.clone()].into_iter().chain(g.iter().cloned())
                },
            ))
            .collect(),
    };
    let mut statements = Vec::with_capacity(independencies.len());
    for (a, b, g) in independencies {
        statements.push(
            CiStatement::new(a, b, g).map_err(|e| BenchError::InvalidPremise(e.to_string()))?,
        );
    }
    let facts = PremiseFacts::new(variables, correlations, statements)
        .map_err(|e| BenchError::InvalidPremise(e.to_string()))?;
    Ok(ParsedPremise { facts, diagnostics })
}

/// Splits on sentence-final periods and on colons; drops empty pieces.
fn split_sentences(text: &str) -> Vec<String> {
    let normalized: String = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let mut out = Vec::new();
    let mut cur = String::new();
    let chars: Vec<char> = normalized.chars().collect();
    for (i, &c) in chars.iter().enumerate() {
        let boundary = match c {
            ':' => true,
            '.' => chars.get(i + 1).is_none_or(|n| n.is_whitespace()),
            _ => false,
        };
        if boundary {
            push_trimmed(&mut out, &cur);
            cur.clear();
        } else {
            cur.push(c);
        }
    }
    push_trimmed(&mut out, &cur);
    out
}

fn push_trimmed(out: &mut Vec<String>, s: &str) {
    let t = s.trim();
    if !t.is_empty() {
        out.push(t.to_string());
    }
}

fn strip_prefix_ci<'a>(s: &'a str, prefix: &str) -> Option<&'a str> {
    if s.len() >= prefix.len() && s[..prefix.len()].eq_ignore_ascii_case(prefix) {
        Some(&s[prefix.len()..])
    } else {
        None
    }
}

/// Case-insensitive search for `needle`, returning the byte offset.
fn find_ci(hay: &str, needle: &str) -> Option<usize> {
    hay.to_ascii_lowercase().find(&needle.to_ascii_lowercase())
}

fn parse_sentence(raw: &str) -> Option<Sentence> {
    let mut s = raw.trim();
    for lead in [
        "However,",
        "Also,",
        "Moreover,",
        "Furthermore,",
        "And ",
        "Premise:",
        "Premise",
    ] {
        if let Some(rest) = strip_prefix_ci(s, lead) {
            s = rest.trim();
        }
    }
    let lower = s.to_ascii_lowercase();
    if lower.contains("closed system of") {
        let at = find_ci(s, "variables")?;
        let list = s[at + "variables".len()..].trim_start_matches([',', ' ']);
        return parse_variable_list(list).map(Sentence::Declaration);
    }
    if lower.contains("statistical relations") {
        return Some(Sentence::Preamble);
    }

    // Conditioning clause, if any.
    let mut body = s;
    let mut given = Vec::new();
    for marker in [
        " conditioned on ",
        " conditional on ",
        " when given ",
        " given ",
    ] {
        if let Some(at) = find_ci(body, marker) {
            given = parse_variable_list(body[at + marker.len()..].trim())?;
            body = body[..at].trim();
            break;
        }
    }
    let body = body.trim_end_matches(',').trim();

    if let Some((a, b)) = split_binary(body, " correlates with ")
        .or_else(|| split_binary(body, " is correlated with "))
        .or_else(|| suffix_pair(body, " are correlated"))
    {
        return given.is_empty().then_some(Sentence::Correlation(a, b));
    }
    if let Some((a, b)) = split_binary(body, " is independent of ")
        .or_else(|| suffix_pair(body, " are independent"))
        .or_else(|| suffix_pair(body, " are independent of each other"))
    {
        return Some(Sentence::Independence(a, b, given));
    }
    None
}

/// `"X <phrase> Y"` with both sides single variables.
fn split_binary(s: &str, phrase: &str) -> Option<(Variable, Variable)> {
    let at = find_ci(s, phrase)?;
    let a = Variable::new(s[..at].trim()).ok()?;
    let b = Variable::new(s[at + phrase.len()..].trim()).ok()?;
    Some((a, b))
}

/// `"X and Y <suffix>"`.
fn suffix_pair(s: &str, suffix: &str) -> Option<(Variable, Variable)> {
    let lower = s.to_ascii_lowercase();
    if !lower.ends_with(suffix) {
        return None;
    }
    let head = &s[..s.len() - suffix.len()];
    let vs = parse_variable_list(head.trim())?;
    match vs.as_slice() {
        [a, b] => Some((a.clone(), b.clone())),
        _ => None,
    }
}

/// "A", "A and B", "A, B and C", "A, B, and C".
pub fn parse_variable_list(s: &str) -> Option<Vec<Variable>> {
    let s = s.trim().trim_end_matches('.');
    let mut out = Vec::new();
    for part in s.split(',') {
        for piece in part.split(" and ") {
            let p = piece.trim();
            let p = p.strip_prefix("and ").unwrap_or(p).trim();
            if p.is_empty() {
                continue;
            }
            if !is_identifier(p) {
                return None;
            }
            out.push(Variable::new(p).ok()?);
        }
    }
    (!out.is_empty()).then_some(out)
}

const DIRECTED_PHRASES: [(&str, RelationKind, usize); 9] = [
    (
        " is caused by something else which is caused by ",
        RelationKind::IsDescendant,
        2,
    ),
    (
        " causes something else which causes ",
        RelationKind::IsAncestor,
        2,
    ),
    (" is directly caused by ", RelationKind::IsChild, 1),
    (" is a direct effect of ", RelationKind::IsChild, 1),
    (" is a direct cause of ", RelationKind::IsParent, 1),
    (" directly causes ", RelationKind::IsParent, 1),
    (" directly affects ", RelationKind::IsParent, 1),
    (" is an ancestor of ", RelationKind::IsAncestor, 1),
    (" is a descendant of ", RelationKind::IsDescendant, 1),
];

pub fn parse_hypothesis(text: &str) -> Result<Hypothesis, BenchError> {
    let unknown = || BenchError::UnknownHypothesis(text.to_string());
    let mut s = text.trim();
    if let Some(rest) = strip_prefix_ci(s, "Hypothesis:") {
        s = rest.trim();
    }
    let s = s.trim_end_matches('.').trim();
    let lower = s.to_ascii_lowercase();

    let symmetric = if lower.contains("collider") || lower.contains("common effect") {
        Some(RelationKind::HasCollider)
    } else if lower.contains("confounder") || lower.contains("common cause") {
        Some(RelationKind::HasConfounder)
    } else {
        None
    };
    if let Some(kind) = symmetric {
        let at = lower.rfind(" of ").ok_or_else(unknown)?;
        let vs = parse_variable_list(&s[at + 4..]).ok_or_else(unknown)?;
        let [a, b] = <[Variable; 2]>::try_from(vs).map_err(|_| unknown())?;
        return Hypothesis::new(kind, a, b).map_err(|_| unknown());
    }
    for (phrase, kind, min_len) in DIRECTED_PHRASES {
        if let Some((a, b)) = split_binary(s, phrase) {
            return Hypothesis::with_min_path(kind, a, b, min_len).map_err(|_| unknown());
        }
    }
    Err(unknown())
}
