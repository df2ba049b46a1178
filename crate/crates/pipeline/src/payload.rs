//! Stage payloads: extraction from free-form model output, schema
//! validation and canonical normalization.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};
use serde_json::{json, Map, Value};
use thiserror::Error;

use pcdisco_core::graph::{ordered_pair, Pdag, Variable};
use pcdisco_core::pc::{SeparationSets, StageOutputs, VStructure};

use crate::template::Stage;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ValidationError {
    #[error("no JSON object found in the response")]
    NoJson,
    #[error("schema violation: {0}")]
    Schema(String),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("inconsistent answer: {0}")]
    Inconsistent(String),
}

type Pair = (Variable, Variable);

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkeletonPayload {
    pub nodes: Vec<Variable>,
    /// Unordered edges stored as `(a, b)` with `a < b`, sorted.
    pub edges: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VStructurePayload {
    /// Every separating set reported for a pair; keys have `a < b`.
    pub separation_sets: BTreeMap<Pair, Vec<BTreeSet<Variable>>>,
    pub v_structures: Vec<VStructure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GraphPayload {
    pub directed: Vec<Pair>,
    pub undirected: Vec<Pair>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Payload {
    Skeleton(SkeletonPayload),
    VStructures(VStructurePayload),
    Graph(GraphPayload),
    Verdict(bool),
}

impl Payload {
    pub fn verdict(&self) -> Option<bool> {
        match self {
            Payload::Verdict(b) => Some(*b),
            _ => None,
        }
    }

    /// The payload in the JSON shape the prompts ask for.
    pub fn to_value(&self) -> Value {
        let pairs = |ps: &[Pair]| -> Value {
            ps.iter()
                .map(|(a, b)| json!([a.name(), b.name()]))
                .collect()
        };
        match self {
            Payload::Skeleton(s) => json!({
                "nodes": s.nodes.iter().map(Variable::name).collect::<Vec<_>>(),
                "edges": pairs(&s.edges),
            }),
            Payload::VStructures(p) => {
                let mut sets = Map::new();
                for ((a, b), list) in &p.separation_sets {
                    let names = |s: &BTreeSet<Variable>| -> Value {
                        s.iter().map(|v| Value::from(v.name())).collect()
                    };
                    let v = match list.as_slice() {
                        [single] => names(single),
                        many => many.iter().map(names).collect(),
                    };
                    sets.insert(format!("{a},{b}"), v);
                }
                json!({
                    "separation_sets": sets,
                    "v_structures": p.v_structures.iter()
                        .map(|v| json!([v.x.name(), v.collider.name(), v.y.name()]))
                        .collect::<Vec<_>>(),
                })
            }
            Payload::Graph(g) => json!({
                "final_graph": {
                    "directed_edges": g.directed.iter()
                        .map(|(a, b)| json!({"from": a.name(), "to": b.name()}))
                        .collect::<Vec<_>>(),
                    "undirected_edges": pairs(&g.undirected),
                }
            }),
            Payload::Verdict(b) => json!({ "hypothesis_answer": b }),
        }
    }

    /// Schema check and normalization of an already-extracted JSON object.
    pub fn from_value(stage: Stage, v: &Value) -> Result<Payload, ValidationError> {
        let obj = v
            .as_object()
            .ok_or_else(|| schema("the answer must be a JSON object"))?;
        match stage {
            Stage::Skeleton => {
                let mut nodes = names(field(obj, "nodes")?, "nodes")?;
                nodes.sort();
                nodes.dedup();
                let edges = pair_list(field(obj, "edges")?, "edges")?;
                Ok(Payload::Skeleton(SkeletonPayload { nodes, edges }))
            }
            Stage::VStructures => {
                let mut separation_sets = BTreeMap::new();
                match field(obj, "separation_sets")? {
                    Value::Null => {}
                    Value::Object(m) => {
                        for (key, val) in m {
                            let pair = parse_key(key)?;
                            let sets = sepset_value(val, key)?;
                            for s in &sets {
                                if s.contains(&pair.0) || s.contains(&pair.1) {
                                    return Err(schema(format!(
                                        "separation set for \"{key}\" contains an endpoint"
                                    )));
                                }
                            }
                            let entry: &mut Vec<BTreeSet<Variable>> =
                                separation_sets.entry(pair).or_default();
                            entry.extend(sets);
                            entry.sort();
                            entry.dedup();
                        }
                    }
                    _ => return Err(schema("\"separation_sets\" must be an object")),
                }
                let items = array(field(obj, "v_structures")?, "v_structures")?;
                let mut v_structures = Vec::with_capacity(items.len());
                for item in items {
                    let t = names(item, "v_structures entry")?;
                    let [x, z, y] = <[Variable; 3]>::try_from(t)
                        .map_err(|_| schema("each v-structure must be a triple [X, Z, Y]"))?;
                    v_structures.push(VStructure::new(x, z, y).map_err(|e| schema(e.to_string()))?);
                }
                v_structures.sort();
                v_structures.dedup();
                Ok(Payload::VStructures(VStructurePayload {
                    separation_sets,
                    v_structures,
                }))
            }
            Stage::Meek => {
                let g = field(obj, "final_graph")?
                    .as_object()
                    .ok_or_else(|| schema("\"final_graph\" must be an object"))?;
                let mut directed = Vec::new();
                for item in array(field(g, "directed_edges")?, "directed_edges")? {
                    let (a, b) = match item {
                        Value::Object(e) => (name(field(e, "from")?)?, name(field(e, "to")?)?),
                        other => {
                            let t = names(other, "directed_edges entry")?;
                            <[Variable; 2]>::try_from(t)
                                .map(|[a, b]| (a, b))
                                .map_err(|_| schema("directed edges need \"from\" and \"to\""))?
                        }
                    };
                    if a == b {
                        return Err(schema(format!("self-loop on {a}")));
                    }
                    directed.push((a, b));
                }
                directed.sort();
                directed.dedup();
                let undirected = pair_list(field(g, "undirected_edges")?, "undirected_edges")?;
                for (a, b) in &directed {
                    if directed.binary_search(&(b.clone(), a.clone())).is_ok() {
                        return Err(ValidationError::Inconsistent(format!(
                            "edge {a}-{b} is directed both ways"
                        )));
                    }
                    if undirected
                        .binary_search(&ordered_pair(a.clone(), b.clone()))
                        .is_ok()
                    {
                        return Err(ValidationError::Inconsistent(format!(
                            "edge {a}-{b} is listed as both directed and undirected"
                        )));
                    }
                }
                Ok(Payload::Graph(GraphPayload {
                    directed,
                    undirected,
                }))
            }
            Stage::Hypothesis | Stage::Baseline => match field(obj, "hypothesis_answer")? {
                Value::Bool(b) => Ok(Payload::Verdict(*b)),
                Value::String(s) if s.eq_ignore_ascii_case("true") => Ok(Payload::Verdict(true)),
                Value::String(s) if s.eq_ignore_ascii_case("false") => Ok(Payload::Verdict(false)),
                _ => Err(schema("\"hypothesis_answer\" must be true or false")),
            },
        }
    }

    /// Every variable named by the payload.
    fn mentioned(&self) -> Vec<&Variable> {
        let mut out = Vec::new();
        match self {
            Payload::Skeleton(s) => {
                out.extend(&s.nodes);
                out.extend(s.edges.iter().flat_map(|(a, b)| [a, b]));
            }
            Payload::VStructures(p) => {
                for ((a, b), sets) in &p.separation_sets {
                    out.extend([a, b]);
                    out.extend(sets.iter().flatten());
                }
                out.extend(
                    p.v_structures
                        .iter()
                        .flat_map(|v| [&v.x, &v.collider, &v.y]),
                );
            }
            Payload::Graph(g) => {
                out.extend(
                    g.directed
                        .iter()
                        .chain(&g.undirected)
                        .flat_map(|(a, b)| [a, b]),
                );
            }
            Payload::Verdict(_) => {}
        }
        out
    }

    pub fn check_variables(&self, known: &BTreeSet<Variable>) -> Result<(), ValidationError> {
        match self.mentioned().into_iter().find(|v| !known.contains(*v)) {
            Some(v) => Err(ValidationError::UnknownNode(v.to_string())),
            None => Ok(()),
        }
    }

    pub fn stage_matches(&self, stage: Stage) -> bool {
        matches!(
            (self, stage),
            (Payload::Skeleton(_), Stage::Skeleton)
                | (Payload::VStructures(_), Stage::VStructures)
                | (Payload::Graph(_), Stage::Meek)
                | (Payload::Verdict(_), Stage::Hypothesis | Stage::Baseline)
        )
    }
}

/// Stage 1-3 payloads for the engine's structural artifacts.
pub fn structure_payloads(
    skeleton: &Pdag,
    sepsets: &SeparationSets,
    v_structures: &[VStructure],
    cpdag: &Pdag,
) -> [Payload; 3] {
    [
        Payload::Skeleton(SkeletonPayload {
            nodes: skeleton.nodes().to_vec(),
            edges: skeleton.named_undirected(),
        }),
        Payload::VStructures(VStructurePayload {
            separation_sets: sepsets
                .iter()
                .map(|(k, v)| (k.clone(), v.clone()))
                .collect(),
            v_structures: v_structures.to_vec(),
        }),
        Payload::Graph(GraphPayload {
            directed: cpdag.named_directed(),
            undirected: cpdag.named_undirected(),
        }),
    ]
}

/// The exact engine's artifacts as stage payloads, in pipeline order.
pub fn oracle_payloads(out: &StageOutputs) -> [Payload; 4] {
    let [s1, s2, s3] =
        structure_payloads(&out.skeleton, &out.sepsets, &out.v_structures, &out.cpdag);
    [s1, s2, s3, Payload::Verdict(out.verdict)]
}

fn schema(msg: impl Into<String>) -> ValidationError {
    ValidationError::Schema(msg.into())
}

fn field<'a>(obj: &'a Map<String, Value>, key: &str) -> Result<&'a Value, ValidationError> {
    obj.get(key)
        .ok_or_else(|| schema(format!("missing field \"{key}\"")))
}

fn array<'a>(v: &'a Value, what: &str) -> Result<&'a Vec<Value>, ValidationError> {
    v.as_array()
        .ok_or_else(|| schema(format!("\"{what}\" must be a list")))
}

fn name(v: &Value) -> Result<Variable, ValidationError> {
    let s = v
        .as_str()
        .ok_or_else(|| schema(format!("expected a node name, got {v}")))?;
    Variable::new(s.trim()).map_err(|_| ValidationError::UnknownNode(s.to_string()))
}

fn names(v: &Value, what: &str) -> Result<Vec<Variable>, ValidationError> {
    array(v, what)?.iter().map(name).collect()
}

/// Unordered pairs, canonicalized and deduplicated.
fn pair_list(v: &Value, what: &str) -> Result<Vec<Pair>, ValidationError> {
    let mut out = Vec::new();
    for item in array(v, what)? {
        let t = names(item, what)?;
        let [a, b] = <[Variable; 2]>::try_from(t)
            .map_err(|_| schema(format!("each entry of \"{what}\" must be a pair")))?;
        if a == b {
            return Err(schema(format!("self-loop on {a}")));
        }
        out.push(ordered_pair(a, b));
    }
    out.sort();
    out.dedup();
    Ok(out)
}

fn parse_key(key: &str) -> Result<Pair, ValidationError> {
    let parts: Vec<&str> = key.split(',').map(str::trim).collect();
    let [a, b] = parts.as_slice() else {
        return Err(schema(format!(
            "separation-set key \"{key}\" must look like \"A,C\""
        )));
    };
    let a = Variable::new(*a).map_err(|_| ValidationError::UnknownNode(a.to_string()))?;
    let b = Variable::new(*b).map_err(|_| ValidationError::UnknownNode(b.to_string()))?;
    if a == b {
        return Err(schema(format!(
            "separation-set key \"{key}\" repeats a node"
        )));
    }
    Ok(ordered_pair(a, b))
}

/// `null` or `[]` is the empty set, a list of names is one set, and a list
/// of lists is several sets for the same pair.
fn sepset_value(v: &Value, key: &str) -> Result<Vec<BTreeSet<Variable>>, ValidationError> {
    match v {
        Value::Null => Ok(vec![BTreeSet::new()]),
        Value::Array(items) if items.iter().all(Value::is_array) && !items.is_empty() => items
            .iter()
            .map(|s| names(s, key).map(|vs| vs.into_iter().collect()))
            .collect(),
        Value::Array(_) => Ok(vec![names(v, key)?.into_iter().collect()]),
        _ => Err(schema(format!(
            "separation set for \"{key}\" must be a list"
        ))),
    }
}

/// Finds the JSON object the model meant as its answer: the last fenced
/// block that parses as an object, else the last bare top-level object.
pub fn extract_json(raw: &str) -> Result<Value, ValidationError> {
    if let Some(v) = fenced_blocks(raw).into_iter().rev().find_map(|b| {
        serde_json::from_str::<Value>(b.trim())
            .ok()
            .filter(Value::is_object)
    }) {
        return Ok(v);
    }
    bare_objects(raw)
        .into_iter()
        .rev()
        .find_map(|b| serde_json::from_str::<Value>(b).ok())
        .ok_or(ValidationError::NoJson)
}

fn fenced_blocks(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let mut rest = raw;
    while let Some(open) = rest.find("```") {
        let after = &rest[open + 3..];
        // Skip an info string such as `json`.
        let body_start = after.find('\n').map_or(after.len(), |i| i + 1);
        let body = &after[body_start..];
        let Some(close) = body.find("```") else { break };
        out.push(&body[..close]);
        rest = &body[close + 3..];
    }
    out
}

/// Balanced `{...}` spans at nesting depth zero, string-aware.
fn bare_objects(raw: &str) -> Vec<&str> {
    let mut out = Vec::new();
    let (mut depth, mut start, mut in_str, mut escaped) = (0usize, 0usize, false, false);
    for (i, c) in raw.char_indices() {
        if in_str {
            match (escaped, c) {
                (true, _) => escaped = false,
                (false, '\\') => escaped = true,
                (false, '"') => in_str = false,
                _ => {}
            }
            continue;
        }
        match c {
            '"' if depth > 0 => in_str = true,
            '{' => {
                if depth == 0 {
                    start = i;
                }
                depth += 1;
            }
            '}' if depth > 0 => {
                depth -= 1;
                if depth == 0 {
                    out.push(&raw[start..=i]);
                }
            }
            _ => {}
        }
    }
    out
}

/// Extracts, schema-checks and normalizes a stage answer; every node must
/// belong to `known`.
pub fn extract_and_validate(
    stage: Stage,
    raw: &str,
    known: &BTreeSet<Variable>,
) -> Result<Payload, ValidationError> {
    let payload = Payload::from_value(stage, &extract_json(raw)?)?;
    payload.check_variables(known)?;
    Ok(payload)
}

/// On disk a payload is its prompt-schema JSON; the stage comes from the
/// surrounding artifact.
impl Serialize for Payload {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        self.to_value().serialize(serializer)
    }
}
