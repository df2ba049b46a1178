use std::collections::BTreeSet;

use serde::ser::SerializeTuple;
use serde::{Serialize, Serializer};

use super::facts::{PremiseFacts, SeparationSets};
use crate::error::{GraphError, PcError};
use crate::graph::{bits, consistent_extensions, ordered_pair, Pdag, Variable};
use crate::hypothesis::Hypothesis;

/// An unshielded collider `x -> collider <- y`, with `x < y`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VStructure {
    pub x: Variable,
    pub collider: Variable,
    pub y: Variable,
}

impl VStructure {
    pub fn new(x: Variable, collider: Variable, y: Variable) -> Result<Self, GraphError> {
        if x == y || x == collider || y == collider {
            return Err(GraphError::InvalidInput(format!(
                "degenerate v-structure ({x}, {collider}, {y})"
            )));
        }
        let (x, y) = ordered_pair(x, y);
        Ok(VStructure { x, collider, y })
    }
}

/// Serialized as the `[x, z, y]` triple.
impl Serialize for VStructure {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut t = serializer.serialize_tuple(3)?;
        t.serialize_element(&self.x)?;
        t.serialize_element(&self.collider)?;
        t.serialize_element(&self.y)?;
        t.end()
    }
}

/// Stage 1: start from every correlated pair and drop each pair that any
/// independence statement separates, recording all of its separating sets.
pub fn build_skeleton(facts: &PremiseFacts) -> Result<(Pdag, SeparationSets), PcError> {
    let nodes: Vec<Variable> = facts.variables().iter().cloned().collect();
    let mut sepsets = SeparationSets::new();
    for s in facts.independencies() {
        for v in s.variables() {
            if !facts.variables().contains(v) {
                return Err(GraphError::UnknownVariable(v.to_string()).into());
            }
        }
        sepsets.insert(s.x().clone(), s.y().clone(), s.given().clone())?;
    }
    let edges: Vec<(Variable, Variable)> = facts
        .correlations()
        .iter()
        .filter(|(a, b)| !sepsets.contains_pair(a, b))
        .cloned()
        .collect();
    let skeleton = Pdag::skeleton(nodes, &edges)?;
    Ok((skeleton, sepsets))
}

/// Stage 2: unshielded triples `x - z - y` whose middle node is absent from
/// every recorded separating set of `(x, y)`. Sorted by `(x, collider, y)`.
///
/// A non-adjacent pair with no recorded separating set never yields a
/// collider, since there is no evidence to test the middle node against.
pub fn find_v_structures(skeleton: &Pdag, sepsets: &SeparationSets) -> Vec<VStructure> {
    let n = skeleton.len();
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if skeleton.is_adjacent(x, y) {
                continue;
            }
            let (vx, vy) = (skeleton.node(x), skeleton.node(y));
            let Some(sets) = sepsets.get(vx, vy) else {
                continue;
            };
            let common = skeleton.adjacents(x) & skeleton.adjacents(y);
            for z in bits::iter(common) {
                let vz = skeleton.node(z);
                if sets.iter().all(|s| !s.contains(vz)) {
                    out.push(VStructure {
                        x: vx.clone(),
                        collider: vz.clone(),
                        y: vy.clone(),
                    });
                }
            }
        }
    }
    out.sort();
    out
}

/// Stage 3: orient the colliders, then apply Meek rules R1-R4 to a fixpoint.
///
/// Undirected edges are scanned in sorted order on every pass, so the result
/// is reproducible. Fails if two colliders demand opposite orientations of
/// one edge, or a collider refers to a missing edge.
pub fn orient_meek(skeleton: &Pdag, v_structures: &[VStructure]) -> Result<Pdag, PcError> {
    let mut g = skeleton.clone();
    for v in v_structures {
        let x = g.require(&v.x)?;
        let z = g.require(&v.collider)?;
        let y = g.require(&v.y)?;
        if g.is_adjacent(x, y) {
            return Err(PcError::Inconsistent(format!(
                "v-structure ({}, {}, {}) is shielded",
                v.x, v.collider, v.y
            )));
        }
        for a in [x, y] {
            if g.has_directed(a, z) {
                continue;
            }
            if g.has_directed(z, a) {
                return Err(PcError::Inconsistent(format!(
                    "edge {}-{} must point both ways",
                    g.node(a),
                    g.node(z)
                )));
            }
            if !g.has_undirected(a, z) {
                return Err(PcError::Inconsistent(format!(
                    "v-structure edge {}-{} is not in the skeleton",
                    g.node(a),
                    g.node(z)
                )));
            }
            g.orient(a, z);
        }
    }
    if g.has_directed_cycle() {
        return Err(PcError::Inconsistent(
            "v-structures form a directed cycle".into(),
        ));
    }
    loop {
        let mut changed = false;
        for (a, b) in g.undirected_edges() {
            if !g.has_undirected(a, b) {
                continue;
            }
            let forward = compelled(&g, a, b);
            let backward = compelled(&g, b, a);
            match (forward, backward) {
                (true, true) => {
                    return Err(PcError::Inconsistent(format!(
                        "orientation rules force {}-{} both ways",
                        g.node(a),
                        g.node(b)
                    )))
                }
                (true, false) => g.orient(a, b),
                (false, true) => g.orient(b, a),
                (false, false) => continue,
            }
            changed = true;
        }
        if !changed {
            return Ok(g);
        }
    }
}

/// Whether some Meek rule compels the undirected edge `a - b` into `a -> b`.
fn compelled(g: &Pdag, a: usize, b: usize) -> bool {
    let n = g.len();
    let adj = |p: usize, q: usize| g.is_adjacent(p, q);
    // R1: c -> a, a - b, c and b non-adjacent.
    if bits::iter(g.parents(a)).any(|c| c != b && !adj(c, b)) {
        return true;
    }
    // R2: a -> c -> b, a - b.
    if bits::iter(g.children(a)).any(|c| g.has_directed(c, b)) {
        return true;
    }
    let und_a: Vec<usize> = bits::iter(g.undirected_neighbors(a))
        .filter(|&c| c != b)
        .collect();
    // R3: a - c -> b, a - d -> b, c and d non-adjacent.
    for (i, &c) in und_a.iter().enumerate() {
        if !g.has_directed(c, b) {
            continue;
        }
        if und_a[i + 1..]
            .iter()
            .any(|&d| g.has_directed(d, b) && !adj(c, d))
        {
            return true;
        }
    }
    // R4: a - k -> l -> b, a adjacent to l, k and b non-adjacent.
    for &k in &und_a {
        if adj(k, b) {
            continue;
        }
        for l in 0..n {
            if l != a && g.has_directed(k, l) && g.has_directed(l, b) && adj(a, l) {
                return true;
            }
        }
    }
    false
}

/// Stage 4: true iff the hypothesis holds in every consistent extension of `cpdag`.
pub fn evaluate_hypothesis(cpdag: &Pdag, h: &Hypothesis) -> Result<bool, PcError> {
    cpdag.require(h.x())?;
    cpdag.require(h.y())?;
    let extensions = consistent_extensions(cpdag);
    if extensions.is_empty() {
        return Err(PcError::Inconsistent(
            "no DAG is consistent with the oriented graph".into(),
        ));
    }
    for g in &extensions {
        if !h.holds_in(g)? {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Artifacts of all four stages for one sample.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct StageOutputs {
    pub skeleton: Pdag,
    pub sepsets: SeparationSets,
    pub v_structures: Vec<VStructure>,
    pub cpdag: Pdag,
    pub verdict: bool,
}

/// Runs stages 1-3, which do not depend on the hypothesis.
pub fn solve_structure(
    facts: &PremiseFacts,
) -> Result<(Pdag, SeparationSets, Vec<VStructure>, Pdag), PcError> {
    let (skeleton, sepsets) = build_skeleton(facts)?;
    let v_structures = find_v_structures(&skeleton, &sepsets);
    let cpdag = orient_meek(&skeleton, &v_structures)?;
    Ok((skeleton, sepsets, v_structures, cpdag))
}

/// The full four-stage procedure.
pub fn solve_sample(facts: &PremiseFacts, h: &Hypothesis) -> Result<StageOutputs, PcError> {
    let (skeleton, sepsets, v_structures, cpdag) = solve_structure(facts)?;
    for v in [h.x(), h.y()] {
        if !facts.variables().contains(v) {
            return Err(GraphError::UnknownVariable(v.to_string()).into());
        }
    }
    let verdict = evaluate_hypothesis(&cpdag, h)?;
    Ok(StageOutputs {
        skeleton,
        sepsets,
        v_structures,
        cpdag,
        verdict,
    })
}

/// Conditioning-set helper for callers building separation sets by hand.
pub fn given(vars: &[&Variable]) -> BTreeSet<Variable> {
    vars.iter().map(|v| (*v).clone()).collect()
}
