use std::collections::{BTreeMap, BTreeSet, HashSet};

use serde::Serialize;

use super::ci::{ci_signature, for_each_subset, keys_to_statements};
use super::dsep::{self, DSeparation};
use super::{bits, CiKey, CiStatement, Dag, NodeMask, Pdag, Variable};
use crate::error::GraphError;

/// A Markov equivalence class.
#[derive(Debug, Clone, Serialize)]
pub struct MecClass {
    /// The input graphs that fell into this class, sorted.
    pub members: Vec<Dag>,
    pub ci_signature: BTreeSet<CiStatement>,
    /// Shared skeleton, with an edge directed iff every labeled DAG carrying
    /// this CI signature orients it the same way.
    pub cpdag: Pdag,
}

/// Partitions `gs` by CI signature.
///
/// Each class's CPDAG is computed from the full set of labeled DAGs with
/// the class signature, found by brute force (see [`full_mec_members`]),
/// not only from the graphs passed in. Classes are ordered by their
/// smallest member.
pub fn cluster_mecs(gs: &[Dag]) -> Result<Vec<MecClass>, GraphError> {
    let Some(first) = gs.first() else {
        return Ok(Vec::new());
    };
    let nodes = first.nodes().to_vec();
    if let Some(bad) = gs.iter().find(|g| g.nodes() != nodes.as_slice()) {
        return Err(GraphError::InvalidInput(format!(
            "graphs over different node sets: {:?} vs {:?}",
            first.nodes(),
            bad.nodes()
        )));
    }
    let mut groups: BTreeMap<Vec<CiKey>, Vec<Dag>> = BTreeMap::new();
    for g in gs {
        groups.entry(ci_signature(g)).or_default().push(g.clone());
    }
    let mut classes: Vec<MecClass> = groups
        .into_iter()
        .map(|(sig, mut members)| {
            members.sort();
            let everyone = members_by_keys(&nodes, &sig);
            MecClass {
                cpdag: common_orientation(&nodes, &everyone),
                ci_signature: keys_to_statements(&nodes, &sig),
                members,
            }
        })
        .collect();
    classes.sort_by(|a, b| a.members[0].cmp(&b.members[0]));
    Ok(classes)
}

/// All labeled DAGs over `nodes` whose d-separation statements are exactly `ci`.
///
/// Adjacency is fixed by the CI set (a pair is adjacent iff no statement
/// separates it), so only orientations of that skeleton are tried.
pub fn full_mec_members(
    nodes: &[Variable],
    ci: &BTreeSet<CiStatement>,
) -> Result<Vec<Dag>, GraphError> {
    let nodes = super::dag::sorted_unique(nodes.iter().cloned())?;
    let mut keys = Vec::with_capacity(ci.len());
    for s in ci {
        let x = super::dag::lookup(&nodes, s.x())?;
        let y = super::dag::lookup(&nodes, s.y())?;
        let mut given = 0;
        for v in s.given() {
            given |= bits::bit(super::dag::lookup(&nodes, v)?);
        }
        keys.push(CiKey {
            x: x as u8,
            y: y as u8,
            given,
        });
    }
    keys.sort_unstable();
    Ok(members_by_keys(&nodes, &keys))
}

fn members_by_keys(nodes: &[Variable], sig: &[CiKey]) -> Vec<Dag> {
    let n = nodes.len();
    let separated: HashSet<(u8, u8)> = sig.iter().map(|k| (k.x, k.y)).collect();
    let edges: Vec<(usize, usize)> = (0..n)
        .flat_map(|x| (x + 1..n).map(move |y| (x, y)))
        .filter(|&(x, y)| !separated.contains(&(x as u8, y as u8)))
        .collect();
    let target: HashSet<CiKey> = sig.iter().copied().collect();
    let strategy = dsep::default_strategy();
    let mut out = Vec::new();
    for mask in 0u64..(1u64 << edges.len()) {
        let mut children = vec![0 as NodeMask; n];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if mask >> k & 1 == 1 {
                children[b] |= bits::bit(a);
            } else {
                children[a] |= bits::bit(b);
            }
        }
        let Ok(g) = Dag::from_children(nodes.to_vec(), children) else {
            continue;
        };
        if matches_signature(&g, &target, strategy) {
            out.push(g);
        }
    }
    out.sort();
    out
}

/// Checks `g`'s non-adjacent pairs against `target`, bailing out at the first difference.
fn matches_signature(g: &Dag, target: &HashSet<CiKey>, strategy: &dyn DSeparation) -> bool {
    let n = g.len();
    for x in 0..n {
        for y in x + 1..n {
            if g.adjacent(x, y) {
                continue;
            }
            let rest = bits::full(n) & !(bits::bit(x) | bits::bit(y));
            let mut ok = true;
            for_each_subset(rest, |z| {
                if ok {
                    let key = CiKey {
                        x: x as u8,
                        y: y as u8,
                        given: z,
                    };
                    ok = strategy.separated(g, x, y, z) == target.contains(&key);
                }
            });
            if !ok {
                return false;
            }
        }
    }
    true
}

/// Skeleton of the (equal-skeleton) graphs with edges directed where all agree.
fn common_orientation(nodes: &[Variable], graphs: &[Dag]) -> Pdag {
    let Some(first) = graphs.first() else {
        return Pdag::from_indices(nodes.to_vec(), &[], &[]).expect("valid nodes");
    };
    let mut directed = Vec::new();
    let mut undirected = Vec::new();
    for (a, b) in first.edges() {
        if graphs.iter().all(|g| g.has_edge(a, b)) {
            directed.push((a, b));
        } else {
            undirected.push((a.min(b), a.max(b)));
        }
    }
    Pdag::from_indices(nodes.to_vec(), &directed, &undirected).expect("skeleton edges are unique")
}
