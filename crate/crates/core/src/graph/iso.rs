use std::collections::HashMap;

use super::{bits, Dag};
use crate::error::GraphError;

/// Per-node (in-degree, out-degree), sorted: a cheap isomorphism invariant.
type DegreeProfile = Vec<(u32, u32)>;

fn degree_profile(g: &Dag) -> DegreeProfile {
    let mut v: Vec<(u32, u32)> = (0..g.len())
        .map(|i| (g.parents(i).count_ones(), g.children(i).count_ones()))
        .collect();
    v.sort_unstable();
    v
}

/// Directed-graph isomorphism by backtracking over node permutations,
/// pruned by degree compatibility. Node names are ignored.
pub fn are_isomorphic(a: &Dag, b: &Dag) -> bool {
    if a.len() != b.len() || a.edge_count() != b.edge_count() {
        return false;
    }
    if degree_profile(a) != degree_profile(b) {
        return false;
    }
    let mut map = vec![usize::MAX; a.len()];
    extend_mapping(a, b, 0, 0, &mut map)
}

fn extend_mapping(a: &Dag, b: &Dag, i: usize, used: u32, map: &mut Vec<usize>) -> bool {
    if i == a.len() {
        return true;
    }
    let (ain, aout) = (a.parents(i).count_ones(), a.children(i).count_ones());
    for j in 0..b.len() {
        if used & bits::bit(j) != 0 {
            continue;
        }
        if b.parents(j).count_ones() != ain || b.children(j).count_ones() != aout {
            continue;
        }
        // Edges between i and already-mapped nodes must agree.
        let consistent = (0..i).all(|k| {
            a.has_edge(k, i) == b.has_edge(map[k], j) && a.has_edge(i, k) == b.has_edge(j, map[k])
        });
        if !consistent {
            continue;
        }
        map[i] = j;
        if extend_mapping(a, b, i + 1, used | bits::bit(j), map) {
            return true;
        }
    }
    map[i] = usize::MAX;
    false
}

/// One representative per isomorphism class, the smallest member by the
/// [`Dag`] ordering; output sorted.
pub fn dedup_isomorphic(gs: &[Dag]) -> Result<Vec<Dag>, GraphError> {
    if let Some(first) = gs.first() {
        if let Some(bad) = gs.iter().find(|g| g.len() != first.len()) {
            return Err(GraphError::InvalidInput(format!(
                "mixed node counts: {} and {}",
                first.len(),
                bad.len()
            )));
        }
    }
    let mut buckets: HashMap<(usize, DegreeProfile), Vec<usize>> = HashMap::new();
    let mut reps: Vec<Dag> = Vec::new();
    for g in gs {
        let key = (g.edge_count(), degree_profile(g));
        let bucket = buckets.entry(key).or_default();
        match bucket
            .iter()
            .copied()
            .find(|&r| are_isomorphic(&reps[r], g))
        {
            Some(r) => {
                if *g < reps[r] {
                    reps[r] = g.clone();
                }
            }
            None => {
                bucket.push(reps.len());
                reps.push(g.clone());
            }
        }
    }
    reps.sort();
    Ok(reps)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{enumerate_ordered_dags, Variable};

    fn dag(n: usize, edges: &[(usize, usize)]) -> Dag {
        Dag::from_indices(Variable::letters(n).unwrap(), edges.iter().copied()).unwrap()
    }

    /// Oracle: try every relabeling.
    fn brute_iso(a: &Dag, b: &Dag) -> bool {
        fn perms(n: usize) -> Vec<Vec<usize>> {
            if n == 0 {
                return vec![vec![]];
            }
            let mut out = Vec::new();
            for p in perms(n - 1) {
                for pos in 0..n {
                    let mut q = p.clone();
                    q.insert(pos, n - 1);
                    out.push(q);
                }
            }
            out
        }
        perms(a.len()).iter().any(|p| a.permuted(p) == *b)
    }

    #[test]
    fn three_nodes_give_six_shapes() {
        let all = enumerate_ordered_dags(3).unwrap();
        let reps = dedup_isomorphic(&all).unwrap();
        assert_eq!(reps.len(), 6);
        // Brute-force class count over 3! relabelings.
        let mut classes: Vec<&Dag> = Vec::new();
        for g in &all {
            if !classes.iter().any(|c| brute_iso(c, g)) {
                classes.push(g);
            }
        }
        assert_eq!(classes.len(), 6);
    }

    #[test]
    fn chain_and_collider_differ() {
        let chain = dag(3, &[(0, 1), (1, 2)]);
        let collider = dag(3, &[(0, 2), (1, 2)]);
        assert!(!are_isomorphic(&chain, &collider));
        assert_eq!(dedup_isomorphic(&[chain, collider]).unwrap().len(), 2);
    }

    #[test]
    fn identical_graphs_collapse() {
        let g = dag(3, &[(0, 1)]);
        assert_eq!(dedup_isomorphic(&[g.clone(), g]).unwrap().len(), 1);
    }

    #[test]
    fn matches_brute_force_on_four_nodes() {
        let all = enumerate_ordered_dags(4).unwrap();
        for a in all.iter().step_by(5) {
            for b in all.iter().step_by(3) {
                assert_eq!(are_isomorphic(a, b), brute_iso(a, b), "{a:?} vs {b:?}");
            }
        }
    }

    #[test]
    fn rejects_mixed_sizes() {
        assert!(dedup_isomorphic(&[dag(2, &[]), dag(3, &[])]).is_err());
    }
}
