use super::{bits, Dag, NodeMask, Pdag};

/// Every DAG obtained by orienting the undirected edges of `p` such that the
/// result is acyclic and has no v-structure beyond those already directed in
/// `p`. Sorted; empty when `p` admits no such completion.
pub fn consistent_extensions(p: &Pdag) -> Vec<Dag> {
    let n = p.len();
    let undirected = p.undirected_edges();
    let base: Vec<NodeMask> = (0..n).map(|i| p.children(i)).collect();
    let allowed = p.directed_v_structures();
    let mut out = Vec::new();
    if undirected.len() >= 32 {
        // 2^32 orientations; not supported.
        return out;
    }
    for mask in 0u64..(1u64 << undirected.len()) {
        let mut children = base.clone();
        for (k, &(a, b)) in undirected.iter().enumerate() {
            if mask >> k & 1 == 1 {
                children[b] |= bits::bit(a);
            } else {
                children[a] |= bits::bit(b);
            }
        }
        let Ok(g) = Dag::from_children(p.nodes().to_vec(), children) else {
            continue;
        };
        if g.v_structures() == allowed {
            out.push(g);
        }
    }
    out.sort();
    out
}
