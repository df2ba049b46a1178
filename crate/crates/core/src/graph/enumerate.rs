use super::{bits, Dag, NodeMask, Variable};
use crate::error::GraphError;

/// Ordered pairs `(i, j)` with `i < j`, in lexicographic order.
fn upper_pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n)
        .flat_map(|i| (i + 1..n).map(move |j| (i, j)))
        .collect()
}

fn check_n(n: usize) -> Result<Vec<Variable>, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidInput(format!(
            "need at least 2 variables, got {n}"
        )));
    }
    Variable::letters(n)
}

/// Every subgraph of the complete order-respecting DAG on `n` letters
/// (edges only from earlier to later variables).
///
/// Yields `2^(n(n-1)/2)` graphs; graph `k` contains pair `p` (in
/// lexicographic pair order) iff bit `p` of `k` is set.
pub fn enumerate_ordered_dags(n: usize) -> Result<Vec<Dag>, GraphError> {
    let nodes = check_n(n)?;
    let pairs = upper_pairs(n);
    let m = pairs.len();
    if m >= 40 {
        return Err(GraphError::TooManyNodes(n));
    }
    let mut out = Vec::with_capacity(1usize << m);
    for mask in 0u64..(1u64 << m) {
        let mut children = vec![0 as NodeMask; n];
        for (p, &(i, j)) in pairs.iter().enumerate() {
            if mask >> p & 1 == 1 {
                children[i] |= bits::bit(j);
            }
        }
        out.push(Dag::from_children(nodes.clone(), children).expect("forward edges are acyclic"));
    }
    Ok(out)
}

/// Every labeled DAG on `n` letters: each pair is absent, forward or
/// backward, and cyclic assignments are dropped. 25 graphs for `n = 3`,
/// 543 for `n = 4`, 29281 for `n = 5`.
pub fn enumerate_labeled_dags(n: usize) -> Result<Vec<Dag>, GraphError> {
    let nodes = check_n(n)?;
    let pairs = upper_pairs(n);
    let mut out = Vec::new();
    let mut state = vec![0u8; pairs.len()];
    loop {
        let mut children = vec![0 as NodeMask; n];
        for (&(i, j), &s) in pairs.iter().zip(&state) {
            match s {
                1 => children[i] |= bits::bit(j),
                2 => children[j] |= bits::bit(i),
                _ => {}
            }
        }
        if let Ok(g) = Dag::from_children(nodes.clone(), children) {
            out.push(g);
        }
        // Base-3 increment.
        let mut k = 0;
        loop {
            if k == state.len() {
                return Ok(out);
            }
            state[k] += 1;
            if state[k] == 3 {
                state[k] = 0;
                k += 1;
            } else {
                break;
            }
        }
    }
}
