use std::cmp::Ordering;
use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::{bits, NodeMask, Variable, MAX_NODES};
use crate::error::GraphError;

/// A labeled directed acyclic graph.
///
/// Nodes are kept sorted by name; all index-based accessors refer to that
/// order. Adjacency is stored as bitmasks, which keeps the exhaustive
/// enumerations used throughout the crate cheap.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Dag {
    nodes: Vec<Variable>,
    children: Vec<NodeMask>,
    parents: Vec<NodeMask>,
    descendants: Vec<NodeMask>,
}

impl Dag {
    /// Builds a DAG from variables and named edges, validating every invariant.
    pub fn new(
        nodes: impl IntoIterator<Item = Variable>,
        edges: &[(Variable, Variable)],
    ) -> Result<Self, GraphError> {
        let nodes = sorted_unique(nodes)?;
        let mut indexed = Vec::with_capacity(edges.len());
        for (a, b) in edges {
            indexed.push((lookup(&nodes, a)?, lookup(&nodes, b)?));
        }
        Self::from_indices(nodes, indexed)
    }

    /// Builds a DAG from a sorted, duplicate-free node list and index edges.
    pub fn from_indices(
        nodes: Vec<Variable>,
        edges: impl IntoIterator<Item = (usize, usize)>,
    ) -> Result<Self, GraphError> {
        check_sorted_unique(&nodes)?;
        let n = nodes.len();
        let mut children = vec![0 as NodeMask; n];
        for (a, b) in edges {
            if a >= n || b >= n {
                return Err(GraphError::InvalidInput(format!(
                    "edge index ({a}, {b}) out of range"
                )));
            }
            if a == b {
                return Err(GraphError::SelfLoop(nodes[a].to_string()));
            }
            if children[a] & bits::bit(b) != 0 {
                return Err(GraphError::DuplicateEdge(
                    nodes[a].to_string(),
                    nodes[b].to_string(),
                ));
            }
            children[a] |= bits::bit(b);
        }
        Self::from_children(nodes, children)
    }

    /// Builds a DAG from child bitmasks; rejects cycles.
    pub(crate) fn from_children(
        nodes: Vec<Variable>,
        children: Vec<NodeMask>,
    ) -> Result<Self, GraphError> {
        let descendants = transitive_closure(&children).ok_or(GraphError::Cycle)?;
        let n = nodes.len();
        let mut parents = vec![0 as NodeMask; n];
        for (a, &ch) in children.iter().enumerate() {
            for b in bits::iter(ch) {
                parents[b] |= bits::bit(a);
            }
        }
        Ok(Dag {
            nodes,
            children,
            parents,
            descendants,
        })
    }

    /// The graph with no edges.
    pub fn empty(nodes: impl IntoIterator<Item = Variable>) -> Result<Self, GraphError> {
        Self::new(nodes, &[])
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[Variable] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &Variable {
        &self.nodes[i]
    }

    pub fn index_of(&self, v: &Variable) -> Option<usize> {
        self.nodes.binary_search(v).ok()
    }

    /// Like [`Dag::index_of`] but reports unknown variables as an error.
    pub fn require(&self, v: &Variable) -> Result<usize, GraphError> {
        lookup(&self.nodes, v)
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.children[a] & bits::bit(b) != 0
    }

    pub fn adjacent(&self, a: usize, b: usize) -> bool {
        self.has_edge(a, b) || self.has_edge(b, a)
    }

    pub fn children(&self, i: usize) -> NodeMask {
        self.children[i]
    }

    pub fn parents(&self, i: usize) -> NodeMask {
        self.parents[i]
    }

    /// Strict descendants of `i` (never contains `i` itself).
    pub fn descendants(&self, i: usize) -> NodeMask {
        self.descendants[i]
    }

    pub fn neighbors(&self, i: usize) -> NodeMask {
        self.children[i] | self.parents[i]
    }

    pub fn edge_count(&self) -> usize {
        self.children.iter().map(|m| m.count_ones() as usize).sum()
    }

    /// Edges as index pairs, sorted.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(self.edge_count());
        for (a, &ch) in self.children.iter().enumerate() {
            out.extend(bits::iter(ch).map(|b| (a, b)));
        }
        out
    }

    /// Edges as variable pairs, sorted.
    pub fn named_edges(&self) -> Vec<(Variable, Variable)> {
        self.edges()
            .into_iter()
            .map(|(a, b)| (self.nodes[a].clone(), self.nodes[b].clone()))
            .collect()
    }

    /// Unshielded colliders `(x, z, y)` with `x < y`, sorted.
    pub fn v_structures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for z in 0..self.len() {
            let pa: Vec<usize> = bits::iter(self.parents[z]).collect();
            for (i, &x) in pa.iter().enumerate() {
                for &y in &pa[i + 1..] {
                    if !self.adjacent(x, y) {
                        out.push((x, z, y));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Relabels the graph: node `i` takes the position `perm[i]`. Names stay
    /// attached to positions, so only the structure moves.
    pub fn permuted(&self, perm: &[usize]) -> Dag {
        assert_eq!(perm.len(), self.len(), "permutation length");
        let mut children = vec![0 as NodeMask; self.len()];
        for (a, &ch) in self.children.iter().enumerate() {
            for b in bits::iter(ch) {
                children[perm[a]] |= bits::bit(perm[b]);
            }
        }
        Dag::from_children(self.nodes.clone(), children).expect("permutation preserves acyclicity")
    }

    /// Topological order (ties broken by index).
    pub fn topological_order(&self) -> Vec<usize> {
        let n = self.len();
        let mut placed: NodeMask = 0;
        let mut order = Vec::with_capacity(n);
        while order.len() < n {
            let next = (0..n)
                .find(|&i| placed & bits::bit(i) == 0 && self.parents[i] & !placed == 0)
                .expect("acyclic");
            placed |= bits::bit(next);
            order.push(next);
        }
        order
    }
}

impl Ord for Dag {
    fn cmp(&self, other: &Self) -> Ordering {
        self.nodes
            .cmp(&other.nodes)
            .then_with(|| self.edge_count().cmp(&other.edge_count()))
            .then_with(|| self.edges().cmp(&other.edges()))
    }
}

impl PartialOrd for Dag {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Debug for Dag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Dag[")?;
        let names: Vec<&str> = self.nodes.iter().map(Variable::name).collect();
        write!(f, "{}", names.join(","))?;
        write!(f, ";")?;
        for (k, (a, b)) in self.edges().into_iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, " {}->{}", self.nodes[a], self.nodes[b])?;
        }
        write!(f, "]")
    }
}

impl Serialize for Dag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("Dag", 2)?;
        s.serialize_field("nodes", &self.nodes)?;
        let edges: Vec<[&Variable; 2]> = self
            .edges()
            .into_iter()
            .map(|(a, b)| [&self.nodes[a], &self.nodes[b]])
            .collect();
        s.serialize_field("edges", &edges)?;
        s.end()
    }
}

/// Descendant sets for every node, or `None` if the child relation has a cycle.
pub(crate) fn transitive_closure(children: &[NodeMask]) -> Option<Vec<NodeMask>> {
    let n = children.len();
    let mut desc = children.to_vec();
    // Bit-parallel Warshall.
    for k in 0..n {
        let kb = bits::bit(k);
        for i in 0..n {
            if desc[i] & kb != 0 {
                desc[i] |= desc[k];
            }
        }
    }
    if (0..n).any(|i| desc[i] & bits::bit(i) != 0) {
        None
    } else {
        Some(desc)
    }
}

pub(crate) fn sorted_unique(
    nodes: impl IntoIterator<Item = Variable>,
) -> Result<Vec<Variable>, GraphError> {
    let mut nodes: Vec<Variable> = nodes.into_iter().collect();
    nodes.sort();
    check_sorted_unique(&nodes)?;
    Ok(nodes)
}

pub(crate) fn check_sorted_unique(nodes: &[Variable]) -> Result<(), GraphError> {
    if nodes.len() > MAX_NODES {
        return Err(GraphError::TooManyNodes(nodes.len()));
    }
    for w in nodes.windows(2) {
        match w[0].cmp(&w[1]) {
            Ordering::Less => {}
            Ordering::Equal => return Err(GraphError::DuplicateVariable(w[0].to_string())),
            Ordering::Greater => {
                return Err(GraphError::InvalidInput("node list is not sorted".into()))
            }
        }
    }
    Ok(())
}

pub(crate) fn lookup(nodes: &[Variable], v: &Variable) -> Result<usize, GraphError> {
    nodes
        .binary_search(v)
        .map_err(|_| GraphError::UnknownVariable(v.to_string()))
}
