use std::fmt;

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use super::dag::{check_sorted_unique, lookup, sorted_unique};
use super::{bits, Dag, NodeMask, Variable};
use crate::error::GraphError;

/// A partially directed graph: some edges directed, some undirected.
///
/// Holds both PC skeletons (all undirected) and CPDAGs. Each adjacent pair
/// carries exactly one edge, either directed one way or undirected.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Pdag {
    nodes: Vec<Variable>,
    out: Vec<NodeMask>,
    undirected: Vec<NodeMask>,
}

impl Pdag {
    pub fn new(
        nodes: impl IntoIterator<Item = Variable>,
        directed: &[(Variable, Variable)],
        undirected: &[(Variable, Variable)],
    ) -> Result<Self, GraphError> {
        let nodes = sorted_unique(nodes)?;
        let mut d = Vec::with_capacity(directed.len());
        for (a, b) in directed {
            d.push((lookup(&nodes, a)?, lookup(&nodes, b)?));
        }
        let mut u = Vec::with_capacity(undirected.len());
        for (a, b) in undirected {
            u.push((lookup(&nodes, a)?, lookup(&nodes, b)?));
        }
        Self::from_indices(nodes, &d, &u)
    }

    pub fn from_indices(
        nodes: Vec<Variable>,
        directed: &[(usize, usize)],
        undirected: &[(usize, usize)],
    ) -> Result<Self, GraphError> {
        check_sorted_unique(&nodes)?;
        let n = nodes.len();
        let mut p = Pdag {
            out: vec![0; n],
            undirected: vec![0; n],
            nodes,
        };
        let check = |p: &Pdag, a: usize, b: usize| -> Result<(), GraphError> {
            if a >= n || b >= n {
                return Err(GraphError::InvalidInput(format!(
                    "edge index ({a}, {b}) out of range"
                )));
            }
            if a == b {
                return Err(GraphError::SelfLoop(p.nodes[a].to_string()));
            }
            if p.is_adjacent(a, b) {
                return Err(GraphError::DuplicateEdge(
                    p.nodes[a].to_string(),
                    p.nodes[b].to_string(),
                ));
            }
            Ok(())
        };
        for &(a, b) in directed {
            check(&p, a, b)?;
            p.out[a] |= bits::bit(b);
        }
        for &(a, b) in undirected {
            check(&p, a, b)?;
            p.undirected[a] |= bits::bit(b);
            p.undirected[b] |= bits::bit(a);
        }
        Ok(p)
    }

    /// An all-undirected graph.
    pub fn skeleton(
        nodes: impl IntoIterator<Item = Variable>,
        edges: &[(Variable, Variable)],
    ) -> Result<Self, GraphError> {
        Self::new(nodes, &[], edges)
    }

    /// A PDAG with every edge directed as in `g`.
    pub fn from_dag(g: &Dag) -> Self {
        Pdag {
            nodes: g.nodes().to_vec(),
            out: (0..g.len()).map(|i| g.children(i)).collect(),
            undirected: vec![0; g.len()],
        }
    }

    /// The skeleton of `g`.
    pub fn skeleton_of(g: &Dag) -> Self {
        Pdag {
            nodes: g.nodes().to_vec(),
            out: vec![0; g.len()],
            undirected: (0..g.len()).map(|i| g.neighbors(i)).collect(),
        }
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

    pub fn require(&self, v: &Variable) -> Result<usize, GraphError> {
        lookup(&self.nodes, v)
    }

    pub fn has_directed(&self, a: usize, b: usize) -> bool {
        self.out[a] & bits::bit(b) != 0
    }

    pub fn has_undirected(&self, a: usize, b: usize) -> bool {
        self.undirected[a] & bits::bit(b) != 0
    }

    pub fn is_adjacent(&self, a: usize, b: usize) -> bool {
        self.has_directed(a, b) || self.has_directed(b, a) || self.has_undirected(a, b)
    }

    /// Targets of directed edges out of `i`.
    pub fn children(&self, i: usize) -> NodeMask {
        self.out[i]
    }

    /// Sources of directed edges into `i`.
    pub fn parents(&self, i: usize) -> NodeMask {
        (0..self.len())
            .filter(|&j| self.has_directed(j, i))
            .fold(0, |m, j| m | bits::bit(j))
    }

    pub fn undirected_neighbors(&self, i: usize) -> NodeMask {
        self.undirected[i]
    }

    pub fn adjacents(&self, i: usize) -> NodeMask {
        self.out[i] | self.undirected[i] | self.parents(i)
    }

    /// Turns the undirected edge `a - b` into `a -> b`.
    pub fn orient(&mut self, a: usize, b: usize) {
        debug_assert!(self.has_undirected(a, b));
        self.undirected[a] &= !bits::bit(b);
        self.undirected[b] &= !bits::bit(a);
        self.out[a] |= bits::bit(b);
    }

    pub fn directed_edges(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (a, &m) in self.out.iter().enumerate() {
            v.extend(bits::iter(m).map(|b| (a, b)));
        }
        v
    }

    /// Undirected edges as `(a, b)` with `a < b`, sorted.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        for (a, &m) in self.undirected.iter().enumerate() {
            v.extend(bits::iter(m).filter(|&b| b > a).map(|b| (a, b)));
        }
        v
    }

    /// All adjacent pairs `(a, b)` with `a < b`, sorted.
    pub fn adjacencies(&self) -> Vec<(usize, usize)> {
        let mut v: Vec<(usize, usize)> = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| (a.min(b), a.max(b)))
            .chain(self.undirected_edges())
            .collect();
        v.sort_unstable();
        v
    }

    pub fn named_directed(&self) -> Vec<(Variable, Variable)> {
        self.name_pairs(self.directed_edges())
    }

    pub fn named_undirected(&self) -> Vec<(Variable, Variable)> {
        self.name_pairs(self.undirected_edges())
    }

    pub fn named_adjacencies(&self) -> Vec<(Variable, Variable)> {
        self.name_pairs(self.adjacencies())
    }

    fn name_pairs(&self, v: Vec<(usize, usize)>) -> Vec<(Variable, Variable)> {
        v.into_iter()
            .map(|(a, b)| (self.nodes[a].clone(), self.nodes[b].clone()))
            .collect()
    }

    /// Colliders `x -> z <- y` made of directed edges with `x`, `y` non-adjacent; `x < y`.
    pub fn directed_v_structures(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for z in 0..self.len() {
            let pa: Vec<usize> = bits::iter(self.parents(z)).collect();
            for (i, &x) in pa.iter().enumerate() {
                for &y in &pa[i + 1..] {
                    if !self.is_adjacent(x, y) {
                        out.push((x, z, y));
                    }
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// True if the directed part alone contains a cycle.
    pub fn has_directed_cycle(&self) -> bool {
        super::dag::transitive_closure(&self.out).is_none()
    }

    /// The DAG this PDAG denotes when no undirected edge remains.
    pub fn to_dag(&self) -> Option<Dag> {
        if self.undirected.iter().any(|&m| m != 0) {
            return None;
        }
        Dag::from_children(self.nodes.clone(), self.out.clone()).ok()
    }

    pub fn is_fully_undirected(&self) -> bool {
        self.out.iter().all(|&m| m == 0)
    }
}

impl fmt::Debug for Pdag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let names: Vec<&str> = self.nodes.iter().map(Variable::name).collect();
        write!(f, "Pdag[{};", names.join(","))?;
        let mut parts: Vec<String> = self
            .directed_edges()
            .into_iter()
            .map(|(a, b)| format!("{}->{}", self.nodes[a], self.nodes[b]))
            .collect();
        parts.extend(
            self.undirected_edges()
                .into_iter()
                .map(|(a, b)| format!("{}-{}", self.nodes[a], self.nodes[b])),
        );
        write!(f, " {}]", parts.join(", "))
    }
}

impl Serialize for Pdag {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let pairs = |v: Vec<(Variable, Variable)>| -> Vec<[Variable; 2]> {
            v.into_iter().map(|(a, b)| [a, b]).collect()
        };
        let mut s = serializer.serialize_struct("Pdag", 3)?;
        s.serialize_field("nodes", &self.nodes)?;
        s.serialize_field("directed_edges", &pairs(self.named_directed()))?;
        s.serialize_field("undirected_edges", &pairs(self.named_undirected()))?;
        s.end()
    }
}
