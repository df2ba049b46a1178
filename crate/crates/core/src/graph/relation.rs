use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{bits, Dag, Variable};
use crate::error::GraphError;

/// The six causal relations a hypothesis can assert between `x` and `y`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RelationKind {
    /// Edge `x -> y`.
    IsParent,
    /// Edge `y -> x`.
    IsChild,
    /// Directed path `x ~> y`.
    IsAncestor,
    /// Directed path `y ~> x`.
    IsDescendant,
    /// Some `z` with `x -> z <- y`.
    HasCollider,
    /// Some `z` with `x <- z -> y`.
    HasConfounder,
}

impl RelationKind {
    pub const ALL: [RelationKind; 6] = [
        RelationKind::IsParent,
        RelationKind::IsChild,
        RelationKind::IsAncestor,
        RelationKind::IsDescendant,
        RelationKind::HasCollider,
        RelationKind::HasConfounder,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::IsParent => "is-parent",
            RelationKind::IsChild => "is-child",
            RelationKind::IsAncestor => "is-ancestor",
            RelationKind::IsDescendant => "is-descendant",
            RelationKind::HasCollider => "has-collider",
            RelationKind::HasConfounder => "has-confounder",
        }
    }

    /// Collider and confounder relations do not depend on argument order.
    pub fn is_symmetric(self) -> bool {
        matches!(
            self,
            RelationKind::HasCollider | RelationKind::HasConfounder
        )
    }

    /// Whether a minimum path length applies to this kind.
    pub fn is_path_relation(self) -> bool {
        matches!(self, RelationKind::IsAncestor | RelationKind::IsDescendant)
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RelationKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('_', "-");
        RelationKind::ALL
            .into_iter()
            .find(|k| {
                k.as_str() == norm
                    || k.as_str().trim_start_matches("is-") == norm
                    || k.as_str().trim_start_matches("has-") == norm
            })
            .ok_or_else(|| GraphError::InvalidInput(format!("unknown relation {s:?}")))
    }
}

/// Whether `rel` holds between `x` and `y` in `g`.
pub fn relation_holds(
    g: &Dag,
    rel: RelationKind,
    x: &Variable,
    y: &Variable,
) -> Result<bool, GraphError> {
    relation_holds_with(g, rel, x, y, 1)
}

/// [`relation_holds`] with a minimum directed-path length for the ancestor
/// and descendant relations (`2` means "through at least one intermediate").
pub fn relation_holds_with(
    g: &Dag,
    rel: RelationKind,
    x: &Variable,
    y: &Variable,
    min_path_len: usize,
) -> Result<bool, GraphError> {
    let xi = g.require(x)?;
    let yi = g.require(y)?;
    if xi == yi {
        return Err(GraphError::InvalidInput(format!(
            "relation of {x} with itself"
        )));
    }
    Ok(holds_indexed(g, rel, xi, yi, min_path_len))
}

pub(crate) fn holds_indexed(
    g: &Dag,
    rel: RelationKind,
    x: usize,
    y: usize,
    min_len: usize,
) -> bool {
    match rel {
        RelationKind::IsParent => g.has_edge(x, y),
        RelationKind::IsChild => g.has_edge(y, x),
        RelationKind::IsAncestor => longest_path(g, x, y).is_some_and(|l| l >= min_len.max(1)),
        RelationKind::IsDescendant => longest_path(g, y, x).is_some_and(|l| l >= min_len.max(1)),
        RelationKind::HasCollider => g.children(x) & g.children(y) != 0,
        RelationKind::HasConfounder => g.parents(x) & g.parents(y) != 0,
    }
}

/// Length of the longest directed path `from ~> to`, if any.
fn longest_path(g: &Dag, from: usize, to: usize) -> Option<usize> {
    if g.descendants(from) & bits::bit(to) == 0 {
        return None;
    }
    let mut best: Vec<Option<usize>> = vec![None; g.len()];
    best[from] = Some(0);
    for v in g.topological_order() {
        let Some(d) = best[v] else { continue };
        for c in bits::iter(g.children(v)) {
            best[c] = Some(best[c].map_or(d + 1, |b| b.max(d + 1)));
        }
    }
    best[to]
}
