use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{relation_holds_with, Dag, RelationKind, Variable};

/// A causal claim about two variables.
///
/// Symmetric kinds (collider, confounder) keep `x < y`. `min_path_len` only
/// matters for ancestor/descendant claims; a value of 2 encodes the
/// indirect-cause reading ("causes something else which causes").
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawHypothesis")]
pub struct Hypothesis {
    kind: RelationKind,
    x: Variable,
    y: Variable,
    #[serde(skip_serializing_if = "is_one")]
    min_path_len: usize,
}

fn is_one(v: &usize) -> bool {
    *v == 1
}

fn one() -> usize {
    1
}

#[derive(Deserialize)]
struct RawHypothesis {
    kind: RelationKind,
    x: Variable,
    y: Variable,
    #[serde(default = "one")]
    min_path_len: usize,
}

impl TryFrom<RawHypothesis> for Hypothesis {
    type Error = GraphError;

    fn try_from(r: RawHypothesis) -> Result<Self, Self::Error> {
        Hypothesis::with_min_path(r.kind, r.x, r.y, r.min_path_len)
    }
}

impl Hypothesis {
    pub fn new(kind: RelationKind, x: Variable, y: Variable) -> Result<Self, GraphError> {
        Self::with_min_path(kind, x, y, 1)
    }

    pub fn with_min_path(
        kind: RelationKind,
        x: Variable,
        y: Variable,
        min_path_len: usize,
    ) -> Result<Self, GraphError> {
        if x == y {
            return Err(GraphError::InvalidInput(format!(
                "hypothesis relates {x} to itself"
            )));
        }
        if min_path_len == 0 || (min_path_len > 1 && !kind.is_path_relation()) {
            return Err(GraphError::InvalidInput(format!(
                "path length {min_path_len} does not apply to {kind}"
            )));
        }
        let (x, y) = if kind.is_symmetric() && y < x {
            (y, x)
        } else {
            (x, y)
        };
        Ok(Hypothesis {
            kind,
            x,
            y,
            min_path_len,
        })
    }

    pub fn kind(&self) -> RelationKind {
        self.kind
    }

    pub fn x(&self) -> &Variable {
        &self.x
    }

    pub fn y(&self) -> &Variable {
        &self.y
    }

    pub fn min_path_len(&self) -> usize {
        self.min_path_len
    }

    /// Whether the claim is true of a single DAG.
    pub fn holds_in(&self, g: &Dag) -> Result<bool, GraphError> {
        relation_holds_with(g, self.kind, &self.x, &self.y, self.min_path_len)
    }
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({}, {})", self.kind, self.x, self.y)?;
        if self.min_path_len > 1 {
            write!(f, "[len>={}]", self.min_path_len)?;
        }
        Ok(())
    }
}
