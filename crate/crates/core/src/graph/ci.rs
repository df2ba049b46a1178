use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dsep::{self, DSeparation};
use super::{bits, Dag, NodeMask, Variable};
use crate::error::GraphError;

/// A conditional-independence assertion `x ⊥ y | given`, stored with `x < y`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "RawCi")]
pub struct CiStatement {
    x: Variable,
    y: Variable,
    given: BTreeSet<Variable>,
}

#[derive(Deserialize)]
struct RawCi {
    x: Variable,
    y: Variable,
    #[serde(default)]
    given: BTreeSet<Variable>,
}

impl TryFrom<RawCi> for CiStatement {
    type Error = GraphError;

    fn try_from(r: RawCi) -> Result<Self, Self::Error> {
        CiStatement::new(r.x, r.y, r.given)
    }
}

impl CiStatement {
    /// Canonicalizes the pair order; rejects `x == y` and endpoints in the conditioning set.
    pub fn new(
        x: Variable,
        y: Variable,
        given: impl IntoIterator<Item = Variable>,
    ) -> Result<Self, GraphError> {
        if x == y {
            return Err(GraphError::InvalidInput(format!(
                "independence of {x} with itself"
            )));
        }
        let given: BTreeSet<Variable> = given.into_iter().collect();
        if given.contains(&x) || given.contains(&y) {
            return Err(GraphError::InvalidInput(format!(
                "conditioning set of {x} ⊥ {y} contains an endpoint"
            )));
        }
        let (x, y) = if x < y { (x, y) } else { (y, x) };
        Ok(CiStatement { x, y, given })
    }

    pub fn x(&self) -> &Variable {
        &self.x
    }

    pub fn y(&self) -> &Variable {
        &self.y
    }

    pub fn given(&self) -> &BTreeSet<Variable> {
        &self.given
    }

    pub fn pair(&self) -> (&Variable, &Variable) {
        (&self.x, &self.y)
    }

    pub fn is_marginal(&self) -> bool {
        self.given.is_empty()
    }

    /// Every variable the statement mentions.
    pub fn variables(&self) -> impl Iterator<Item = &Variable> {
        [&self.x, &self.y].into_iter().chain(self.given.iter())
    }
}

impl fmt::Display for CiStatement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ⊥ {}", self.x, self.y)?;
        if !self.given.is_empty() {
            let g: Vec<&str> = self.given.iter().map(Variable::name).collect();
            write!(f, " | {}", g.join(","))?;
        }
        Ok(())
    }
}

/// Index-level CI statement: pair `(x, y)` with `x < y` and a conditioning mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CiKey {
    pub x: u8,
    pub y: u8,
    pub given: NodeMask,
}

/// Every d-separation statement of `g` in index form, sorted.
///
/// Cheaper than [`ci_set_of`] and directly comparable between graphs over
/// the same node list.
pub fn ci_signature(g: &Dag) -> Vec<CiKey> {
    ci_signature_with(g, dsep::default_strategy())
}

pub(crate) fn ci_signature_with(g: &Dag, strategy: &dyn DSeparation) -> Vec<CiKey> {
    let n = g.len();
    let mut out = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if g.adjacent(x, y) {
                continue;
            }
            let rest = bits::full(n) & !(bits::bit(x) | bits::bit(y));
            for_each_subset(rest, |z| {
                if strategy.separated(g, x, y, z) {
                    out.push(CiKey {
                        x: x as u8,
                        y: y as u8,
                        given: z,
                    });
                }
            });
        }
    }
    out.sort_unstable();
    out
}

/// All subsets of `mask`, including the empty set and `mask` itself.
pub(crate) fn for_each_subset(mask: NodeMask, mut f: impl FnMut(NodeMask)) {
    let mut sub = mask;
    loop {
        f(sub);
        if sub == 0 {
            break;
        }
        sub = (sub - 1) & mask;
    }
}

/// All CI statements entailed by `g` via d-separation.
pub fn ci_set_of(g: &Dag) -> BTreeSet<CiStatement> {
    ci_set_with(g, dsep::default_strategy())
}

/// [`ci_set_of`] using a specific d-separation strategy.
pub fn ci_set_with(g: &Dag, strategy: &dyn DSeparation) -> BTreeSet<CiStatement> {
    keys_to_statements(g.nodes(), &ci_signature_with(g, strategy))
}

pub(crate) fn keys_to_statements(nodes: &[Variable], keys: &[CiKey]) -> BTreeSet<CiStatement> {
    keys.iter()
        .map(|k| CiStatement {
            x: nodes[k.x as usize].clone(),
            y: nodes[k.y as usize].clone(),
            given: bits::iter(k.given).map(|i| nodes[i].clone()).collect(),
        })
        .collect()
}
