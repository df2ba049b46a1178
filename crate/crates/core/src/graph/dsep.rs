//! d-separation.
//!
//! Two interchangeable strategies sit behind [`DSeparation`]:
//!
//! * [`PathEnumeration`] walks every simple path between the two endpoints
//!   and applies the blocking rules to each consecutive triple: a chain or
//!   fork blocks when its middle node is conditioned on, a collider blocks
//!   when neither the middle node nor any of its descendants is conditioned
//!   on. This is the reference implementation.
//! * [`Reachability`] is the linear-time "Bayes ball" traversal, kept as an
//!   independent cross-check.
//!
//! Strategies are registered by name and can be looked up with [`strategy`].

use std::collections::BTreeSet;

use super::{bits, Dag, NodeMask, Variable};
use crate::error::GraphError;

pub trait DSeparation: Send + Sync {
    fn name(&self) -> &'static str;

    /// Whether `x` and `y` are d-separated by the node set `z`.
    ///
    /// Callers guarantee `x != y` and that neither endpoint is in `z`.
    fn separated(&self, g: &Dag, x: usize, y: usize, z: NodeMask) -> bool;
}

/// Explicit simple-path enumeration with per-triple blocking.
#[derive(Debug, Default, Clone, Copy)]
pub struct PathEnumeration;

/// Reachability ("Bayes ball") traversal.
#[derive(Debug, Default, Clone, Copy)]
pub struct Reachability;

static STRATEGIES: [&dyn DSeparation; 2] = [&PathEnumeration, &Reachability];

/// Every registered strategy, reference implementation first.
pub fn strategies() -> &'static [&'static dyn DSeparation] {
    &STRATEGIES
}

/// Looks up a strategy by name (`"paths"` or `"reachability"`).
pub fn strategy(name: &str) -> Option<&'static dyn DSeparation> {
    STRATEGIES.iter().copied().find(|s| s.name() == name)
}

/// The default strategy.
pub fn default_strategy() -> &'static dyn DSeparation {
    &PathEnumeration
}

/// Named-variable d-separation query using the default strategy.
pub fn is_d_separated(
    g: &Dag,
    x: &Variable,
    y: &Variable,
    z: &BTreeSet<Variable>,
) -> Result<bool, GraphError> {
    let xi = g.require(x)?;
    let yi = g.require(y)?;
    if xi == yi {
        return Err(GraphError::InvalidInput(format!(
            "query endpoints coincide: {x}"
        )));
    }
    let mut mask = 0;
    for v in z {
        mask |= bits::bit(g.require(v)?);
    }
    if mask & (bits::bit(xi) | bits::bit(yi)) != 0 {
        return Err(GraphError::InvalidInput(
            "conditioning set contains a query endpoint".into(),
        ));
    }
    Ok(default_strategy().separated(g, xi, yi, mask))
}

impl DSeparation for PathEnumeration {
    fn name(&self) -> &'static str {
        "paths"
    }

    fn separated(&self, g: &Dag, x: usize, y: usize, z: NodeMask) -> bool {
        let mut path = vec![x];
        !has_open_path(g, y, z, &mut path, bits::bit(x))
    }
}

/// Extends `path` depth-first; returns true once an unblocked path reaches `target`.
///
/// A prefix whose latest interior triple blocks is abandoned, since every
/// completion of it is blocked too.
fn has_open_path(
    g: &Dag,
    target: usize,
    z: NodeMask,
    path: &mut Vec<usize>,
    visited: NodeMask,
) -> bool {
    let last = *path.last().expect("non-empty path");
    for next in bits::iter(g.neighbors(last) & !visited) {
        if path.len() >= 2 {
            let prev = path[path.len() - 2];
            if triple_blocks(g, prev, last, next, z) {
                continue;
            }
        }
        if next == target {
            return true;
        }
        path.push(next);
        let open = has_open_path(g, target, z, path, visited | bits::bit(next));
        path.pop();
        if open {
            return true;
        }
    }
    false
}

/// Blocking rule for the consecutive triple `a - b - c` on a path.
fn triple_blocks(g: &Dag, a: usize, b: usize, c: usize, z: NodeMask) -> bool {
    let collider = g.has_edge(a, b) && g.has_edge(c, b);
    if collider {
        let closure = bits::bit(b) | g.descendants(b);
        closure & z == 0
    } else {
        z & bits::bit(b) != 0
    }
}

impl DSeparation for Reachability {
    fn name(&self) -> &'static str {
        "reachability"
    }

    fn separated(&self, g: &Dag, x: usize, y: usize, z: NodeMask) -> bool {
        let n = g.len();
        // Nodes that are in z or have a descendant in z: colliders there are open.
        let mut opens_collider: NodeMask = 0;
        for v in 0..n {
            if (bits::bit(v) | g.descendants(v)) & z != 0 {
                opens_collider |= bits::bit(v);
            }
        }
        // State: (node, arrived from a child = "up", from a parent = "down").
        let mut seen_up: NodeMask = 0;
        let mut seen_down: NodeMask = 0;
        let mut stack = vec![(x, true)];
        while let Some((v, up)) = stack.pop() {
            let seen = if up { &mut seen_up } else { &mut seen_down };
            if *seen & bits::bit(v) != 0 {
                continue;
            }
            *seen |= bits::bit(v);
            if v == y {
                return false;
            }
            let in_z = z & bits::bit(v) != 0;
            if up {
                if !in_z {
                    stack.extend(bits::iter(g.parents(v)).map(|p| (p, true)));
                    stack.extend(bits::iter(g.children(v)).map(|c| (c, false)));
                }
            } else {
                if !in_z {
                    stack.extend(bits::iter(g.children(v)).map(|c| (c, false)));
                }
                if opens_collider & bits::bit(v) != 0 {
                    stack.extend(bits::iter(g.parents(v)).map(|p| (p, true)));
                }
            }
        }
        true
    }
}
