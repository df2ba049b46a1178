//! Graph substrate: labeled DAGs and PDAGs, d-separation, enumeration,
//! isomorphism and Markov-equivalence classes.

mod ci;
mod dag;
pub mod dsep;
mod enumerate;
mod extensions;
mod iso;
mod mec;
mod pdag;
mod relation;
mod variable;

pub use ci::{ci_set_of, ci_set_with, ci_signature, CiKey, CiStatement};
pub use dag::Dag;
pub use dsep::{is_d_separated, DSeparation};
pub use enumerate::{enumerate_labeled_dags, enumerate_ordered_dags};
pub use extensions::consistent_extensions;
pub use iso::{are_isomorphic, dedup_isomorphic};
pub use mec::{cluster_mecs, full_mec_members, MecClass};
pub use pdag::Pdag;
pub use relation::{relation_holds, relation_holds_with, RelationKind};
pub use variable::{is_identifier, ordered_pair, var, Variable};

/// Node-set bitmask; bit `i` stands for the node at index `i`.
pub type NodeMask = u32;

/// Largest supported node count (one bit per node in a [`NodeMask`]).
pub const MAX_NODES: usize = 32;

pub(crate) mod bits {
    use super::NodeMask;

    #[inline]
    pub fn bit(i: usize) -> NodeMask {
        1 << i
    }

    /// Indices of set bits, ascending.
    pub fn iter(mut m: NodeMask) -> impl Iterator<Item = usize> {
        std::iter::from_fn(move || {
            if m == 0 {
                None
            } else {
                let i = m.trailing_zeros() as usize;
                m &= m - 1;
                Some(i)
            }
        })
    }

    pub fn full(n: usize) -> NodeMask {
        if n >= 32 {
            NodeMask::MAX
        } else {
            (1 << n) - 1
        }
    }
}
