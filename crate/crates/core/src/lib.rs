//! Causal-discovery core: labeled graphs, d-separation, Markov equivalence
//! classes and an exact, deterministic PC engine.

pub mod error;
pub mod graph;
pub mod hypothesis;
pub mod pc;

pub use error::{GraphError, PcError};
pub use hypothesis::Hypothesis;
