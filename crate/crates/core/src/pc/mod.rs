//! Exact PC algorithm over oracle CI statements: skeleton, colliders, Meek
//! orientation and hypothesis evaluation across the equivalence class.

mod facts;
mod stages;

pub use facts::{PremiseFacts, SeparationSets};
pub use stages::{
    build_skeleton, evaluate_hypothesis, find_v_structures, given, orient_meek, solve_sample,
    solve_structure, StageOutputs, VStructure,
};
