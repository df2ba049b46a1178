//! Scoring for causal-discovery runs: binary classification metrics,
//! stage-wise set F1 against the exact engine, bootstrap intervals and
//! reasoning-trace statistics.

pub mod bootstrap;
pub mod error;
pub mod metrics;
pub mod profile;
pub mod stages;
pub mod trace;

pub use bootstrap::{bootstrap_f1, percentile, Bootstrap};
pub use error::EvalError;
pub use metrics::{classification_metrics, Confusion, EvalReport};
pub use profile::{failure_profile, ClassProfile, FailureProfile};
pub use stages::{payloads_of, stage_counts, stage_f1, EdgeItem, SetCounts, StagePayloads};
pub use trace::{revisit_error_profile, trace_stats, trace_stats_with, TraceConfig, TraceStats};
