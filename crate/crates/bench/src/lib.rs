//! Benchmark samples: exhaustive generation over small DAGs, premise and
//! hypothesis verbalization, and lenient loading of external datasets.

pub mod dataset;
pub mod error;
pub mod text;

pub use dataset::{
    audit_labels, generate_dataset, load_dataset, split_input, summarize, write_jsonl, AuditReport,
    DatasetSummary, GenerateConfig, LoadReport, RowDiagnostic, Sample,
};
pub use error::BenchError;
pub use text::{
    parse_hypothesis, parse_premise, verbalize_hypothesis, verbalize_premise, ParsedPremise,
};
