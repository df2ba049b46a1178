//! Four-stage LLM pipeline for PC-style causal reasoning: prompt templates,
//! chat clients, structured-output validation with re-prompting, and batch
//! runners for the baseline, pipeline and oracle modes.

pub mod client;
pub mod config;
pub mod payload;
pub mod runner;
pub mod template;

pub use client::{
    build_client, detect_stage, ChatClient, ChatError, ChatMessage, ChatResponse, OpenAiClient,
    OracleClient, Role, ScriptedClient, TokenUsage, CLIENT_NAMES,
};
pub use config::ChatConfig;
pub use payload::{
    extract_and_validate, extract_json, oracle_payloads, GraphPayload, Payload, SkeletonPayload,
    VStructurePayload, ValidationError,
};
pub use runner::{
    mode, modes, read_run_records, run_baseline, run_batch, run_oracle, run_pipeline, run_stage,
    RunError, RunLog, RunMode, RunRecord, StageArtifact, REPROMPT_STRATEGY,
};
pub use template::{py_json, PromptTemplate, RenderError, Stage};
