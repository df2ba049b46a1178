//! Chat-completion clients.
//!
//! Every client implements [`ChatClient`]. The bundled ones are registered by
//! name: `"oracle"` answers from the exact PC engine, `"openai"` talks to an
//! OpenAI-compatible HTTP endpoint, and `"scripted"` replays canned replies
//! from a fixture.

use std::collections::BTreeMap;
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use pcdisco_bench::{parse_hypothesis, parse_premise};
use pcdisco_core::pc::{solve_sample, solve_structure};

use crate::config::ChatConfig;
use crate::payload::{structure_payloads, Payload};
use crate::template::{py_json, Stage};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    pub content: String,
}

impl ChatMessage {
    pub fn new(role: Role, content: impl Into<String>) -> Self {
        ChatMessage {
            role,
            content: content.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenUsage {
    pub prompt: u64,
    pub completion: u64,
}

impl TokenUsage {
    pub fn total(&self) -> u64 {
        self.prompt + self.completion
    }
}

impl std::ops::AddAssign for TokenUsage {
    fn add_assign(&mut self, o: TokenUsage) {
        self.prompt += o.prompt;
        self.completion += o.completion;
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChatResponse {
    pub content: String,
    /// Separate reasoning trace, for endpoints that expose one.
    pub reasoning: Option<String>,
    pub usage: TokenUsage,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChatError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("unexpected response: {0}")]
    Protocol(String),
}

pub trait ChatClient: Send + Sync {
    fn name(&self) -> &str;

    fn complete(&self, messages: &[ChatMessage]) -> Result<ChatResponse, ChatError>;
}

/// Names accepted by [`build_client`].
pub const CLIENT_NAMES: [&str; 3] = ["oracle", "openai", "scripted"];

/// Builds a registered client. `scripted` reads its replies from
/// `cfg.fixture`.
pub fn build_client(name: &str, cfg: &ChatConfig) -> Result<Box<dyn ChatClient>, String> {
    match name {
        "oracle" => Ok(Box::new(OracleClient)),
        "openai" => Ok(Box::new(OpenAiClient::new(cfg)?)),
        "scripted" => {
            let path = cfg
                .fixture
                .as_ref()
                .ok_or("the scripted client needs a fixture file")?;
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("cannot read fixture {}: {e}", path.display()))?;
            let v: Value = serde_json::from_str(&text)
                .map_err(|e| format!("fixture {} is not JSON: {e}", path.display()))?;
            Ok(Box::new(ScriptedClient::from_fixture(&v)?))
        }
        other => Err(format!(
            "unknown client {other:?}; expected one of {CLIENT_NAMES:?}"
        )),
    }
}

fn word_count(s: &str) -> u64 {
    s.split_whitespace().count() as u64
}

fn first_user_prompt(messages: &[ChatMessage]) -> Option<&str> {
    // The original prompt is the first user turn; later user turns are
    // corrective follow-ups.
    messages
        .iter()
        .find(|m| m.role == Role::User)
        .map(|m| m.content.as_str())
}

/// Which stage template produced `prompt`.
pub fn detect_stage(prompt: &str) -> Option<Stage> {
    Stage::ALL
        .into_iter()
        .find(|s| prompt.starts_with(&s.template().static_prefix()))
}

/// Value of the last `"\n<label>: "` line in `prompt`.
fn labeled_line<'a>(prompt: &'a str, label: &str, last: bool) -> Option<&'a str> {
    let marker = format!("\n{label}: ");
    let at = if last {
        prompt.rfind(&marker)?
    } else {
        prompt.find(&marker)?
    };
    let rest = &prompt[at + marker.len()..];
    Some(rest.split('\n').next().unwrap_or(rest).trim())
}

/// Deterministic stand-in for a model: reads the premise (and hypothesis)
/// back out of the rendered prompt, runs the exact engine and answers the
/// stage's question in a fenced JSON block. Token counts are word counts.
#[derive(Debug, Default, Clone, Copy)]
pub struct OracleClient;

impl OracleClient {
    fn answer(prompt: &str) -> Result<Payload, String> {
        let stage = detect_stage(prompt).ok_or("prompt does not match any stage template")?;
        let premise = labeled_line(prompt, "Premise", false).ok_or("no premise line")?;
        let facts = parse_premise(premise).map_err(|e| e.to_string())?.facts;
        if matches!(stage, Stage::Baseline | Stage::Hypothesis) {
            let text = labeled_line(prompt, "Hypothesis", true).ok_or("no hypothesis line")?;
            let h = parse_hypothesis(text).map_err(|e| e.to_string())?;
            let out = solve_sample(&facts, &h).map_err(|e| e.to_string())?;
            return Ok(Payload::Verdict(out.verdict));
        }
        let (skeleton, sepsets, v_structures, cpdag) =
            solve_structure(&facts).map_err(|e| e.to_string())?;
        let [s1, s2, s3] = structure_payloads(&skeleton, &sepsets, &v_structures, &cpdag);
        Ok(match stage {
            Stage::Skeleton => s1,
            Stage::VStructures => s2,
            _ => s3,
        })
    }
}

impl ChatClient for OracleClient {
    fn name(&self) -> &str {
        "oracle"
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<ChatResponse, ChatError> {
        let prompt = first_user_prompt(messages).unwrap_or("");
        let content = match Self::answer(prompt) {
            Ok(p) => format!(
                "```json\n{}\n```",
                serde_json::to_string_pretty(&p.to_value()).expect("payload values serialize")
            ),
            Err(reason) => format!("I could not read the premise ({reason})."),
        };
        let prompt_words: u64 = messages.iter().map(|m| word_count(&m.content)).sum();
        Ok(ChatResponse {
            usage: TokenUsage {
                prompt: prompt_words,
                completion: word_count(&content),
            },
            content,
            reasoning: None,
        })
    }
}

#[derive(Debug)]
enum Script {
    /// Replies handed out in call order across all conversations.
    Sequence(Mutex<std::collections::VecDeque<String>>),
    /// Per-stage replies indexed by attempt number within a conversation;
    /// the last reply repeats.
    ByStage(BTreeMap<Stage, Vec<String>>),
}

/// Replays canned replies.
///
/// The stateless per-stage form is deterministic under parallel runs. The
/// sequence form is meant for single-conversation tests.
#[derive(Debug)]
pub struct ScriptedClient {
    script: Script,
}

impl ScriptedClient {
    pub fn sequence<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        ScriptedClient {
            script: Script::Sequence(Mutex::new(replies.into_iter().map(Into::into).collect())),
        }
    }

    pub fn by_stage(replies: BTreeMap<Stage, Vec<String>>) -> Self {
        ScriptedClient {
            script: Script::ByStage(replies),
        }
    }

    /// A JSON array (sequence) or an object mapping stage names to a reply
    /// or a list of replies.
    pub fn from_fixture(v: &Value) -> Result<Self, String> {
        let as_replies = |v: &Value| -> Result<Vec<String>, String> {
            match v {
                Value::String(s) => Ok(vec![s.clone()]),
                Value::Array(items) => items
                    .iter()
                    .map(|i| {
                        i.as_str()
                            .map(str::to_string)
                            .ok_or("replies must be strings".to_string())
                    })
                    .collect(),
                _ => Err("replies must be a string or a list of strings".into()),
            }
        };
        match v {
            Value::Array(_) => Ok(Self::sequence(as_replies(v)?)),
            Value::Object(m) => {
                let mut map = BTreeMap::new();
                for (k, v) in m {
                    let stage: Stage = k.parse()?;
                    let replies = as_replies(v)?;
                    if replies.is_empty() {
                        return Err(format!("no replies for stage {k}"));
                    }
                    map.insert(stage, replies);
                }
                Ok(Self::by_stage(map))
            }
            _ => Err("fixture must be a list of replies or an object keyed by stage".into()),
        }
    }
}

impl ChatClient for ScriptedClient {
    fn name(&self) -> &str {
        "scripted"
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<ChatResponse, ChatError> {
        let content = match &self.script {
            Script::Sequence(q) => q
                .lock()
                .expect("script lock")
                .pop_front()
                .ok_or_else(|| ChatError::Transport("script exhausted".into()))?,
            Script::ByStage(map) => {
                let prompt = first_user_prompt(messages).unwrap_or("");
                let stage = detect_stage(prompt)
                    .ok_or_else(|| ChatError::Protocol("prompt matches no stage".into()))?;
                let replies = map.get(&stage).ok_or_else(|| {
                    ChatError::Transport(format!("no scripted reply for {stage}"))
                })?;
                let attempt = messages
                    .iter()
                    .filter(|m| m.role == Role::Assistant)
                    .count();
                replies[attempt.min(replies.len() - 1)].clone()
            }
        };
        let prompt_words: u64 = messages.iter().map(|m| word_count(&m.content)).sum();
        Ok(ChatResponse {
            usage: TokenUsage {
                prompt: prompt_words,
                completion: word_count(&content),
            },
            content,
            reasoning: None,
        })
    }
}

/// OpenAI-compatible `POST {endpoint}/chat/completions`.
pub struct OpenAiClient {
    agent: ureq::Agent,
    url: String,
    model: String,
    temperature: Option<f64>,
    api_key: Option<String>,
}

impl OpenAiClient {
    pub fn new(cfg: &ChatConfig) -> Result<Self, String> {
        let endpoint = cfg.endpoint.as_deref().ok_or("no endpoint configured")?;
        let model = cfg.model.clone().ok_or("no model configured")?;
        let api_key = std::env::var(&cfg.api_key_env)
            .ok()
            .filter(|k| !k.is_empty());
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(cfg.timeout_secs)))
            .http_status_as_error(false)
            .build()
            .into();
        Ok(OpenAiClient {
            agent,
            url: format!("{}/chat/completions", endpoint.trim_end_matches('/')),
            model,
            temperature: cfg.temperature,
            api_key,
        })
    }

    pub fn request_body(&self, messages: &[ChatMessage]) -> Value {
        let mut body = json!({ "model": self.model, "messages": messages });
        if let Some(t) = self.temperature {
            body["temperature"] = json!(t);
        }
        body
    }
}

/// Reads content, optional reasoning and usage from a chat-completions reply.
pub fn parse_completion(v: &Value) -> Result<ChatResponse, ChatError> {
    let message = v
        .pointer("/choices/0/message")
        .ok_or_else(|| ChatError::Protocol("no choices[0].message".into()))?;
    let content = message
        .get("content")
        .and_then(Value::as_str)
        .unwrap_or_default()
        .to_string();
    let reasoning = ["reasoning_content", "reasoning"]
        .iter()
        .find_map(|k| message.get(*k).and_then(Value::as_str))
        .map(str::to_string);
    let count = |k: &str| {
        v.pointer(&format!("/usage/{k}"))
            .and_then(Value::as_u64)
            .unwrap_or(0)
    };
    Ok(ChatResponse {
        content,
        reasoning,
        usage: TokenUsage {
            prompt: count("prompt_tokens"),
            completion: count("completion_tokens"),
        },
    })
}

impl ChatClient for OpenAiClient {
    fn name(&self) -> &str {
        "openai"
    }

    fn complete(&self, messages: &[ChatMessage]) -> Result<ChatResponse, ChatError> {
        let mut req = self.agent.post(&self.url);
        if let Some(key) = &self.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        let mut resp = req
            .send_json(self.request_body(messages))
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        let status = resp.status().as_u16();
        let body = resp
            .body_mut()
            .read_to_string()
            .map_err(|e| ChatError::Transport(e.to_string()))?;
        if !(200..300).contains(&status) {
            return Err(ChatError::Http { status, body });
        }
        let v: Value = serde_json::from_str(&body)
            .map_err(|e| ChatError::Protocol(format!("invalid JSON body: {e}")))?;
        parse_completion(&v)
    }
}

/// Renders a payload the way a well-behaved model would, for fixtures.
pub fn fenced(p: &Payload) -> String {
    format!("```json\n{}\n```", py_json(&p.to_value()))
}
