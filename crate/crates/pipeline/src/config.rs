use std::path::PathBuf;

use serde::{Deserialize, Deserializer, Serialize};

/// Endpoint, sampling and retry settings shared by every client and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChatConfig {
    /// Base URL of an OpenAI-compatible API, e.g. `https://api.openai.com/v1`.
    pub endpoint: Option<String>,
    pub model: Option<String>,
    /// `None` leaves temperature out of the request entirely. In config
    /// files write `temperature = "none"`.
    #[serde(deserialize_with = "temperature")]
    pub temperature: Option<f64>,
    pub max_retries: u32,
    pub timeout_secs: f64,
    pub parallelism: usize,
    /// Base delay before retrying a transport failure; doubles each time.
    pub backoff_ms: u64,
    /// Environment variable holding the API key.
    pub api_key_env: String,
    pub system_prompt: Option<String>,
    /// Reply fixture for the scripted client.
    pub fixture: Option<PathBuf>,
}

impl Default for ChatConfig {
    fn default() -> Self {
        ChatConfig {
            endpoint: None,
            model: None,
            temperature: Some(0.1),
            max_retries: 2,
            timeout_secs: 300.0,
            parallelism: 4,
            backoff_ms: 500,
            api_key_env: "OPENAI_API_KEY".into(),
            system_prompt: None,
            fixture: None,
        }
    }
}

fn temperature<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum T {
        Num(f64),
        Word(String),
    }
    match Option::<T>::deserialize(d)? {
        None => Ok(None),
        Some(T::Num(t)) => Ok(Some(t)),
        Some(T::Word(w)) if w.eq_ignore_ascii_case("none") => Ok(None),
        Some(T::Word(w)) => Err(serde::de::Error::custom(format!(
            "invalid temperature {w:?}"
        ))),
    }
}

impl ChatConfig {
    pub fn validate(&self) -> Result<(), String> {
        if let Some(t) = self.temperature {
            if !(0.0..=2.0).contains(&t) {
                return Err(format!("temperature {t} is outside [0, 2]"));
            }
        }
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        if self.timeout_secs.is_nan() || self.timeout_secs <= 0.0 {
            return Err("timeout must be positive".into());
        }
        Ok(())
    }
}
