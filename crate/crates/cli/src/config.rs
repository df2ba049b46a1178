use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::Deserialize;

use pcdisco_eval::TraceConfig;
use pcdisco_pipeline::ChatConfig;

/// Contents of a `--config` TOML file. API keys are never read from here;
/// `chat.api_key_env` names the environment variable instead.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub chat: ChatConfig,
    pub traces: TraceConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig::default());
        };
        let text =
            std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }
}

/// Client selection and chat settings; each flag overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct ClientArgs {
    /// Answer every prompt with the exact engine instead of a model.
    #[arg(long, conflicts_with_all = ["mock", "client"])]
    pub oracle: bool,
    /// Replay replies from a JSON fixture (array, or object keyed by stage).
    #[arg(long, value_name = "FIXTURE", conflicts_with = "client")]
    pub mock: Option<PathBuf>,
    /// Registered client name: oracle, openai or scripted.
    #[arg(long)]
    pub client: Option<String>,
    #[arg(long)]
    pub endpoint: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    /// Sampling temperature, or `none` to leave it out of requests.
    #[arg(long)]
    pub temperature: Option<String>,
    #[arg(long)]
    pub max_retries: Option<u32>,
    /// Per-request timeout in seconds.
    #[arg(long)]
    pub timeout: Option<f64>,
    #[arg(long, short = 'j')]
    pub parallelism: Option<usize>,
    #[arg(long)]
    pub backoff_ms: Option<u64>,
    /// Environment variable holding the API key.
    #[arg(long)]
    pub api_key_env: Option<String>,
    #[arg(long)]
    pub system_prompt: Option<String>,
}

impl ClientArgs {
    /// Applies flag overrides and returns the client name to build.
    pub fn resolve(&self, base: &ChatConfig) -> anyhow::Result<(String, ChatConfig)> {
        let mut cfg = base.clone();
        if let Some(v) = &self.endpoint {
            cfg.endpoint = Some(v.clone());
        }
        if let Some(v) = &self.model {
            cfg.model = Some(v.clone());
        }
        if let Some(t) = &self.temperature {
            cfg.temperature = if t.eq_ignore_ascii_case("none") {
                None
            } else {
                Some(
                    t.parse()
                        .with_context(|| format!("invalid temperature {t:?}"))?,
                )
            };
        }
        if let Some(v) = self.max_retries {
            cfg.max_retries = v;
        }
        if let Some(v) = self.timeout {
            cfg.timeout_secs = v;
        }
        if let Some(v) = self.parallelism {
            cfg.parallelism = v;
        }
        if let Some(v) = self.backoff_ms {
            cfg.backoff_ms = v;
        }
        if let Some(v) = &self.api_key_env {
            cfg.api_key_env = v.clone();
        }
        if let Some(v) = &self.system_prompt {
            cfg.system_prompt = Some(v.clone());
        }
        let name = if self.oracle {
            "oracle".to_string()
        } else if let Some(f) = &self.mock {
            cfg.fixture = Some(f.clone());
            // Sequential fixtures are consumed in order; keep it that way.
            cfg.parallelism = 1;
            "scripted".to_string()
        } else if let Some(c) = &self.client {
            c.clone()
        } else if cfg.endpoint.is_some() {
            "openai".to_string()
        } else {
            bail!("no endpoint configured; pass --oracle, --mock FIXTURE or --endpoint URL");
        };
        cfg.validate().map_err(anyhow::Error::msg)?;
        Ok((name, cfg))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file() {
        let file: FileConfig = toml::from_str(
            "seed = 9\n[chat]\nendpoint = \"http://x/v1\"\nmodel = \"m\"\ntemperature = \"none\"\n\
             [traces]\nmarkers = [\"Hmm\"]\n",
        )
        .unwrap();
        assert_eq!(file.seed, Some(9));
        assert_eq!(file.traces.markers, ["Hmm"]);
        assert!(file.traces.case_insensitive);
        let (name, cfg) = ClientArgs::default().resolve(&file.chat).unwrap();
        assert_eq!((name.as_str(), cfg.temperature), ("openai", None));

        let args = ClientArgs {
            model: Some("other".into()),
            temperature: Some("0.3".into()),
            ..Default::default()
        };
        let (_, cfg) = args.resolve(&file.chat).unwrap();
        assert_eq!(
            (cfg.model.as_deref(), cfg.temperature),
            (Some("other"), Some(0.3))
        );
    }

    #[test]
    fn secrets_are_not_config() {
        assert!(toml::from_str::<FileConfig>("[chat]\napi_key = \"sk-123\"\n").is_err());
    }

    #[test]
    fn needs_a_client() {
        assert!(ClientArgs::default()
            .resolve(&ChatConfig::default())
            .is_err());
        let mock = ClientArgs {
            mock: Some("f.json".into()),
            ..Default::default()
        };
        let (name, cfg) = mock.resolve(&ChatConfig::default()).unwrap();
        assert_eq!((name.as_str(), cfg.parallelism), ("scripted", 1));
        let bad = ClientArgs {
            oracle: true,
            temperature: Some("hot".into()),
            ..Default::default()
        };
        assert!(bad.resolve(&ChatConfig::default()).is_err());
    }
}
