use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::layers::FilterConfig;
use crate::llm::{BackendKind, Client, GenerationParams, HttpLimits, LlmError};
use crate::metrics::MetricConfig;
use crate::prompt::Ablation;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BackendName {
    Http,
    Replay,
    #[default]
    Template,
}

impl std::str::FromStr for BackendName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "http" => Ok(BackendName::Http),
            "replay" => Ok(BackendName::Replay),
            "template" => Ok(BackendName::Template),
            other => Err(format!("unknown backend '{other}' (expected http, replay or template)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Json,
    Csv,
    Markdown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HttpSettings {
    pub endpoint: String,
    pub model: String,
    pub max_in_flight: usize,
    pub requests_per_second: f64,
}

impl Default for HttpSettings {
    fn default() -> Self {
        Self {
            endpoint: "https://api.openai.com/v1/chat/completions".into(),
            model: "gpt-4o".into(),
            max_in_flight: 2,
            requests_per_second: 1.0,
        }
    }
}

/// Everything a run needs. Loaded from one JSON file; CLI flags override.
/// API keys are never read from here.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub backend: BackendName,
    pub http: HttpSettings,
    /// Replay fixtures; defaults to the corpus's `_replay` directory.
    pub replay_dir: Option<PathBuf>,
    pub params: GenerationParams,
    pub filter: FilterConfig,
    pub metrics: MetricConfig,
    pub ablation: Ablation,
    pub parallelism: usize,
    pub out: PathBuf,
    /// Text → asset file map for text layers drawn from images.
    pub preset: Option<PathBuf>,
    /// External renderer command, run as `cmd <jsx> <scss> <assets_dir>`.
    pub renderer: Option<String>,
    /// Sample-list file (one id per line, `#` comments) restricting a batch,
    /// e.g. a test split.
    pub samples: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            backend: BackendName::Template,
            http: HttpSettings::default(),
            replay_dir: None,
            params: GenerationParams::default(),
            filter: FilterConfig::default(),
            metrics: MetricConfig::default(),
            ablation: Ablation::default(),
            parallelism: 1,
            out: PathBuf::from("out"),
            preset: None,
            renderer: None,
            samples: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, String> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        let cfg: Self = serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.parallelism == 0 {
            return Err("parallelism must be at least 1".into());
        }
        self.filter.validate()?;
        self.metrics.validate().map_err(|e| e.to_string())?;
        self.params.validate().map_err(|e| e.to_string())?;
        Ok(())
    }

    pub fn backend_kind(&self, default_replay: &Path) -> BackendKind {
        match self.backend {
            BackendName::Template => BackendKind::Template,
            BackendName::Replay => BackendKind::Replay { dir: self.replay_dir.clone().unwrap_or_else(|| default_replay.to_path_buf()) },
            BackendName::Http => BackendKind::HttpChat { endpoint: self.http.endpoint.clone(), model: self.http.model.clone() },
        }
    }

    pub fn client(&self, default_replay: &Path) -> Result<Client, LlmError> {
        self.params.validate()?;
        let limits = HttpLimits { max_in_flight: self.http.max_in_flight.max(1), requests_per_second: self.http.requests_per_second, ..HttpLimits::default() };
        Ok(Client::new(self.backend_kind(default_replay), self.params.clone()).with_limits(limits))
    }
}
