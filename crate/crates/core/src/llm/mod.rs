//! Model backends: a chat-completions HTTP client, a fixture replayer and a
//! deterministic template generator.

mod http;
pub mod template;

use std::path::{Path, PathBuf};
use std::sync::{Arc, OnceLock};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::prompt::{hash_prompt, PromptBundle};
pub use http::{HttpLimits, RateLimiter};

/// Environment variable holding the API key for the HTTP backend.
pub const API_KEY_VAR: &str = "PSD2CODE_API_KEY";

#[derive(Debug, Error)]
pub enum LlmError {
    #[error("rate limited after {attempts} attempts")]
    RateLimited { attempts: u32 },
    #[error("request timed out after {attempts} attempts")]
    Timeout { attempts: u32 },
    #[error("no recorded response for prompt digest {0}")]
    MissingFixture(String),
    #[error("no API key: set {API_KEY_VAR}")]
    AuthMissing,
    #[error("fixture directory {0} does not exist")]
    MissingFixtureDir(PathBuf),
    #[error("backend returned HTTP {status}: {body}")]
    Http { status: u16, body: String },
    #[error("malformed backend response: {0}")]
    BadResponse(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("transport error: {0}")]
    Transport(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenerationParams {
    pub temperature: f64,
    pub max_tokens: u32,
    pub top_p: f64,
    pub retries: u32,
    /// Seconds.
    pub timeout: u64,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self { temperature: 0.7, max_tokens: 4000, top_p: 1.0, retries: 2, timeout: 120 }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), LlmError> {
        if !(0.0..=2.0).contains(&self.temperature) {
            return Err(LlmError::InvalidParams(format!("temperature {} outside [0, 2]", self.temperature)));
        }
        if self.max_tokens == 0 {
            return Err(LlmError::InvalidParams("max_tokens must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.top_p) || self.top_p == 0.0 {
            return Err(LlmError::InvalidParams(format!("top_p {} outside (0, 1]", self.top_p)));
        }
        Ok(())
    }

    pub fn timeout(&self) -> Duration {
        Duration::from_secs(self.timeout)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BackendKind {
    HttpChat { endpoint: String, model: String },
    Replay { dir: PathBuf },
    Template,
}

impl BackendKind {
    /// Short label stored with generated code.
    pub fn label(&self) -> String {
        match self {
            BackendKind::HttpChat { model, .. } => format!("http:{model}"),
            BackendKind::Replay { .. } => "replay".into(),
            BackendKind::Template => "template".into(),
        }
    }

    /// `template`, `replay:<dir>` or `http:<endpoint>#<model>`.
    pub fn parse(spec: &str) -> Option<Self> {
        if spec == "template" {
            return Some(BackendKind::Template);
        }
        if let Some(dir) = spec.strip_prefix("replay:") {
            return Some(BackendKind::Replay { dir: dir.into() });
        }
        let rest = spec.strip_prefix("http:")?;
        let (endpoint, model) = rest.rsplit_once('#')?;
        Some(BackendKind::HttpChat { endpoint: endpoint.into(), model: model.into() })
    }
}

/// A backend plus parameters and, for HTTP, a shared rate limiter. Cheap to
/// clone; clones share the limiter.
#[derive(Debug, Clone)]
pub struct Client {
    pub backend: BackendKind,
    pub params: GenerationParams,
    limiter: Arc<RateLimiter>,
    backoff_base: Duration,
}

impl Client {
    pub fn new(backend: BackendKind, params: GenerationParams) -> Self {
        Self { backend, params, limiter: default_limiter(), backoff_base: Duration::from_secs(1) }
    }

    pub fn with_limits(mut self, limits: HttpLimits) -> Self {
        self.limiter = Arc::new(RateLimiter::new(limits));
        self
    }

    /// First retry waits `base`, then 2×, 4× …
    pub fn with_backoff_base(mut self, base: Duration) -> Self {
        self.backoff_base = base;
        self
    }

    pub fn generate(&self, bundle: &PromptBundle) -> Result<String, LlmError> {
        self.params.validate()?;
        match &self.backend {
            BackendKind::Template => Ok(template::render_response(&bundle.constraint_echo)),
            BackendKind::Replay { dir } => replay(bundle, dir),
            BackendKind::HttpChat { endpoint, model } => {
                let key = std::env::var(API_KEY_VAR).ok().filter(|k| !k.trim().is_empty());
                http::generate(bundle, endpoint, model, key.as_deref(), &self.params, &self.limiter, self.backoff_base)
            }
        }
    }
}

fn default_limiter() -> Arc<RateLimiter> {
    static SHARED: OnceLock<Arc<RateLimiter>> = OnceLock::new();
    SHARED.get_or_init(|| Arc::new(RateLimiter::new(HttpLimits::default()))).clone()
}

/// One-shot generation with the process-wide rate limiter.
pub fn generate(bundle: &PromptBundle, backend: &BackendKind, params: &GenerationParams) -> Result<String, LlmError> {
    Client::new(backend.clone(), params.clone()).generate(bundle)
}

pub fn fixture_path(bundle: &PromptBundle, dir: impl AsRef<Path>) -> PathBuf {
    dir.as_ref().join(format!("{}.txt", hash_prompt(bundle)))
}

fn replay(bundle: &PromptBundle, dir: &Path) -> Result<String, LlmError> {
    if !dir.is_dir() {
        return Err(LlmError::MissingFixtureDir(dir.to_path_buf()));
    }
    let path = fixture_path(bundle, dir);
    match std::fs::read(&path) {
        Ok(bytes) => String::from_utf8(bytes).map_err(|e| LlmError::BadResponse(format!("{}: {e}", path.display()))),
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => Err(LlmError::MissingFixture(hash_prompt(bundle))),
        Err(e) => Err(e.into()),
    }
}

/// Stores `response` so that replay of `bundle` returns it. Overwrites.
pub fn record_fixture(bundle: &PromptBundle, response: &str, dir: impl AsRef<Path>) -> Result<PathBuf, LlmError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let path = fixture_path(bundle, dir);
    std::fs::write(&path, response)?;
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assets::{AssetRecord, ImageFormat};
    use crate::codecheck::{validate_response, BoxKind};
    use crate::design::{DesignDocument, Dimensions, ElementNode, ElementType, Position, Size};
    use crate::prompt::{build_prompt, PromptOptions};

    fn one_image_doc() -> DesignDocument {
        let mut d = DesignDocument {
            dimensions: Dimensions { width: 375, height: 667 },
            elements: vec![ElementNode {
                id: "e1".into(),
                name: "hero".into(),
                position: Position { x: 10, y: 20 },
                size: Size { width: 120, height: 40 },
                kind: ElementType::Image,
                text_content: None,
                asset_ref: Some("hero.png".into()),
                opacity: 1.0,
                z_hint: 0,
                children: vec![],
            }],
            assets: vec![AssetRecord { file: "hero.png".into(), path: "hero.png".into(), width: 120, height: 40, format: ImageFormat::Png }],
        };
        d.renumber_z();
        d
    }

    #[test]
    fn template_round_trip_single_image() {
        let doc = one_image_doc();
        let bundle = build_prompt(&doc, &PromptOptions::default()).unwrap();
        let response = generate(&bundle, &BackendKind::Template, &GenerationParams::default()).unwrap();
        let report = validate_response(&response, &doc);
        assert!(report.is_clean(), "{:#?}", report.violations);
        assert!(report.violations.is_empty(), "{:#?}", report.violations);
        let layout = report.layout.unwrap();
        let leaves = layout.leaves();
        assert_eq!(leaves.len(), 1);
        assert_eq!(leaves[0].kind, BoxKind::Image);
        assert_eq!(leaves[0].rect, doc.elements[0].bbox());
    }

    #[test]
    fn replay_and_record() {
        let dir = tempfile::tempdir().unwrap();
        let doc = one_image_doc();
        let bundle = build_prompt(&doc, &PromptOptions::default()).unwrap();
        let backend = BackendKind::Replay { dir: dir.path().to_path_buf() };
        let params = GenerationParams::default();
        match generate(&bundle, &backend, &params) {
            Err(LlmError::MissingFixture(d)) => assert_eq!(d, hash_prompt(&bundle)),
            other => panic!("expected MissingFixture, got {other:?}"),
        }
        record_fixture(&bundle, "first", dir.path()).unwrap();
        record_fixture(&bundle, "second ✓", dir.path()).unwrap();
        assert_eq!(generate(&bundle, &backend, &params).unwrap(), "second ✓");
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 1);

        let mut other = bundle.clone();
        other.user.push('x');
        record_fixture(&other, "other", dir.path()).unwrap();
        assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);

        let gone = BackendKind::Replay { dir: dir.path().join("nope") };
        assert!(matches!(generate(&bundle, &gone, &params), Err(LlmError::MissingFixtureDir(_))));
    }

    #[test]
    fn params_and_backend_parsing() {
        assert!(GenerationParams::default().validate().is_ok());
        assert!(GenerationParams { temperature: 2.5, ..Default::default() }.validate().is_err());
        assert!(GenerationParams { max_tokens: 0, ..Default::default() }.validate().is_err());
        assert_eq!(BackendKind::parse("template"), Some(BackendKind::Template));
        assert_eq!(BackendKind::parse("replay:fx"), Some(BackendKind::Replay { dir: "fx".into() }));
        assert_eq!(
            BackendKind::parse("http:http://h/v1/chat/completions#gpt-4o"),
            Some(BackendKind::HttpChat { endpoint: "http://h/v1/chat/completions".into(), model: "gpt-4o".into() })
        );
        assert_eq!(BackendKind::parse("bogus"), None);
    }
}
