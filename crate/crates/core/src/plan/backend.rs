//! Text-generation backends.
//!
//! The wire protocol is a single JSON exchange: the request body is
//! `{model, prompt, max_tokens}` and a successful response body is
//! `{text}`. A [`Cassette`] records responses keyed by a hash of the
//! request so runs can be replayed offline.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::plan::template::{build_prompt, PromptTemplate};
use crate::plan::{parse_plan_text, Plan};
use crate::scene::ObjectList;

pub const DEFAULT_MAX_TOKENS: u32 = 512;
pub const BACKEND_URL_ENV: &str = "PLAN_BACKEND_URL";
pub const BACKEND_KEY_ENV: &str = "PLAN_BACKEND_KEY";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendRequest {
    pub model: String,
    pub prompt: String,
    pub max_tokens: u32,
}

impl BackendRequest {
    /// Hex SHA-256 of the canonical JSON encoding.
    pub fn key(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("request serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BackendResponse {
    pub text: String,
}

pub trait PlanBackend: Send + Sync {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse>;

    /// Recorded as the plan source.
    fn identifier(&self) -> String;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BackendConfig {
    pub url: String,
    #[serde(default, skip_serializing)]
    pub key: Option<String>,
    #[serde(default = "default_model")]
    pub model: String,
    #[serde(default = "default_max_tokens")]
    pub max_tokens: u32,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
}

fn default_model() -> String {
    "planner".into()
}

fn default_max_tokens() -> u32 {
    DEFAULT_MAX_TOKENS
}

fn default_timeout() -> f64 {
    60.0
}

impl BackendConfig {
    pub fn new(url: impl Into<String>) -> Self {
        BackendConfig {
            url: url.into(),
            key: None,
            model: default_model(),
            max_tokens: DEFAULT_MAX_TOKENS,
            timeout_secs: default_timeout(),
        }
    }

    /// Endpoint from `PLAN_BACKEND_URL`, credential from `PLAN_BACKEND_KEY`.
    pub fn from_env() -> Result<Self> {
        let url = std::env::var(BACKEND_URL_ENV)
            .map_err(|_| Error::Config(format!("{BACKEND_URL_ENV} is not set")))?;
        let mut c = Self::new(url);
        c.key = std::env::var(BACKEND_KEY_ENV).ok().filter(|k| !k.is_empty());
        Ok(c)
    }
}

/// Blocking HTTP client for the completion protocol.
pub struct HttpBackend {
    config: BackendConfig,
    agent: ureq::Agent,
}

impl HttpBackend {
    pub fn new(config: BackendConfig) -> Self {
        let agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_secs_f64(config.timeout_secs.max(0.001))))
            .http_status_as_error(false)
            .build()
            .into();
        HttpBackend { config, agent }
    }

    pub fn config(&self) -> &BackendConfig {
        &self.config
    }
}

impl PlanBackend for HttpBackend {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let endpoint = self.config.url.clone();
        let mut call = self.agent.post(&endpoint).header("Content-Type", "application/json");
        if let Some(key) = &self.config.key {
            call = call.header("Authorization", &format!("Bearer {key}"));
        }
        let body = serde_json::to_string(request).expect("request serializes");
        let mut resp = call.send(body).map_err(|e| match e {
            ureq::Error::Timeout(_) => Error::Timeout {
                endpoint: endpoint.clone(),
            },
            other => Error::Transport {
                endpoint: endpoint.clone(),
                message: other.to_string(),
            },
        })?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| match e {
            ureq::Error::Timeout(_) => Error::Timeout {
                endpoint: endpoint.clone(),
            },
            other => Error::Transport {
                endpoint: endpoint.clone(),
                message: other.to_string(),
            },
        })?;
        if !(200..300).contains(&status) {
            return Err(Error::BackendStatus {
                endpoint,
                status,
                body: text,
            });
        }
        serde_json::from_str(&text).map_err(|e| Error::Transport {
            endpoint,
            message: format!("malformed response body: {e}"),
        })
    }

    fn identifier(&self) -> String {
        format!("http:{}#{}", self.config.url, self.config.model)
    }
}

/// Returns the same completion for every request.
#[derive(Debug, Clone)]
pub struct FixedBackend {
    pub text: String,
    pub name: String,
}

impl FixedBackend {
    pub fn new(text: impl Into<String>) -> Self {
        FixedBackend {
            text: text.into(),
            name: "fixed".into(),
        }
    }
}

impl PlanBackend for FixedBackend {
    fn complete(&self, _request: &BackendRequest) -> Result<BackendResponse> {
        Ok(BackendResponse {
            text: self.text.clone(),
        })
    }

    fn identifier(&self) -> String {
        self.name.clone()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CassetteEntry {
    pub request: BackendRequest,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CassetteMode {
    /// Serve recordings only; a miss is an error.
    Replay,
    /// Serve recordings, forward misses to the inner backend and record them.
    Record,
}

pub struct Cassette {
    path: PathBuf,
    mode: CassetteMode,
    inner: Option<Box<dyn PlanBackend>>,
    entries: Mutex<BTreeMap<String, CassetteEntry>>,
}

impl Cassette {
    /// Opens a cassette file; a missing file starts empty.
    pub fn open(path: impl AsRef<Path>, mode: CassetteMode, inner: Option<Box<dyn PlanBackend>>) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        if mode == CassetteMode::Record && inner.is_none() {
            return Err(Error::Config("record mode needs a backend to forward to".into()));
        }
        let entries = if path.exists() {
            let text = crate::data::read_text(&path)?;
            serde_json::from_str(&text).map_err(|e| Error::parse(path.display().to_string(), e))?
        } else if mode == CassetteMode::Replay {
            return Err(Error::Config(format!("cassette {} does not exist", path.display())));
        } else {
            BTreeMap::new()
        };
        Ok(Cassette {
            path,
            mode,
            inner,
            entries: Mutex::new(entries),
        })
    }

    pub fn len(&self) -> usize {
        self.entries.lock().expect("cassette lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn persist(&self, entries: &BTreeMap<String, CassetteEntry>) -> Result<()> {
        let mut text = serde_json::to_string_pretty(entries).expect("cassette serializes");
        text.push('\n');
        std::fs::write(&self.path, text).map_err(|e| Error::io(&self.path, e))
    }
}

impl PlanBackend for Cassette {
    fn complete(&self, request: &BackendRequest) -> Result<BackendResponse> {
        let key = request.key();
        if let Some(e) = self.entries.lock().expect("cassette lock").get(&key) {
            return Ok(BackendResponse { text: e.text.clone() });
        }
        let inner = match (self.mode, &self.inner) {
            (CassetteMode::Record, Some(inner)) => inner,
            _ => return Err(Error::CassetteMiss { key }),
        };
        let resp = inner.complete(request)?;
        let mut entries = self.entries.lock().expect("cassette lock");
        entries.insert(
            key,
            CassetteEntry {
                request: request.clone(),
                text: resp.text.clone(),
            },
        );
        self.persist(&entries)?;
        Ok(resp)
    }

    fn identifier(&self) -> String {
        let name = self
            .path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        format!("cassette:{name}")
    }
}

/// Builds the inference prompt, sends one request and parses the reply.
pub fn request_plan(
    backend: &dyn PlanBackend,
    model: &str,
    max_tokens: u32,
    template: &PromptTemplate,
    object_list: &ObjectList,
    instruction: &str,
) -> Result<Plan> {
    let prompt = build_prompt(template, object_list, Some(instruction))?;
    let request = BackendRequest {
        model: model.to_string(),
        prompt,
        max_tokens,
    };
    let response = backend.complete(&request)?;
    if response.text.trim().is_empty() {
        return Err(Error::EmptyCompletion);
    }
    let steps = parse_plan_text(&response.text)?;
    Ok(Plan {
        instruction: instruction.to_string(),
        steps,
        raw_text: response.text,
        source: backend.identifier(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn req(prompt: &str) -> BackendRequest {
        BackendRequest {
            model: "m".into(),
            prompt: prompt.into(),
            max_tokens: DEFAULT_MAX_TOKENS,
        }
    }

    #[test]
    fn fixed_backend_plan() {
        let b = FixedBackend::new("Step 1. Grasp a cup\nStep 2. Move to the sink\nStep 3. Rinse the cup");
        let plan = request_plan(&b, "m", 512, &PromptTemplate::bundled_inference(), &ObjectList::new(), "wash")
            .unwrap();
        assert_eq!(plan.steps.len(), 3);
        assert_eq!(plan.source, "fixed");
    }

    #[test]
    fn empty_completion() {
        let b = FixedBackend::new("  \n");
        let err = request_plan(&b, "m", 512, &PromptTemplate::bundled_inference(), &ObjectList::new(), "x")
            .unwrap_err();
        assert!(matches!(err, Error::EmptyCompletion));
    }

    #[test]
    fn unparseable_completion_keeps_raw_text() {
        let b = FixedBackend::new("I cannot help with that.");
        let err = request_plan(&b, "m", 512, &PromptTemplate::bundled_inference(), &ObjectList::new(), "x")
            .unwrap_err();
        assert!(matches!(err, Error::PlanParse { raw } if raw == "I cannot help with that."));
    }

    #[test]
    fn request_key_is_stable_and_sensitive() {
        assert_eq!(req("a").key(), req("a").key());
        assert_ne!(req("a").key(), req("b").key());
        assert_eq!(req("a").key().len(), 64);
    }

    #[test]
    fn cassette_records_then_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.json");
        let rec = Cassette::open(&path, CassetteMode::Record, Some(Box::new(FixedBackend::new("Step 1. Wait"))))
            .unwrap();
        assert_eq!(rec.complete(&req("p")).unwrap().text, "Step 1. Wait");
        assert_eq!(rec.len(), 1);
        let replay = Cassette::open(&path, CassetteMode::Replay, None).unwrap();
        assert_eq!(replay.complete(&req("p")).unwrap().text, "Step 1. Wait");
        assert!(matches!(replay.complete(&req("q")), Err(Error::CassetteMiss { .. })));
    }

    #[test]
    fn replay_of_missing_file_fails() {
        let dir = tempfile::tempdir().unwrap();
        assert!(Cassette::open(dir.path().join("none.json"), CassetteMode::Replay, None).is_err());
    }

    #[test]
    fn unreachable_endpoint_is_transport_error() {
        // port 9 (discard) on localhost is closed in the sandbox
        let mut cfg = BackendConfig::new("http://127.0.0.1:9/complete");
        cfg.timeout_secs = 2.0;
        let b = HttpBackend::new(cfg);
        match b.complete(&req("p")) {
            Err(Error::Transport { endpoint, .. }) => assert_eq!(endpoint, "http://127.0.0.1:9/complete"),
            other => panic!("unexpected {other:?}"),
        }
    }
}
