//! The only boundary to generation models.
//!
//! Requests are rendered into a chat-completion-style [`WireRequest`] whose
//! digest keys recorded transcripts. Backends: transcript replay, recording,
//! a scripted queue for tests, a deterministic synthetic model and (behind
//! the `http` feature) a real endpoint.

mod backend;
#[cfg(feature = "http")]
mod http;
mod payload;
mod synthetic;

use std::path::PathBuf;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Condvar, Mutex};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{Backend, RecordingBackend, ScriptedBackend, TranscriptBackend, TranscriptEntry};
#[cfg(feature = "http")]
pub use http::HttpBackend;
pub use payload::{ApiBrief, Payload, TaskFormat};
pub use synthetic::SyntheticBackend;

use crate::context::ContextBundle;
use crate::digest::json_digest;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GatewayError {
    #[error("transport error: {0}")]
    Transport(String),
    #[error("no transcript entry for request {digest} ({role})")]
    TranscriptMiss { digest: String, role: String },
    #[error("scripted backend has no reply left for role {0}")]
    ScriptExhausted(String),
    #[error("invalid request: {0}")]
    InvalidRequest(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("malformed reply: {0}")]
    Malformed(String),
    #[error("transcript i/o: {0}")]
    Io(String),
}

impl GatewayError {
    /// Errors worth retrying with backoff.
    pub fn is_transient(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Paraphrase,
    NegativeNaturalize,
    TaskDesign,
    TraceGeneration,
    Decompose,
    Repair,
    Judge,
}

impl Role {
    pub fn as_str(self) -> &'static str {
        match self {
            Role::Paraphrase => "paraphrase",
            Role::NegativeNaturalize => "negative_naturalize",
            Role::TaskDesign => "task_design",
            Role::TraceGeneration => "trace_generation",
            Role::Decompose => "decompose",
            Role::Repair => "repair",
            Role::Judge => "judge",
        }
    }

    pub fn default_mode(self) -> Mode {
        match self {
            Role::TraceGeneration => Mode::Reasoning,
            _ => Mode::Chat,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Chat,
    Reasoning,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sampling {
    pub temperature: f64,
    /// K: most candidates drawn for one request.
    pub max_attempts: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenRequest {
    pub role: Role,
    pub prompt: String,
    pub context: Option<ContextBundle>,
    pub sampling: Sampling,
    pub mode: Mode,
    pub payload: Payload,
}

impl GenRequest {
    pub fn new(role: Role, prompt: impl Into<String>, payload: Payload, sampling: Sampling) -> Self {
        GenRequest { role, prompt: prompt.into(), context: None, sampling, mode: role.default_mode(), payload }
    }

    pub fn with_context(mut self, context: ContextBundle) -> Self {
        self.context = Some(context);
        self
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.sampling.max_attempts == 0 {
            return Err(GatewayError::InvalidRequest("max_attempts must be at least 1".into()));
        }
        match (self.role, self.mode) {
            (Role::TraceGeneration, Mode::Chat) => {
                Err(GatewayError::InvalidRequest("trace generation must use reasoning mode".into()))
            }
            (Role::Judge, Mode::Reasoning) => Err(GatewayError::InvalidRequest("judge must use chat mode".into())),
            _ => Ok(()),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: String,
    pub content: String,
}

/// What goes over the wire for one attempt. Its digest keys transcripts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WireRequest {
    pub model: String,
    pub role: Role,
    pub mode: Mode,
    pub messages: Vec<Message>,
    pub temperature: f64,
    pub seed: u64,
    pub attempt: usize,
    pub payload: Payload,
}

impl WireRequest {
    pub fn digest(&self) -> String {
        json_digest(self)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Completion {
    #[serde(default)]
    pub reasoning: String,
    pub content: String,
}

impl Completion {
    pub fn text(content: impl Into<String>) -> Self {
        Completion { reasoning: String::new(), content: content.into() }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceResult {
    pub reasoning_trace: String,
    pub response: String,
    /// 1-based index of the accepted candidate, or of the last one drawn.
    pub attempt_index: usize,
    pub accepted: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub consistent: bool,
    pub rationale: String,
    /// Set when the verdict was forced to inconsistent because the judge
    /// reply could not be read.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    #[default]
    Synthetic,
    Replay,
    Record,
    Http,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GatewayConfig {
    pub backend: BackendKind,
    pub endpoint: Option<String>,
    pub reasoning_model: String,
    pub chat_model: String,
    pub temperature: f64,
    pub max_attempts: usize,
    pub concurrency: usize,
    pub transcript_path: Option<PathBuf>,
    pub transport_retries: usize,
    pub backoff_ms: u64,
    /// Environment variable holding the bearer token for the endpoint.
    pub api_key_env: String,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            backend: BackendKind::Synthetic,
            endpoint: None,
            reasoning_model: "reasoning-model".into(),
            chat_model: "chat-model".into(),
            temperature: 0.7,
            max_attempts: 4,
            concurrency: 4,
            transcript_path: None,
            transport_retries: 3,
            backoff_ms: 200,
            api_key_env: "GRAPHSYNTH_API_KEY".into(),
        }
    }
}

pub const ENDPOINT_ENV: &str = "GRAPHSYNTH_ENDPOINT";

impl GatewayConfig {
    pub fn sampling(&self, seed: u64) -> Sampling {
        Sampling { temperature: self.temperature, max_attempts: self.max_attempts, seed }
    }

    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.max_attempts == 0 {
            return Err(GatewayError::InvalidRequest("max_attempts must be at least 1".into()));
        }
        if self.concurrency == 0 {
            return Err(GatewayError::InvalidRequest("concurrency must be at least 1".into()));
        }
        if matches!(self.backend, BackendKind::Replay | BackendKind::Record) && self.transcript_path.is_none() {
            return Err(GatewayError::InvalidRequest("replay and record need transcript_path".into()));
        }
        Ok(())
    }
}

/// Counting semaphore bounding in-flight backend calls.
struct Permits {
    free: Mutex<usize>,
    cv: Condvar,
}

impl Permits {
    fn acquire(&self) -> PermitGuard<'_> {
        let mut free = self.free.lock().unwrap_or_else(|e| e.into_inner());
        while *free == 0 {
            free = self.cv.wait(free).unwrap_or_else(|e| e.into_inner());
        }
        *free -= 1;
        PermitGuard(self)
    }
}

struct PermitGuard<'a>(&'a Permits);

impl Drop for PermitGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.cv.notify_one();
    }
}

pub struct Gateway {
    backend: Box<dyn Backend>,
    cfg: GatewayConfig,
    permits: Permits,
    generations: AtomicUsize,
    backend_calls: AtomicUsize,
}

impl Gateway {
    pub fn new(backend: Box<dyn Backend>, cfg: GatewayConfig) -> Self {
        let permits = Permits { free: Mutex::new(cfg.concurrency.max(1)), cv: Condvar::new() };
        Gateway { backend, cfg, permits, generations: AtomicUsize::new(0), backend_calls: AtomicUsize::new(0) }
    }

    /// Builds the backend named by the config. The endpoint may be
    /// overridden through `GRAPHSYNTH_ENDPOINT`.
    pub fn from_config(cfg: GatewayConfig) -> Result<Self, GatewayError> {
        cfg.validate()?;
        let transcript = || {
            cfg.transcript_path.as_deref().ok_or_else(|| GatewayError::InvalidRequest("missing transcript_path".into()))
        };
        let backend: Box<dyn Backend> = match cfg.backend {
            BackendKind::Synthetic => Box::new(SyntheticBackend),
            BackendKind::Replay => Box::new(TranscriptBackend::load(transcript()?)?),
            BackendKind::Record => Box::new(RecordingBackend::new(Box::new(SyntheticBackend), transcript()?)?),
            BackendKind::Http => http_backend(&cfg)?,
        };
        Ok(Gateway::new(backend, cfg))
    }

    pub fn config(&self) -> &GatewayConfig {
        &self.cfg
    }

    /// Candidates generated so far (transport retries not counted).
    pub fn generation_count(&self) -> usize {
        self.generations.load(Ordering::SeqCst)
    }

    pub fn backend_call_count(&self) -> usize {
        self.backend_calls.load(Ordering::SeqCst)
    }

    pub fn sampling(&self, seed: u64) -> Sampling {
        self.cfg.sampling(seed)
    }

    pub fn wire(&self, req: &GenRequest, attempt: usize) -> WireRequest {
        let model = match req.mode {
            Mode::Reasoning => self.cfg.reasoning_model.clone(),
            Mode::Chat => self.cfg.chat_model.clone(),
        };
        let mut messages = vec![Message { role: "system".into(), content: system_prompt(req.role).into() }];
        let mut user = String::new();
        if let Some(ctx) = &req.context {
            user.push_str("Context:\n");
            user.push_str(&ctx.render());
            user.push('\n');
        }
        user.push_str(&req.prompt);
        messages.push(Message { role: "user".into(), content: user });
        WireRequest {
            model,
            role: req.role,
            mode: req.mode,
            messages,
            temperature: req.sampling.temperature,
            seed: req.sampling.seed,
            attempt,
            payload: req.payload.clone(),
        }
    }

    /// One generation with transport retries. `attempt` is 1-based.
    pub fn generate(&self, req: &GenRequest, attempt: usize) -> Result<Completion, GatewayError> {
        req.validate()?;
        let wire = self.wire(req, attempt);
        let mut delay = Duration::from_millis(self.cfg.backoff_ms);
        let mut tries = 0;
        loop {
            let result = {
                let _permit = self.permits.acquire();
                self.backend_calls.fetch_add(1, Ordering::SeqCst);
                self.backend.complete(&wire)
            };
            match result {
                Ok(c) => {
                    self.generations.fetch_add(1, Ordering::SeqCst);
                    return Ok(c);
                }
                Err(e) if e.is_transient() && tries < self.cfg.transport_retries => {
                    tries += 1;
                    tracing::warn!(role = req.role.as_str(), attempt, tries, error = %e, "retrying after transport error");
                    std::thread::sleep(delay);
                    delay = delay.saturating_mul(2);
                }
                Err(e) => return Err(e),
            }
        }
    }

    /// Draws up to K candidates and returns the first the acceptor takes.
    /// When none is accepted, the last candidate comes back with
    /// `accepted == false`.
    pub fn rejection_sample(
        &self,
        req: &GenRequest,
        acceptor: &dyn Fn(&Completion) -> bool,
    ) -> Result<TraceResult, GatewayError> {
        req.validate()?;
        let k = req.sampling.max_attempts;
        let mut last = Completion::default();
        for attempt in 1..=k {
            let candidate = self.generate(req, attempt)?;
            if acceptor(&candidate) {
                return Ok(TraceResult {
                    reasoning_trace: candidate.reasoning,
                    response: candidate.content,
                    attempt_index: attempt,
                    accepted: true,
                });
            }
            last = candidate;
        }
        Ok(TraceResult { reasoning_trace: last.reasoning, response: last.content, attempt_index: k, accepted: false })
    }

    /// Asks the chat model whether `candidate` agrees with `reference`.
    /// Unreadable judge replies count as inconsistent.
    pub fn judge_consistency(&self, reference: &str, candidate: &str, seed: u64) -> Result<JudgeVerdict, GatewayError> {
        if reference.trim().is_empty() || candidate.trim().is_empty() {
            return Err(GatewayError::Precondition("judge needs a non-empty reference and candidate".into()));
        }
        if normalize(reference) == normalize(candidate) {
            return Ok(JudgeVerdict { consistent: true, rationale: "identical answers".into(), failure: None });
        }
        let prompt = format!(
            "Reference answer:\n{reference}\n\nCandidate answer:\n{candidate}\n\n\
             Is the candidate semantically consistent with the reference? Reply with two lines:\n\
             VERDICT: consistent|inconsistent\nRATIONALE: <one line>"
        );
        let payload = Payload::Judge { reference: reference.to_string(), candidate: candidate.to_string() };
        let req = GenRequest::new(Role::Judge, prompt, payload, Sampling { max_attempts: 1, ..self.sampling(seed) });
        let reply = self.generate(&req, 1)?;
        Ok(parse_judge(&reply.content))
    }
}

fn http_backend(cfg: &GatewayConfig) -> Result<Box<dyn Backend>, GatewayError> {
    #[cfg(feature = "http")]
    {
        let endpoint = std::env::var(ENDPOINT_ENV)
            .ok()
            .or_else(|| cfg.endpoint.clone())
            .ok_or_else(|| GatewayError::InvalidRequest("http backend needs an endpoint".into()))?;
        let key = std::env::var(&cfg.api_key_env).ok();
        Ok(Box::new(HttpBackend::new(endpoint, key)))
    }
    #[cfg(not(feature = "http"))]
    {
        let _ = cfg;
        Err(GatewayError::InvalidRequest("built without the `http` feature".into()))
    }
}

fn normalize(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub fn parse_judge(reply: &str) -> JudgeVerdict {
    let mut lines = reply.lines().map(str::trim).filter(|l| !l.is_empty());
    let verdict = lines.next().and_then(|l| {
        let (key, value) = l.split_once(':')?;
        key.trim().eq_ignore_ascii_case("verdict").then(|| value.trim().to_ascii_lowercase())
    });
    let rationale = lines
        .next()
        .and_then(|l| l.split_once(':').filter(|(k, _)| k.trim().eq_ignore_ascii_case("rationale")))
        .map(|(_, v)| v.trim().to_string())
        .unwrap_or_default();
    match verdict.as_deref() {
        Some("consistent") => JudgeVerdict { consistent: true, rationale, failure: None },
        Some("inconsistent") => JudgeVerdict { consistent: false, rationale, failure: None },
        _ => {
            let first = reply.lines().next().unwrap_or("").chars().take(80).collect::<String>();
            JudgeVerdict {
                consistent: false,
                rationale: String::new(),
                failure: Some(format!("malformed judge output: `{first}`")),
            }
        }
    }
}

fn system_prompt(role: Role) -> &'static str {
    match role {
        Role::Paraphrase => {
            "Rewrite the statement about a codebase in varied wording. Keep every code entity name exactly as written. Reply with numbered lines."
        }
        Role::NegativeNaturalize => {
            "Rewrite the statement so it reads naturally. Keep every code entity name exactly as written."
        }
        Role::TaskDesign => crate::prompts::TASK_DESIGN_PRINCIPLES,
        Role::TraceGeneration => "Answer using only the provided codebase context. Think step by step.",
        Role::Decompose => {
            "Split the test into a functional implementation and its assertions. Reply with JSON: {\"functional_code\", \"assertions\", \"instruction\"}."
        }
        Role::Repair => {
            "Fix the code so it compiles. Reply with JSON: {\"code\", \"summary\"}."
        }
        Role::Judge => "You compare two answers for semantic consistency.",
    }
}
