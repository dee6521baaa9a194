use std::collections::{BTreeMap, VecDeque};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use super::{Completion, GatewayError, Role, WireRequest};

pub trait Backend: Send + Sync {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError>;
}

/// One transcript line: a request digest and the reply it got.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub request: String,
    pub role: Role,
    pub response: Completion,
}

/// Replays recorded replies keyed by request digest.
pub struct TranscriptBackend {
    entries: BTreeMap<String, Completion>,
}

impl TranscriptBackend {
    pub fn load(path: &Path) -> Result<Self, GatewayError> {
        let file = File::open(path).map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        let mut entries = BTreeMap::new();
        for (n, line) in BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| GatewayError::Io(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: TranscriptEntry = serde_json::from_str(&line)
                .map_err(|e| GatewayError::Io(format!("{}:{}: {e}", path.display(), n + 1)))?;
            entries.insert(entry.request, entry.response);
        }
        Ok(TranscriptBackend { entries })
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TranscriptEntry>) -> Self {
        TranscriptBackend { entries: entries.into_iter().map(|e| (e.request, e.response)).collect() }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl Backend for TranscriptBackend {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        let digest = wire.digest();
        self.entries
            .get(&digest)
            .cloned()
            .ok_or_else(|| GatewayError::TranscriptMiss { digest, role: wire.role.as_str().to_string() })
    }
}

/// Passes requests through and appends every exchange to a transcript.
pub struct RecordingBackend {
    inner: Box<dyn Backend>,
    out: Mutex<File>,
}

impl RecordingBackend {
    pub fn new(inner: Box<dyn Backend>, path: &Path) -> Result<Self, GatewayError> {
        let out = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| GatewayError::Io(format!("{}: {e}", path.display())))?;
        Ok(RecordingBackend { inner, out: Mutex::new(out) })
    }
}

impl Backend for RecordingBackend {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        let response = self.inner.complete(wire)?;
        let entry = TranscriptEntry { request: wire.digest(), role: wire.role, response: response.clone() };
        let line = serde_json::to_string(&entry).map_err(|e| GatewayError::Io(e.to_string()))?;
        let mut out = self.out.lock().unwrap_or_else(|e| e.into_inner());
        writeln!(out, "{line}").map_err(|e| GatewayError::Io(e.to_string()))?;
        Ok(response)
    }
}

/// Per-role queues of canned replies, consumed in order. Roles without a
/// queue fall back to `fallback` when one is set.
#[derive(Default)]
pub struct ScriptedBackend {
    queues: Mutex<BTreeMap<Role, VecDeque<Result<Completion, GatewayError>>>>,
    calls: Mutex<BTreeMap<Role, usize>>,
    fallback: Option<Box<dyn Backend>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        ScriptedBackend::default()
    }

    pub fn with_fallback(fallback: Box<dyn Backend>) -> Self {
        ScriptedBackend { fallback: Some(fallback), ..ScriptedBackend::default() }
    }

    pub fn push(&self, role: Role, reply: Result<Completion, GatewayError>) {
        self.queues.lock().unwrap_or_else(|e| e.into_inner()).entry(role).or_default().push_back(reply);
    }

    pub fn calls(&self, role: Role) -> usize {
        self.calls.lock().unwrap_or_else(|e| e.into_inner()).get(&role).copied().unwrap_or(0)
    }
}

impl Backend for ScriptedBackend {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        *self.calls.lock().unwrap_or_else(|e| e.into_inner()).entry(wire.role).or_default() += 1;
        let next = self.queues.lock().unwrap_or_else(|e| e.into_inner()).get_mut(&wire.role).and_then(|q| q.pop_front());
        match (next, &self.fallback) {
            (Some(reply), _) => reply,
            (None, Some(fallback)) => fallback.complete(wire),
            (None, None) => Err(GatewayError::ScriptExhausted(wire.role.as_str().to_string())),
        }
    }
}

impl<B: Backend + ?Sized> Backend for std::sync::Arc<B> {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        (**self).complete(wire)
    }
}
