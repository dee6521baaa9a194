//! Benchmark task packages and attempt evaluation.
//!
//! A task directory holds one sub-directory per task:
//!
//! ```text
//! tasks/
//!   <id>/
//!     task.toml        language, description, file names
//!     reference.py     reference implementation
//!     tests.py         assertions run against an attempt
//!     ...              support files, visible on the include/import path
//! ```
//!
//! `task.toml` keys: `language` (`cpp` or `python`), `description`, and
//! optionally `reference`, `tests` (file names, defaulting to
//! `reference.<ext>` and `tests.<ext>`), `include_dirs` and `link_sources`
//! (paths relative to the task directory).

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{AttemptSpec, ExecOutcome, RunMode, Sandbox, SandboxError};
use crate::graph::Language;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Invalid { path: PathBuf, message: String },
    #[error("attempt {task_id}#{attempt_index} names an unknown task")]
    UnknownTask { task_id: String, attempt_index: usize },
    #[error("duplicate attempt {task_id}#{attempt_index}")]
    DuplicateAttempt { task_id: String, attempt_index: usize },
    #[error(transparent)]
    Sandbox(#[from] SandboxError),
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct Manifest {
    language: Language,
    description: String,
    reference: Option<String>,
    tests: Option<String>,
    #[serde(default)]
    include_dirs: Vec<String>,
    #[serde(default)]
    link_sources: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TaskPackage {
    pub id: String,
    pub dir: PathBuf,
    pub language: Language,
    pub description: String,
    pub reference: String,
    pub tests: String,
    pub include_dirs: Vec<PathBuf>,
    pub link_sources: Vec<PathBuf>,
}

/// One model attempt at a task.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AttemptRecord {
    pub task_id: String,
    pub attempt_index: usize,
    pub code: String,
}

fn read(path: &Path) -> Result<String, TaskError> {
    std::fs::read_to_string(path).map_err(|source| TaskError::Read { path: path.to_path_buf(), source })
}

impl TaskPackage {
    pub fn load(dir: &Path) -> Result<Self, TaskError> {
        let manifest_path = dir.join("task.toml");
        let m: Manifest = toml::from_str(&read(&manifest_path)?)
            .map_err(|e| TaskError::Invalid { path: manifest_path.clone(), message: e.to_string() })?;
        let ext = m.language.source_extension();
        let reference = read(&dir.join(m.reference.unwrap_or_else(|| format!("reference.{ext}"))))?;
        let tests = read(&dir.join(m.tests.unwrap_or_else(|| format!("tests.{ext}"))))?;
        let id = dir.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
        let mut include_dirs = vec![dir.to_path_buf()];
        include_dirs.extend(m.include_dirs.iter().map(|d| dir.join(d)));
        Ok(TaskPackage {
            id,
            dir: dir.to_path_buf(),
            language: m.language,
            description: m.description,
            reference,
            tests,
            include_dirs,
            link_sources: m.link_sources.iter().map(|s| dir.join(s)).collect(),
        })
    }

    pub fn spec(&self, attempt_index: usize, code: &str) -> AttemptSpec {
        AttemptSpec {
            task_id: self.id.clone(),
            attempt_index,
            language: Some(self.language),
            code: code.to_string(),
            tests: self.tests.clone(),
            include_dirs: self.include_dirs.clone(),
            link_sources: self.link_sources.clone(),
            python_path: self.include_dirs.clone(),
        }
    }
}

/// Every task package under `root`, ordered by id.
pub fn load_tasks(root: &Path) -> Result<Vec<TaskPackage>, TaskError> {
    let entries = std::fs::read_dir(root).map_err(|source| TaskError::Read { path: root.to_path_buf(), source })?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| TaskError::Read { path: root.to_path_buf(), source })?;
        if entry.path().join("task.toml").is_file() {
            dirs.push(entry.path());
        }
    }
    dirs.sort();
    dirs.iter().map(|d| TaskPackage::load(d)).collect()
}

/// Runs every attempt against its task on up to `workers` threads.
/// Outcomes come back ordered by task and attempt.
pub fn evaluate(
    tasks: &[TaskPackage],
    attempts: &[AttemptRecord],
    sandbox: &Sandbox,
    workers: usize,
) -> Result<Vec<ExecOutcome>, TaskError> {
    let mut seen = BTreeSet::new();
    let mut jobs = Vec::new();
    for a in attempts {
        let Some(task) = tasks.iter().find(|t| t.id == a.task_id) else {
            return Err(TaskError::UnknownTask { task_id: a.task_id.clone(), attempt_index: a.attempt_index });
        };
        if !seen.insert((a.task_id.clone(), a.attempt_index)) {
            return Err(TaskError::DuplicateAttempt { task_id: a.task_id.clone(), attempt_index: a.attempt_index });
        }
        jobs.push(task.spec(a.attempt_index, &a.code));
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| SandboxError::Io(std::io::Error::other(e.to_string())))?;
    let mut outcomes: Vec<ExecOutcome> = pool.install(|| {
        jobs.par_iter().map(|spec| sandbox.run_attempt(None, spec, RunMode::CompileAndTest)).collect::<Result<_, _>>()
    })?;
    outcomes.sort_by(|a, b| (&a.task_id, a.attempt_index).cmp(&(&b.task_id, b.attempt_index)));
    Ok(outcomes)
}
