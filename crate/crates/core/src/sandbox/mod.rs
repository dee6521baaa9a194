//! Disposable-directory compilation and test execution.

mod metrics;
mod tasks;

use std::collections::BTreeSet;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Stdio};
use std::sync::{Mutex, OnceLock};
use std::thread;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::debug;

pub use metrics::{compilation_at_k, group_by_task, pass_at_k, rate_at_k, MetricError, Rate};
pub use tasks::{evaluate, load_tasks, AttemptRecord, TaskError, TaskPackage};

use crate::digest::sha256_hex;
use crate::graph::Language;

#[derive(Debug, Error)]
pub enum SandboxError {
    #[error("toolchain `{0}` is not installed or not on PATH")]
    ToolchainMissing(String),
    #[error("working directory {0} is already in use")]
    DirectoryBusy(PathBuf),
    #[error("sandbox i/o: {0}")]
    Io(#[from] io::Error),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SandboxConfig {
    pub cpp_compiler: String,
    pub cpp_flags: Vec<String>,
    pub python: String,
    pub wall_time_secs: u64,
    pub output_cap_bytes: usize,
    /// Parent for the disposable directories; the system temp dir if unset.
    pub work_root: Option<PathBuf>,
}

impl Default for SandboxConfig {
    fn default() -> Self {
        SandboxConfig {
            cpp_compiler: "g++".into(),
            cpp_flags: vec!["-std=c++17".into(), "-O0".into(), "-w".into()],
            python: "python3".into(),
            wall_time_secs: 60,
            output_cap_bytes: 64 << 20,
            work_root: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Limits {
    pub wall_time: Duration,
    pub output_cap: usize,
}

impl SandboxConfig {
    pub fn limits(&self) -> Limits {
        Limits { wall_time: Duration::from_secs(self.wall_time_secs), output_cap: self.output_cap_bytes }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Failure {
    CompileError,
    CompileTimeout,
    AssertionFailed,
    Timeout,
    OutputLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExecOutcome {
    pub task_id: String,
    pub attempt_index: usize,
    pub compiled: bool,
    pub tests_passed: bool,
    pub stderr_digest: String,
    pub wall_time: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure: Option<Failure>,
    /// Head of the compiler or test output, for repair prompts.
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub diagnostic: String,
}

/// What to build and run. For C++ `tests` are statements placed in `main`;
/// for Python they run at module level after `from solution import *`.
#[derive(Clone, Debug, Default)]
pub struct AttemptSpec {
    pub task_id: String,
    pub attempt_index: usize,
    pub language: Option<Language>,
    pub code: String,
    pub tests: String,
    pub include_dirs: Vec<PathBuf>,
    /// Extra C++ translation units linked into the test binary.
    pub link_sources: Vec<PathBuf>,
    pub python_path: Vec<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    CompileOnly,
    CompileAndTest,
}

const DIAGNOSTIC_HEAD: usize = 4096;

fn registry() -> &'static Mutex<BTreeSet<PathBuf>> {
    static DIRS: OnceLock<Mutex<BTreeSet<PathBuf>>> = OnceLock::new();
    DIRS.get_or_init(|| Mutex::new(BTreeSet::new()))
}

/// Exclusive claim on a working directory, released on drop.
#[derive(Debug)]
pub struct DirLease {
    path: PathBuf,
}

impl DirLease {
    pub fn acquire(path: &Path) -> Result<DirLease, SandboxError> {
        let path = path.canonicalize()?;
        let mut dirs = registry().lock().unwrap_or_else(|e| e.into_inner());
        if !dirs.insert(path.clone()) {
            return Err(SandboxError::DirectoryBusy(path));
        }
        Ok(DirLease { path })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }
}

impl Drop for DirLease {
    fn drop(&mut self) {
        registry().lock().unwrap_or_else(|e| e.into_inner()).remove(&self.path);
    }
}

struct ProcOutput {
    success: bool,
    timed_out: bool,
    overflowed: bool,
    output: Vec<u8>,
}

fn drain(mut r: impl Read + Send + 'static, cap: usize) -> thread::JoinHandle<(Vec<u8>, bool)> {
    thread::spawn(move || {
        let mut kept = Vec::new();
        let mut buf = [0u8; 8192];
        let mut overflowed = false;
        loop {
            match r.read(&mut buf) {
                Ok(0) | Err(_) => break,
                Ok(n) => {
                    let room = cap.saturating_sub(kept.len());
                    kept.extend_from_slice(&buf[..n.min(room)]);
                    overflowed |= n > room;
                }
            }
        }
        (kept, overflowed)
    })
}

fn spawn(cmd: &mut Command, program: &str) -> Result<Child, SandboxError> {
    cmd.stdin(Stdio::null()).stdout(Stdio::piped()).stderr(Stdio::piped());
    cmd.spawn().map_err(|e| match e.kind() {
        io::ErrorKind::NotFound => SandboxError::ToolchainMissing(program.to_string()),
        _ => SandboxError::Io(e),
    })
}

fn run(cmd: &mut Command, program: &str, deadline: Instant, cap: usize) -> Result<ProcOutput, SandboxError> {
    let mut child = spawn(cmd, program)?;
    let out = drain(child.stdout.take().expect("piped"), cap);
    let err = drain(child.stderr.take().expect("piped"), cap);
    let mut timed_out = false;
    let status = loop {
        if let Some(s) = child.try_wait()? {
            break Some(s);
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            timed_out = true;
            break None;
        }
        thread::sleep(Duration::from_millis(5));
    };
    let (mut output, o1) = out.join().unwrap_or_default();
    let (stderr, o2) = err.join().unwrap_or_default();
    output.extend_from_slice(&stderr);
    Ok(ProcOutput { success: status.is_some_and(|s| s.success()), timed_out, overflowed: o1 || o2, output })
}

fn head(bytes: &[u8]) -> String {
    let text = String::from_utf8_lossy(bytes);
    let mut end = text.len().min(DIAGNOSTIC_HEAD);
    while !text.is_char_boundary(end) {
        end -= 1;
    }
    text[..end].to_string()
}

pub struct Sandbox {
    cfg: SandboxConfig,
}

impl Sandbox {
    pub fn new(cfg: SandboxConfig) -> Self {
        Sandbox { cfg }
    }

    pub fn config(&self) -> &SandboxConfig {
        &self.cfg
    }

    /// Whether the toolchain for `language` can be started.
    pub fn toolchain_available(&self, language: Language) -> bool {
        let program = match language {
            Language::Cpp => &self.cfg.cpp_compiler,
            Language::Python => &self.cfg.python,
        };
        Command::new(program).arg("--version").stdout(Stdio::null()).stderr(Stdio::null()).status().is_ok()
    }

    /// Builds and optionally runs one attempt in a fresh directory under
    /// `task_dir` (or the configured work root).
    pub fn run_attempt(&self, task_dir: Option<&Path>, spec: &AttemptSpec, mode: RunMode) -> Result<ExecOutcome, SandboxError> {
        self.run_attempt_with(task_dir, spec, mode, self.cfg.limits())
    }

    pub fn run_attempt_with(
        &self,
        task_dir: Option<&Path>,
        spec: &AttemptSpec,
        mode: RunMode,
        limits: Limits,
    ) -> Result<ExecOutcome, SandboxError> {
        let parent = task_dir.map(Path::to_path_buf).or_else(|| self.cfg.work_root.clone()).unwrap_or_else(std::env::temp_dir);
        std::fs::create_dir_all(&parent)?;
        let dir = tempfile::Builder::new().prefix("attempt-").tempdir_in(&parent)?;
        let lease = DirLease::acquire(dir.path())?;
        let started = Instant::now();
        let deadline = started + limits.wall_time;
        let language = spec.language.unwrap_or(Language::Cpp);
        let (compile, test) = match language {
            Language::Cpp => self.cpp(lease.path(), spec, mode, deadline, limits.output_cap)?,
            Language::Python => self.python(lease.path(), spec, mode, deadline, limits.output_cap)?,
        };
        let compiled = compile.success;
        let mut failure = None;
        let mut diag_bytes = compile.output.clone();
        if !compiled {
            failure = Some(if compile.timed_out { Failure::CompileTimeout } else { Failure::CompileError });
        }
        if compile.overflowed {
            failure = Some(Failure::OutputLimit);
        }
        let mut tests_passed = false;
        if let Some(t) = test {
            tests_passed = t.success && !t.overflowed;
            diag_bytes.extend_from_slice(&t.output);
            if t.timed_out {
                failure = Some(Failure::Timeout);
            } else if t.overflowed {
                failure = Some(Failure::OutputLimit);
            } else if !t.success {
                failure = Some(Failure::AssertionFailed);
            }
        }
        let wall_time = started.elapsed().as_secs_f64();
        debug!(task = %spec.task_id, attempt = spec.attempt_index, compiled, tests_passed, wall_time, "attempt finished");
        drop(lease);
        Ok(ExecOutcome {
            task_id: spec.task_id.clone(),
            attempt_index: spec.attempt_index,
            compiled: compiled && !compile.overflowed,
            tests_passed: compiled && tests_passed,
            stderr_digest: sha256_hex(&diag_bytes)[..16].to_string(),
            wall_time,
            failure,
            diagnostic: head(&diag_bytes),
        })
    }

    fn cpp(
        &self,
        dir: &Path,
        spec: &AttemptSpec,
        mode: RunMode,
        deadline: Instant,
        cap: usize,
    ) -> Result<(ProcOutput, Option<ProcOutput>), SandboxError> {
        let main = format!(
            "#include <cassert>\n{}\n\nint main() {{\n{}\n    return 0;\n}}\n",
            spec.code,
            indent(&spec.tests, "    ")
        );
        std::fs::write(dir.join("main.cpp"), main)?;
        let exe = dir.join("main.bin");
        let mut cmd = Command::new(&self.cfg.cpp_compiler);
        cmd.current_dir(dir).args(&self.cfg.cpp_flags);
        for inc in &spec.include_dirs {
            cmd.arg(format!("-I{}", inc.display()));
        }
        cmd.arg("main.cpp");
        for src in &spec.link_sources {
            cmd.arg(src);
        }
        cmd.arg("-o").arg(&exe);
        let compile = run(&mut cmd, &self.cfg.cpp_compiler, deadline, cap)?;
        if !compile.success || mode == RunMode::CompileOnly {
            return Ok((compile, None));
        }
        let mut cmd = Command::new(&exe);
        cmd.current_dir(dir);
        let test = run(&mut cmd, &self.cfg.cpp_compiler, deadline, cap)?;
        Ok((compile, Some(test)))
    }

    fn python(
        &self,
        dir: &Path,
        spec: &AttemptSpec,
        mode: RunMode,
        deadline: Instant,
        cap: usize,
    ) -> Result<(ProcOutput, Option<ProcOutput>), SandboxError> {
        std::fs::write(dir.join("solution.py"), &spec.code)?;
        std::fs::write(dir.join("test_solution.py"), format!("from solution import *\n\n{}\n", spec.tests))?;
        let mut path = vec![dir.to_path_buf()];
        path.extend(spec.python_path.iter().cloned());
        let py_path = std::env::join_paths(&path).map_err(|e| io::Error::new(io::ErrorKind::InvalidInput, e))?;
        let command = |args: &[&str]| {
            let mut c = Command::new(&self.cfg.python);
            c.current_dir(dir).env("PYTHONPATH", &py_path).env("PYTHONDONTWRITEBYTECODE", "1").args(args);
            c
        };
        // Syntax of both files, then import resolution of the solution.
        let check = "import ast, sys\nfor f in ('solution.py', 'test_solution.py'):\n    ast.parse(open(f).read(), f)\nimport solution\n";
        let compile = run(&mut command(&["-c", check]), &self.cfg.python, deadline, cap)?;
        if !compile.success || mode == RunMode::CompileOnly {
            return Ok((compile, None));
        }
        let test = run(&mut command(&["test_solution.py"]), &self.cfg.python, deadline, cap)?;
        Ok((compile, Some(test)))
    }
}

fn indent(text: &str, pad: &str) -> String {
    text.lines().map(|l| if l.trim().is_empty() { String::new() } else { format!("{pad}{l}") }).collect::<Vec<_>>().join("\n")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec(language: Language, code: &str, tests: &str) -> AttemptSpec {
        AttemptSpec {
            task_id: "t".into(),
            attempt_index: 1,
            language: Some(language),
            code: code.into(),
            tests: tests.into(),
            ..Default::default()
        }
    }

    fn sandbox() -> Sandbox {
        Sandbox::new(SandboxConfig { wall_time_secs: 20, ..Default::default() })
    }

    #[test]
    fn cpp_pass_fail_and_syntax_error() {
        let sb = sandbox();
        if !sb.toolchain_available(Language::Cpp) {
            return;
        }
        let ok = sb.run_attempt(None, &spec(Language::Cpp, "int two() { return 2; }", "assert(two() == 2);"), RunMode::CompileAndTest).unwrap();
        assert!(ok.compiled && ok.tests_passed);
        let bad = sb.run_attempt(None, &spec(Language::Cpp, "int two() { return 2 }", "assert(two() == 2);"), RunMode::CompileAndTest).unwrap();
        assert!(!bad.compiled && !bad.tests_passed);
        assert_eq!(bad.failure, Some(Failure::CompileError));
        let wrong = sb.run_attempt(None, &spec(Language::Cpp, "int two() { return 3; }", "assert(two() == 2);"), RunMode::CompileAndTest).unwrap();
        assert!(wrong.compiled && !wrong.tests_passed);
        assert_eq!(wrong.failure, Some(Failure::AssertionFailed));
    }

    #[test]
    fn python_pass_fail_and_import_error() {
        let sb = sandbox();
        if !sb.toolchain_available(Language::Python) {
            return;
        }
        let ok = sb.run_attempt(None, &spec(Language::Python, "def two():\n    return 2\n", "assert two() == 2"), RunMode::CompileAndTest).unwrap();
        assert!(ok.compiled && ok.tests_passed, "{}", ok.diagnostic);
        let missing = sb.run_attempt(None, &spec(Language::Python, "from nowhere import x\n", "assert True"), RunMode::CompileOnly).unwrap();
        assert!(!missing.compiled);
        assert!(missing.diagnostic.contains("nowhere"));
        let wrong = sb.run_attempt(None, &spec(Language::Python, "def two():\n    return 3\n", "assert two() == 2"), RunMode::CompileAndTest).unwrap();
        assert_eq!(wrong.failure, Some(Failure::AssertionFailed));
    }

    #[test]
    fn infinite_loop_times_out() {
        let sb = sandbox();
        if !sb.toolchain_available(Language::Python) {
            return;
        }
        let limits = Limits { wall_time: Duration::from_millis(1500), output_cap: 1 << 20 };
        let out = sb
            .run_attempt_with(None, &spec(Language::Python, "def spin():\n    while True:\n        pass\n", "spin()"), RunMode::CompileAndTest, limits)
            .unwrap();
        assert!(out.compiled && !out.tests_passed);
        assert_eq!(out.failure, Some(Failure::Timeout));
    }

    #[test]
    fn missing_toolchain_is_reported() {
        let sb = Sandbox::new(SandboxConfig { python: "no-such-python-xyz".into(), ..Default::default() });
        let err = sb.run_attempt(None, &spec(Language::Python, "x = 1", "assert x"), RunMode::CompileOnly).unwrap_err();
        assert!(matches!(err, SandboxError::ToolchainMissing(_)));
    }

    #[test]
    fn leases_are_exclusive() {
        let dir = tempfile::tempdir().unwrap();
        let a = DirLease::acquire(dir.path()).unwrap();
        assert!(matches!(DirLease::acquire(dir.path()), Err(SandboxError::DirectoryBusy(_))));
        drop(a);
        assert!(DirLease::acquire(dir.path()).is_ok());
    }
}
