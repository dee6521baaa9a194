//! Function-generation samples cut from a repository's own tests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use tracing::debug;

use crate::composition::{closure_bundle, ApiCombination};
use crate::context::ContextBundle;
use crate::digest::{sha256_hex, sha256_parts};
use crate::frontend::backend;
use crate::frontend::syntax::SiteKind;
use crate::gateway::{Gateway, GenRequest, Payload, Role};
use crate::graph::{CodeGraph, EntityId, EntityKind, GraphError, Language};
use crate::prompts::{fill, DECOMPOSE_PROMPT, REPAIR_PROMPT};
use crate::sandbox::{AttemptSpec, ExecOutcome, Failure, RunMode, Sandbox, SandboxError};
use crate::verdict::{FilterVerdict, Reason, Stage};

pub const DEFAULT_MAX_REPAIRS: usize = 3;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepairStep {
    pub attempt: usize,
    pub diagnostic_digest: String,
    pub summary: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtilizationSample {
    pub id: String,
    pub language: Language,
    pub source_test: EntityId,
    pub test_file: String,
    /// Function the assertions call.
    pub entry_symbol: String,
    pub functional_code: String,
    pub assertions: String,
    pub instruction: String,
    pub context: ContextBundle,
    pub context_entities: Vec<EntityId>,
    pub repair_log: Vec<RepairStep>,
}

/// Where the repository lives on disk, for building samples against it.
#[derive(Clone, Debug)]
pub struct BuildEnv {
    pub repo_root: PathBuf,
    pub include_roots: Vec<String>,
}

pub fn is_assertion(language: Language, line: &str) -> bool {
    let l = line.trim_start();
    match language {
        Language::Cpp => ["assert(", "assert (", "ASSERT_", "EXPECT_", "static_assert"].iter().any(|p| l.starts_with(p)),
        Language::Python => l.starts_with("assert ") || l.starts_with("assert(") || l.starts_with("self.assert"),
    }
}

/// File-level include/import lines of `path`.
fn preamble(graph: &CodeGraph, path: &str) -> Vec<String> {
    let Some(file) = graph.file_by_path(path) else { return Vec::new() };
    file.body_text
        .lines()
        .filter(|l| match graph.language() {
            Language::Cpp => l.starts_with("#include") || l.starts_with("using namespace"),
            Language::Python => l.starts_with("import ") || l.starts_with("from "),
        })
        .map(str::to_string)
        .collect()
}

#[derive(Deserialize)]
struct DecomposeReply {
    functional_code: String,
    assertions: String,
    #[serde(default)]
    instruction: String,
}

struct Checked {
    reply: DecomposeReply,
    entry: String,
}

/// Both parts parse, the assertions assert something and call a function
/// the functional part defines, and the functional part calls into the
/// repository.
fn validate(graph: &CodeGraph, text: &str) -> Result<Checked, (Reason, String)> {
    let language = graph.language();
    let reply: DecomposeReply = serde_json::from_str(text.trim()).map_err(|e| (Reason::ParseFailure, e.to_string()))?;
    let b = backend(language);
    let code = b.parse_snippet(&reply.functional_code).map_err(|e| (Reason::ParseFailure, format!("functional code: {e}")))?;
    let asserts = b.parse_snippet(&reply.assertions).map_err(|e| (Reason::ParseFailure, format!("assertions: {e}")))?;
    if !reply.assertions.lines().any(|l| is_assertion(language, l)) {
        return Err((Reason::NoAssertion, "assertions hold no assertion statement".into()));
    }
    let defined: Vec<&str> = code
        .definitions
        .iter()
        .filter(|d| d.kind == EntityKind::Function)
        .map(|d| d.short_name())
        .collect();
    let entry = asserts
        .calls
        .iter()
        .filter(|s| s.kind == SiteKind::Call && s.qualifier.is_empty())
        .find(|s| defined.contains(&s.name.as_str()))
        .map(|s| s.name.clone())
        .ok_or((Reason::ParseFailure, "assertions never call the functional code".to_string()))?;
    let reaches_repo = code
        .calls
        .iter()
        .any(|s| s.kind == SiteKind::Call && !code.defined_names.contains(&s.name) && graph.entities_named(&s.name).next().is_some());
    if !reaches_repo {
        return Err((Reason::NoApiInvocation, "functional code calls nothing in the repository".into()));
    }
    Ok(Checked { reply, entry })
}

/// Splits a test into functional code and assertions. Replies that fail
/// validation are redrawn up to K times.
pub fn decompose_test(
    comb: &ApiCombination,
    graph: &CodeGraph,
    gateway: &Gateway,
    seed: u64,
) -> Result<Result<UtilizationSample, FilterVerdict>, GraphError> {
    let test = graph.require(&comb.source_test)?;
    let id = sha256_parts(["utilization", test.id.as_str()])[..24].to_string();
    let language = graph.language();
    let pre = preamble(graph, &test.file_path);
    let prompt = fill(DECOMPOSE_PROMPT, &[("test", &test.name), ("body", &test.body_text)]);
    let payload = Payload::Decompose {
        language,
        test_name: test.name.clone(),
        preamble: pre,
        body: test.body_text.clone(),
    };
    let req = GenRequest::new(Role::Decompose, prompt, payload, gateway.sampling(seed));
    let drawn = match gateway.rejection_sample(&req, &|c| validate(graph, &c.content).is_ok()) {
        Ok(t) => t,
        Err(e) => return Ok(Err(FilterVerdict::fail(id, Stage::Decompose, Reason::GatewayFailure, e.to_string()))),
    };
    let checked = match validate(graph, &drawn.response) {
        Ok(c) => c,
        Err((reason, detail)) => return Ok(Err(FilterVerdict::fail(id, Stage::Decompose, reason, detail))),
    };
    let (context, context_entities) = closure_bundle(graph, &comb.apis)?;
    let instruction = if checked.reply.instruction.trim().is_empty() {
        format!("Implement `{}`.", checked.entry)
    } else {
        checked.reply.instruction
    };
    Ok(Ok(UtilizationSample {
        id,
        language,
        source_test: test.id.clone(),
        test_file: test.file_path.clone(),
        entry_symbol: checked.entry,
        functional_code: checked.reply.functional_code,
        assertions: checked.reply.assertions,
        instruction,
        context,
        context_entities,
        repair_log: Vec::new(),
    }))
}

fn is_header(path: &str) -> bool {
    [".h", ".hh", ".hpp", ".hxx"].iter().any(|e| path.ends_with(e))
}

fn module_path(path: &str) -> String {
    let stem = path.strip_suffix(".py").unwrap_or(path);
    let stem = stem.strip_suffix("/__init__").unwrap_or(stem);
    stem.replace('/', ".")
}

/// Symbol name to the header (C++) or module (Python) defining it. For
/// C++ the outermost namespace maps to the header too.
pub fn known_headers(graph: &CodeGraph) -> BTreeMap<String, String> {
    let mut entities: Vec<_> = graph
        .entities()
        .filter(|e| matches!(e.kind, EntityKind::Function | EntityKind::Class | EntityKind::GlobalVariable))
        .collect();
    entities.sort_by(|a, b| (&a.file_path, a.span.start).cmp(&(&b.file_path, b.span.start)));
    let mut map = BTreeMap::new();
    for e in entities {
        match graph.language() {
            Language::Cpp if is_header(&e.file_path) => {
                map.entry(e.short_name().to_string()).or_insert_with(|| e.file_path.clone());
                if let Some(ns) = e.qualifier_segments().first() {
                    map.entry(ns.to_string()).or_insert_with(|| e.file_path.clone());
                }
            }
            Language::Python if e.qualifier_segments().is_empty() => {
                map.entry(e.short_name().to_string()).or_insert_with(|| module_path(&e.file_path));
            }
            _ => {}
        }
    }
    map
}

impl BuildEnv {
    pub fn new(repo_root: impl Into<PathBuf>, include_roots: Vec<String>) -> Self {
        BuildEnv { repo_root: repo_root.into(), include_roots }
    }

    fn test_dir(&self, sample: &UtilizationSample) -> PathBuf {
        let rel = Path::new(&sample.test_file).parent().unwrap_or(Path::new(""));
        self.repo_root.join(rel)
    }

    /// Sandbox inputs for running `sample` against the repository.
    pub fn attempt(&self, graph: &CodeGraph, sample: &UtilizationSample, attempt_index: usize) -> AttemptSpec {
        let mut spec = AttemptSpec {
            task_id: sample.id.clone(),
            attempt_index,
            language: Some(sample.language),
            code: sample.functional_code.clone(),
            tests: sample.assertions.clone(),
            ..Default::default()
        };
        match sample.language {
            Language::Cpp => {
                spec.include_dirs.push(self.repo_root.clone());
                spec.include_dirs.push(self.test_dir(sample));
                for root in &self.include_roots {
                    let dir = self.repo_root.join(root);
                    if !spec.include_dirs.contains(&dir) {
                        spec.include_dirs.push(dir);
                    }
                }
                let mut files: Vec<&str> = sample
                    .context_entities
                    .iter()
                    .filter_map(|id| graph.entity(id))
                    .map(|e| e.file_path.as_str())
                    .filter(|p| !is_header(p) && *p != sample.test_file)
                    .collect();
                files.sort();
                files.dedup();
                for f in files {
                    let defines_main = graph.entities_named("main").any(|m| m.file_path == f);
                    if !defines_main {
                        spec.link_sources.push(self.repo_root.join(f));
                    }
                }
            }
            Language::Python => {
                spec.python_path.push(self.repo_root.clone());
                spec.python_path.push(self.test_dir(sample));
            }
        }
        spec
    }
}

#[derive(Deserialize)]
struct RepairReply {
    code: String,
    #[serde(default)]
    summary: String,
}

fn sandbox_verdict(id: &str, stage: Stage, e: SandboxError) -> FilterVerdict {
    match e {
        SandboxError::ToolchainMissing(t) => FilterVerdict::fail(id, stage, Reason::ToolchainMissing, t),
        other => FilterVerdict::fail(id, stage, Reason::CompileError, other.to_string()),
    }
}

/// Compiles the sample (for Python: syntax and import check) and, while it
/// fails, asks the gateway for a patch, up to `max_iters` patches.
pub fn compile_and_repair(
    mut sample: UtilizationSample,
    graph: &CodeGraph,
    env: &BuildEnv,
    sandbox: &Sandbox,
    gateway: &Gateway,
    max_iters: usize,
    seed: u64,
) -> Result<UtilizationSample, FilterVerdict> {
    let headers = known_headers(graph);
    let mut last: ExecOutcome;
    let mut iter = 0;
    loop {
        last = sandbox
            .run_attempt(None, &env.attempt(graph, &sample, iter + 1), RunMode::CompileOnly)
            .map_err(|e| sandbox_verdict(&sample.id, Stage::Repair, e))?;
        if last.compiled {
            debug!(sample = %sample.id, repairs = iter, "sample compiles");
            return Ok(sample);
        }
        if iter == max_iters {
            break;
        }
        iter += 1;
        let prompt = fill(REPAIR_PROMPT, &[("diagnostic", &last.diagnostic), ("code", &sample.functional_code)]);
        let payload = Payload::Repair {
            language: sample.language,
            code: sample.functional_code.clone(),
            diagnostic: last.diagnostic.clone(),
            known_headers: headers.clone(),
        };
        let req = GenRequest::new(Role::Repair, prompt, payload, gateway.sampling(seed.wrapping_add(iter as u64)));
        let reply = gateway
            .rejection_sample(&req, &|c| serde_json::from_str::<RepairReply>(c.content.trim()).is_ok())
            .map_err(|e| FilterVerdict::fail(&sample.id, Stage::Repair, Reason::GatewayFailure, e.to_string()))?;
        let summary = match serde_json::from_str::<RepairReply>(reply.response.trim()) {
            Ok(r) if reply.accepted => {
                sample.functional_code = r.code;
                r.summary
            }
            _ => "unreadable repair reply".to_string(),
        };
        sample.repair_log.push(RepairStep {
            attempt: iter,
            diagnostic_digest: sha256_hex(last.diagnostic.as_bytes())[..16].to_string(),
            summary,
        });
    }
    Err(FilterVerdict::fail(&sample.id, Stage::Repair, Reason::CompileError, last.diagnostic))
}

/// Runs the assertions against the functional code.
pub fn execution_filter(sample: &UtilizationSample, graph: &CodeGraph, env: &BuildEnv, sandbox: &Sandbox) -> FilterVerdict {
    let outcome = match sandbox.run_attempt(None, &env.attempt(graph, sample, 1), RunMode::CompileAndTest) {
        Ok(o) => o,
        Err(e) => return sandbox_verdict(&sample.id, Stage::Execution, e),
    };
    if outcome.tests_passed {
        return FilterVerdict::pass(&sample.id, Stage::Execution);
    }
    let reason = match outcome.failure {
        Some(Failure::Timeout | Failure::CompileTimeout) => Reason::Timeout,
        Some(Failure::AssertionFailed | Failure::OutputLimit) => Reason::AssertionFailed,
        _ => Reason::CompileError,
    };
    FilterVerdict::fail(&sample.id, Stage::Execution, reason, outcome.diagnostic)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::{mine_combinations, TestMatcher};
    use crate::frontend::analyze_sources;
    use crate::gateway::{Completion, GatewayConfig, ScriptedBackend, SyntheticBackend};

    fn python_graph(test_body: &str) -> CodeGraph {
        analyze_sources(
            Language::Python,
            vec![
                ("db.py".into(), "class Query:\n    def __init__(self, t):\n        self.t = t\n    def count(self):\n        return 3\n".into()),
                ("tests/test_db.py".into(), format!("from db import Query\n\n{test_body}")),
            ],
            &[String::new()],
        )
        .unwrap()
        .graph
    }

    fn comb(g: &CodeGraph) -> ApiCombination {
        mine_combinations(g, &TestMatcher::default().compile().unwrap()).unwrap().combinations.remove(0)
    }

    #[test]
    fn decomposes_query_test() {
        let g = python_graph("def test_count():\n    q = Query('t')\n    n = q.count()\n    assert n == 3\n    assert n > 0\n    assert n != 4\n");
        let gw = Gateway::new(Box::new(SyntheticBackend), GatewayConfig::default());
        let s = decompose_test(&comb(&g), &g, &gw, 0).unwrap().unwrap();
        assert_eq!(s.entry_symbol, "run_count");
        assert!(s.functional_code.contains("from db import Query"));
        assert!(s.functional_code.contains("def run_count():"));
        assert_eq!(s.assertions.lines().filter(|l| is_assertion(Language::Python, l)).count(), 3);
        assert!(!s.instruction.is_empty());
        assert!(s.context.items.iter().any(|i| i.text.contains("def count(self)")));
    }

    #[test]
    fn reply_without_assertion_is_rejected() {
        let g = python_graph("def test_count():\n    q = Query('t')\n    assert q.count() == 3\n");
        let backend = ScriptedBackend::new();
        let bad = r#"{"functional_code": "from db import Query\ndef run_count():\n    return Query('t').count()\n", "assertions": "n = run_count()"}"#;
        for _ in 0..4 {
            backend.push(Role::Decompose, Ok(Completion::text(bad)));
        }
        let gw = Gateway::new(Box::new(backend), GatewayConfig::default());
        let v = decompose_test(&comb(&g), &g, &gw, 0).unwrap().unwrap_err();
        assert_eq!(v.reason, Reason::NoAssertion);
    }

    #[test]
    fn known_headers_cover_namespaces_and_modules() {
        let g = analyze_sources(
            Language::Cpp,
            vec![("geo/shapes.hpp".into(), "namespace geo {\nint area(int w, int h) { return w * h; }\n}\n".into())],
            &[String::new()],
        )
        .unwrap()
        .graph;
        let h = known_headers(&g);
        assert_eq!(h["area"], "geo/shapes.hpp");
        assert_eq!(h["geo"], "geo/shapes.hpp");
        let p = python_graph("def test_x():\n    assert Query('t').count() == 3\n");
        assert_eq!(known_headers(&p)["Query"], "db");
    }
}
