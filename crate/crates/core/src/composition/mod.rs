//! Compositional API tasks mined from a repository's own tests.

mod filter;
mod tasks;

use std::collections::BTreeSet;

use globset::{Glob, GlobSet, GlobSetBuilder};
use serde::{Deserialize, Serialize};

pub use filter::{
    check_calls, consistency_filter_stage2, extract_code, missing_context_symbols, rule_filter_stage1, CallViolation,
};
pub use tasks::{api_brief, generate_tasks, parse_task_reply, CompositionTask, GradingCriterion, TaskOutcome};

use crate::context::ContextBundle;
use crate::graph::{dependency_closure, CodeGraph, Entity, EntityId, EntityKind, GraphError, RelationKind};

/// Decides which functions are tests: the short name must match and, when
/// `path_globs` is non-empty, so must the file path.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TestMatcher {
    pub name_prefixes: Vec<String>,
    pub name_suffixes: Vec<String>,
    pub path_globs: Vec<String>,
}

impl Default for TestMatcher {
    fn default() -> Self {
        TestMatcher {
            name_prefixes: vec!["test_".into(), "Test".into(), "test".into()],
            name_suffixes: vec!["_Test".into(), "_test".into()],
            path_globs: vec![
                "**/test/**".into(),
                "**/tests/**".into(),
                "test/**".into(),
                "tests/**".into(),
                "**/test_*".into(),
                "**/*_test.*".into(),
                "**/*_tests.*".into(),
            ],
        }
    }
}

impl TestMatcher {
    pub fn compile(&self) -> Result<CompiledMatcher<'_>, globset::Error> {
        let mut b = GlobSetBuilder::new();
        for g in &self.path_globs {
            b.add(Glob::new(g)?);
        }
        Ok(CompiledMatcher { cfg: self, globs: b.build()? })
    }
}

pub struct CompiledMatcher<'a> {
    cfg: &'a TestMatcher,
    globs: GlobSet,
}

impl CompiledMatcher<'_> {
    pub fn is_test(&self, e: &Entity) -> bool {
        if !matches!(e.kind, EntityKind::Function | EntityKind::Method) {
            return false;
        }
        let short = e.short_name();
        let named = self.cfg.name_prefixes.iter().any(|p| short.starts_with(p.as_str()))
            || self.cfg.name_suffixes.iter().any(|s| short.ends_with(s.as_str()));
        named && (self.cfg.path_globs.is_empty() || self.globs.is_match(&e.file_path))
    }

    pub fn tests<'g>(&self, graph: &'g CodeGraph) -> Vec<&'g Entity> {
        let mut tests: Vec<&Entity> = graph.entities().filter(|e| self.is_test(e)).collect();
        tests.sort_by(|a, b| (&a.file_path, a.span.start, &a.id).cmp(&(&b.file_path, b.span.start, &b.id)));
        tests
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiCombination {
    pub source_test: EntityId,
    pub apis: Vec<EntityId>,
    pub closure: Vec<EntityId>,
}

#[derive(Clone, Debug, Default)]
pub struct MinedCombinations {
    pub combinations: Vec<ApiCombination>,
    pub warnings: Vec<String>,
}

/// One combination per test that calls at least one in-repo, non-test
/// entity. APIs keep the order of their first call site.
pub fn mine_combinations(graph: &CodeGraph, matcher: &CompiledMatcher<'_>) -> Result<MinedCombinations, GraphError> {
    let tests = matcher.tests(graph);
    let mut out = MinedCombinations::default();
    if tests.is_empty() {
        out.warnings.push("no test functions matched; compositional data is empty".into());
        return Ok(out);
    }
    for t in tests {
        let mut calls: Vec<_> = graph.outgoing_of_kind(&t.id, RelationKind::Call).collect();
        calls.sort_by(|a, b| (a.evidence.line, &a.dst).cmp(&(b.evidence.line, &b.dst)));
        let mut apis = Vec::new();
        for r in calls {
            let Some(dst) = graph.entity(&r.dst) else { continue };
            if matcher.is_test(dst) || apis.contains(&dst.id) {
                continue;
            }
            apis.push(dst.id.clone());
        }
        if apis.is_empty() {
            continue;
        }
        let (_, closure) = closure_bundle(graph, &apis)?;
        out.combinations.push(ApiCombination { source_test: t.id.clone(), apis, closure });
    }
    Ok(out)
}

/// Dependency-closure context for a set of APIs, each entity once, in
/// closure order.
pub fn closure_bundle(graph: &CodeGraph, apis: &[EntityId]) -> Result<(ContextBundle, Vec<EntityId>), GraphError> {
    let mut seen = BTreeSet::new();
    let mut entries = Vec::new();
    for api in apis {
        for entry in dependency_closure(graph, api)? {
            if seen.insert(entry.entity.id.clone()) {
                entries.push(entry);
            }
        }
    }
    let ids = entries.iter().map(|e| e.entity.id.clone()).collect();
    Ok((ContextBundle::from_closure(&entries), ids))
}
