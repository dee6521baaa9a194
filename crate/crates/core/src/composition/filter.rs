use serde::{Deserialize, Serialize};

use super::CompositionTask;
use crate::frontend::syntax::{Access, ImportTarget, SiteKind, Snippet, UseSite};
use crate::frontend::{backend, Builtins};
use crate::gateway::{Gateway, TaskFormat};
use crate::graph::{CodeGraph, Entity, EntityId, EntityKind, Language};
use crate::verdict::{FilterVerdict, Reason, Stage};

/// First offending call in a piece of code.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CallViolation {
    pub reason: Reason,
    pub line: u32,
    pub call: String,
    pub detail: String,
}

/// Code carried by an answer: fenced blocks when present, otherwise the
/// whole text. Question-answer tasks carry none.
pub fn extract_code(format: TaskFormat, text: &str) -> Option<String> {
    if !format.has_code() {
        return None;
    }
    let mut blocks = Vec::new();
    let mut current: Option<Vec<&str>> = None;
    for line in text.lines() {
        if line.trim_start().starts_with("```") {
            match current.take() {
                Some(b) => blocks.push(b.join("\n")),
                None => current = Some(Vec::new()),
            }
        } else if let Some(b) = current.as_mut() {
            b.push(line);
        }
    }
    if blocks.is_empty() {
        Some(text.to_string())
    } else {
        Some(blocks.join("\n"))
    }
}

fn render_call(site: &UseSite) -> String {
    let sep = match site.access {
        Access::Plain => "",
        Access::Scoped => "::",
        Access::Member => ".",
    };
    if site.qualifier.is_empty() {
        format!("{}()", site.name)
    } else {
        format!("{}{sep}{}()", site.qualifier.join(sep), site.name)
    }
}

/// Namespaces brought in by `using namespace x;`.
fn using_namespaces(code: &str) -> Vec<String> {
    code.lines()
        .filter_map(|l| l.trim().strip_prefix("using namespace "))
        .map(|rest| rest.trim_end_matches(';').trim().to_string())
        .collect()
}

fn module_stem(path: &str) -> &str {
    let file = path.rsplit('/').next().unwrap_or(path);
    file.strip_suffix(".py").unwrap_or(file)
}

fn prefix_ok(language: Language, site: &UseSite, cand: &Entity, snippet: &Snippet, usings: &[String]) -> bool {
    let chain = cand.qualifier_segments();
    let is_method = cand.kind == EntityKind::Method;
    match site.access {
        Access::Plain => {
            if is_method {
                return false;
            }
            match language {
                // A plain call reaches a namespaced function only through a
                // using-directive.
                Language::Cpp => chain.is_empty() || usings.iter().any(|u| u.split("::").eq(chain.iter().copied())),
                Language::Python => true,
            }
        }
        Access::Scoped => {
            let q: Vec<&str> = site.qualifier.iter().map(String::as_str).filter(|s| !s.is_empty()).collect();
            !q.is_empty() && chain.ends_with(&q)
        }
        Access::Member => {
            if is_method {
                return true;
            }
            if language != Language::Python {
                return false;
            }
            // `module.f()` or `pkg.module.f()`; the last qualifier names the
            // module, directly or through an import alias.
            let Some(last) = site.qualifier.last() else { return false };
            let stem = module_stem(&cand.file_path);
            last == stem
                || snippet.imports.iter().any(|imp| match &imp.target {
                    ImportTarget::Module { module, alias: Some(a), names, .. } if names.is_empty() => {
                        a == last && module.rsplit('.').next() == Some(stem)
                    }
                    ImportTarget::Module { names, .. } => names.iter().any(|n| n.binding() == last && n.name == stem),
                    ImportTarget::Include { .. } => false,
                })
        }
    }
}

fn arity_ok(site: &UseSite, cand: &Entity) -> bool {
    let Some(args) = site.args else { return true };
    match (&cand.signature, cand.kind) {
        (_, EntityKind::Class) => true,
        (Some(sig), _) => {
            // Methods written with an explicit `self` parameter.
            let self_param = cand.kind == EntityKind::Method
                && sig.param_names().first().is_some_and(|p| *p == "self" || *p == "cls");
            if self_param && site.access == Access::Member {
                sig.accepts(args + 1)
            } else {
                sig.accepts(args)
            }
        }
        (None, _) => true,
    }
}

/// Checks every call in `code` against the entities in `context`: the name
/// must exist there or be a builtin, and the call's qualifier and argument
/// count must agree with a matching definition.
pub fn check_calls(
    graph: &CodeGraph,
    code: &str,
    context: &[EntityId],
) -> Result<Option<CallViolation>, crate::frontend::syntax::SnippetError> {
    let language = graph.language();
    let snippet = backend(language).parse_snippet(code)?;
    let usings = using_namespaces(code);
    let builtins = Builtins::for_language(language);
    let imported = snippet.import_bindings();
    let entities: Vec<&Entity> = context
        .iter()
        .filter_map(|id| graph.entity(id))
        .filter(|e| matches!(e.kind, EntityKind::Function | EntityKind::Method | EntityKind::Class))
        .collect();
    for site in snippet.calls.iter().filter(|s| s.kind == SiteKind::Call) {
        if site.access == Access::Plain && snippet.defined_names.contains(&site.name) {
            continue;
        }
        if site.access == Access::Member
            && site.qualifier.first().is_some_and(|q| q == "self")
            && snippet.defined_names.contains(&site.name)
        {
            continue;
        }
        let candidates: Vec<&&Entity> = entities.iter().filter(|e| e.short_name() == site.name).collect();
        if candidates.is_empty() {
            // Names bound by imports from outside the repository.
            let via_import = match site.access {
                Access::Plain => imported.contains(&site.name),
                _ => site.qualifier.first().is_some_and(|q| imported.contains(q)),
            };
            if via_import || builtins.contains(&site.qualifier, &site.name) {
                continue;
            }
            return Ok(Some(CallViolation {
                reason: Reason::UnknownEntity,
                line: site.line,
                call: render_call(site),
                detail: format!("`{}` is neither in the context nor a builtin", site.name),
            }));
        }
        let prefixed: Vec<&&&Entity> =
            candidates.iter().filter(|c| prefix_ok(language, site, c, &snippet, &usings)).collect();
        if prefixed.is_empty() {
            return Ok(Some(CallViolation {
                reason: Reason::PrefixMismatch,
                line: site.line,
                call: render_call(site),
                detail: format!("no `{}` is reachable through that qualifier; defined as {}", site.name, candidates[0].name),
            }));
        }
        if !prefixed.iter().any(|c| arity_ok(site, c)) {
            let c = prefixed[0];
            let expected = c.signature.as_ref().map(|s| format!("{}..={}", s.required(), s.count())).unwrap_or_default();
            return Ok(Some(CallViolation {
                reason: Reason::ArityMismatch,
                line: site.line,
                call: render_call(site),
                detail: format!("{} takes {expected} argument(s), called with {}", c.name, site.args.unwrap_or(0)),
            }));
        }
    }
    Ok(None)
}

/// In-repo names called by `code` whose definitions are missing from
/// `context`. Names the code defines itself and builtins are ignored.
pub fn missing_context_symbols(
    graph: &CodeGraph,
    code: &str,
    context: &[EntityId],
) -> Result<Vec<String>, crate::frontend::syntax::SnippetError> {
    let snippet = backend(graph.language()).parse_snippet(code)?;
    let callable = |e: &Entity| matches!(e.kind, EntityKind::Function | EntityKind::Method | EntityKind::Class);
    let in_context: std::collections::BTreeSet<&str> =
        context.iter().filter_map(|id| graph.entity(id)).filter(|e| callable(e)).map(|e| e.short_name()).collect();
    let mut missing = Vec::new();
    for site in snippet.calls.iter().filter(|s| s.kind == SiteKind::Call) {
        if snippet.defined_names.contains(&site.name) || in_context.contains(site.name.as_str()) {
            continue;
        }
        if graph.entities_named(&site.name).any(callable) && !missing.contains(&site.name) {
            missing.push(site.name.clone());
        }
    }
    Ok(missing)
}

fn rule_check(task: &CompositionTask, graph: &CodeGraph, text: &str, stage: Stage) -> FilterVerdict {
    let Some(code) = extract_code(task.format, text) else {
        return FilterVerdict::pass(&task.id, stage);
    };
    match check_calls(graph, &code, &task.context_entities) {
        Ok(None) => FilterVerdict::pass(&task.id, stage),
        Ok(Some(v)) => FilterVerdict::fail(&task.id, stage, v.reason, format!("line {}: {}: {}", v.line, v.call, v.detail)),
        Err(e) => FilterVerdict::fail(&task.id, stage, Reason::ParseFailure, e.to_string()),
    }
}

/// Rule check on the reference answer.
pub fn rule_filter_stage1(task: &CompositionTask, graph: &CodeGraph) -> FilterVerdict {
    rule_check(task, graph, &task.reference_answer, Stage::RuleStage1)
}

/// Judges the response against the reference and re-runs the rule check
/// on the response. Judge failures fail closed.
pub fn consistency_filter_stage2(
    task: &CompositionTask,
    graph: &CodeGraph,
    response: &str,
    gateway: &Gateway,
    seed: u64,
) -> FilterVerdict {
    let rules = rule_check(task, graph, response, Stage::ConsistencyStage2);
    if !rules.pass {
        return rules;
    }
    match gateway.judge_consistency(&task.reference_answer, response, seed) {
        Ok(v) if v.consistent => FilterVerdict::pass(&task.id, Stage::ConsistencyStage2),
        Ok(v) => match v.failure {
            Some(f) => FilterVerdict::fail(&task.id, Stage::ConsistencyStage2, Reason::JudgeFailure, f),
            None => FilterVerdict::fail(&task.id, Stage::ConsistencyStage2, Reason::Inconsistent, v.rationale),
        },
        Err(e) => FilterVerdict::fail(&task.id, Stage::ConsistencyStage2, Reason::GatewayFailure, e.to_string()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::context::{ContextBundle, ContextKind};
    use crate::frontend::analyze_sources;
    use crate::gateway::{Completion, GatewayConfig, Role, ScriptedBackend, SyntheticBackend};

    fn cpp_graph() -> CodeGraph {
        analyze_sources(
            Language::Cpp,
            vec![(
                "calc.hpp".into(),
                "namespace calc {\nint add(int a, int b) { return a + b; }\nclass Acc {\npublic:\n    void push(int v) { s += v; }\n    int s = 0;\n};\n}\nint top(int x, int y = 1) { return x + y; }\n".into(),
            )],
            &[String::new()],
        )
        .unwrap()
        .graph
    }

    fn all_ids(g: &CodeGraph) -> Vec<EntityId> {
        g.entities().map(|e| e.id.clone()).collect()
    }

    fn task(g: &CodeGraph, format: TaskFormat, reference: &str) -> CompositionTask {
        CompositionTask {
            id: "t1".into(),
            source_test: EntityId::from_raw("x"),
            format,
            difficulty: 1,
            statement: "s".into(),
            reference_answer: reference.into(),
            grading_criteria: Vec::new(),
            context: ContextBundle::new(ContextKind::DependencyClosureCode),
            apis: Vec::new(),
            context_entities: all_ids(g),
            prompt_hash: String::new(),
        }
    }

    fn reason(g: &CodeGraph, code: &str) -> Option<Reason> {
        check_calls(g, code, &all_ids(g)).unwrap().map(|v| v.reason)
    }

    #[test]
    fn cpp_rule_cases() {
        let g = cpp_graph();
        assert_eq!(reason(&g, "int r = calc::add(1, 2);"), None);
        assert_eq!(reason(&g, "int r = calc::add(1);"), Some(Reason::ArityMismatch));
        assert_eq!(reason(&g, "frobnicate();"), Some(Reason::UnknownEntity));
        assert_eq!(reason(&g, "int r = add(1, 2);"), Some(Reason::PrefixMismatch));
        assert_eq!(reason(&g, "using namespace calc;\nvoid f() { add(1, 2); }"), None);
        assert_eq!(reason(&g, "int r = other::add(1, 2);"), Some(Reason::PrefixMismatch));
        assert_eq!(reason(&g, "calc::Acc a; a.push(3);"), None);
        assert_eq!(reason(&g, "calc::Acc a; a.push();"), Some(Reason::ArityMismatch));
        assert_eq!(reason(&g, "top(1); top(1, 2);"), None);
        assert_eq!(reason(&g, "std::vector<int> v; v.push_back(1); printf(\"x\");"), None);
        assert_eq!(reason(&g, "int helper(int a) { return a; }\nvoid f() { helper(1, 2, 3); }"), None);
    }

    #[test]
    fn python_member_calls_accept_module_qualifier() {
        let g = analyze_sources(
            Language::Python,
            vec![(
                "pkg/shapes.py".into(),
                "class Rect:\n    def __init__(self, w, h):\n        self.w = w\n    def scale(self, k):\n        return k\n\ndef area(r):\n    return r\n".into(),
            )],
            &[String::new()],
        )
        .unwrap()
        .graph;
        assert_eq!(reason(&g, "from pkg import shapes\nr = shapes.Rect(1, 2)\nshapes.area(r)\nr.scale(2)"), None);
        assert_eq!(reason(&g, "r = Rect(1, 2)\nr.scale()"), Some(Reason::ArityMismatch));
        assert_eq!(reason(&g, "r = Rect(1, 2)\nr.area()"), Some(Reason::PrefixMismatch));
        assert_eq!(reason(&g, "print(len([1]))"), None);
        assert_eq!(reason(&g, "volume(1)"), Some(Reason::UnknownEntity));
    }

    #[test]
    fn stage1_verdicts() {
        let g = cpp_graph();
        assert!(rule_filter_stage1(&task(&g, TaskFormat::Programming, "void solution() {\n    calc::add(1, 2);\n}\n"), &g).pass);
        let bad = rule_filter_stage1(&task(&g, TaskFormat::Programming, "void solution() { calc::add(1); }"), &g);
        assert_eq!(bad.reason, Reason::ArityMismatch);
        let qa = rule_filter_stage1(&task(&g, TaskFormat::QuestionAnswer, "frobnicate() does it"), &g);
        assert!(qa.pass);
        let broken = rule_filter_stage1(&task(&g, TaskFormat::Programming, "void solution( {{{"), &g);
        assert_eq!(broken.reason, Reason::ParseFailure);
    }

    #[test]
    fn fenced_blocks_are_extracted() {
        let text = "Use this:\n```cpp\ncalc::add(1, 2);\n```\nand done.";
        assert_eq!(extract_code(TaskFormat::Programming, text).unwrap(), "calc::add(1, 2);");
        assert_eq!(extract_code(TaskFormat::QuestionAnswer, text), None);
    }

    #[test]
    fn stage2_cases() {
        let g = cpp_graph();
        let t = task(&g, TaskFormat::Programming, "void solution() { calc::add(1, 2); }");
        let gw = Gateway::new(Box::new(SyntheticBackend), GatewayConfig::default());
        assert!(consistency_filter_stage2(&t, &g, &t.reference_answer.clone(), &gw, 0).pass);

        let wrong = "void solution() { calc::add(1, 2); calc::subtract(2, 1); }";
        let v = consistency_filter_stage2(&t, &g, wrong, &gw, 0);
        assert_eq!(v.reason, Reason::UnknownEntity);

        let scripted = ScriptedBackend::new();
        scripted.push(Role::Judge, Ok(Completion::text("VERDICT: inconsistent\nRATIONALE: differs")));
        let gw = Gateway::new(Box::new(scripted), GatewayConfig::default());
        let v = consistency_filter_stage2(&t, &g, "void solution() {\n  int x = calc::add(2, 1);\n}", &gw, 0);
        assert_eq!(v.reason, Reason::Inconsistent);

        let scripted = ScriptedBackend::new();
        scripted.push(Role::Judge, Ok(Completion::text("maybe?")));
        let gw = Gateway::new(Box::new(scripted), GatewayConfig::default());
        let v = consistency_filter_stage2(&t, &g, "void solution() {\n  int x = calc::add(2, 1);\n}", &gw, 0);
        assert_eq!(v.reason, Reason::JudgeFailure);
    }
}
