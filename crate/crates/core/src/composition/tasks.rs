use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};

use super::{closure_bundle, ApiCombination};
use crate::context::ContextBundle;
use crate::digest::sha256_parts;
use crate::gateway::{ApiBrief, Gateway, GenRequest, Payload, Role, TaskFormat};
use crate::graph::{CodeGraph, Entity, EntityId, EntityKind, GraphError};
use crate::prompts::prompt_version_hash;
use crate::verdict::{FilterVerdict, Reason, Stage};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GradingCriterion {
    pub point: String,
    /// Knowledge unit the point is scored against.
    pub entity: EntityId,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CompositionTask {
    pub id: String,
    pub source_test: EntityId,
    pub format: TaskFormat,
    pub difficulty: usize,
    pub statement: String,
    pub reference_answer: String,
    pub grading_criteria: Vec<GradingCriterion>,
    pub context: ContextBundle,
    pub apis: Vec<EntityId>,
    /// Entities whose code is in `context`.
    pub context_entities: Vec<EntityId>,
    pub prompt_hash: String,
}

#[derive(Clone, Debug, Default)]
pub struct TaskOutcome {
    pub tasks: Vec<CompositionTask>,
    /// One per skipped (format, difficulty) request.
    pub skipped: Vec<FilterVerdict>,
}

#[derive(Deserialize)]
struct Reply {
    statement: String,
    reference_answer: String,
    grading_criteria: Vec<ReplyCriterion>,
}

#[derive(Deserialize)]
struct ReplyCriterion {
    point: String,
    entity: String,
}

pub fn api_brief(graph: &CodeGraph, e: &Entity) -> ApiBrief {
    let class = (e.kind == EntityKind::Method)
        .then(|| graph.container(&e.id).filter(|c| c.kind == EntityKind::Class).map(|c| c.name.clone()))
        .flatten()
        .or_else(|| (e.kind == EntityKind::Method).then(|| e.namespace().unwrap_or_default().to_string()));
    let (params, required) = match &e.signature {
        Some(sig) => (sig.param_names().into_iter().map(str::to_string).collect(), sig.required()),
        None => (Vec::new(), 0),
    };
    ApiBrief {
        id: e.id.to_string(),
        name: e.name.clone(),
        short_name: e.short_name().to_string(),
        class,
        params,
        required,
        file: e.file_path.clone(),
    }
}

/// Parses a task-design reply; the criteria must number `difficulty` and
/// name entities in `allowed`.
pub fn parse_task_reply(text: &str, difficulty: usize, allowed: &[EntityId]) -> Result<(String, String, Vec<GradingCriterion>), String> {
    let json = text.trim().trim_start_matches("```json").trim_start_matches("```").trim_end_matches("```");
    let reply: Reply = serde_json::from_str(json.trim()).map_err(|e| format!("reply is not a task object: {e}"))?;
    if reply.statement.trim().is_empty() {
        return Err("empty statement".into());
    }
    if reply.reference_answer.trim().is_empty() {
        return Err("missing reference answer".into());
    }
    if reply.grading_criteria.len() != difficulty {
        return Err(format!("{} grading criteria for difficulty {difficulty}", reply.grading_criteria.len()));
    }
    let mut criteria = Vec::new();
    for c in reply.grading_criteria {
        let id = EntityId::from_raw(c.entity);
        if !allowed.contains(&id) {
            return Err(format!("criterion entity {id} is not in the context"));
        }
        criteria.push(GradingCriterion { point: c.point, entity: id });
    }
    Ok((reply.statement, reply.reference_answer, criteria))
}

/// One task per requested (format, difficulty). Replies that do not parse
/// are redrawn up to K times, then the request is skipped.
pub fn generate_tasks(
    comb: &ApiCombination,
    graph: &CodeGraph,
    formats: &[TaskFormat],
    difficulty: RangeInclusive<usize>,
    gateway: &Gateway,
    seed: u64,
) -> Result<TaskOutcome, GraphError> {
    let mut out = TaskOutcome::default();
    if formats.is_empty() {
        return Ok(out);
    }
    let (context, _) = closure_bundle(graph, &comb.apis)?;
    let apis: Vec<&Entity> = comb.apis.iter().map(|id| graph.require(id)).collect::<Result<_, _>>()?;
    let briefs: Vec<ApiBrief> = apis.iter().map(|e| api_brief(graph, e)).collect();

    for &format in formats {
        for d in difficulty.clone() {
            let id = sha256_parts([
                "composition",
                comb.source_test.as_str(),
                format.as_str(),
                &d.to_string(),
            ])[..24]
                .to_string();
            if d == 0 || d > briefs.len() {
                out.skipped.push(FilterVerdict::fail(
                    id,
                    Stage::TaskDesign,
                    Reason::InsufficientApis,
                    format!("difficulty {d} with {} api(s)", briefs.len()),
                ));
                continue;
            }
            let listing: Vec<String> = briefs
                .iter()
                .map(|b| format!("- {} (id {}) in {} with parameters ({})", b.name, b.id, b.file, b.params.join(", ")))
                .collect();
            let prompt = format!(
                "Design one {} task of difficulty {d}: exactly {d} scoring points, each naming one entity id.\nAPIs:\n{}",
                format.as_str(),
                listing.join("\n")
            );
            let payload = Payload::TaskDesign { language: graph.language(), format, difficulty: d, apis: briefs.clone() };
            let req = GenRequest::new(Role::TaskDesign, prompt, payload, gateway.sampling(seed ^ d as u64))
                .with_context(context.clone());
            let result = gateway.rejection_sample(&req, &|c| parse_task_reply(&c.content, d, &comb.closure).is_ok());
            match result {
                Ok(t) if t.accepted => {
                    let (statement, reference_answer, grading_criteria) =
                        parse_task_reply(&t.response, d, &comb.closure).unwrap_or_default();
                    out.tasks.push(CompositionTask {
                        id,
                        source_test: comb.source_test.clone(),
                        format,
                        difficulty: d,
                        statement,
                        reference_answer,
                        grading_criteria,
                        context: context.clone(),
                        apis: comb.apis.clone(),
                        context_entities: comb.closure.clone(),
                        prompt_hash: prompt_version_hash().to_string(),
                    });
                }
                Ok(t) => {
                    let why = parse_task_reply(&t.response, d, &comb.closure).err().unwrap_or_default();
                    out.skipped.push(FilterVerdict::fail(id, Stage::TaskDesign, Reason::ParseFailure, why));
                }
                Err(e) => out.skipped.push(FilterVerdict::fail(id, Stage::TaskDesign, Reason::GatewayFailure, e.to_string())),
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::composition::{mine_combinations, TestMatcher};
    use crate::frontend::analyze_sources;
    use crate::gateway::{Completion, GatewayConfig, ScriptedBackend, SyntheticBackend};
    use crate::graph::Language;

    fn fixture() -> (CodeGraph, ApiCombination) {
        let g = analyze_sources(
            Language::Cpp,
            vec![
                ("calc.hpp".into(), "namespace calc {\nint add(int a, int b) { return a + b; }\nint neg(int a) { return -a; }\n}\n".into()),
                (
                    "tests/test_calc.cpp".into(),
                    "#include \"../calc.hpp\"\n#include <cassert>\nvoid test_mix() {\n    int s = calc::add(1, 2);\n    int n = calc::neg(s);\n    assert(n == -3);\n}\n".into(),
                ),
            ],
            &[String::new()],
        )
        .unwrap()
        .graph;
        let m = TestMatcher::default();
        let comb = mine_combinations(&g, &m.compile().unwrap()).unwrap().combinations.remove(0);
        (g, comb)
    }

    #[test]
    fn programming_task_with_two_points() {
        let (g, comb) = fixture();
        let gw = Gateway::new(Box::new(SyntheticBackend), GatewayConfig::default());
        let out = generate_tasks(&comb, &g, &[TaskFormat::Programming], 2..=2, &gw, 0).unwrap();
        assert_eq!(out.tasks.len(), 1);
        let t = &out.tasks[0];
        assert_eq!(t.grading_criteria.len(), 2);
        assert!(t.reference_answer.contains("calc::add(a, b);"));
        for c in &t.grading_criteria {
            let body = &g.entity(&c.entity).unwrap().body_text;
            assert!(t.context.items.iter().any(|i| &i.text == body));
        }
        assert_eq!(t.prompt_hash, prompt_version_hash());
    }

    #[test]
    fn empty_formats_yield_nothing() {
        let (g, comb) = fixture();
        let gw = Gateway::new(Box::new(ScriptedBackend::new()), GatewayConfig::default());
        let out = generate_tasks(&comb, &g, &[], 1..=4, &gw, 0).unwrap();
        assert!(out.tasks.is_empty() && out.skipped.is_empty());
    }

    #[test]
    fn reply_missing_reference_is_skipped() {
        let (g, comb) = fixture();
        let backend = ScriptedBackend::new();
        let entity = comb.apis[0].to_string();
        let reply = format!(r#"{{"statement": "s", "grading_criteria": [{{"point": "p", "entity": "{entity}"}}]}}"#);
        for _ in 0..4 {
            backend.push(Role::TaskDesign, Ok(Completion::text(reply.clone())));
        }
        let gw = Gateway::new(Box::new(backend), GatewayConfig::default());
        let out = generate_tasks(&comb, &g, &[TaskFormat::Programming], 1..=1, &gw, 0).unwrap();
        assert!(out.tasks.is_empty());
        assert_eq!(out.skipped.len(), 1);
        assert_eq!(out.skipped[0].reason, Reason::ParseFailure);
        assert_eq!(gw.generation_count(), 4);
    }
}
