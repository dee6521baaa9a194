use std::sync::Arc;

use graphsynth_core::composition::closure_bundle;
use graphsynth_core::frontend::scan_repository;
use graphsynth_core::gateway::{Completion, Gateway, GatewayConfig, Role, ScriptedBackend};
use graphsynth_core::graph::{CodeGraph, Language};
use graphsynth_core::sandbox::{Sandbox, SandboxConfig};
use graphsynth_core::utilization::{compile_and_repair, execution_filter, BuildEnv, UtilizationSample};
use graphsynth_core::verdict::Reason;

use crate::common::{fixture, frontend, repo_for};
use crate::Outcome;

fn read(rel: &str) -> String {
    std::fs::read_to_string(fixture(&format!("utilization/{rel}"))).unwrap()
}

fn sample(graph: &CodeGraph, id: &str, entry: &str, code: String, assertions: String) -> UtilizationSample {
    let named = |n: &str| graph.entities().find(|e| e.name == n).unwrap().id.clone();
    let (context, context_entities) = closure_bundle(graph, &[named("geo::add")]).unwrap();
    UtilizationSample {
        id: id.into(),
        language: Language::Cpp,
        source_test: named("test_add"),
        test_file: "tests/test_vec.cpp".into(),
        entry_symbol: entry.into(),
        functional_code: code,
        assertions,
        instruction: "Implement the function.".into(),
        context,
        context_entities,
        repair_log: Vec::new(),
    }
}

fn repair_reply(code: &str, summary: &str) -> Completion {
    Completion::text(serde_json::json!({ "code": code, "summary": summary }).to_string())
}

pub fn run() -> Outcome {
    let sandbox = Sandbox::new(SandboxConfig::default());
    if !sandbox.toolchain_available(Language::Cpp) {
        return Outcome::Blocked("no C++ compiler on PATH".into());
    }
    let repo = repo_for(Language::Cpp);
    let graph = scan_repository(&repo, &frontend(Language::Cpp)).unwrap().graph;
    let env = BuildEnv::new(&repo, frontend(Language::Cpp).include_roots);

    // Seeded fault: the include for the API header is missing.
    let backend = Arc::new(ScriptedBackend::new());
    backend.push(Role::Repair, Ok(repair_reply(&read("missing_include/repaired.cpp"), "include geo/vec.h")));
    let gw = Gateway::new(Box::new(backend.clone()), GatewayConfig::default());
    let s = sample(&graph, "missing-include", "run_add", read("missing_include/functional.cpp"), read("missing_include/assertions.cpp"));
    let fixed = match compile_and_repair(s, &graph, &env, &sandbox, &gw, 3, 0) {
        Ok(s) => s,
        Err(v) => return Outcome::Fail(format!("seeded fault not repaired: {} {}", v.reason, v.detail)),
    };
    if fixed.repair_log.len() > 3 || fixed.repair_log.is_empty() {
        return Outcome::Fail(format!("seeded fault took {} repairs", fixed.repair_log.len()));
    }
    let exec = execution_filter(&fixed, &graph, &env, &sandbox);
    if !exec.pass {
        return Outcome::Fail(format!("repaired sample fails execution: {} {}", exec.reason, exec.detail));
    }

    // Unfixable: the called API does not exist and the model will not change
    // the code.
    let backend = Arc::new(ScriptedBackend::new());
    let code = read("deleted_api/functional.cpp");
    for _ in 0..8 {
        backend.push(Role::Repair, Ok(repair_reply(&code, "cannot fix without the API")));
    }
    let gw = Gateway::new(Box::new(backend.clone()), GatewayConfig::default());
    let s = sample(&graph, "deleted-api", "run_cross", code, read("deleted_api/assertions.cpp"));
    match compile_and_repair(s, &graph, &env, &sandbox, &gw, 3, 0) {
        Ok(_) => Outcome::Fail("unfixable sample compiled".into()),
        Err(v) if v.reason == Reason::CompileError && v.detail.contains("cross") && backend.calls(Role::Repair) == 3 => {
            Outcome::Pass(format!(
                "seeded fault fixed after {} repair(s) and passes execution; unfixable rejected after 3 repairs with final diagnostic",
                fixed.repair_log.len()
            ))
        }
        Err(v) => Outcome::Fail(format!(
            "unfixable rejected with {} after {} repair calls: {}",
            v.reason,
            backend.calls(Role::Repair),
            v.detail
        )),
    }
}
