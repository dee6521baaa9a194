use std::collections::BTreeSet;

use graphsynth_core::frontend::scan_repository;
use graphsynth_core::graph::{CodeGraph, Language};

use crate::common::{fixture, frontend, repo_for};
use crate::Outcome;

fn facts(g: &CodeGraph) -> BTreeSet<String> {
    let mut out: BTreeSet<String> =
        g.entities().map(|e| format!("entity {} {} {}", e.kind.as_str(), e.name, e.file_path)).collect();
    for r in g.relations() {
        let src = &g.entity(&r.src).unwrap().name;
        let dst = &g.entity(&r.dst).unwrap().name;
        out.insert(format!("relation {} {src} -> {dst}", r.kind.as_str()));
    }
    out
}

fn expected(name: &str) -> BTreeSet<String> {
    std::fs::read_to_string(fixture(name))
        .unwrap()
        .lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(str::to_string)
        .collect()
}

pub fn run() -> Outcome {
    let mut summary = Vec::new();
    let mut problems = Vec::new();
    for (language, file) in [(Language::Cpp, "cpp_repo.expected"), (Language::Python, "python_repo.expected")] {
        let analysis = match scan_repository(&repo_for(language), &frontend(language)) {
            Ok(a) => a,
            Err(e) => return Outcome::Fail(format!("{language}: {e}")),
        };
        let got = facts(&analysis.graph);
        let want = expected(file);
        for missing in want.difference(&got) {
            problems.push(format!("{language} missing: {missing}"));
        }
        for extra in got.difference(&want) {
            problems.push(format!("{language} unexpected: {extra}"));
        }
        summary.push(format!(
            "{language}: {} entities, {} relations",
            analysis.graph.entity_count(),
            want.iter().filter(|l| l.starts_with("relation")).count()
        ));
    }
    if problems.is_empty() {
        Outcome::Pass(format!("0 discrepancies ({})", summary.join("; ")))
    } else {
        Outcome::Fail(format!("{} discrepancies: {}", problems.len(), problems.join(" | ")))
    }
}
