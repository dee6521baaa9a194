use graphsynth_core::composition::{extract_code, missing_context_symbols};
use graphsynth_core::corpus::{read_sft_corpus, run_pipeline, SftKind};
use graphsynth_core::graph::{read_graph_file, Language};

use crate::common::{pipeline_config, repo_for};
use crate::Outcome;

fn check(language: Language) -> Result<(usize, usize, Vec<String>), String> {
    let out = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_pipeline(&repo_for(language), &pipeline_config(language), out.path()).map_err(|e| e.to_string())?;
    let graph = read_graph_file(&out.path().join("graph.jsonl")).map_err(|e| e.to_string())?;
    let (_, records) = read_sft_corpus(&out.path().join("sft.jsonl")).map_err(|e| e.to_string())?;
    let (mut composition, mut utilization) = (0, 0);
    let mut problems = Vec::new();
    for r in &records {
        let code = match r.kind {
            SftKind::Composition => {
                composition += 1;
                r.metadata.format.and_then(|f| extract_code(f, &r.response))
            }
            SftKind::Utilization => {
                utilization += 1;
                r.metadata.functional_code.clone()
            }
            _ => continue,
        };
        let Some(code) = code else { continue };
        // The first provenance entry is the source test; the rest is the
        // context the sample was built with.
        let context = &r.metadata.provenance[1..];
        match missing_context_symbols(&graph, &code, context) {
            Ok(missing) if missing.is_empty() => {}
            Ok(missing) => problems.push(format!("{language} {}: missing {}", r.id, missing.join(", "))),
            Err(e) => problems.push(format!("{language} {}: {e}", r.id)),
        }
    }
    Ok((composition, utilization, problems))
}

pub fn run() -> Outcome {
    let mut lines = Vec::new();
    let mut problems = Vec::new();
    let mut checked = 0;
    for language in [Language::Python, Language::Cpp] {
        match check(language) {
            Ok((c, u, p)) => {
                checked += c + u;
                lines.push(format!("{language}: {c} composition, {u} utilization"));
                problems.extend(p);
            }
            Err(e) => return Outcome::Fail(format!("{language}: {e}")),
        }
    }
    if checked == 0 {
        return Outcome::Fail("no accepted composition or utilization samples to check".into());
    }
    if problems.is_empty() {
        Outcome::Pass(format!("0 missing symbols ({})", lines.join("; ")))
    } else {
        Outcome::Fail(problems.join(" | "))
    }
}
