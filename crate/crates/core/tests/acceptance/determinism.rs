use std::path::Path;

use graphsynth_core::corpus::{run_pipeline, RunReport};
use graphsynth_core::gateway::BackendKind;
use graphsynth_core::graph::Language;

use crate::common::{pipeline_config, repo_for};
use crate::Outcome;

const CORPUS_FILES: [&str; 4] = ["graph.jsonl", "cpt.jsonl", "sft.jsonl", "verdicts.jsonl"];

fn run_once(language: Language, backend: BackendKind, transcript: &Path, out: &Path) -> Result<RunReport, String> {
    let mut cfg = pipeline_config(language);
    cfg.gateway.backend = backend;
    cfg.gateway.transcript_path = Some(transcript.to_path_buf());
    run_pipeline(&repo_for(language), &cfg, out).map_err(|e| e.to_string())
}

fn same(a: &Path, b: &Path, name: &str) -> Result<(), String> {
    let x = std::fs::read(a.join(name)).map_err(|e| e.to_string())?;
    let y = std::fs::read(b.join(name)).map_err(|e| e.to_string())?;
    if x == y {
        Ok(())
    } else {
        Err(format!("{name} differs between {} and {}", a.display(), b.display()))
    }
}

fn check(language: Language) -> Result<String, String> {
    let tmp = tempfile::tempdir().map_err(|e| e.to_string())?;
    let transcript = tmp.path().join("transcript.jsonl");
    let (rec, a, b) = (tmp.path().join("record"), tmp.path().join("replay-a"), tmp.path().join("replay-b"));
    let r0 = run_once(language, BackendKind::Record, &transcript, &rec)?;
    let r1 = run_once(language, BackendKind::Replay, &transcript, &a)?;
    let r2 = run_once(language, BackendKind::Replay, &transcript, &b)?;
    for name in CORPUS_FILES.iter().chain(["report.json"].iter()) {
        same(&a, &b, name)?;
    }
    for name in CORPUS_FILES {
        same(&rec, &a, name)?;
    }
    for (tag, r) in [("record", &r0), ("replay", &r1), ("replay", &r2)] {
        if !r.conserved() {
            return Err(format!("{tag} run violates count conservation: {:?}", r.stages));
        }
    }
    let records: usize = r1.samples.values().sum();
    if records == 0 {
        return Err("the fixture run produced no SFT records".into());
    }
    Ok(format!("{language}: {records} records, {} stages conserved", r1.stages.len()))
}

pub fn run_all() -> Result<Vec<String>, String> {
    [Language::Python, Language::Cpp].into_iter().map(check).collect()
}

pub fn run() -> Outcome {
    match run_all() {
        Ok(lines) => Outcome::Pass(format!("byte-identical replays; {}", lines.join("; "))),
        Err(e) => Outcome::Fail(e),
    }
}
