//! Corpus records, their on-disk format, configuration and the end-to-end
//! pipeline.

mod config;
mod pipeline;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use config::{CompositionConfig, ConfigError, PipelineConfig, Targets, UtilizationConfig, CONFIG_VERSION};
pub use pipeline::{
    composition_records, relation_records, run_pipeline, run_pipeline_with, utilization_records, PipelineError, RunReport,
    StageCount, StageLog,
};

use crate::composition::GradingCriterion;
use crate::context::{ContextBundle, ContextKind};
use crate::digest::sha256_parts;
use crate::gateway::TaskFormat;
use crate::graph::{read_graph_file, CodeGraph, EntityId};
use crate::relation::Polarity;
use crate::utilization::RepairStep;
use crate::verdict::FilterVerdict;

pub const CORPUS_VERSION: u32 = 1;
pub const SFT_SCHEMA: &str = "graphsynth.sft";
pub const CPT_SCHEMA: &str = "graphsynth.cpt";

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("cannot read {path}: {source}")]
    Unreadable { path: PathBuf, source: io::Error },
    #[error("corpus i/o: {0}")]
    Io(#[from] io::Error),
    #[error("corpus encoding: {0}")]
    Json(#[from] serde_json::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SftKind {
    Relation,
    Composition,
    Utilization,
    /// Externally supplied general-domain record.
    General,
}

impl SftKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SftKind::Relation => "relation",
            SftKind::Composition => "composition",
            SftKind::Utilization => "utilization",
            SftKind::General => "general",
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordMetadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub polarity: Option<Polarity>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<TaskFormat>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grading_criteria: Option<Vec<GradingCriterion>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_answer: Option<String>,
    /// Ground-truth implementation and its assertions (utilization).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub functional_code: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub assertions: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub repair_log: Option<Vec<RepairStep>>,
    /// Entities the record was built from, plus its context entities.
    #[serde(default)]
    pub provenance: Vec<EntityId>,
    #[serde(default)]
    pub prompt_hash: String,
    #[serde(default)]
    pub trace_attempt: usize,
    #[serde(default)]
    pub verdicts: Vec<FilterVerdict>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SftRecord {
    pub id: String,
    pub kind: SftKind,
    pub instruction: String,
    pub context: ContextBundle,
    pub reasoning_trace: String,
    pub response: String,
    pub metadata: RecordMetadata,
    #[serde(default)]
    pub general: bool,
}

#[derive(Deserialize)]
struct GeneralInput {
    instruction: String,
    response: String,
    #[serde(default)]
    reasoning_trace: String,
}

impl SftRecord {
    /// Wraps one general-domain line: either a full record or an object
    /// with `instruction`, `response` and optionally `reasoning_trace`.
    pub fn general(value: &serde_json::Value) -> Result<SftRecord, serde_json::Error> {
        if let Ok(mut r) = serde_json::from_value::<SftRecord>(value.clone()) {
            r.general = true;
            r.kind = SftKind::General;
            return Ok(r);
        }
        let g: GeneralInput = serde_json::from_value(value.clone())?;
        Ok(SftRecord {
            id: sha256_parts(["general", &g.instruction, &g.response])[..24].to_string(),
            kind: SftKind::General,
            instruction: g.instruction,
            context: ContextBundle::new(ContextKind::FileContents),
            reasoning_trace: g.reasoning_trace,
            response: g.response,
            metadata: RecordMetadata::default(),
            general: true,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub schema: String,
    pub version: u32,
    /// Companion graph file, relative to the corpus file.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub graph_hash: Option<String>,
    #[serde(default)]
    pub prompt_hash: String,
    pub records: usize,
}

/// Header line followed by one JSON record per line.
pub fn write_corpus<T: Serialize>(path: &Path, header: &CorpusHeader, records: &[T]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "{}", serde_json::to_string(header)?)?;
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Plain line-delimited records with no header.
pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<(), CorpusError> {
    let mut out = BufWriter::new(File::create(path)?);
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r)?)?;
    }
    out.flush()?;
    Ok(())
}

/// Every non-blank line of a line-delimited file as a JSON value.
pub fn read_jsonl_values(path: &Path) -> Result<Vec<serde_json::Value>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Unreadable { path: path.to_path_buf(), source })?;
    let mut out = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// Reads the records of an SFT corpus written by [`write_corpus`].
pub fn read_sft_corpus(path: &Path) -> Result<(CorpusHeader, Vec<SftRecord>), CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Unreadable { path: path.to_path_buf(), source })?;
    let mut lines = BufReader::new(file).lines();
    let header: CorpusHeader = match lines.next() {
        Some(l) => serde_json::from_str(&l?)?,
        None => return Err(CorpusError::Io(io::Error::new(io::ErrorKind::UnexpectedEof, "empty corpus file"))),
    };
    let mut records = Vec::new();
    for line in lines {
        let line = line?;
        if !line.trim().is_empty() {
            records.push(serde_json::from_str(&line)?);
        }
    }
    Ok((header, records))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// 1-based line number; 1 is the header.
    pub line: usize,
    pub message: String,
}

fn violation(line: usize, message: impl Into<String>) -> Violation {
    Violation { line, message: message.into() }
}

/// Schema and invariant check of a corpus file. SFT records must carry a
/// trace and a response, and their provenance must resolve in the
/// companion graph named by the header.
pub fn validate_corpus(path: &Path) -> Result<Vec<Violation>, CorpusError> {
    let file = File::open(path).map_err(|source| CorpusError::Unreadable { path: path.to_path_buf(), source })?;
    let mut lines = BufReader::new(file).lines().enumerate();
    let mut out = Vec::new();
    let Some((_, first)) = lines.next() else {
        return Ok(vec![violation(1, "missing header line")]);
    };
    let header: CorpusHeader = match serde_json::from_str(&first?) {
        Ok(h) => h,
        Err(e) => return Ok(vec![violation(1, format!("bad header: {e}"))]),
    };
    if header.version != CORPUS_VERSION {
        out.push(violation(1, format!("unsupported version {}", header.version)));
    }
    let graph: Option<CodeGraph> = match &header.graph {
        Some(rel) => {
            let gpath = path.parent().unwrap_or(Path::new(".")).join(rel);
            match read_graph_file(&gpath) {
                Ok(g) => {
                    if header.graph_hash.as_deref().is_some_and(|h| h != g.content_hash()) {
                        out.push(violation(1, format!("graph {rel} does not match the recorded hash")));
                    }
                    Some(g)
                }
                Err(e) => {
                    out.push(violation(1, format!("companion graph {rel}: {e}")));
                    None
                }
            }
        }
        None => None,
    };
    let mut count = 0;
    let mut ids = BTreeMap::new();
    for (i, line) in lines {
        let n = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        count += 1;
        match header.schema.as_str() {
            SFT_SCHEMA => match serde_json::from_str::<SftRecord>(&line) {
                Err(e) => out.push(violation(n, format!("schema: {e}"))),
                Ok(r) => {
                    if let Some(prev) = ids.insert(r.id.clone(), n) {
                        out.push(violation(n, format!("duplicate id {} (first on line {prev})", r.id)));
                    }
                    if r.response.trim().is_empty() {
                        out.push(violation(n, "empty response"));
                    }
                    if !r.general && r.reasoning_trace.trim().is_empty() {
                        out.push(violation(n, "empty reasoning trace"));
                    }
                    if r.general != (r.kind == SftKind::General) {
                        out.push(violation(n, "general flag disagrees with kind"));
                    }
                    if !r.general && r.context.is_empty() {
                        out.push(violation(n, "empty context"));
                    }
                    if let Some(g) = &graph {
                        for id in &r.metadata.provenance {
                            if g.entity(id).is_none() {
                                out.push(violation(n, format!("unknown entity id {id}")));
                            }
                        }
                    } else if !r.metadata.provenance.is_empty() {
                        out.push(violation(n, "provenance ids but no companion graph"));
                    }
                }
            },
            CPT_SCHEMA => match serde_json::from_str::<serde_json::Value>(&line) {
                Err(e) => out.push(violation(n, format!("schema: {e}"))),
                Ok(v) => {
                    let domain = v.get("file_sequence").is_some();
                    if domain && serde_json::from_value::<crate::cpt::CptSample>(v.clone()).is_err() {
                        out.push(violation(n, "malformed pretraining sample"));
                    }
                    if domain && v["text"].as_str().is_none_or(|t| t.is_empty()) {
                        out.push(violation(n, "empty text"));
                    }
                }
            },
            other => {
                out.push(violation(1, format!("unknown schema {other}")));
                break;
            }
        }
    }
    if count != header.records {
        out.push(violation(1, format!("header counts {} records, file has {count}", header.records)));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::fixtures::{file, func, rel};
    use crate::graph::{write_graph_file, Language, RelationKind};

    fn setup() -> (tempfile::TempDir, CodeGraph) {
        let dir = tempfile::tempdir().unwrap();
        let a = file("a.cpp", "int f() { return 1; }");
        let f = func("f", "a.cpp", 0);
        let g = CodeGraph::from_parts(Language::Cpp, vec![a.clone(), f.clone()], vec![rel(&a, RelationKind::Contain, &f)]).unwrap();
        write_graph_file(&g, &dir.path().join("graph.jsonl")).unwrap();
        (dir, g)
    }

    fn record(g: &CodeGraph) -> SftRecord {
        let mut ctx = ContextBundle::new(ContextKind::FileContents);
        ctx.push("a.cpp", "int f() { return 1; }");
        SftRecord {
            id: "r1".into(),
            kind: SftKind::Relation,
            instruction: "Is it true?".into(),
            context: ctx,
            reasoning_trace: "because".into(),
            response: "Yes.".into(),
            metadata: RecordMetadata { provenance: g.entities().map(|e| e.id.clone()).collect(), ..Default::default() },
            general: false,
        }
    }

    fn header(n: usize, g: &CodeGraph) -> CorpusHeader {
        CorpusHeader {
            schema: SFT_SCHEMA.into(),
            version: CORPUS_VERSION,
            graph: Some("graph.jsonl".into()),
            graph_hash: Some(g.content_hash().into()),
            prompt_hash: String::new(),
            records: n,
        }
    }

    #[test]
    fn clean_corpus_has_no_violations() {
        let (dir, g) = setup();
        let path = dir.path().join("sft.jsonl");
        write_corpus(&path, &header(1, &g), &[record(&g)]).unwrap();
        assert_eq!(validate_corpus(&path).unwrap(), vec![]);
        let (_, back) = read_sft_corpus(&path).unwrap();
        assert_eq!(back, vec![record(&g)]);
    }

    #[test]
    fn missing_response_is_one_violation() {
        let (dir, g) = setup();
        let path = dir.path().join("sft.jsonl");
        let mut v = serde_json::to_value(record(&g)).unwrap();
        v.as_object_mut().unwrap().remove("response");
        write_corpus(&path, &header(1, &g), &[v]).unwrap();
        let found = validate_corpus(&path).unwrap();
        assert_eq!(found.len(), 1, "{found:?}");
        assert!(found[0].message.contains("response"));
    }

    #[test]
    fn unknown_entity_is_one_violation() {
        let (dir, g) = setup();
        let path = dir.path().join("sft.jsonl");
        let mut r = record(&g);
        r.metadata.provenance.push(EntityId::from_raw("function:ghost"));
        write_corpus(&path, &header(1, &g), &[r]).unwrap();
        let found = validate_corpus(&path).unwrap();
        assert_eq!(found.len(), 1);
        assert!(found[0].message.contains("ghost"));
    }

    #[test]
    fn unreadable_file_errors() {
        assert!(matches!(validate_corpus(Path::new("/nonexistent/x.jsonl")), Err(CorpusError::Unreadable { .. })));
    }

    #[test]
    fn general_lines_are_wrapped() {
        let v = serde_json::json!({"instruction": "Sort a list", "response": "sorted(xs)"});
        let r = SftRecord::general(&v).unwrap();
        assert!(r.general);
        assert_eq!(r.kind, SftKind::General);
    }
}
