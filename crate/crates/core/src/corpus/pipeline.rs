use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;
use tracing::info;

use super::{
    read_jsonl_values, write_corpus, write_jsonl, CorpusError, CorpusHeader, PipelineConfig, RecordMetadata, SftKind,
    SftRecord, CORPUS_VERSION, CPT_SCHEMA, SFT_SCHEMA,
};
use crate::composition::{
    consistency_filter_stage2, generate_tasks, mine_combinations, rule_filter_stage1, ApiCombination, CompiledMatcher,
};
use crate::cpt::{build_cpt_corpus, mix_corpus, mix_records};
use crate::digest::{sha256_hex, sha256_parts};
use crate::frontend::scan_repository;
use crate::gateway::Gateway;
use crate::graph::{graph_stats, write_graph_file, CodeGraph, StatsReport};
use crate::prompts::{fill, prompt_version_hash, RELATION_INSTRUCTION};
use crate::relation::{augment_relations, positive_samples, RelationConfig};
use crate::sandbox::Sandbox;
use crate::tokenizer::ApproxTokenizer;
use crate::trace::{generate_trace, judge_check};
use crate::utilization::{compile_and_repair, decompose_test, execution_filter, BuildEnv};
use crate::verdict::{FilterVerdict, Reason, Stage};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("stage {stage} failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Corpus(#[from] CorpusError),
}

fn fatal(stage: &'static str) -> impl Fn(String) -> PipelineError {
    move |message| PipelineError::Stage { stage, message }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StageCount {
    pub generated: usize,
    pub accepted: usize,
    pub rejected: usize,
    pub skipped: usize,
}

impl StageCount {
    pub fn conserved(&self) -> bool {
        self.generated == self.accepted + self.rejected + self.skipped
    }

    pub fn rejection_rate(&self) -> f64 {
        if self.generated == 0 {
            0.0
        } else {
            self.rejected as f64 / self.generated as f64
        }
    }
}

/// Per-stage counts and the verdict log.
#[derive(Clone, Debug, Default)]
pub struct StageLog {
    pub counts: BTreeMap<String, StageCount>,
    pub verdicts: Vec<FilterVerdict>,
}

/// Reasons that mean the sample could not be judged rather than that it
/// was judged bad.
fn is_skip(reason: Reason) -> bool {
    matches!(
        reason,
        Reason::GatewayFailure | Reason::ToolchainMissing | Reason::InsufficientApis | Reason::NoApiInvocation
    )
}

impl StageLog {
    fn entry(&mut self, stage: &str) -> &mut StageCount {
        self.counts.entry(stage.to_string()).or_default()
    }

    pub fn accept(&mut self, stage: &str) {
        let c = self.entry(stage);
        c.generated += 1;
        c.accepted += 1;
    }

    /// Counts and logs a verdict: passes are accepted, failures rejected
    /// or skipped depending on the reason.
    pub fn verdict(&mut self, stage: &str, v: FilterVerdict) -> bool {
        let c = self.entry(stage);
        c.generated += 1;
        let pass = v.pass;
        if v.pass {
            c.accepted += 1;
        } else if is_skip(v.reason) {
            c.skipped += 1;
        } else {
            c.rejected += 1;
        }
        self.verdicts.push(v);
        pass
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub repo_digest: String,
    pub config_digest: String,
    pub prompt_hash: String,
    pub graph: StatsReport,
    pub entities: usize,
    pub relations: usize,
    pub diagnostics: BTreeMap<String, usize>,
    pub cpt_samples: usize,
    pub stages: BTreeMap<String, StageCount>,
    pub rejection_rates: BTreeMap<String, f64>,
    /// Accepted records per kind, general records included.
    pub samples: BTreeMap<String, usize>,
    /// sha256 of each output file.
    pub outputs: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn conserved(&self) -> bool {
        self.stages.values().all(StageCount::conserved)
    }
}

fn record_id(kind: SftKind, parts: &[&str]) -> String {
    let mut all = vec![kind.as_str()];
    all.extend_from_slice(parts);
    sha256_parts(all)[..24].to_string()
}

fn cap<T>(mut v: Vec<T>, limit: Option<usize>) -> Vec<T> {
    if let Some(n) = limit {
        v.truncate(n);
    }
    v
}

/// Relation statements with their traces. Each statement of each sample
/// becomes one record when its trace agrees with the ground truth.
pub fn relation_records(
    graph: &CodeGraph,
    cfg: &RelationConfig,
    gateway: &Gateway,
    seed: u64,
    log: &mut StageLog,
) -> Result<Vec<SftRecord>, PipelineError> {
    let positives = positive_samples(graph, cfg, seed).map_err(|e| fatal("relation")(e.to_string()))?;
    let augmented =
        augment_relations(positives, graph, gateway, cfg.n1, cfg.n2, seed).map_err(|e| fatal("relation")(e.to_string()))?;
    for v in augmented.verdicts {
        let stage = format!("relation.{}", v.stage.as_str());
        log.verdict(&stage, v);
    }
    let mut out = Vec::new();
    for (i, s) in augmented.samples.iter().enumerate() {
        let truth = s.ground_truth();
        for (j, statement) in s.statements().into_iter().enumerate() {
            let id = record_id(SftKind::Relation, &[&s.id, &j.to_string()]);
            let instruction = fill(RELATION_INSTRUCTION, &[("statement", statement)]);
            let trace_seed = seed.wrapping_add((i * 1000 + j) as u64);
            let check = judge_check(gateway, &id, &truth, trace_seed);
            let outcome = match generate_trace(gateway, &id, &instruction, &s.context, &truth, trace_seed, &check) {
                Ok(o) => o,
                Err(e) => {
                    log.verdict("relation.trace", FilterVerdict::fail(&id, Stage::Trace, Reason::GatewayFailure, e.to_string()));
                    continue;
                }
            };
            if !log.verdict("relation.trace", outcome.verdict.clone()) {
                continue;
            }
            out.push(SftRecord {
                id: id.clone(),
                kind: SftKind::Relation,
                instruction,
                context: s.context.clone(),
                reasoning_trace: outcome.result.reasoning_trace,
                response: outcome.result.response,
                metadata: RecordMetadata {
                    polarity: Some(s.polarity),
                    provenance: s.provenance(),
                    prompt_hash: prompt_version_hash().to_string(),
                    trace_attempt: outcome.result.attempt_index,
                    verdicts: vec![outcome.verdict],
                    ..Default::default()
                },
                general: false,
            });
        }
    }
    Ok(out)
}

/// Tasks over mined API combinations, filtered by the rule check, traced,
/// then filtered by the consistency check.
pub fn composition_records(
    graph: &CodeGraph,
    combinations: &[ApiCombination],
    cfg: &super::CompositionConfig,
    gateway: &Gateway,
    seed: u64,
    log: &mut StageLog,
) -> Result<Vec<SftRecord>, PipelineError> {
    let mut out = Vec::new();
    for (i, comb) in combinations.iter().enumerate() {
        let comb_seed = seed.wrapping_add(i as u64 * 7919);
        let designed = generate_tasks(comb, graph, &cfg.formats, cfg.difficulty_min..=cfg.difficulty_max, gateway, comb_seed)
            .map_err(|e| fatal("composition")(e.to_string()))?;
        for v in designed.skipped {
            log.verdict("composition.task_design", v);
        }
        for task in designed.tasks {
            log.accept("composition.task_design");
            let stage1 = rule_filter_stage1(&task, graph);
            if !log.verdict("composition.rule_stage1", stage1.clone()) {
                continue;
            }
            let trace_seed = comb_seed.wrapping_add(task.difficulty as u64);
            let check = |c: &crate::gateway::Completion| consistency_filter_stage2(&task, graph, &c.content, gateway, trace_seed);
            let outcome =
                match generate_trace(gateway, &task.id, &task.statement, &task.context, &task.reference_answer, trace_seed, &check) {
                    Ok(o) => o,
                    Err(e) => {
                        let v = FilterVerdict::fail(&task.id, Stage::ConsistencyStage2, Reason::GatewayFailure, e.to_string());
                        log.verdict("composition.consistency_stage2", v);
                        continue;
                    }
                };
            if !log.verdict("composition.consistency_stage2", outcome.verdict.clone()) {
                continue;
            }
            let mut provenance = vec![task.source_test.clone()];
            provenance.extend(task.context_entities.iter().cloned());
            out.push(SftRecord {
                id: record_id(SftKind::Composition, &[&task.id]),
                kind: SftKind::Composition,
                instruction: task.statement.clone(),
                context: task.context.clone(),
                reasoning_trace: outcome.result.reasoning_trace,
                response: outcome.result.response,
                metadata: RecordMetadata {
                    format: Some(task.format),
                    difficulty: Some(task.difficulty),
                    grading_criteria: Some(task.grading_criteria.clone()),
                    reference_answer: Some(task.reference_answer.clone()),
                    provenance,
                    prompt_hash: task.prompt_hash.clone(),
                    trace_attempt: outcome.result.attempt_index,
                    verdicts: vec![stage1, outcome.verdict],
                    ..Default::default()
                },
                general: false,
            });
        }
    }
    Ok(out)
}

/// Tests split into implementation and assertions, repaired until they
/// build, executed, and traced.
#[allow(clippy::too_many_arguments)]
pub fn utilization_records(
    graph: &CodeGraph,
    matcher: &CompiledMatcher<'_>,
    combinations: &[ApiCombination],
    env: &BuildEnv,
    sandbox: &Sandbox,
    max_repairs: usize,
    gateway: &Gateway,
    seed: u64,
    log: &mut StageLog,
) -> Result<Vec<SftRecord>, PipelineError> {
    // Tests without any in-repo call have nothing to decompose.
    for t in matcher.tests(graph) {
        if !combinations.iter().any(|c| c.source_test == t.id) {
            let id = record_id(SftKind::Utilization, &[t.id.as_str()]);
            log.verdict("utilization.decompose", FilterVerdict::fail(id, Stage::Decompose, Reason::NoApiInvocation, t.name.clone()));
        }
    }
    let mut out = Vec::new();
    for (i, comb) in combinations.iter().enumerate() {
        let s_seed = seed.wrapping_add(i as u64 * 104_729);
        let sample = match decompose_test(comb, graph, gateway, s_seed).map_err(|e| fatal("utilization")(e.to_string()))? {
            Ok(s) => {
                log.verdict("utilization.decompose", FilterVerdict::pass(&s.id, Stage::Decompose));
                s
            }
            Err(v) => {
                log.verdict("utilization.decompose", v);
                continue;
            }
        };
        let sample = match compile_and_repair(sample, graph, env, sandbox, gateway, max_repairs, s_seed) {
            Ok(s) => {
                log.verdict("utilization.repair", FilterVerdict::pass(&s.id, Stage::Repair));
                s
            }
            Err(v) => {
                log.verdict("utilization.repair", v);
                continue;
            }
        };
        let exec = execution_filter(&sample, graph, env, sandbox);
        if !log.verdict("utilization.execution", exec.clone()) {
            continue;
        }
        let check = judge_check(gateway, &sample.id, &sample.functional_code, s_seed);
        let outcome =
            match generate_trace(gateway, &sample.id, &sample.instruction, &sample.context, &sample.functional_code, s_seed, &check) {
                Ok(o) => o,
                Err(e) => {
                    log.verdict("utilization.trace", FilterVerdict::fail(&sample.id, Stage::Trace, Reason::GatewayFailure, e.to_string()));
                    continue;
                }
            };
        if !log.verdict("utilization.trace", outcome.verdict.clone()) {
            continue;
        }
        let mut provenance = vec![sample.source_test.clone()];
        provenance.extend(sample.context_entities.iter().cloned());
        out.push(SftRecord {
            id: record_id(SftKind::Utilization, &[&sample.id]),
            kind: SftKind::Utilization,
            instruction: sample.instruction.clone(),
            context: sample.context.clone(),
            reasoning_trace: outcome.result.reasoning_trace,
            response: outcome.result.response,
            metadata: RecordMetadata {
                functional_code: Some(sample.functional_code.clone()),
                assertions: Some(sample.assertions.clone()),
                repair_log: Some(sample.repair_log.clone()),
                provenance,
                prompt_hash: prompt_version_hash().to_string(),
                trace_attempt: outcome.result.attempt_index,
                verdicts: vec![exec, outcome.verdict],
                ..Default::default()
            },
            general: false,
        });
    }
    Ok(out)
}

fn file_digest(path: &Path) -> Result<String, PipelineError> {
    let bytes = std::fs::read(path).map_err(CorpusError::from)?;
    Ok(sha256_hex(&bytes))
}

/// Builds the gateway and sandbox from `cfg` and runs every stage.
pub fn run_pipeline(repo: &Path, cfg: &PipelineConfig, out_dir: &Path) -> Result<RunReport, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    let gateway = Gateway::from_config(cfg.gateway.clone()).map_err(|e| PipelineError::Config(e.to_string()))?;
    let sandbox = Sandbox::new(cfg.sandbox.clone());
    run_pipeline_with(repo, cfg, &gateway, &sandbox, out_dir)
}

/// Graph, pretraining corpus, the three SFT families with traces and
/// filters, mixing, and the report. Outputs land in `out_dir`:
/// `graph.jsonl`, `cpt.jsonl`, `sft.jsonl`, `verdicts.jsonl`, `report.json`.
pub fn run_pipeline_with(
    repo: &Path,
    cfg: &PipelineConfig,
    gateway: &Gateway,
    sandbox: &Sandbox,
    out_dir: &Path,
) -> Result<RunReport, PipelineError> {
    cfg.validate().map_err(|e| PipelineError::Config(e.to_string()))?;
    std::fs::create_dir_all(out_dir).map_err(CorpusError::from)?;
    let mut report = RunReport {
        config_digest: cfg.digest(),
        prompt_hash: prompt_version_hash().to_string(),
        ..Default::default()
    };

    let analysis = scan_repository(repo, &cfg.frontend).map_err(|e| fatal("graph")(e.to_string()))?;
    let graph = analysis.graph;
    for d in &analysis.diagnostics {
        *report.diagnostics.entry(d.kind.to_string()).or_default() += 1;
    }
    report.repo_digest = graph.content_hash().to_string();
    report.graph = graph_stats(&graph);
    report.entities = graph.entity_count();
    report.relations = graph.relations().len();
    let graph_path = out_dir.join("graph.jsonl");
    write_graph_file(&graph, &graph_path).map_err(|e| fatal("graph")(e.to_string()))?;
    info!(entities = report.entities, relations = report.relations, "graph built");

    let cpt = build_cpt_corpus(&graph, &ApproxTokenizer, &cfg.cpt).map_err(|e| fatal("cpt")(e.to_string()))?;
    report.cpt_samples = cpt.len();
    let cpt_general = match &cfg.cpt_general_data {
        Some(p) => read_jsonl_values(p)?,
        None => Vec::new(),
    };
    let mixed = mix_corpus(cpt, cpt_general, cfg.cpt.general_mix_ratio, cfg.cpt.seed).map_err(|e| fatal("cpt")(e.to_string()))?;
    let cpt_header = CorpusHeader {
        schema: CPT_SCHEMA.into(),
        version: CORPUS_VERSION,
        graph: Some("graph.jsonl".into()),
        graph_hash: Some(graph.content_hash().into()),
        prompt_hash: String::new(),
        records: mixed.len(),
    };
    write_corpus(&out_dir.join("cpt.jsonl"), &cpt_header, &mixed)?;

    let mut log = StageLog::default();
    let relation = relation_records(&graph, &cfg.relation, gateway, cfg.seed, &mut log)?;
    let relation = cap(relation, cfg.targets.relation);

    let matcher = cfg.composition.test_matcher.compile().map_err(|e| PipelineError::Config(e.to_string()))?;
    let mined = mine_combinations(&graph, &matcher).map_err(|e| fatal("composition")(e.to_string()))?;
    report.warnings.extend(mined.warnings.iter().cloned());
    let composition = composition_records(&graph, &mined.combinations, &cfg.composition, gateway, cfg.seed, &mut log)?;
    let composition = cap(composition, cfg.targets.composition);

    let utilization = if cfg.utilization.enabled && !mined.combinations.is_empty() {
        if !sandbox.toolchain_available(graph.language()) {
            report.warnings.push(format!("no {} toolchain; utilization samples are skipped", graph.language().name()));
        }
        let env = BuildEnv::new(repo, cfg.frontend.include_roots.clone());
        let u = utilization_records(
            &graph,
            &matcher,
            &mined.combinations,
            &env,
            sandbox,
            cfg.utilization.max_repairs,
            gateway,
            cfg.seed,
            &mut log,
        )?;
        cap(u, cfg.targets.utilization)
    } else {
        Vec::new()
    };

    let mut domain: Vec<SftRecord> = Vec::new();
    domain.extend(relation);
    domain.extend(composition);
    domain.extend(utilization);
    let general: Vec<SftRecord> = match &cfg.sft_general_data {
        Some(p) => read_jsonl_values(p)?
            .iter()
            .map(SftRecord::general)
            .collect::<Result<_, _>>()
            .map_err(|e| fatal("mix")(e.to_string()))?,
        None => Vec::new(),
    };
    let sft = mix_records(domain, &general, cfg.sft_general_mix_ratio, cfg.seed).map_err(|e| fatal("mix")(e.to_string()))?;
    for r in &sft {
        *report.samples.entry(r.kind.as_str().to_string()).or_default() += 1;
    }
    let sft_header = CorpusHeader {
        schema: SFT_SCHEMA.into(),
        version: CORPUS_VERSION,
        graph: Some("graph.jsonl".into()),
        graph_hash: Some(graph.content_hash().into()),
        prompt_hash: prompt_version_hash().to_string(),
        records: sft.len(),
    };
    write_corpus(&out_dir.join("sft.jsonl"), &sft_header, &sft)?;
    write_jsonl(&out_dir.join("verdicts.jsonl"), &log.verdicts)?;

    report.rejection_rates = log.counts.iter().map(|(k, c)| (k.clone(), c.rejection_rate())).collect();
    report.stages = log.counts;
    for name in ["graph.jsonl", "cpt.jsonl", "sft.jsonl", "verdicts.jsonl"] {
        report.outputs.insert(name.to_string(), file_digest(&out_dir.join(name))?);
    }
    let report_text = serde_json::to_string_pretty(&report).map_err(CorpusError::from)?;
    std::fs::write(out_dir.join("report.json"), report_text + "\n").map_err(CorpusError::from)?;
    info!(records = sft.len(), "pipeline finished");
    Ok(report)
}
