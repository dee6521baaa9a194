use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use graphsynth_core::composition::{extract_code, mine_combinations, missing_context_symbols, rule_filter_stage1, CompositionTask};
use graphsynth_core::context::ContextBundle;
use graphsynth_core::corpus::{
    composition_records, read_jsonl_values, read_sft_corpus, relation_records, run_pipeline, utilization_records,
    validate_corpus, write_corpus, write_jsonl, CorpusHeader, PipelineConfig, SftKind, SftRecord, StageLog,
    CORPUS_VERSION, CPT_SCHEMA, SFT_SCHEMA,
};
use graphsynth_core::cpt::{build_cpt_corpus, mix_records, PointerMode};
use graphsynth_core::frontend::scan_repository;
use graphsynth_core::gateway::{Gateway, TaskFormat};
use graphsynth_core::graph::{graph_stats, read_graph_file, write_graph_file, CodeGraph, EntityId, Language};
use graphsynth_core::prompts::prompt_version_hash;
use graphsynth_core::sandbox::{compilation_at_k, evaluate, load_tasks, pass_at_k, AttemptRecord, Sandbox};
use graphsynth_core::tokenizer::ApproxTokenizer;
use graphsynth_core::trace::{generate_trace, judge_check};
use graphsynth_core::utilization::BuildEnv;
use serde::{Deserialize, Serialize};
use tracing::info;

#[derive(Parser)]
#[command(name = "graphsynth", version, about = "Code-graph analysis and training-corpus synthesis")]
struct Cli {
    /// Pipeline configuration (TOML). Flags given on the command line win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build or summarize a code graph.
    #[command(subcommand)]
    Graph(GraphCmd),
    /// Continued-pretraining corpus.
    #[command(subcommand)]
    Cpt(CptCmd),
    /// Supervised fine-tuning data, one family at a time.
    #[command(subcommand)]
    Sft(SftCmd),
    /// Reasoning traces for arbitrary instruction records.
    #[command(subcommand)]
    Trace(TraceCmd),
    /// Re-run filters over an existing corpus.
    #[command(subcommand)]
    Filter(FilterCmd),
    /// Corpus utilities.
    #[command(subcommand)]
    Corpus(CorpusCmd),
    /// Execution-based evaluation.
    #[command(subcommand)]
    Eval(EvalCmd),
    /// Every stage end to end.
    Pipeline(PipelineArgs),
}

#[derive(Subcommand)]
enum GraphCmd {
    Build {
        #[arg(long)]
        lang: Option<Language>,
        #[arg(long)]
        root: PathBuf,
        #[arg(long = "include-root")]
        include_roots: Vec<String>,
        #[arg(long)]
        exclude: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
    Stats {
        #[arg(long = "in")]
        input: PathBuf,
        /// Print only the machine-readable record.
        #[arg(long)]
        json: bool,
    },
}

#[derive(Subcommand)]
enum CptCmd {
    Generate {
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        limit: Option<usize>,
        #[arg(long)]
        mode: Option<PointerMode>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct SftCommon {
    #[arg(long)]
    graph: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
    /// Verdict log; defaults to `<out>.verdicts.jsonl`.
    #[arg(long)]
    verdicts: Option<PathBuf>,
}

#[derive(Subcommand)]
enum SftCmd {
    Relation {
        #[command(flatten)]
        common: SftCommon,
        #[arg(long)]
        n1: Option<usize>,
        #[arg(long)]
        n2: Option<usize>,
    },
    Composition {
        #[command(flatten)]
        common: SftCommon,
        /// Comma-separated: qa, blank, prog.
        #[arg(long)]
        formats: Option<String>,
        /// Inclusive range such as `1..4`.
        #[arg(long)]
        difficulty: Option<String>,
    },
    Utilization {
        #[command(flatten)]
        common: SftCommon,
        #[arg(long)]
        repo: PathBuf,
        #[arg(long = "include-root")]
        include_roots: Vec<String>,
    },
}

#[derive(Subcommand)]
enum TraceCmd {
    /// Input records: {id, instruction, context, ground_truth}.
    Generate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Subcommand)]
enum FilterCmd {
    /// Stage-1 rule check and context completeness over composition and
    /// utilization records.
    Rules {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long)]
        verdicts: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    Mix {
        #[arg(long)]
        domain: PathBuf,
        #[arg(long)]
        general: PathBuf,
        #[arg(long)]
        ratio: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Exit status is non-zero when violations are found.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Print the effective configuration.
    Config {
        #[arg(long)]
        lang: Option<Language>,
    },
}

#[derive(Subcommand)]
enum EvalCmd {
    Run {
        #[arg(long)]
        tasks: PathBuf,
        /// Records: {task_id, attempt_index, code}.
        #[arg(long)]
        attempts: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Comma-separated: pass, compile.
        #[arg(long, default_value = "pass,compile")]
        metric: String,
        #[arg(long, default_value_t = 4)]
        workers: usize,
        /// Per-attempt outcomes.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
}

#[derive(Args)]
struct PipelineArgs {
    #[arg(long)]
    repo: PathBuf,
    #[arg(long)]
    lang: Option<Language>,
    #[arg(long)]
    out_dir: PathBuf,
}

fn load_config(path: Option<&Path>, lang: Option<Language>) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => PipelineConfig::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => PipelineConfig::new(lang.unwrap_or(Language::Cpp)),
    };
    if let Some(l) = lang {
        cfg.frontend.language = l;
    }
    Ok(cfg)
}

fn load_graph(path: &Path) -> Result<CodeGraph> {
    read_graph_file(path).with_context(|| format!("reading graph {}", path.display()))
}

/// Header pointing at the graph by absolute path.
fn header(schema: &str, graph_path: &Path, graph: &CodeGraph, records: usize) -> Result<CorpusHeader> {
    let abs = std::path::absolute(graph_path)?;
    Ok(CorpusHeader {
        schema: schema.into(),
        version: CORPUS_VERSION,
        graph: Some(abs.to_string_lossy().into_owned()),
        graph_hash: Some(graph.content_hash().to_string()),
        prompt_hash: if schema == SFT_SCHEMA { prompt_version_hash().to_string() } else { String::new() },
        records,
    })
}

fn parse_formats(s: &str) -> Result<Vec<TaskFormat>> {
    s.split(',')
        .map(str::trim)
        .filter(|f| !f.is_empty())
        .map(|f| match f {
            "qa" => Ok(TaskFormat::QuestionAnswer),
            "blank" => Ok(TaskFormat::FillInBlank),
            "prog" => Ok(TaskFormat::Programming),
            other => other.parse::<TaskFormat>().map_err(|e| anyhow::anyhow!(e)),
        })
        .collect()
}

fn parse_range(s: &str) -> Result<(usize, usize)> {
    let (a, b) = s.split_once("..").context("difficulty must look like 1..4")?;
    Ok((a.trim().parse()?, b.trim_start_matches('=').trim().parse()?))
}

fn write_sft(common: &SftCommon, graph: &CodeGraph, records: &[SftRecord], log: &StageLog) -> Result<()> {
    write_corpus(&common.out, &header(SFT_SCHEMA, &common.graph, graph, records.len())?, records)?;
    let verdicts = common.verdicts.clone().unwrap_or_else(|| common.out.with_extension("verdicts.jsonl"));
    write_jsonl(&verdicts, &log.verdicts)?;
    for (stage, c) in &log.counts {
        println!("{stage:<36} generated {:>5}  accepted {:>5}  rejected {:>5}  skipped {:>5}", c.generated, c.accepted, c.rejected, c.skipped);
    }
    println!("{} records written to {}", records.len(), common.out.display());
    Ok(())
}

fn graph_cmd(cmd: GraphCmd, config: Option<&Path>) -> Result<()> {
    match cmd {
        GraphCmd::Build { lang, root, include_roots, exclude, out } => {
            let mut cfg = load_config(config, lang)?;
            if !include_roots.is_empty() {
                cfg.frontend.include_roots = include_roots;
            }
            cfg.frontend.exclude_globs.extend(exclude);
            let analysis = scan_repository(&root, &cfg.frontend)?;
            write_graph_file(&analysis.graph, &out)?;
            println!(
                "{} entities, {} relations, {} diagnostics -> {}",
                analysis.graph.entity_count(),
                analysis.graph.relations().len(),
                analysis.diagnostics.len(),
                out.display()
            );
        }
        GraphCmd::Stats { input, json } => {
            let stats = graph_stats(&load_graph(&input)?);
            if !json {
                print!("{stats}");
            }
            println!("{}", serde_json::to_string(&stats)?);
        }
    }
    Ok(())
}

fn sft_cmd(cmd: SftCmd, config: Option<&Path>) -> Result<()> {
    match cmd {
        SftCmd::Relation { common, n1, n2 } => {
            let graph = load_graph(&common.graph)?;
            let mut cfg = load_config(config, Some(graph.language()))?;
            cfg.relation.n1 = n1.unwrap_or(cfg.relation.n1);
            cfg.relation.n2 = n2.unwrap_or(cfg.relation.n2);
            let gateway = Gateway::from_config(cfg.gateway.clone())?;
            let mut log = StageLog::default();
            let records = relation_records(&graph, &cfg.relation, &gateway, common.seed.unwrap_or(cfg.seed), &mut log)?;
            write_sft(&common, &graph, &records, &log)
        }
        SftCmd::Composition { common, formats, difficulty } => {
            let graph = load_graph(&common.graph)?;
            let mut cfg = load_config(config, Some(graph.language()))?;
            if let Some(f) = formats {
                cfg.composition.formats = parse_formats(&f)?;
            }
            if let Some(d) = difficulty {
                (cfg.composition.difficulty_min, cfg.composition.difficulty_max) = parse_range(&d)?;
            }
            cfg.validate()?;
            let gateway = Gateway::from_config(cfg.gateway.clone())?;
            let matcher = cfg.composition.test_matcher.compile()?;
            let mined = mine_combinations(&graph, &matcher)?;
            let mut log = StageLog::default();
            let seed = common.seed.unwrap_or(cfg.seed);
            let records = composition_records(&graph, &mined.combinations, &cfg.composition, &gateway, seed, &mut log)?;
            write_sft(&common, &graph, &records, &log)
        }
        SftCmd::Utilization { common, repo, include_roots } => {
            let graph = load_graph(&common.graph)?;
            let mut cfg = load_config(config, Some(graph.language()))?;
            if !include_roots.is_empty() {
                cfg.frontend.include_roots = include_roots;
            }
            let gateway = Gateway::from_config(cfg.gateway.clone())?;
            let sandbox = Sandbox::new(cfg.sandbox.clone());
            if !sandbox.toolchain_available(graph.language()) {
                bail!("no {} toolchain available", graph.language());
            }
            let matcher = cfg.composition.test_matcher.compile()?;
            let mined = mine_combinations(&graph, &matcher)?;
            let env = BuildEnv::new(&repo, cfg.frontend.include_roots.clone());
            let mut log = StageLog::default();
            let records = utilization_records(
                &graph,
                &matcher,
                &mined.combinations,
                &env,
                &sandbox,
                cfg.utilization.max_repairs,
                &gateway,
                common.seed.unwrap_or(cfg.seed),
                &mut log,
            )?;
            write_sft(&common, &graph, &records, &log)
        }
    }
}

#[derive(Deserialize)]
struct TraceInput {
    id: String,
    instruction: String,
    context: ContextBundle,
    ground_truth: String,
}

#[derive(Serialize)]
struct TraceOutput<'a> {
    id: &'a str,
    instruction: &'a str,
    reasoning_trace: String,
    response: String,
    accepted: bool,
    attempt_index: usize,
    verdict: graphsynth_core::verdict::FilterVerdict,
}

fn trace_cmd(cmd: TraceCmd, config: Option<&Path>) -> Result<()> {
    let TraceCmd::Generate { input, seed, out } = cmd;
    let cfg = load_config(config, None)?;
    let gateway = Gateway::from_config(cfg.gateway.clone())?;
    let seed = seed.unwrap_or(cfg.seed);
    let inputs: Vec<TraceInput> = read_jsonl_values(&input)?
        .into_iter()
        .map(serde_json::from_value)
        .collect::<Result<_, _>>()
        .context("trace input records need id, instruction, context and ground_truth")?;
    let mut rows = Vec::new();
    let mut accepted = 0;
    for (i, t) in inputs.iter().enumerate() {
        let s = seed.wrapping_add(i as u64);
        let check = judge_check(&gateway, &t.id, &t.ground_truth, s);
        let o = generate_trace(&gateway, &t.id, &t.instruction, &t.context, &t.ground_truth, s, &check)?;
        accepted += usize::from(o.result.accepted && o.verdict.pass);
        rows.push(TraceOutput {
            id: &t.id,
            instruction: &t.instruction,
            reasoning_trace: o.result.reasoning_trace,
            response: o.result.response,
            accepted: o.result.accepted,
            attempt_index: o.result.attempt_index,
            verdict: o.verdict,
        });
    }
    write_jsonl(&out, &rows)?;
    println!("{accepted}/{} traces accepted -> {}", rows.len(), out.display());
    Ok(())
}

fn filter_cmd(cmd: FilterCmd) -> Result<()> {
    let FilterCmd::Rules { input, graph, verdicts } = cmd;
    let graph = load_graph(&graph)?;
    let (_, records) = read_sft_corpus(&input)?;
    let mut log = StageLog::default();
    for r in &records {
        let context: Vec<EntityId> = r.metadata.provenance.iter().skip(1).cloned().collect();
        let (code, verdict) = match (r.kind, r.metadata.format) {
            (SftKind::Composition, Some(format)) => {
                let task = CompositionTask {
                    id: r.id.clone(),
                    source_test: r.metadata.provenance.first().cloned().unwrap_or_else(|| EntityId::from_raw("")),
                    format,
                    difficulty: r.metadata.difficulty.unwrap_or(0),
                    statement: r.instruction.clone(),
                    reference_answer: r.metadata.reference_answer.clone().unwrap_or_default(),
                    grading_criteria: r.metadata.grading_criteria.clone().unwrap_or_default(),
                    context: r.context.clone(),
                    apis: Vec::new(),
                    context_entities: context.clone(),
                    prompt_hash: r.metadata.prompt_hash.clone(),
                };
                (extract_code(format, &r.response), Some(rule_filter_stage1(&task, &graph)))
            }
            (SftKind::Utilization, _) => (r.metadata.functional_code.clone(), None),
            _ => continue,
        };
        if let Some(v) = verdict {
            log.verdict("rule_stage1", v);
        }
        if let Some(code) = code {
            let missing = missing_context_symbols(&graph, &code, &context)
                .map_err(|e| anyhow::anyhow!("record {}: code does not parse: {e}", r.id))?;
            if missing.is_empty() {
                log.accept("context_completeness");
            } else {
                use graphsynth_core::verdict::{FilterVerdict, Reason, Stage};
                let v = FilterVerdict::fail(&r.id, Stage::RuleStage1, Reason::UnknownEntity, format!("missing {}", missing.join(", ")));
                log.verdict("context_completeness", v);
            }
        }
    }
    for (stage, c) in &log.counts {
        println!("{stage:<24} checked {:>5}  passed {:>5}  failed {:>5}", c.generated, c.accepted, c.rejected + c.skipped);
    }
    if let Some(path) = verdicts {
        write_jsonl(&path, &log.verdicts)?;
    }
    if log.counts.values().any(|c| c.accepted != c.generated) {
        std::process::exit(1);
    }
    Ok(())
}

fn corpus_cmd(cmd: CorpusCmd, config: Option<&Path>) -> Result<()> {
    match cmd {
        CorpusCmd::Mix { domain, general, ratio, seed, out } => {
            // Keep the domain header, if any, and mix the records under it.
            let mut domain_values = read_jsonl_values(&domain)?;
            let header: Option<CorpusHeader> = domain_values
                .first()
                .and_then(|v| serde_json::from_value::<CorpusHeader>(v.clone()).ok());
            if header.is_some() {
                domain_values.remove(0);
            }
            let general_values = read_jsonl_values(&general)?;
            let general_values: Vec<serde_json::Value> = if header.as_ref().is_some_and(|h| h.schema == SFT_SCHEMA) {
                general_values
                    .iter()
                    .map(|v| SftRecord::general(v).map(|r| serde_json::to_value(r).unwrap_or_default()))
                    .collect::<Result<_, _>>()
                    .context("general SFT records need instruction and response")?
            } else {
                general_values
            };
            let mixed = mix_records(domain_values, &general_values, ratio, seed)?;
            match header {
                Some(mut h) => {
                    h.records = mixed.len();
                    write_corpus(&out, &h, &mixed)?;
                }
                None => write_jsonl(&out, &mixed)?,
            }
            println!("{} records -> {}", mixed.len(), out.display());
        }
        CorpusCmd::Validate { input } => {
            let violations = validate_corpus(&input)?;
            for v in &violations {
                println!("line {}: {}", v.line, v.message);
            }
            if !violations.is_empty() {
                println!("{} violation(s)", violations.len());
                std::process::exit(1);
            }
            println!("ok");
        }
        CorpusCmd::Config { lang } => print!("{}", load_config(config, lang)?.to_toml()),
    }
    Ok(())
}

fn eval_cmd(cmd: EvalCmd, config: Option<&Path>) -> Result<()> {
    let EvalCmd::Run { tasks, attempts, k, metric, workers, outcomes } = cmd;
    let cfg = load_config(config, None)?;
    let tasks = load_tasks(&tasks)?;
    let attempts: Vec<AttemptRecord> = read_jsonl_values(&attempts)?
        .into_iter()
        .map(serde_json::from_value)
        .collect::<Result<_, _>>()
        .context("attempt records need task_id, attempt_index and code")?;
    let sandbox = Sandbox::new(cfg.sandbox.clone());
    let results = evaluate(&tasks, &attempts, &sandbox, workers)?;
    if let Some(path) = outcomes {
        write_jsonl(&path, &results)?;
    }
    let mut report = serde_json::Map::new();
    for m in metric.split(',').map(str::trim).filter(|m| !m.is_empty()) {
        let rate = match m {
            "pass" => pass_at_k(&results, k)?,
            "compile" => compilation_at_k(&results, k)?,
            other => bail!("unknown metric `{other}` (expected pass or compile)"),
        };
        let name = if m == "pass" { format!("pass@{k}") } else { format!("compilation@{k}") };
        println!("{name:<16} {:>8.4}  ({})", rate.value(), rate.exact);
        report.insert(name, serde_json::to_value(&rate)?);
    }
    println!("{}", serde_json::Value::Object(report));
    Ok(())
}

fn main() -> Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()))
        .with_writer(std::io::stderr)
        .init();
    let cli = Cli::parse();
    let config = cli.config.as_deref();
    match cli.command {
        Command::Graph(cmd) => graph_cmd(cmd, config),
        Command::Cpt(CptCmd::Generate { graph: graph_path, limit, mode, out }) => {
            let graph = load_graph(&graph_path)?;
            let mut cfg = load_config(config, Some(graph.language()))?;
            cfg.cpt.context_limit = limit.unwrap_or(cfg.cpt.context_limit);
            cfg.cpt.pointer_mode = mode.unwrap_or(cfg.cpt.pointer_mode);
            let samples = build_cpt_corpus(&graph, &ApproxTokenizer, &cfg.cpt)?;
            write_corpus(&out, &header(CPT_SCHEMA, &graph_path, &graph, samples.len())?, &samples)?;
            println!("{} samples -> {}", samples.len(), out.display());
            Ok(())
        }
        Command::Sft(cmd) => sft_cmd(cmd, config),
        Command::Trace(cmd) => trace_cmd(cmd, config),
        Command::Filter(cmd) => filter_cmd(cmd),
        Command::Corpus(cmd) => corpus_cmd(cmd, config),
        Command::Eval(cmd) => eval_cmd(cmd, config),
        Command::Pipeline(args) => {
            let cfg = load_config(config, args.lang)?;
            info!(repo = %args.repo.display(), "running pipeline");
            let report = run_pipeline(&args.repo, &cfg, &args.out_dir)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
            Ok(())
        }
    }
}
