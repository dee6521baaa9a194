//! Single-hop relation statements: one graph edge rendered as text, model
//! paraphrases of it, and negatives about a fabricated entity.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::context::{ContextBundle, ContextKind};
use crate::digest::sha256_parts;
use crate::gateway::{Gateway, GatewayError, GenRequest, Payload, Role};
use crate::graph::{CodeGraph, Entity, EntityId, EntityKind, GraphError, Relation, RelationKind};
use crate::prompts::{fill, NEGATIVE_PROMPT, PARAPHRASE_PROMPT};
use crate::verdict::{FilterVerdict, Reason, Stage};

#[derive(Debug, Error)]
pub enum RelationError {
    #[error("unknown relation kind `{0}`")]
    UnknownRelationKind(String),
    #[error("file `{0}` missing from graph")]
    MissingFile(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

pub fn verb(kind: RelationKind) -> &'static str {
    match kind {
        RelationKind::Call => "calls",
        RelationKind::Include => "includes",
        RelationKind::Dependency => "depends on",
        RelationKind::Contain => "contains",
    }
}

/// `[type of A] [name of A] [relation] [type of B] [name of B]`
pub fn render_statement(a_kind: EntityKind, a_name: &str, relation: &str, b_kind: EntityKind, b_name: &str) -> Result<String, RelationError> {
    let kind: RelationKind = relation.parse().map_err(|_| RelationError::UnknownRelationKind(relation.to_string()))?;
    Ok(format!("{} {a_name} {} {} {b_name}", a_kind.label(), verb(kind), b_kind.label()))
}

pub fn render_relation(graph: &CodeGraph, rel: &Relation) -> Result<String, RelationError> {
    let a = graph.require(&rel.src)?;
    let b = graph.require(&rel.dst)?;
    render_statement(a.kind, &a.name, rel.kind.as_str(), b.kind, &b.name)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Endpoint {
    pub kind: EntityKind,
    pub name: String,
    /// `None` for a fabricated entity.
    pub id: Option<EntityId>,
}

impl Endpoint {
    fn of(e: &Entity) -> Self {
        Endpoint { kind: e.kind, name: e.name.clone(), id: Some(e.id.clone()) }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationEdge {
    pub src: Endpoint,
    pub kind: RelationKind,
    pub dst: Endpoint,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationSample {
    pub id: String,
    pub edge: RelationEdge,
    pub statement: String,
    pub polarity: Polarity,
    pub context: ContextBundle,
    pub paraphrases: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fabricated: Option<String>,
}

impl RelationSample {
    /// Statements the sample contributes to the corpus: its paraphrases, or
    /// the original when there are none.
    pub fn statements(&self) -> Vec<&str> {
        if self.paraphrases.is_empty() {
            vec![self.statement.as_str()]
        } else {
            self.paraphrases.iter().map(String::as_str).collect()
        }
    }

    /// The answer a trace must agree with.
    pub fn ground_truth(&self) -> String {
        match (&self.polarity, &self.fabricated) {
            (Polarity::Negative, Some(name)) => {
                format!("No. `{name}` does not exist in the codebase, so the statement is false.")
            }
            _ => format!("Yes. {}.", self.statement),
        }
    }

    pub fn provenance(&self) -> Vec<EntityId> {
        [&self.edge.src.id, &self.edge.dst.id].into_iter().flatten().cloned().collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RelationConfig {
    pub n1: usize,
    pub n2: usize,
    pub kinds: Vec<RelationKind>,
    pub per_kind_cap: usize,
}

impl Default for RelationConfig {
    fn default() -> Self {
        RelationConfig {
            n1: 5,
            n2: 1,
            kinds: vec![RelationKind::Call, RelationKind::Contain, RelationKind::Include],
            per_kind_cap: 2000,
        }
    }
}

/// Edges of the configured kinds, at most `per_kind_cap` of each (a seeded
/// sample when over), in a stable order.
pub fn select_edges<'g>(graph: &'g CodeGraph, cfg: &RelationConfig, seed: u64) -> Vec<&'g Relation> {
    let mut by_kind: BTreeMap<RelationKind, Vec<&Relation>> = BTreeMap::new();
    let mut seen = BTreeSet::new();
    for r in graph.relations() {
        if cfg.kinds.contains(&r.kind) && r.src != r.dst && seen.insert((r.src.clone(), r.kind, r.dst.clone())) {
            by_kind.entry(r.kind).or_default().push(r);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    for (_, mut edges) in by_kind {
        edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        if edges.len() > cfg.per_kind_cap {
            edges.shuffle(&mut rng);
            edges.truncate(cfg.per_kind_cap);
            edges.sort_by(|a, b| (&a.src, &a.dst).cmp(&(&b.src, &b.dst)));
        }
        out.extend(edges);
    }
    out
}

fn sample_id(parts: &[&str]) -> String {
    sha256_parts(parts)[..24].to_string()
}

/// Positive samples, one per selected edge, with their file context.
pub fn positive_samples(graph: &CodeGraph, cfg: &RelationConfig, seed: u64) -> Result<Vec<RelationSample>, RelationError> {
    select_edges(graph, cfg, seed)
        .into_iter()
        .map(|r| {
            let (a, b) = (graph.require(&r.src)?, graph.require(&r.dst)?);
            let edge = RelationEdge { src: Endpoint::of(a), kind: r.kind, dst: Endpoint::of(b) };
            let mut s = RelationSample {
                id: sample_id(&["relation", a.id.as_str(), r.kind.as_str(), b.id.as_str()]),
                statement: render_relation(graph, r)?,
                edge,
                polarity: Polarity::Positive,
                context: ContextBundle::new(ContextKind::FileContents),
                paraphrases: Vec::new(),
                fabricated: None,
            };
            s.context = assemble_relation_context(&s, graph)?;
            Ok(s)
        })
        .collect()
}

/// Positives: the full text of the files holding both endpoints. Negatives:
/// every entity name in the kind families of the two slots.
pub fn assemble_relation_context(sample: &RelationSample, graph: &CodeGraph) -> Result<ContextBundle, RelationError> {
    match sample.polarity {
        Polarity::Positive => {
            let mut bundle = ContextBundle::new(ContextKind::FileContents);
            let mut seen = BTreeSet::new();
            for ep in [&sample.edge.src, &sample.edge.dst] {
                let Some(id) = &ep.id else { continue };
                let e = graph.require(id)?;
                let file = graph.file_by_path(&e.file_path).ok_or_else(|| RelationError::MissingFile(e.file_path.clone()))?;
                if seen.insert(file.file_path.clone()) {
                    bundle.push(file.file_path.clone(), file.body_text.clone());
                }
            }
            Ok(bundle)
        }
        Polarity::Negative => {
            let mut bundle = ContextBundle::new(ContextKind::EntityNameList);
            let mut families: Vec<&'static [EntityKind]> = Vec::new();
            for ep in [&sample.edge.src, &sample.edge.dst] {
                let fam = ep.kind.family();
                if !families.contains(&fam) {
                    families.push(fam);
                }
            }
            for fam in families {
                let names: BTreeSet<&str> =
                    graph.entities().filter(|e| fam.contains(&e.kind)).map(|e| e.name.as_str()).collect();
                let label = fam.iter().map(|k| k.label()).collect::<Vec<_>>().join("/");
                bundle.push(format!("all {label} names"), names.into_iter().collect::<Vec<_>>().join("\n"));
            }
            Ok(bundle)
        }
    }
}

/// A seeded variant of `name` that appears nowhere in `taken`. Only the last
/// segment changes, so the fabricated entity sits in a real namespace.
pub fn fabricate_name(name: &str, kind: EntityKind, taken: &BTreeSet<String>, rng: &mut impl Rng) -> String {
    let (prefix, short) = split_last(name, kind);
    let mutations: [&dyn Fn(&str) -> String; 6] = [
        &|s| format!("{s}_ex"),
        &|s| format!("{s}2"),
        &|s| format!("try_{s}"),
        &|s| format!("{s}_impl"),
        &|s| swap_inner(s),
        &|s| format!("{s}s"),
    ];
    let start = rng.gen_range(0..mutations.len());
    for round in 0usize.. {
        for i in 0..mutations.len() {
            let mut candidate = mutations[(start + i) % mutations.len()](short);
            if round > 0 {
                candidate.push_str(&round.to_string());
            }
            let full = format!("{prefix}{candidate}");
            if candidate != short && !taken.contains(&full) && !taken.contains(&candidate) {
                return full;
            }
        }
    }
    unreachable!("suffixing with a growing counter eventually leaves the finite name set")
}

fn split_last(name: &str, kind: EntityKind) -> (&str, &str) {
    if kind == EntityKind::File {
        return match name.rfind('/') {
            Some(i) => (&name[..=i], &name[i + 1..]),
            None => ("", name),
        };
    }
    let cut = [name.rfind("::").map(|i| i + 2), name.rfind('.').map(|i| i + 1)].into_iter().flatten().max().unwrap_or(0);
    (&name[..cut], &name[cut..])
}

fn swap_inner(s: &str) -> String {
    let mut chars: Vec<char> = s.chars().collect();
    if chars.len() >= 3 {
        let mid = chars.len() / 2;
        chars.swap(mid - 1, mid);
    }
    let out: String = chars.into_iter().collect();
    if out == s {
        format!("{s}_alt")
    } else {
        out
    }
}

#[derive(Clone, Debug)]
pub struct AugmentOutcome {
    pub samples: Vec<RelationSample>,
    pub verdicts: Vec<FilterVerdict>,
    /// Originals dropped because the gateway failed them.
    pub skipped: usize,
}

/// Expands each positive into `n1` paraphrases and adds `n2` negatives.
/// Per-sample gateway failures skip that sample and are logged as verdicts.
pub fn augment_relations(
    samples: Vec<RelationSample>,
    graph: &CodeGraph,
    gateway: &Gateway,
    n1: usize,
    n2: usize,
    seed: u64,
) -> Result<AugmentOutcome, RelationError> {
    let taken = graph.name_set();
    let mut out = AugmentOutcome { samples: Vec::new(), verdicts: Vec::new(), skipped: 0 };
    for (i, mut s) in samples.into_iter().enumerate() {
        let sample_seed = seed.wrapping_add(i as u64);
        if n1 > 0 {
            match paraphrase(&s, gateway, n1, sample_seed) {
                Ok(Some(p)) => {
                    s.paraphrases = p;
                    out.verdicts.push(FilterVerdict::pass(&s.id, Stage::Paraphrase));
                }
                Ok(None) => {
                    out.verdicts.push(FilterVerdict::fail(&s.id, Stage::Paraphrase, Reason::NameNotPreserved, "no attempt kept both names"));
                    out.skipped += 1;
                    continue;
                }
                Err(e) => {
                    out.verdicts.push(FilterVerdict::fail(&s.id, Stage::Paraphrase, Reason::GatewayFailure, e.to_string()));
                    out.skipped += 1;
                    continue;
                }
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(sample_seed);
        let mut negatives = Vec::new();
        for j in 0..n2 {
            let neg = negative(&s, graph, gateway, &taken, j, &mut rng, sample_seed)?;
            match neg {
                Ok(n) => {
                    out.verdicts.push(FilterVerdict::pass(&n.id, Stage::Negative));
                    negatives.push(n);
                }
                Err(v) => out.verdicts.push(v),
            }
        }
        out.samples.push(s);
        out.samples.extend(negatives);
    }
    Ok(out)
}

fn paraphrase(s: &RelationSample, gateway: &Gateway, n1: usize, seed: u64) -> Result<Option<Vec<String>>, GatewayError> {
    let names = [s.edge.src.name.clone(), s.edge.dst.name.clone()];
    let prompt = fill(
        PARAPHRASE_PROMPT,
        &[("n", &n1.to_string()), ("names", &format!("`{}` and `{}`", names[0], names[1])), ("statement", &s.statement)],
    );
    let payload = Payload::Paraphrase { statement: s.statement.clone(), names: names.to_vec(), count: n1 };
    let req = GenRequest::new(Role::Paraphrase, prompt, payload, gateway.sampling(seed));
    let keep = |text: &str| -> Vec<String> {
        parse_numbered(text).into_iter().filter(|l| names.iter().all(|n| l.contains(n.as_str()))).take(n1).collect()
    };
    let result = gateway.rejection_sample(&req, &|c| keep(&c.content).len() == n1)?;
    Ok(result.accepted.then(|| keep(&result.response)))
}

/// Lines of a numbered list (`1. text`, `2) text`), or all non-empty lines
/// when none is numbered.
pub fn parse_numbered(text: &str) -> Vec<String> {
    let lines: Vec<&str> = text.lines().map(str::trim).filter(|l| !l.is_empty()).collect();
    let numbered: Vec<String> = lines
        .iter()
        .filter_map(|l| {
            let digits = l.chars().take_while(|c| c.is_ascii_digit()).count();
            let rest = &l[digits..];
            (digits > 0 && (rest.starts_with('.') || rest.starts_with(')'))).then(|| rest[1..].trim().to_string())
        })
        .collect();
    if numbered.is_empty() {
        lines.into_iter().map(str::to_string).collect()
    } else {
        numbered
    }
}

#[allow(clippy::too_many_arguments)]
fn negative(
    s: &RelationSample,
    graph: &CodeGraph,
    gateway: &Gateway,
    taken: &BTreeSet<String>,
    index: usize,
    rng: &mut ChaCha8Rng,
    seed: u64,
) -> Result<Result<RelationSample, FilterVerdict>, RelationError> {
    let fabricate_dst = rng.gen_bool(0.5);
    let real = if fabricate_dst { &s.edge.dst } else { &s.edge.src };
    let fabricated = fabricate_name(&real.name, real.kind, taken, rng);
    let fake = Endpoint { kind: real.kind, name: fabricated.clone(), id: None };
    let edge = if fabricate_dst {
        RelationEdge { src: s.edge.src.clone(), kind: s.edge.kind, dst: fake }
    } else {
        RelationEdge { src: fake, kind: s.edge.kind, dst: s.edge.dst.clone() }
    };
    let raw = render_statement(edge.src.kind, &edge.src.name, edge.kind.as_str(), edge.dst.kind, &edge.dst.name)?;
    let id = sample_id(&["relation-negative", &s.id, &index.to_string(), &fabricated]);

    let prompt = fill(NEGATIVE_PROMPT, &[("fabricated", &fabricated), ("statement", &raw)]);
    let payload = Payload::NegativeNaturalize { statement: raw.clone(), fabricated: fabricated.clone() };
    let req = GenRequest::new(Role::NegativeNaturalize, prompt, payload, gateway.sampling(seed.wrapping_add(index as u64)));
    let keeps_names = |t: &str| t.contains(&fabricated) && t.contains(&edge.src.name) && t.contains(&edge.dst.name);
    let statement = match gateway.rejection_sample(&req, &|c| keeps_names(&c.content)) {
        Ok(t) if t.accepted => t.response.trim().to_string(),
        Ok(_) => return Ok(Err(FilterVerdict::fail(id, Stage::Negative, Reason::NameNotPreserved, "naturalized text lost a name"))),
        Err(e) => return Ok(Err(FilterVerdict::fail(id, Stage::Negative, Reason::GatewayFailure, e.to_string()))),
    };
    let mut neg = RelationSample {
        id,
        edge,
        statement,
        polarity: Polarity::Negative,
        context: ContextBundle::new(ContextKind::EntityNameList),
        paraphrases: Vec::new(),
        fabricated: Some(fabricated),
    };
    neg.context = assemble_relation_context(&neg, graph)?;
    Ok(Ok(neg))
}
