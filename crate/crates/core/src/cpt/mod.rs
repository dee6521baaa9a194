//! Dependency-preserving pretraining corpus: DFS paths over the condensed
//! file DAG, cut into windows under a token budget.

mod mix;
mod paths;
mod windows;

use std::collections::BTreeSet;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mix::{mix_corpus, mix_records, MixedRecord};
pub use paths::{enumerate_dfs_paths, Path};
pub use windows::{plan_windows, PointerMode, Window};

use crate::digest::sha256_parts;
use crate::graph::{condense_file_dag, file_dependency_subgraph, CodeGraph, FileDag, Language};
use crate::tokenizer::Tokenizer;

#[derive(Debug, Error)]
pub enum CptError {
    #[error("file graph has a cycle; condense it first")]
    Cyclic,
    #[error("mix ratio {0} outside [0, 1)")]
    Ratio(f64),
    #[error("context limit must be positive")]
    ZeroLimit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CptConfig {
    pub context_limit: usize,
    pub max_paths_per_root: usize,
    pub emit_tail_window: bool,
    pub pointer_mode: PointerMode,
    pub general_mix_ratio: f64,
    pub seed: u64,
}

impl Default for CptConfig {
    fn default() -> Self {
        CptConfig {
            context_limit: 32768,
            max_paths_per_root: 1000,
            emit_tail_window: true,
            pointer_mode: PointerMode::OverlapOne,
            general_mix_ratio: 0.0,
            seed: 0,
        }
    }
}

impl CptConfig {
    pub fn validate(&self) -> Result<(), CptError> {
        if self.context_limit == 0 {
            return Err(CptError::ZeroLimit);
        }
        check_ratio(self.general_mix_ratio)
    }
}

pub(crate) fn check_ratio(ratio: f64) -> Result<(), CptError> {
    if (0.0..1.0).contains(&ratio) {
        Ok(())
    } else {
        Err(CptError::Ratio(ratio))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CptSample {
    pub id: String,
    pub file_sequence: Vec<String>,
    pub text: String,
    pub token_count: usize,
    pub truncated: bool,
}

impl CptSample {
    pub fn sequence_digest(files: &[String]) -> String {
        sha256_parts(files)[..32].to_string()
    }
}

/// A DAG node rendered for the corpus: every member file prefixed by a
/// path comment.
pub fn node_text(dag: &FileDag, node: usize, language: Language) -> String {
    let n = dag.node(node);
    let mut out = String::new();
    for (path, content) in n.members.iter().zip(&n.contents) {
        out.push_str(language.line_comment());
        out.push(' ');
        out.push_str(path);
        out.push('\n');
        out.push_str(content);
        if !content.is_empty() && !content.ends_with('\n') {
            out.push('\n');
        }
    }
    out
}

/// Windows of one path rendered into samples. `texts` and `sizes` are
/// indexed by DAG node.
pub fn generate_windows(
    dag: &FileDag,
    path: &[usize],
    texts: &[String],
    sizes: &[usize],
    tokenizer: &dyn Tokenizer,
    cfg: &CptConfig,
) -> Vec<CptSample> {
    let path_sizes: Vec<usize> = path.iter().map(|&n| sizes[n]).collect();
    plan_windows(&path_sizes, cfg.context_limit, cfg.pointer_mode, cfg.emit_tail_window)
        .into_iter()
        .map(|w| {
            let nodes = &path[w.start..=w.end];
            let file_sequence: Vec<String> = nodes.iter().flat_map(|&n| dag.node(n).members.iter().cloned()).collect();
            let mut text: String = nodes.iter().map(|&n| texts[n].as_str()).collect();
            if w.truncated {
                text = tokenizer.truncate(&text, cfg.context_limit).to_string();
            }
            CptSample {
                id: CptSample::sequence_digest(&file_sequence),
                token_count: tokenizer.count(&text),
                file_sequence,
                text,
                truncated: w.truncated,
            }
        })
        .collect()
}

/// Full corpus for a graph. Samples with an already-seen file sequence are
/// dropped; order follows roots, then paths, then windows.
pub fn build_cpt_corpus(graph: &CodeGraph, tokenizer: &dyn Tokenizer, cfg: &CptConfig) -> Result<Vec<CptSample>, CptError> {
    cfg.validate()?;
    let dag = condense_file_dag(&file_dependency_subgraph(graph));
    let texts: Vec<String> = (0..dag.len()).map(|n| node_text(&dag, n, graph.language())).collect();
    let sizes: Vec<usize> = texts.iter().map(|t| tokenizer.count(t)).collect();
    let paths = enumerate_dfs_paths(&dag, cfg.max_paths_per_root)?;
    let per_path: Vec<Vec<CptSample>> =
        paths.par_iter().map(|p| generate_windows(&dag, p, &texts, &sizes, tokenizer, cfg)).collect();
    let mut seen = BTreeSet::new();
    let corpus: Vec<CptSample> = per_path.into_iter().flatten().filter(|s| seen.insert(s.id.clone())).collect();
    tracing::info!(paths = paths.len(), samples = corpus.len(), "cpt corpus built");
    Ok(corpus)
}
