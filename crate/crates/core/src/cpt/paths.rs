//! Depth-first root-to-terminal paths over a file DAG.

use std::collections::BTreeSet;

use rayon::prelude::*;

use super::CptError;
use crate::graph::FileDag;

/// A path as node indices into the DAG.
pub type Path = Vec<usize>;

/// Enumerates root-to-terminal paths, children in key order. Each root
/// yields at most `cap` paths from plain enumeration; after that, one witness
/// path is added for every edge reachable from the root that no earlier path
/// of that root made adjacent.
pub fn enumerate_dfs_paths(dag: &FileDag, cap: usize) -> Result<Vec<Path>, CptError> {
    if !dag.is_acyclic() {
        return Err(CptError::Cyclic);
    }
    let succ: Vec<Vec<usize>> = (0..dag.len()).map(|u| dag.successors(u).collect()).collect();
    let roots: Vec<usize> = dag.in_degrees().iter().enumerate().filter(|(_, d)| **d == 0).map(|(i, _)| i).collect();
    let per_root: Vec<Vec<Path>> = roots.par_iter().map(|&root| paths_from(root, &succ, cap.max(1))).collect();
    Ok(per_root.into_iter().flatten().collect())
}

fn paths_from(root: usize, succ: &[Vec<usize>], cap: usize) -> Vec<Path> {
    let mut paths = Vec::new();
    let mut covered: BTreeSet<(usize, usize)> = BTreeSet::new();

    // Iterative DFS; each frame is (node, next child slot).
    let mut stack: Vec<(usize, usize)> = vec![(root, 0)];
    let mut current: Path = vec![root];
    while let Some(&mut (node, ref mut slot)) = stack.last_mut() {
        if paths.len() >= cap {
            break;
        }
        if succ[node].is_empty() {
            covered.extend(current.windows(2).map(|w| (w[0], w[1])));
            paths.push(current.clone());
            stack.pop();
            current.pop();
            continue;
        }
        if *slot < succ[node].len() {
            let child = succ[node][*slot];
            *slot += 1;
            stack.push((child, 0));
            current.push(child);
        } else {
            stack.pop();
            current.pop();
        }
    }
    if paths.len() < cap {
        return paths;
    }

    // Past the cap: witnesses for edges still missing.
    let prefix = first_visit_prefixes(root, succ);
    let mut reachable_edges = BTreeSet::new();
    for (u, pre) in prefix.iter().enumerate() {
        if pre.is_some() {
            reachable_edges.extend(succ[u].iter().map(|&v| (u, v)));
        }
    }
    for (u, v) in reachable_edges {
        if covered.contains(&(u, v)) {
            continue;
        }
        let mut path = prefix[u].clone().unwrap_or_default();
        let mut node = v;
        path.push(node);
        while let Some(&next) = succ[node].first() {
            path.push(next);
            node = next;
        }
        covered.extend(path.windows(2).map(|w| (w[0], w[1])));
        paths.push(path);
    }
    paths
}

/// Path from `root` to each node along the first visit of a key-ordered DFS.
fn first_visit_prefixes(root: usize, succ: &[Vec<usize>]) -> Vec<Option<Path>> {
    let mut prefix: Vec<Option<Path>> = vec![None; succ.len()];
    prefix[root] = Some(vec![root]);
    let mut stack = vec![root];
    while let Some(u) = stack.pop() {
        let base = prefix[u].clone().unwrap_or_default();
        for &v in succ[u].iter().rev() {
            if prefix[v].is_none() {
                let mut p = base.clone();
                p.push(v);
                prefix[v] = Some(p);
                stack.push(v);
            }
        }
    }
    prefix
}
