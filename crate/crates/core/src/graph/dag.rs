use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::DiGraph;

use super::{CodeGraph, EntityKind, RelationKind};

/// One node of a file-level DAG. A plain file has a single member; a node
/// produced by condensing a dependency cycle has several, sorted by path.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DagNode {
    pub key: String,
    pub members: Vec<String>,
    pub contents: Vec<String>,
}

impl DagNode {
    pub fn file(path: impl Into<String>, content: impl Into<String>) -> Self {
        let path = path.into();
        DagNode { key: path.clone(), members: vec![path], contents: vec![content.into()] }
    }

    fn merged(mut parts: Vec<(String, String)>) -> Self {
        parts.sort();
        let members: Vec<String> = parts.iter().map(|(p, _)| p.clone()).collect();
        let contents = parts.into_iter().map(|(_, c)| c).collect();
        DagNode { key: members.join("+"), members, contents }
    }

    /// Member contents concatenated in member order.
    pub fn text(&self) -> String {
        self.contents.concat()
    }
}

/// File-level dependency graph. An edge `u -> v` means file `u` includes or
/// imports file `v`. Nodes are kept sorted by key, so successor lists come
/// out in path-lexicographic order.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FileDag {
    nodes: Vec<DagNode>,
    edges: BTreeSet<(usize, usize)>,
}

impl FileDag {
    /// Builds a DAG from nodes and key-addressed edges. Parallel edges
    /// collapse; edges naming unknown keys are ignored.
    pub fn new(mut nodes: Vec<DagNode>, edges: impl IntoIterator<Item = (String, String)>) -> Self {
        nodes.sort_by(|a, b| a.key.cmp(&b.key));
        nodes.dedup_by(|a, b| a.key == b.key);
        let index: BTreeMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.key.as_str(), i)).collect();
        let edges = edges
            .into_iter()
            .filter_map(|(u, v)| Some((*index.get(u.as_str())?, *index.get(v.as_str())?)))
            .collect();
        FileDag { nodes, edges }
    }

    pub fn nodes(&self) -> &[DagNode] {
        &self.nodes
    }

    pub fn node(&self, i: usize) -> &DagNode {
        &self.nodes[i]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains(&(u, v))
    }

    pub fn index_of(&self, key: &str) -> Option<usize> {
        self.nodes.binary_search_by(|n| n.key.as_str().cmp(key)).ok()
    }

    /// Successors of `u` in ascending key order.
    pub fn successors(&self, u: usize) -> impl Iterator<Item = usize> + '_ {
        self.edges.range((u, 0)..(u + 1, 0)).map(|&(_, v)| v)
    }

    pub fn out_degree(&self, u: usize) -> usize {
        self.successors(u).count()
    }

    pub fn in_degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.nodes.len()];
        for &(_, v) in &self.edges {
            deg[v] += 1;
        }
        deg
    }

    /// Kahn's algorithm; `None` if a cycle exists.
    pub fn topological_order(&self) -> Option<Vec<usize>> {
        let mut deg = self.in_degrees();
        let mut queue: VecDeque<usize> = (0..self.nodes.len()).filter(|&i| deg[i] == 0).collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(u) = queue.pop_front() {
            order.push(u);
            for v in self.successors(u) {
                deg[v] -= 1;
                if deg[v] == 0 {
                    queue.push_back(v);
                }
            }
        }
        (order.len() == self.nodes.len()).then_some(order)
    }

    pub fn is_acyclic(&self) -> bool {
        self.topological_order().is_some()
    }

    /// Edges as key pairs, for comparisons that should not depend on indices.
    pub fn key_edges(&self) -> BTreeSet<(String, String)> {
        self.edges
            .iter()
            .map(|&(u, v)| (self.nodes[u].key.clone(), self.nodes[v].key.clone()))
            .collect()
    }
}

/// File entities plus the include/dependency edges between distinct files.
pub fn file_dependency_subgraph(graph: &CodeGraph) -> FileDag {
    let nodes = graph.files().map(|f| DagNode::file(&f.file_path, &f.body_text)).collect();
    let mut edges = Vec::new();
    for r in graph.relations() {
        if !matches!(r.kind, RelationKind::Include | RelationKind::Dependency) {
            continue;
        }
        let (Some(src), Some(dst)) = (graph.entity(&r.src), graph.entity(&r.dst)) else { continue };
        if src.kind == EntityKind::File && dst.kind == EntityKind::File && src.id != dst.id {
            edges.push((src.file_path.clone(), dst.file_path.clone()));
        }
    }
    FileDag::new(nodes, edges)
}

/// Collapses every strongly connected component into one merged node.
pub fn condense_file_dag(dag: &FileDag) -> FileDag {
    let mut g = DiGraph::<usize, ()>::with_capacity(dag.len(), dag.edge_count());
    let ix: Vec<_> = (0..dag.len()).map(|i| g.add_node(i)).collect();
    for (u, v) in dag.edges() {
        g.add_edge(ix[u], ix[v], ());
    }
    let sccs = tarjan_scc(&g);
    if sccs.iter().all(|c| c.len() == 1) && dag.edges().all(|(u, v)| u != v) {
        return dag.clone();
    }

    let mut component = vec![0usize; dag.len()];
    let mut nodes = Vec::with_capacity(sccs.len());
    for (c, members) in sccs.iter().enumerate() {
        let mut parts = Vec::new();
        for m in members {
            let i = g[*m];
            component[i] = c;
            let node = dag.node(i);
            parts.extend(node.members.iter().cloned().zip(node.contents.iter().cloned()));
        }
        nodes.push(DagNode::merged(parts));
    }
    let keys: Vec<String> = nodes.iter().map(|n| n.key.clone()).collect();
    let edges: Vec<(String, String)> = dag
        .edges()
        .filter(|&(u, v)| component[u] != component[v])
        .map(|(u, v)| (keys[component[u]].clone(), keys[component[v]].clone()))
        .collect();
    FileDag::new(nodes, edges)
}
