use std::fmt;

use serde::{Deserialize, Serialize};

use super::{dependency_closure, file_dependency_subgraph, CodeGraph, EntityKind};

/// Repository summary in the shape of a project-selection table.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub files: usize,
    pub lines_of_code: usize,
    pub file_dependency_edges: usize,
    /// Mean out-degree of file nodes in the file dependency subgraph.
    pub avg_file_dependencies: f64,
    pub functions: usize,
    /// Mean of `|dependency_closure(f)| - 1` over functions and methods.
    pub avg_function_dependencies: f64,
}

pub fn graph_stats(graph: &CodeGraph) -> StatsReport {
    let dag = file_dependency_subgraph(graph);
    let files = dag.len();
    let lines_of_code = graph.files().map(|f| f.body_text.lines().count()).sum();
    let callables: Vec<_> = graph
        .entities()
        .filter(|e| matches!(e.kind, EntityKind::Function | EntityKind::Method))
        .collect();
    let dep_total: usize = callables
        .iter()
        .map(|f| dependency_closure(graph, &f.id).map(|c| c.len() - 1).unwrap_or(0))
        .sum();
    StatsReport {
        files,
        lines_of_code,
        file_dependency_edges: dag.edge_count(),
        avg_file_dependencies: ratio(dag.edge_count(), files),
        functions: callables.len(),
        avg_function_dependencies: ratio(dep_total, callables.len()),
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

impl fmt::Display for StatsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows = [
            ("Number of Files", self.files.to_string()),
            ("#LOC", self.lines_of_code.to_string()),
            ("File-level Dependencies", self.file_dependency_edges.to_string()),
            ("Avg. FLD of File", format!("{:.2}", self.avg_file_dependencies)),
            ("Functions", self.functions.to_string()),
            ("Avg. D. of Function", format!("{:.2}", self.avg_function_dependencies)),
        ];
        let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
        for (k, v) in rows {
            writeln!(f, "{k:<width$}  {v:>10}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Language, RelationKind};
    use super::*;

    #[test]
    fn empty_repository_is_all_zero() {
        assert_eq!(graph_stats(&CodeGraph::empty(Language::Cpp)), StatsReport::default());
    }

    #[test]
    fn three_files_two_includes() {
        let a = file("a.hpp", "int g();\n");
        let b = file("b.cpp", "#include \"a.hpp\"\nint f() { return g(); }\n");
        let c = file("c.cpp", "#include \"a.hpp\"\n");
        let f = func("f", "b.cpp", 0);
        let g = func("g", "a.hpp", 0);
        let graph = CodeGraph::from_parts(
            Language::Cpp,
            vec![a.clone(), b.clone(), c.clone(), f.clone(), g.clone()],
            vec![
                rel(&b, RelationKind::Include, &a),
                rel(&c, RelationKind::Include, &a),
                rel(&f, RelationKind::Call, &g),
            ],
        )
        .unwrap();
        let s = graph_stats(&graph);
        assert_eq!(s.files, 3);
        assert_eq!(s.lines_of_code, 4);
        assert!((s.avg_file_dependencies - 2.0 / 3.0).abs() < 1e-12);
        // f has one dependency, g none.
        assert!((s.avg_function_dependencies - 0.5).abs() < 1e-12);
        let text = s.to_string();
        assert!(text.contains("Avg. FLD of File"));
        assert!(text.contains("0.67"));
    }
}
