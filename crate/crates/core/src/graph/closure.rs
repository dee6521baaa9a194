use std::collections::{BTreeSet, VecDeque};

use super::{CodeGraph, Entity, EntityId, EntityKind, GraphError, RelationKind};

/// One member of a dependency closure with the context needed to cite it.
#[derive(Clone, Debug)]
pub struct ClosureEntry<'g> {
    pub entity: &'g Entity,
    pub namespace: Option<String>,
}

impl ClosureEntry<'_> {
    /// `path:start-end`
    pub fn location(&self) -> String {
        format!("{}:{}-{}", self.entity.file_path, self.entity.span.start, self.entity.span.end)
    }

    /// Label used for the entry in context bundles.
    pub fn label(&self) -> String {
        match &self.namespace {
            Some(ns) => format!("{} {} @ {} (namespace {ns})", self.entity.kind.label(), self.entity.name, self.location()),
            None => format!("{} {} @ {}", self.entity.kind.label(), self.entity.name, self.location()),
        }
    }
}

/// Everything `root` needs: callees and referenced types/globals, followed
/// transitively. The root comes first, then entries in breadth-first order
/// with ties broken by id.
pub fn dependency_closure<'g>(graph: &'g CodeGraph, root: &EntityId) -> Result<Vec<ClosureEntry<'g>>, GraphError> {
    let root_entity = graph.require(root)?;
    let mut seen = BTreeSet::from([root.clone()]);
    let mut queue = VecDeque::from([root_entity]);
    let mut out = Vec::new();
    while let Some(e) = queue.pop_front() {
        out.push(ClosureEntry { entity: e, namespace: enclosing_namespace(graph, e) });
        let mut next: Vec<&Entity> = graph
            .outgoing(&e.id)
            .filter(|r| matches!(r.kind, RelationKind::Call | RelationKind::Dependency))
            .filter_map(|r| graph.entity(&r.dst))
            .filter(|d| d.kind != EntityKind::File)
            .collect();
        next.sort_by(|a, b| a.id.cmp(&b.id));
        for d in next {
            if seen.insert(d.id.clone()) {
                queue.push_back(d);
            }
        }
    }
    Ok(out)
}

/// Qualified-name prefix, falling back to the containing class chain.
fn enclosing_namespace(graph: &CodeGraph, e: &Entity) -> Option<String> {
    if let Some(ns) = e.namespace() {
        return Some(ns.to_string());
    }
    let classes: Vec<&str> = graph
        .contain_chain(&e.id)
        .into_iter()
        .filter(|c| c.kind == EntityKind::Class)
        .map(|c| c.name.as_str())
        .collect();
    classes.first().map(|c| c.to_string())
}

#[cfg(test)]
mod tests {
    use super::super::fixtures::*;
    use super::super::{Language, RelationKind};
    use super::*;

    fn names(c: &[ClosureEntry<'_>]) -> BTreeSet<String> {
        c.iter().map(|e| e.entity.name.clone()).collect()
    }

    #[test]
    fn leaf_is_its_own_closure() {
        let f = func("f", "a.cpp", 0);
        let g = CodeGraph::from_parts(Language::Cpp, vec![f.clone()], vec![]).unwrap();
        let c = dependency_closure(&g, &f.id).unwrap();
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].entity.id, f.id);
    }

    #[test]
    fn transitive_calls() {
        let (f, g, h) = (func("f", "a.cpp", 0), func("g", "a.cpp", 0), func("h", "b.cpp", 0));
        let graph = CodeGraph::from_parts(
            Language::Cpp,
            vec![f.clone(), g.clone(), h.clone()],
            vec![rel(&f, RelationKind::Call, &g), rel(&g, RelationKind::Call, &h)],
        )
        .unwrap();
        let c = dependency_closure(&graph, &f.id).unwrap();
        assert_eq!(names(&c), ["f", "g", "h"].map(String::from).into());
        assert_eq!(c[0].entity.name, "f");
    }

    #[test]
    fn global_reference_is_followed() {
        let (f, g, glob) = (func("f", "a.cpp", 0), func("g", "a.cpp", 0), global("G", "a.cpp"));
        let graph = CodeGraph::from_parts(
            Language::Cpp,
            vec![f.clone(), g.clone(), glob.clone()],
            vec![rel(&f, RelationKind::Call, &g), rel(&g, RelationKind::Dependency, &glob)],
        )
        .unwrap();
        assert_eq!(names(&dependency_closure(&graph, &f.id).unwrap()), ["f", "g", "G"].map(String::from).into());
    }

    #[test]
    fn unknown_root_is_an_error() {
        let graph = CodeGraph::empty(Language::Cpp);
        let err = dependency_closure(&graph, &EntityId::from_raw("nope")).unwrap_err();
        assert!(matches!(err, GraphError::UnknownEntity(_)));
    }

    #[test]
    fn label_carries_location_and_namespace() {
        let f = func("geo::area", "src/a.cpp", 1);
        let graph = CodeGraph::from_parts(Language::Cpp, vec![f.clone()], vec![]).unwrap();
        let c = dependency_closure(&graph, &f.id).unwrap();
        assert_eq!(c[0].label(), "function geo::area @ src/a.cpp:1-1 (namespace geo)");
    }
}
