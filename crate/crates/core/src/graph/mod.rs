//! In-memory code graph: typed entities, typed relations and the queries the
//! corpus builders run over them.
//!
//! A [`CodeGraph`] is immutable once built. Construction goes through
//! [`CodeGraph::from_parts`], which checks every structural invariant and
//! computes the content hash, so any graph value in hand is well formed.

mod closure;
mod dag;
mod io;
mod stats;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::digest::sha256_parts;

pub use closure::{dependency_closure, ClosureEntry};
pub use dag::{condense_file_dag, file_dependency_subgraph, DagNode, FileDag};
pub use io::{read_graph, read_graph_file, write_graph, write_graph_file, GraphHeader, GRAPH_FORMAT_VERSION};
pub use stats::{graph_stats, StatsReport};

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("duplicate entity id {0}")]
    DuplicateId(EntityId),
    #[error("relation endpoint {0} does not exist")]
    DanglingEndpoint(EntityId),
    #[error("entity {0}: span start {1} is after end {2}")]
    InvalidSpan(EntityId, u32, u32),
    #[error("entity {0}: signature must be present exactly for functions and methods")]
    SignatureMismatch(EntityId),
    #[error("file entity {0}: name and file_path must both equal the file path")]
    FilePath(EntityId),
    #[error("contain edges do not form a forest rooted at files: {0}")]
    ContainNotForest(String),
    #[error("{0} edge {1} -> {2} must connect two file entities")]
    FileEdge(RelationKind, EntityId, EntityId),
    #[error("dependency edge {0} -> {1} mixes file and non-file endpoints")]
    MixedDependency(EntityId, EntityId),
    #[error("unknown entity {0}")]
    UnknownEntity(EntityId),
    #[error("unknown relation kind `{0}`")]
    UnknownRelationKind(String),
    #[error("graph file: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Language {
    Cpp,
    Python,
}

impl Language {
    /// Separator between qualified-name segments.
    pub fn separator(self) -> &'static str {
        match self {
            Language::Cpp => "::",
            Language::Python => ".",
        }
    }

    pub fn line_comment(self) -> &'static str {
        match self {
            Language::Cpp => "//",
            Language::Python => "#",
        }
    }

    pub fn source_extension(self) -> &'static str {
        match self {
            Language::Cpp => "cpp",
            Language::Python => "py",
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Language::Cpp => "cpp",
            Language::Python => "python",
        }
    }
}

impl FromStr for Language {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cpp" | "c++" => Ok(Language::Cpp),
            "python" | "py" => Ok(Language::Python),
            other => Err(format!("unsupported language `{other}`")),
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EntityKind {
    File,
    Class,
    Function,
    Method,
    GlobalVariable,
}

impl EntityKind {
    pub const ALL: [EntityKind; 5] = [
        EntityKind::File,
        EntityKind::Class,
        EntityKind::Function,
        EntityKind::Method,
        EntityKind::GlobalVariable,
    ];

    /// Human-readable label used in rendered statements.
    pub fn label(self) -> &'static str {
        match self {
            EntityKind::File => "file",
            EntityKind::Class => "class",
            EntityKind::Function => "function",
            EntityKind::Method => "method",
            EntityKind::GlobalVariable => "global variable",
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            EntityKind::File => "file",
            EntityKind::Class => "class",
            EntityKind::Function => "function",
            EntityKind::Method => "method",
            EntityKind::GlobalVariable => "global-variable",
        }
    }

    pub fn has_signature(self) -> bool {
        matches!(self, EntityKind::Function | EntityKind::Method)
    }

    /// Functions and methods share one name family: a statement slot typed
    /// "function" is answered against both.
    pub fn family(self) -> &'static [EntityKind] {
        match self {
            EntityKind::Function | EntityKind::Method => &[EntityKind::Function, EntityKind::Method],
            EntityKind::File => &[EntityKind::File],
            EntityKind::Class => &[EntityKind::Class],
            EntityKind::GlobalVariable => &[EntityKind::GlobalVariable],
        }
    }
}

impl FromStr for EntityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EntityKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown entity kind `{s}`"))
    }
}

impl fmt::Display for EntityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Stable entity identifier: a digest of `(kind, qualified name, file path)`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(String);

impl EntityId {
    /// `ordinal` disambiguates entities sharing the same key (C++ overloads in
    /// one file, Python redefinitions); the first occurrence uses 0 and hashes
    /// exactly the three-part key.
    pub fn derive(kind: EntityKind, qualified_name: &str, file_path: &str, ordinal: usize) -> Self {
        let digest = if ordinal == 0 {
            sha256_parts([kind.as_str(), qualified_name, file_path])
        } else {
            let ord = ordinal.to_string();
            sha256_parts([kind.as_str(), qualified_name, file_path, ord.as_str()])
        };
        EntityId(digest[..32].to_string())
    }

    pub fn from_raw(raw: impl Into<String>) -> Self {
        EntityId(raw.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Inclusive, 1-based line range.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Span {
    pub start: u32,
    pub end: u32,
}

impl Span {
    pub fn new(start: u32, end: u32) -> Self {
        Span { start, end }
    }

    pub fn contains_line(&self, line: u32) -> bool {
        self.start <= line && line <= self.end
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub has_default: bool,
}

impl Param {
    pub fn required(name: impl Into<String>) -> Self {
        Param { name: name.into(), has_default: false }
    }

    pub fn optional(name: impl Into<String>) -> Self {
        Param { name: name.into(), has_default: true }
    }
}

/// Parameter list of a function or method. Python methods omit the leading
/// `self`/`cls` receiver so the count matches what a call site passes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub params: Vec<Param>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub variadic: bool,
}

impl Signature {
    pub fn new(params: Vec<Param>) -> Self {
        Signature { params, variadic: false }
    }

    pub fn count(&self) -> usize {
        self.params.len()
    }

    pub fn required(&self) -> usize {
        self.params.iter().filter(|p| !p.has_default).count()
    }

    pub fn accepts(&self, args: usize) -> bool {
        args >= self.required() && (self.variadic || args <= self.count())
    }

    pub fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|p| p.name.as_str()).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entity {
    pub id: EntityId,
    pub kind: EntityKind,
    pub name: String,
    pub file_path: String,
    pub span: Span,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub signature: Option<Signature>,
    pub body_text: String,
}

impl Entity {
    /// Last segment of the qualified name (the file path for files).
    pub fn short_name(&self) -> &str {
        if self.kind == EntityKind::File {
            return &self.name;
        }
        let cut = [self.name.rfind("::").map(|i| i + 2), self.name.rfind('.').map(|i| i + 1)]
            .into_iter()
            .flatten()
            .max()
            .unwrap_or(0);
        &self.name[cut..]
    }

    /// Qualified-name prefix: enclosing namespaces and classes.
    pub fn namespace(&self) -> Option<&str> {
        if self.kind == EntityKind::File {
            return None;
        }
        let short = self.short_name();
        let prefix = &self.name[..self.name.len() - short.len()];
        let prefix = prefix.trim_end_matches("::").trim_end_matches('.');
        (!prefix.is_empty()).then_some(prefix)
    }

    /// Qualifier chain as individual segments (`a::b::f` -> `[a, b]`).
    pub fn qualifier_segments(&self) -> Vec<&str> {
        match self.namespace() {
            None => Vec::new(),
            Some(ns) if ns.contains("::") => ns.split("::").collect(),
            Some(ns) => ns.split('.').collect(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationKind {
    Dependency,
    Call,
    Include,
    Contain,
}

impl RelationKind {
    pub const ALL: [RelationKind; 4] =
        [RelationKind::Dependency, RelationKind::Call, RelationKind::Include, RelationKind::Contain];

    pub fn as_str(self) -> &'static str {
        match self {
            RelationKind::Dependency => "dependency",
            RelationKind::Call => "call",
            RelationKind::Include => "include",
            RelationKind::Contain => "contain",
        }
    }
}

impl FromStr for RelationKind {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        RelationKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| GraphError::UnknownRelationKind(s.to_string()))
    }
}

impl fmt::Display for RelationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Location {
    pub file_path: String,
    pub line: u32,
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Relation {
    pub src: EntityId,
    pub dst: EntityId,
    pub kind: RelationKind,
    pub evidence: Location,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CodeGraph {
    language: Language,
    entities: BTreeMap<EntityId, Entity>,
    relations: Vec<Relation>,
    content_hash: String,
    outgoing: BTreeMap<EntityId, Vec<usize>>,
    files_by_path: BTreeMap<String, EntityId>,
    parent: BTreeMap<EntityId, EntityId>,
}

impl CodeGraph {
    pub fn empty(language: Language) -> Self {
        CodeGraph::from_parts(language, Vec::new(), Vec::new()).expect("empty graph is valid")
    }

    /// Builds a graph and checks every structural invariant.
    pub fn from_parts(
        language: Language,
        entities: Vec<Entity>,
        relations: Vec<Relation>,
    ) -> Result<Self, GraphError> {
        let mut map = BTreeMap::new();
        let mut files_by_path = BTreeMap::new();
        for e in entities {
            if e.span.start > e.span.end {
                return Err(GraphError::InvalidSpan(e.id, e.span.start, e.span.end));
            }
            if e.signature.is_some() != e.kind.has_signature() {
                return Err(GraphError::SignatureMismatch(e.id));
            }
            if e.kind == EntityKind::File {
                if e.name != e.file_path {
                    return Err(GraphError::FilePath(e.id));
                }
                files_by_path.insert(e.file_path.clone(), e.id.clone());
            }
            if map.contains_key(&e.id) {
                return Err(GraphError::DuplicateId(e.id));
            }
            map.insert(e.id.clone(), e);
        }

        let mut outgoing: BTreeMap<EntityId, Vec<usize>> = BTreeMap::new();
        let mut parent = BTreeMap::new();
        for (i, r) in relations.iter().enumerate() {
            let src = map.get(&r.src).ok_or_else(|| GraphError::DanglingEndpoint(r.src.clone()))?;
            let dst = map.get(&r.dst).ok_or_else(|| GraphError::DanglingEndpoint(r.dst.clone()))?;
            let src_file = src.kind == EntityKind::File;
            let dst_file = dst.kind == EntityKind::File;
            match r.kind {
                RelationKind::Include if !(src_file && dst_file) => {
                    return Err(GraphError::FileEdge(r.kind, r.src.clone(), r.dst.clone()));
                }
                RelationKind::Dependency if src_file != dst_file => {
                    return Err(GraphError::MixedDependency(r.src.clone(), r.dst.clone()));
                }
                RelationKind::Contain => {
                    if dst_file || !matches!(src.kind, EntityKind::File | EntityKind::Class) {
                        return Err(GraphError::ContainNotForest(format!(
                            "{} {} cannot contain {} {}",
                            src.kind, src.name, dst.kind, dst.name
                        )));
                    }
                    if parent.insert(r.dst.clone(), r.src.clone()).is_some() {
                        return Err(GraphError::ContainNotForest(format!(
                            "{} has more than one container",
                            dst.name
                        )));
                    }
                }
                _ => {}
            }
            outgoing.entry(r.src.clone()).or_default().push(i);
        }
        // Parents are files or classes and classes have a unique parent, so
        // walking up must reach a file unless a class cycle exists.
        for id in parent.keys() {
            let mut cur = id;
            let mut steps = 0usize;
            while let Some(p) = parent.get(cur) {
                cur = p;
                steps += 1;
                if steps > map.len() {
                    return Err(GraphError::ContainNotForest(format!("contain cycle through {id}")));
                }
            }
            if map[cur].kind != EntityKind::File {
                return Err(GraphError::ContainNotForest(format!(
                    "{} is not rooted at a file",
                    map[id].name
                )));
            }
        }

        let content_hash = content_hash(&map);
        Ok(CodeGraph { language, entities: map, relations, content_hash, outgoing, files_by_path, parent })
    }

    pub fn language(&self) -> Language {
        self.language
    }

    /// SHA-256 over `id NUL body NUL` for every entity in ascending id order.
    pub fn content_hash(&self) -> &str {
        &self.content_hash
    }

    pub fn entities(&self) -> impl Iterator<Item = &Entity> {
        self.entities.values()
    }

    pub fn entity_count(&self) -> usize {
        self.entities.len()
    }

    pub fn relations(&self) -> &[Relation] {
        &self.relations
    }

    pub fn entity(&self, id: &EntityId) -> Option<&Entity> {
        self.entities.get(id)
    }

    pub fn require(&self, id: &EntityId) -> Result<&Entity, GraphError> {
        self.entity(id).ok_or_else(|| GraphError::UnknownEntity(id.clone()))
    }

    pub fn files(&self) -> impl Iterator<Item = &Entity> {
        self.files_by_path.values().map(|id| &self.entities[id])
    }

    pub fn file_by_path(&self, path: &str) -> Option<&Entity> {
        self.files_by_path.get(path).map(|id| &self.entities[id])
    }

    pub fn outgoing(&self, id: &EntityId) -> impl Iterator<Item = &Relation> {
        self.outgoing
            .get(id)
            .into_iter()
            .flatten()
            .map(|&i| &self.relations[i])
    }

    pub fn outgoing_of_kind(&self, id: &EntityId, kind: RelationKind) -> impl Iterator<Item = &Relation> {
        self.outgoing(id).filter(move |r| r.kind == kind)
    }

    /// Containing class or file, following contain edges.
    pub fn container(&self, id: &EntityId) -> Option<&Entity> {
        self.parent.get(id).map(|p| &self.entities[p])
    }

    /// Chain of containers from the immediate parent up to the file.
    pub fn contain_chain(&self, id: &EntityId) -> Vec<&Entity> {
        let mut out = Vec::new();
        let mut cur = id;
        while let Some(p) = self.parent.get(cur) {
            out.push(&self.entities[p]);
            cur = p;
        }
        out
    }

    /// Every qualified and short entity name in the graph.
    pub fn name_set(&self) -> BTreeSet<String> {
        let mut names = BTreeSet::new();
        for e in self.entities.values() {
            names.insert(e.name.clone());
            names.insert(e.short_name().to_string());
        }
        names
    }

    pub fn entities_named<'a>(&'a self, short_name: &'a str) -> impl Iterator<Item = &'a Entity> + 'a {
        self.entities.values().filter(move |e| e.short_name() == short_name)
    }
}

fn content_hash(entities: &BTreeMap<EntityId, Entity>) -> String {
    sha256_parts(
        entities
            .values()
            .flat_map(|e| [e.id.as_str().as_bytes(), e.body_text.as_bytes()]),
    )
}
