//! Backend-neutral view of one parsed source file.
//!
//! A [`SyntaxBackend`] turns source text into definitions, import statements
//! and use sites. Everything downstream (linking, call resolution, the rule
//! filters) consumes only these types, so swapping the parser does not touch
//! the rest of the crate.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::graph::{EntityKind, Language, Signature, Span};

pub trait SyntaxBackend: Send + Sync {
    fn language(&self) -> Language;

    /// Parses a whole file. Never fails: regions that do not parse are
    /// reported in [`ParsedFile::errors`] and contribute no definitions.
    fn parse_file(&self, path: &str, source: &str) -> ParsedFile;

    /// Parses a free-standing code fragment (a reference answer, a repair
    /// patch). Fragments that are not valid at file scope are retried as a
    /// function body.
    fn parse_snippet(&self, source: &str) -> Result<Snippet, SnippetError>;
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("code does not parse near line {line}")]
pub struct SnippetError {
    pub line: u32,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Definition {
    pub kind: EntityKind,
    /// Segments of the qualified name, outermost first.
    pub segments: Vec<String>,
    pub span: Span,
    pub signature: Option<Signature>,
    pub body_text: String,
    /// Index of the enclosing class definition in the same file.
    pub parent: Option<usize>,
    /// Set for C++ definitions written as `Scope::name(...)` outside any
    /// class body. The linker decides whether `Scope` is a class.
    pub out_of_line: bool,
}

impl Definition {
    pub fn short_name(&self) -> &str {
        self.segments.last().map(String::as_str).unwrap_or("")
    }

    pub fn qualified_name(&self, language: Language) -> String {
        self.segments.join(language.separator())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ImportTarget {
    /// `#include "path"` (`system == false`) or `#include <path>`.
    Include { path: String, system: bool },
    /// `import a.b [as x]` or `from a.b import n [as m]`. `level` counts
    /// leading dots of a relative import.
    Module { module: String, level: usize, names: Vec<ImportedName>, alias: Option<String> },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImportedName {
    pub name: String,
    pub alias: Option<String>,
}

impl ImportedName {
    pub fn binding(&self) -> &str {
        self.alias.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Import {
    pub line: u32,
    pub target: ImportTarget,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Access {
    /// `f(...)`
    Plain,
    /// `ns::f(...)`
    Scoped,
    /// `obj.f(...)` / `obj->f(...)`
    Member,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SiteKind {
    Call,
    Reference,
}

/// A name used inside a definition: a call, or a reference to a type or
/// global.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UseSite {
    /// Definition index whose body holds the site; `None` for file scope.
    pub owner: Option<usize>,
    pub kind: SiteKind,
    pub name: String,
    /// Scope or receiver chain, e.g. `["geo"]` for `geo::area()` and
    /// `["self"]` for `self.go()`.
    pub qualifier: Vec<String>,
    pub access: Access,
    /// Argument count; `None` when unknown (argument unpacking).
    pub args: Option<usize>,
    pub line: u32,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct ParsedFile {
    pub path: String,
    pub source: String,
    pub definitions: Vec<Definition>,
    pub imports: Vec<Import>,
    pub sites: Vec<UseSite>,
    /// `(line, message)` for regions that failed to parse.
    pub errors: Vec<(u32, String)>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Snippet {
    pub calls: Vec<UseSite>,
    /// Functions, classes, variables and parameters introduced by the
    /// snippet itself.
    pub defined_names: BTreeSet<String>,
    pub definitions: Vec<Definition>,
    pub imports: Vec<Import>,
}

impl Snippet {
    /// Names bound by the snippet's imports: module aliases (or the first
    /// segment of a dotted module) and imported names.
    pub fn import_bindings(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for imp in &self.imports {
            if let ImportTarget::Module { module, names, alias, .. } = &imp.target {
                if names.is_empty() {
                    out.insert(alias.clone().unwrap_or_else(|| module.split('.').next().unwrap_or("").to_string()));
                }
                out.extend(names.iter().map(|n| n.binding().to_string()));
            }
        }
        out
    }
}

pub(crate) fn node_text<'s>(node: tree_sitter::Node<'_>, src: &'s str) -> &'s str {
    &src[node.byte_range()]
}

pub(crate) fn line_of(node: tree_sitter::Node<'_>) -> u32 {
    node.start_position().row as u32 + 1
}

pub(crate) fn span_of(node: tree_sitter::Node<'_>) -> Span {
    let start = node.start_position().row as u32 + 1;
    let mut end = node.end_position().row as u32 + 1;
    // A node ending at column 0 finished on the previous line.
    if node.end_position().column == 0 && end > start {
        end -= 1;
    }
    Span::new(start, end)
}

pub(crate) fn named_children<'t>(node: tree_sitter::Node<'t>) -> Vec<tree_sitter::Node<'t>> {
    let mut cursor = node.walk();
    node.named_children(&mut cursor).collect()
}

pub(crate) fn children<'t>(node: tree_sitter::Node<'t>) -> Vec<tree_sitter::Node<'t>> {
    let mut cursor = node.walk();
    node.children(&mut cursor).collect()
}

/// First line holding an ERROR or MISSING node below `node`.
pub(crate) fn first_error_line(node: tree_sitter::Node<'_>) -> Option<u32> {
    if node.is_error() || node.is_missing() {
        return Some(line_of(node));
    }
    if !node.has_error() {
        return None;
    }
    named_children(node)
        .into_iter()
        .chain(children(node))
        .find_map(first_error_line)
        .or(Some(line_of(node)))
}
