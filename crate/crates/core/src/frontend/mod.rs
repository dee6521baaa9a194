//! Language frontends: source tree in, [`CodeGraph`] out.

mod builtins;
mod cpp;
mod python;
mod resolve;
pub mod syntax;

use std::fmt;
use std::path::{Path, PathBuf};

use globset::{Glob, GlobSet, GlobSetBuilder};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;
use walkdir::WalkDir;

pub use builtins::Builtins;
pub use cpp::CppBackend;
pub use python::PythonBackend;
pub use resolve::{link, resolve_calls, Unresolved};
use syntax::{ParsedFile, SyntaxBackend};

use crate::graph::{CodeGraph, GraphError, Language};

#[derive(Debug, Error)]
pub enum FrontendError {
    #[error("cannot read repository root {path}: {source}")]
    UnreadableRoot { path: PathBuf, source: std::io::Error },
    #[error("invalid exclude glob `{glob}`: {source}")]
    BadGlob { glob: String, source: globset::Error },
    #[error("include_roots must not be empty")]
    NoIncludeRoots,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FrontendConfig {
    pub language: Language,
    /// Directories (relative to the root) searched for includes and
    /// absolute imports.
    #[serde(default = "default_roots")]
    pub include_roots: Vec<String>,
    #[serde(default)]
    pub exclude_globs: Vec<String>,
    #[serde(default)]
    pub follow_symlinks: bool,
}

fn default_roots() -> Vec<String> {
    vec![".".to_string()]
}

impl FrontendConfig {
    pub fn new(language: Language) -> Self {
        FrontendConfig { language, include_roots: default_roots(), exclude_globs: Vec::new(), follow_symlinks: false }
    }

    pub fn validate(&self) -> Result<GlobSet, FrontendError> {
        if self.include_roots.is_empty() {
            return Err(FrontendError::NoIncludeRoots);
        }
        let mut builder = GlobSetBuilder::new();
        for g in &self.exclude_globs {
            let glob = Glob::new(g).map_err(|source| FrontendError::BadGlob { glob: g.clone(), source })?;
            builder.add(glob);
        }
        builder.build().map_err(|source| FrontendError::BadGlob { glob: self.exclude_globs.join(","), source })
    }

    fn normalized_roots(&self) -> Vec<String> {
        self.include_roots.iter().map(|r| resolve::join_path("", r)).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DiagnosticKind {
    /// Call to a language builtin or standard-library name.
    Builtin,
    /// Call to a module imported from outside the repository.
    External,
    /// Several repository-wide candidates and none visible from the site.
    Ambiguous,
    /// Candidates exist by name but none accepts the argument count.
    ArityMismatch,
    Unresolved,
    ParseError,
}

impl fmt::Display for DiagnosticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DiagnosticKind::Builtin => "builtin",
            DiagnosticKind::External => "external",
            DiagnosticKind::Ambiguous => "ambiguous",
            DiagnosticKind::ArityMismatch => "arity-mismatch",
            DiagnosticKind::Unresolved => "unresolved",
            DiagnosticKind::ParseError => "parse-error",
        };
        f.write_str(s)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub file_path: String,
    pub line: u32,
    pub kind: DiagnosticKind,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct Analysis {
    pub graph: CodeGraph,
    pub diagnostics: Vec<Diagnostic>,
}

impl Analysis {
    pub fn diagnostics_of(&self, kind: DiagnosticKind) -> impl Iterator<Item = &Diagnostic> {
        self.diagnostics.iter().filter(move |d| d.kind == kind)
    }
}

pub fn backend(language: Language) -> &'static dyn SyntaxBackend {
    static CPP: CppBackend = CppBackend;
    static PY: PythonBackend = PythonBackend;
    match language {
        Language::Cpp => &CPP,
        Language::Python => &PY,
    }
}

pub fn source_extensions(language: Language) -> &'static [&'static str] {
    match language {
        Language::Cpp => &["h", "hh", "hpp", "hxx", "c", "cc", "cpp", "cxx", "ipp", "inl", "tpp"],
        Language::Python => &["py"],
    }
}

/// Repository-relative paths of the source files a scan would parse, sorted.
pub fn list_sources(root: &Path, cfg: &FrontendConfig) -> Result<Vec<String>, FrontendError> {
    let excludes = cfg.validate()?;
    std::fs::read_dir(root).map_err(|source| FrontendError::UnreadableRoot { path: root.to_path_buf(), source })?;
    let exts = source_extensions(cfg.language);
    let mut out = Vec::new();
    let walker = WalkDir::new(root).follow_links(cfg.follow_symlinks).sort_by_file_name();
    let entries = walker.into_iter().filter_entry(|e| {
        e.depth() == 0 || !e.file_name().to_str().is_some_and(|n| n.starts_with('.') || n == "__pycache__")
    });
    for entry in entries {
        let entry = match entry {
            Ok(e) => e,
            Err(err) => {
                tracing::warn!(%err, "skipping unreadable entry");
                continue;
            }
        };
        if !entry.file_type().is_file() {
            continue;
        }
        let Some(ext) = entry.path().extension().and_then(|e| e.to_str()) else { continue };
        if !exts.contains(&ext) {
            continue;
        }
        let Ok(rel) = entry.path().strip_prefix(root) else { continue };
        let rel = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
        if excludes.is_match(&rel) {
            continue;
        }
        out.push(rel);
    }
    out.sort();
    Ok(out)
}

/// Scans `root` into a code graph. Files that fail to read or parse are
/// reported as diagnostics and still appear as file entities when readable.
pub fn scan_repository(root: &Path, cfg: &FrontendConfig) -> Result<Analysis, FrontendError> {
    let paths = list_sources(root, cfg)?;
    let sources: Vec<(String, Option<String>)> = paths
        .into_par_iter()
        .map(|rel| {
            let text = std::fs::read(root.join(&rel)).ok().map(|b| String::from_utf8_lossy(&b).into_owned());
            (rel, text)
        })
        .collect();
    let mut read_errors = Vec::new();
    let sources: Vec<(String, String)> = sources
        .into_iter()
        .filter_map(|(rel, text)| match text {
            Some(t) => Some((rel, t)),
            None => {
                read_errors.push(Diagnostic {
                    file_path: rel,
                    line: 0,
                    kind: DiagnosticKind::ParseError,
                    message: "unreadable file".into(),
                });
                None
            }
        })
        .collect();
    let mut analysis = analyze_sources(cfg.language, sources, &cfg.normalized_roots())?;
    analysis.diagnostics.extend(read_errors);
    analysis.diagnostics.sort_by(|a, b| (&a.file_path, a.line, a.kind).cmp(&(&b.file_path, b.line, b.kind)));
    tracing::info!(
        entities = analysis.graph.entity_count(),
        relations = analysis.graph.relations().len(),
        diagnostics = analysis.diagnostics.len(),
        "scan complete"
    );
    Ok(analysis)
}

/// Builds a graph from in-memory `(path, source)` pairs.
pub fn analyze_sources(
    language: Language,
    sources: Vec<(String, String)>,
    include_roots: &[String],
) -> Result<Analysis, FrontendError> {
    let backend = backend(language);
    let parsed: Vec<ParsedFile> = sources.par_iter().map(|(p, s)| backend.parse_file(p, s)).collect();
    let mut parse_diags: Vec<Diagnostic> = parsed
        .iter()
        .flat_map(|f| {
            f.errors.iter().map(|(line, msg)| Diagnostic {
                file_path: f.path.clone(),
                line: *line,
                kind: DiagnosticKind::ParseError,
                message: msg.clone(),
            })
        })
        .collect();
    let unresolved = link(language, parsed, include_roots)?;
    let mut analysis = resolve_calls(unresolved)?;
    analysis.diagnostics.append(&mut parse_diags);
    analysis.diagnostics.sort_by(|a, b| (&a.file_path, a.line, a.kind).cmp(&(&b.file_path, b.line, b.kind)));
    Ok(analysis)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{EntityKind, RelationKind};

    fn src(path: &str, text: &str) -> (String, String) {
        (path.to_string(), text.to_string())
    }

    fn roots() -> Vec<String> {
        vec![String::new()]
    }

    #[test]
    fn three_file_cpp_fixture() {
        let a = analyze_sources(
            Language::Cpp,
            vec![
                src("a.hpp", "#pragma once\nint g(int x) { return x + 1; }\n"),
                src("b.cpp", "#include \"a.hpp\"\nint f() {\n  return g(2);\n}\n"),
                src("c.cpp", "#include \"a.hpp\"\n"),
            ],
            &roots(),
        )
        .unwrap();
        let g = &a.graph;
        assert_eq!(g.files().count(), 3);
        assert_eq!(g.relations().iter().filter(|r| r.kind == RelationKind::Include).count(), 2);
        let calls: Vec<_> = g.relations().iter().filter(|r| r.kind == RelationKind::Call).collect();
        assert_eq!(calls.len(), 1);
        assert_eq!(g.entity(&calls[0].src).unwrap().name, "f");
        assert_eq!(g.entity(&calls[0].dst).unwrap().name, "g");
        let names: Vec<_> = g.entities().filter(|e| e.kind != EntityKind::File).map(|e| e.name.as_str()).collect();
        assert_eq!(names.len(), 2);
    }

    #[test]
    fn python_package_fixture() {
        let a = analyze_sources(
            Language::Python,
            vec![
                src("pkg/a.py", "from .b import Widget\n\ndef use():\n    return Widget()\n"),
                src("pkg/b.py", "class Widget:\n    def one(self):\n        return 1\n\n    def two(self):\n        return self.one()\n"),
            ],
            &roots(),
        )
        .unwrap();
        let g = &a.graph;
        assert_eq!(g.files().count(), 2);
        assert_eq!(g.relations().iter().filter(|r| r.kind == RelationKind::Dependency && g.entity(&r.src).unwrap().kind == EntityKind::File).count(), 1);
        assert_eq!(g.entities().filter(|e| e.kind == EntityKind::Class).count(), 1);
        assert_eq!(g.entities().filter(|e| e.kind == EntityKind::Method).count(), 2);
        let call_pairs: Vec<(String, String)> = g
            .relations()
            .iter()
            .filter(|r| r.kind == RelationKind::Call)
            .map(|r| (g.entity(&r.src).unwrap().name.clone(), g.entity(&r.dst).unwrap().name.clone()))
            .collect();
        assert!(call_pairs.contains(&("use".into(), "Widget".into())));
        assert!(call_pairs.contains(&("Widget.two".into(), "Widget.one".into())));
    }

    #[test]
    fn builtin_and_ambiguous_diagnostics() {
        let a = analyze_sources(
            Language::Python,
            vec![
                src("main.py", "def run():\n    print('x')\n    helper()\n"),
                src("x.py", "def helper():\n    pass\n"),
                src("y.py", "def helper():\n    pass\n"),
            ],
            &roots(),
        )
        .unwrap();
        assert_eq!(a.graph.relations().iter().filter(|r| r.kind == RelationKind::Call).count(), 0);
        assert_eq!(a.diagnostics_of(DiagnosticKind::Builtin).count(), 1);
        assert_eq!(a.diagnostics_of(DiagnosticKind::Ambiguous).count(), 1);
    }

    #[test]
    fn empty_directory_scans_to_empty_graph() {
        let dir = tempfile::tempdir().unwrap();
        let a = scan_repository(dir.path(), &FrontendConfig::new(Language::Cpp)).unwrap();
        assert_eq!(a.graph.entity_count(), 0);
        assert!(a.diagnostics.is_empty());
    }

    #[test]
    fn unreadable_root_is_an_error() {
        let err = scan_repository(Path::new("/definitely/not/here"), &FrontendConfig::new(Language::Python));
        assert!(matches!(err, Err(FrontendError::UnreadableRoot { .. })));
    }

    #[test]
    fn bad_glob_rejected() {
        let mut cfg = FrontendConfig::new(Language::Cpp);
        cfg.exclude_globs.push("a[".into());
        assert!(matches!(cfg.validate(), Err(FrontendError::BadGlob { .. })));
    }
}
