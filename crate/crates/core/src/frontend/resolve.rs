//! Linking parsed files into a [`CodeGraph`] and resolving use sites.
//!
//! Call sites resolve by name and arity, never by type. Candidates are
//! searched in three widening scopes: the same file, then files made visible
//! by includes or imports, then the whole repository (where the match must be
//! unique). Sites that resolve nowhere become diagnostics.

use std::collections::{BTreeMap, BTreeSet};

use super::builtins::Builtins;
use super::syntax::{Access, ImportTarget, ParsedFile, SiteKind, UseSite};
use super::{Analysis, Diagnostic, DiagnosticKind};
use crate::graph::{CodeGraph, Entity, EntityId, EntityKind, GraphError, Language, Location, Relation, RelationKind, Signature, Span};

/// Structure of a repository before use sites are resolved: entities,
/// contain edges and file-level edges.
pub struct Unresolved {
    pub graph: CodeGraph,
    files: Vec<ParsedFile>,
    def_ids: Vec<Vec<Option<EntityId>>>,
    file_ids: Vec<EntityId>,
    cands: Vec<Candidate>,
    by_name: BTreeMap<String, Vec<usize>>,
    visible: Vec<BTreeSet<usize>>,
    /// Files each file imports directly.
    imported: Vec<BTreeSet<usize>>,
    module_bindings: Vec<BTreeMap<String, usize>>,
    symbol_bindings: Vec<BTreeMap<String, (usize, String)>>,
    external_modules: Vec<BTreeSet<String>>,
}

struct Candidate {
    file: usize,
    id: EntityId,
    kind: EntityKind,
    segments: Vec<String>,
    signature: Option<Signature>,
    /// Qualified name of the class a method belongs to.
    class: Option<String>,
}

pub fn link(language: Language, mut files: Vec<ParsedFile>, include_roots: &[String]) -> Result<Unresolved, GraphError> {
    files.sort_by(|a, b| a.path.cmp(&b.path));
    let sep = language.separator();
    let path_index: BTreeMap<&str, usize> = files.iter().enumerate().map(|(i, f)| (f.path.as_str(), i)).collect();

    let class_names: BTreeSet<String> = files
        .iter()
        .flat_map(|f| f.definitions.iter())
        .filter(|d| d.kind == EntityKind::Class)
        .map(|d| d.segments.join(sep))
        .collect();

    let mut entities = Vec::new();
    let mut relations = Vec::new();
    let mut ordinals: BTreeMap<(EntityKind, String, String), usize> = BTreeMap::new();
    let mut def_ids = Vec::with_capacity(files.len());
    let mut file_ids = Vec::with_capacity(files.len());
    let mut cands = Vec::new();

    for (fi, f) in files.iter().enumerate() {
        let lines = f.source.lines().count().max(1) as u32;
        let file_id = EntityId::derive(EntityKind::File, &f.path, &f.path, 0);
        entities.push(Entity {
            id: file_id.clone(),
            kind: EntityKind::File,
            name: f.path.clone(),
            file_path: f.path.clone(),
            span: Span::new(1, lines),
            signature: None,
            body_text: f.source.clone(),
        });
        file_ids.push(file_id.clone());

        let mut ids: Vec<Option<EntityId>> = Vec::with_capacity(f.definitions.len());
        for d in &f.definitions {
            let qname = d.segments.join(sep);
            let prefix = d.segments[..d.segments.len().saturating_sub(1)].join(sep);
            let kind = if d.out_of_line && class_names.contains(&prefix) { EntityKind::Method } else { d.kind };
            let key = (kind, qname.clone(), f.path.clone());
            let ord = ordinals.entry(key).or_insert(0);
            let id = EntityId::derive(kind, &qname, &f.path, *ord);
            *ord += 1;
            let container = d.parent.and_then(|p| ids.get(p).cloned().flatten()).unwrap_or_else(|| file_id.clone());
            relations.push(Relation {
                src: container,
                dst: id.clone(),
                kind: RelationKind::Contain,
                evidence: Location { file_path: f.path.clone(), line: d.span.start },
            });
            entities.push(Entity {
                id: id.clone(),
                kind,
                name: qname,
                file_path: f.path.clone(),
                span: d.span,
                signature: if kind.has_signature() { Some(d.signature.clone().unwrap_or_default()) } else { None },
                body_text: d.body_text.clone(),
            });
            cands.push(Candidate {
                file: fi,
                id: id.clone(),
                kind,
                segments: d.segments.clone(),
                signature: d.signature.clone(),
                class: (kind == EntityKind::Method).then(|| prefix.clone()),
            });
            ids.push(Some(id));
        }
        def_ids.push(ids);
    }

    // File-level edges and name bindings.
    let mut direct: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); files.len()];
    let mut module_bindings = vec![BTreeMap::new(); files.len()];
    let mut symbol_bindings = vec![BTreeMap::new(); files.len()];
    let mut external_modules = vec![BTreeSet::new(); files.len()];
    let mut wildcard: Vec<BTreeSet<usize>> = vec![BTreeSet::new(); files.len()];
    let edge_kind = match language {
        Language::Cpp => RelationKind::Include,
        Language::Python => RelationKind::Dependency,
    };
    let mut seen_edges = BTreeSet::new();
    for (fi, f) in files.iter().enumerate() {
        let dir = parent_dir(&f.path);
        for imp in &f.imports {
            let mut targets = Vec::new();
            match &imp.target {
                ImportTarget::Include { path, system } => {
                    let mut bases: Vec<String> = Vec::new();
                    if !system {
                        bases.push(dir.to_string());
                    }
                    bases.extend(include_roots.iter().cloned());
                    if let Some(t) = bases.iter().find_map(|b| path_index.get(join_path(b, path).as_str()).copied()) {
                        targets.push(t);
                    }
                }
                ImportTarget::Module { module, level, names, alias } => {
                    let bases = module_bases(dir, *level, include_roots);
                    let module_file = find_module(&path_index, &bases, module);
                    if names.is_empty() {
                        match module_file {
                            Some(t) => {
                                let binding = alias.clone().unwrap_or_else(|| module.clone());
                                module_bindings[fi].insert(binding, t);
                                targets.push(t);
                            }
                            None => {
                                let binding = alias.clone().unwrap_or_else(|| module.clone());
                                external_modules[fi].insert(binding.split('.').next().unwrap_or("").to_string());
                            }
                        }
                    } else {
                        if module_file.is_none() && *level == 0 && !module.is_empty() {
                            let sub_exists = names
                                .iter()
                                .any(|n| find_module(&path_index, &bases, &format!("{module}.{}", n.name)).is_some());
                            if !sub_exists {
                                for n in names {
                                    external_modules[fi].insert(n.binding().to_string());
                                }
                            }
                        }
                        for n in names {
                            if n.name == "*" {
                                if let Some(t) = module_file {
                                    wildcard[fi].insert(t);
                                    targets.push(t);
                                }
                                continue;
                            }
                            let sub = if module.is_empty() { n.name.clone() } else { format!("{module}.{}", n.name) };
                            if let Some(t) = find_module(&path_index, &bases, &sub) {
                                module_bindings[fi].insert(n.binding().to_string(), t);
                                targets.push(t);
                            } else if let Some(t) = module_file {
                                symbol_bindings[fi].insert(n.binding().to_string(), (t, n.name.clone()));
                                targets.push(t);
                            }
                        }
                    }
                }
            }
            for t in targets {
                if t == fi {
                    continue;
                }
                direct[fi].insert(t);
                if seen_edges.insert((fi, t)) {
                    relations.push(Relation {
                        src: file_ids[fi].clone(),
                        dst: file_ids[t].clone(),
                        kind: edge_kind,
                        evidence: Location { file_path: f.path.clone(), line: imp.line },
                    });
                }
            }
        }
    }

    let visible = match language {
        Language::Cpp => transitive(&direct),
        Language::Python => wildcard,
    };
    let imported = direct;

    let mut by_name: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (i, c) in cands.iter().enumerate() {
        by_name.entry(c.segments.last().cloned().unwrap_or_default()).or_default().push(i);
    }

    let graph = CodeGraph::from_parts(language, entities, relations)?;
    Ok(Unresolved {
        graph,
        files,
        def_ids,
        file_ids,
        cands,
        by_name,
        visible,
        imported,
        module_bindings,
        symbol_bindings,
        external_modules,
    })
}

/// Adds call edges (and reference edges to classes and globals) to the
/// structural graph. Unresolved calls become diagnostics.
pub fn resolve_calls(u: Unresolved) -> Result<Analysis, GraphError> {
    let language = u.graph.language();
    let builtins = Builtins::for_language(language);
    let mut relations: Vec<Relation> = u.graph.relations().to_vec();
    let mut diagnostics = Vec::new();
    let mut seen: BTreeSet<(EntityId, EntityId, RelationKind)> = BTreeSet::new();

    for (fi, f) in u.files.iter().enumerate() {
        for site in &f.sites {
            let (src_id, owner_class, owner_def) = match site.owner {
                Some(o) => match u.def_ids[fi].get(o).cloned().flatten() {
                    Some(id) => (id, u.owner_class(fi, o), Some(o)),
                    None => continue,
                },
                None => (u.file_ids[fi].clone(), None, None),
            };
            let outcome = u.resolve_site(fi, site, owner_class.as_deref(), builtins);
            match outcome {
                Outcome::Targets(targets) => {
                    for t in targets {
                        let dst = &u.cands[t];
                        if site.kind == SiteKind::Reference {
                            let own_class = owner_def
                                .and_then(|o| f.definitions[o].parent)
                                .and_then(|p| u.def_ids[fi][p].clone());
                            if dst.id == src_id || Some(&dst.id) == own_class.as_ref() {
                                continue;
                            }
                        }
                        let kind = match site.kind {
                            SiteKind::Call => RelationKind::Call,
                            SiteKind::Reference => RelationKind::Dependency,
                        };
                        if seen.insert((src_id.clone(), dst.id.clone(), kind)) {
                            relations.push(Relation {
                                src: src_id.clone(),
                                dst: dst.id.clone(),
                                kind,
                                evidence: Location { file_path: f.path.clone(), line: site.line },
                            });
                        }
                    }
                }
                Outcome::Diagnostic(kind) if site.kind == SiteKind::Call => diagnostics.push(Diagnostic {
                    file_path: f.path.clone(),
                    line: site.line,
                    kind,
                    message: format!("call to `{}`", display_site(site, language)),
                }),
                Outcome::Diagnostic(_) => {}
            }
        }
    }

    let entities: Vec<Entity> = u.graph.entities().cloned().collect();
    let graph = CodeGraph::from_parts(language, entities, relations)?;
    Ok(Analysis { graph, diagnostics })
}

enum Outcome {
    Targets(Vec<usize>),
    Diagnostic(DiagnosticKind),
}

impl Unresolved {
    fn owner_class(&self, fi: usize, def: usize) -> Option<String> {
        let id = self.def_ids[fi][def].as_ref()?;
        let cand = self.cands.iter().find(|c| &c.id == id)?;
        cand.class.clone()
    }

    fn resolve_site(&self, fi: usize, site: &UseSite, owner_class: Option<&str>, builtins: &Builtins) -> Outcome {
        let language = self.graph.language();
        if language == Language::Cpp && site.qualifier.first().is_some_and(|q| q == "std") {
            return Outcome::Diagnostic(DiagnosticKind::Builtin);
        }
        if language == Language::Python
            && site.access == Access::Member
            && site.qualifier.len() == 1
            && self.external_modules[fi].contains(&site.qualifier[0])
            && !self.module_bindings[fi].contains_key(&site.qualifier[0])
        {
            return Outcome::Diagnostic(DiagnosticKind::External);
        }

        // Python `from m import name as alias` binds a symbol in one file.
        let (lookup_name, bound_file) = match (language, site.access) {
            (Language::Python, Access::Plain) => match self.symbol_bindings[fi].get(&site.name) {
                Some((file, orig)) => (orig.as_str(), Some(*file)),
                None => (site.name.as_str(), None),
            },
            _ => (site.name.as_str(), None),
        };
        let Some(pool) = self.by_name.get(lookup_name) else {
            return Outcome::Diagnostic(self.fallback(site, builtins, false));
        };
        let matching: Vec<usize> =
            pool.iter().copied().filter(|&c| self.site_accepts(fi, site, owner_class, &self.cands[c])).collect();

        let mut arity_failed = false;
        let scopes: [&dyn Fn(usize) -> bool; 2] = [
            &|c: usize| self.cands[c].file == fi,
            &|c: usize| {
                let file = self.cands[c].file;
                // Methods of classes from imported modules are reachable on
                // instances.
                let method_via_import = language == Language::Python
                    && site.access == Access::Member
                    && self.cands[c].class.is_some()
                    && self.imported[fi].contains(&file);
                bound_file == Some(file) || self.visible[fi].contains(&file) || method_via_import
            },
        ];
        for in_scope in scopes {
            let scoped: Vec<usize> = matching.iter().copied().filter(|&c| in_scope(c)).collect();
            if scoped.is_empty() {
                continue;
            }
            let scoped = self.narrow_to_owner(site, owner_class, scoped);
            let fitting = self.arity_fit(site, &scoped);
            if !fitting.is_empty() {
                return Outcome::Targets(fitting);
            }
            arity_failed = true;
        }
        if builtins.contains(&site.qualifier, &site.name) {
            return Outcome::Diagnostic(DiagnosticKind::Builtin);
        }
        let fitting = self.arity_fit(site, &matching);
        match fitting.len() {
            0 => Outcome::Diagnostic(self.fallback(site, builtins, arity_failed || !matching.is_empty())),
            1 => Outcome::Targets(fitting),
            _ => Outcome::Diagnostic(DiagnosticKind::Ambiguous),
        }
    }

    fn fallback(&self, site: &UseSite, builtins: &Builtins, arity_failed: bool) -> DiagnosticKind {
        if builtins.contains(&site.qualifier, &site.name) {
            DiagnosticKind::Builtin
        } else if arity_failed {
            DiagnosticKind::ArityMismatch
        } else {
            DiagnosticKind::Unresolved
        }
    }

    fn arity_fit(&self, site: &UseSite, cands: &[usize]) -> Vec<usize> {
        cands
            .iter()
            .copied()
            .filter(|&c| {
                let cand = &self.cands[c];
                match (site.kind, site.args, &cand.signature) {
                    (SiteKind::Reference, ..) | (_, None, _) | (_, _, None) => true,
                    (SiteKind::Call, Some(n), Some(sig)) => sig.accepts(n),
                }
            })
            .collect()
    }

    /// `self.m()` prefers methods of the enclosing class when any exist.
    fn narrow_to_owner(&self, site: &UseSite, owner_class: Option<&str>, cands: Vec<usize>) -> Vec<usize> {
        let is_self = site.access == Access::Member
            && site.qualifier.len() == 1
            && matches!(site.qualifier[0].as_str(), "self" | "cls" | "this");
        if !is_self {
            return cands;
        }
        let own: Vec<usize> = cands.iter().copied().filter(|&c| self.cands[c].class.as_deref() == owner_class).collect();
        if own.is_empty() {
            cands
        } else {
            own
        }
    }

    fn site_accepts(&self, fi: usize, site: &UseSite, owner_class: Option<&str>, cand: &Candidate) -> bool {
        let kind_ok = match site.kind {
            SiteKind::Call => matches!(cand.kind, EntityKind::Function | EntityKind::Method | EntityKind::Class),
            SiteKind::Reference => matches!(cand.kind, EntityKind::Class | EntityKind::GlobalVariable),
        };
        if !kind_ok {
            return false;
        }
        let prefix = &cand.segments[..cand.segments.len().saturating_sub(1)];
        match (self.graph.language(), site.access) {
            (Language::Cpp, Access::Plain) => match cand.kind {
                EntityKind::Method => owner_class.is_some() && cand.class.as_deref() == owner_class,
                _ => true,
            },
            (Language::Cpp, Access::Scoped) => {
                if site.qualifier.is_empty() {
                    prefix.is_empty()
                } else {
                    prefix.ends_with(&site.qualifier)
                }
            }
            (Language::Cpp, Access::Member) => cand.kind == EntityKind::Method,
            (Language::Python, Access::Plain) => cand.kind != EntityKind::Method && prefix.is_empty(),
            (Language::Python, _) => {
                let joined = site.qualifier.join(".");
                if let Some(&module_file) = self.module_bindings[fi].get(&joined) {
                    return cand.file == module_file && prefix.is_empty() && cand.kind != EntityKind::Method;
                }
                let last = site.qualifier.last().map(String::as_str).unwrap_or("");
                let class_named = |name: &str| prefix.last().is_some_and(|p| p == name);
                match cand.kind {
                    EntityKind::Method => true,
                    EntityKind::Class | EntityKind::GlobalVariable | EntityKind::Function => {
                        !prefix.is_empty() && class_named(last)
                    }
                    EntityKind::File => false,
                }
            }
        }
    }
}

fn display_site(site: &UseSite, language: Language) -> String {
    let sep = match site.access {
        Access::Member if language == Language::Cpp => ".",
        Access::Member => ".",
        _ => language.separator(),
    };
    if site.qualifier.is_empty() {
        site.name.clone()
    } else {
        format!("{}{sep}{}", site.qualifier.join(sep), site.name)
    }
}

fn transitive(direct: &[BTreeSet<usize>]) -> Vec<BTreeSet<usize>> {
    (0..direct.len())
        .map(|start| {
            let mut seen = BTreeSet::new();
            let mut stack: Vec<usize> = direct[start].iter().copied().collect();
            while let Some(n) = stack.pop() {
                if n != start && seen.insert(n) {
                    stack.extend(direct[n].iter().copied());
                }
            }
            seen
        })
        .collect()
}

fn parent_dir(path: &str) -> &str {
    path.rfind('/').map(|i| &path[..i]).unwrap_or("")
}

/// Joins and normalizes `base/rel`, resolving `.` and `..`.
pub(crate) fn join_path(base: &str, rel: &str) -> String {
    let mut parts: Vec<&str> = Vec::new();
    for seg in base.split('/').chain(rel.split('/')) {
        match seg {
            "" | "." => {}
            ".." => {
                parts.pop();
            }
            s => parts.push(s),
        }
    }
    parts.join("/")
}

fn module_bases(dir: &str, level: usize, include_roots: &[String]) -> Vec<String> {
    if level > 0 {
        let mut base = dir.to_string();
        for _ in 1..level {
            base = parent_dir(&base).to_string();
        }
        return vec![base];
    }
    let mut bases: Vec<String> = include_roots.to_vec();
    if !bases.iter().any(|b| b == dir) {
        bases.push(dir.to_string());
    }
    bases
}

fn find_module(index: &BTreeMap<&str, usize>, bases: &[String], module: &str) -> Option<usize> {
    let rel = module.replace('.', "/");
    bases.iter().find_map(|b| {
        let stem = join_path(b, &rel);
        let init = join_path(&stem, "__init__.py");
        (!rel.is_empty())
            .then(|| index.get(format!("{stem}.py").as_str()).copied())
            .flatten()
            .or_else(|| index.get(init.as_str()).copied())
    })
}
