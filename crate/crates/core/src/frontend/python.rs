use std::collections::BTreeSet;

use tree_sitter::{Node, Parser, Tree};

use super::syntax::{
    first_error_line, line_of, named_children, node_text, span_of, Access, Definition, Import, ImportTarget,
    ImportedName, ParsedFile, SiteKind, Snippet, SnippetError, SyntaxBackend, UseSite,
};
use crate::graph::{EntityKind, Language, Param, Signature};

#[derive(Clone, Copy, Debug, Default)]
pub struct PythonBackend;

impl PythonBackend {
    fn parse(source: &str) -> Tree {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_python::LANGUAGE.into())
            .expect("bundled Python grammar is compatible");
        parser.parse(source, None).expect("parser has a language")
    }
}

impl SyntaxBackend for PythonBackend {
    fn language(&self) -> Language {
        Language::Python
    }

    fn parse_file(&self, path: &str, source: &str) -> ParsedFile {
        let tree = Self::parse(source);
        let mut w = Walker::new(source);
        w.block(tree.root_node(), None, true);
        w.collect_imports(tree.root_node());
        ParsedFile {
            path: path.to_string(),
            source: source.to_string(),
            definitions: w.defs,
            imports: w.imports,
            sites: w.sites,
            errors: w.errors,
        }
    }

    fn parse_snippet(&self, source: &str) -> Result<Snippet, SnippetError> {
        let mut text = source.to_string();
        let mut tree = Self::parse(&text);
        if tree.root_node().has_error() {
            text = dedent(source);
            tree = Self::parse(&text);
        }
        if let Some(line) = first_error_line(tree.root_node()) {
            return Err(SnippetError { line });
        }
        let mut w = Walker::new(&text);
        w.block(tree.root_node(), None, true);
        w.collect_imports(tree.root_node());
        let mut defined_names = w.all_locals.clone();
        defined_names.extend(w.defs.iter().map(|d| d.short_name().to_string()));
        let calls = w.sites.iter().filter(|s| s.kind == SiteKind::Call).cloned().collect();
        Ok(Snippet { calls, defined_names, definitions: w.defs, imports: w.imports })
    }
}

fn dedent(source: &str) -> String {
    let indent = source
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    source
        .lines()
        .map(|l| if l.len() >= indent { &l[indent..] } else { l.trim_start() })
        .collect::<Vec<_>>()
        .join("\n")
}

struct Walker<'s> {
    src: &'s str,
    defs: Vec<Definition>,
    imports: Vec<Import>,
    sites: Vec<UseSite>,
    errors: Vec<(u32, String)>,
    all_locals: BTreeSet<String>,
}

#[derive(Default)]
struct Locals {
    names: BTreeSet<String>,
    declared_global: BTreeSet<String>,
}

impl<'s> Walker<'s> {
    fn new(src: &'s str) -> Self {
        Walker {
            src,
            defs: Vec::new(),
            imports: Vec::new(),
            sites: Vec::new(),
            errors: Vec::new(),
            all_locals: BTreeSet::new(),
        }
    }

    fn text(&self, node: Node<'_>) -> &'s str {
        node_text(node, self.src)
    }

    /// Statements of a module or class body. `module_level` is true outside
    /// classes; assignments there define globals.
    fn block(&mut self, node: Node<'_>, class: Option<usize>, module_level: bool) {
        for child in named_children(node) {
            match child.kind() {
                "function_definition" => self.function(child, child, class),
                "class_definition" => self.class(child, child, class),
                "decorated_definition" => {
                    if let Some(def) = child.child_by_field_name("definition") {
                        match def.kind() {
                            "function_definition" => self.function(child, def, class),
                            "class_definition" => self.class(child, def, class),
                            _ => {}
                        }
                    }
                }
                "expression_statement" if module_level => self.module_statement(child),
                "import_statement" | "import_from_statement" | "comment" | "pass_statement" => {}
                "if_statement" | "try_statement" | "with_statement" | "for_statement" | "while_statement"
                | "block" | "else_clause" | "elif_clause" | "except_clause" | "finally_clause" => {
                    self.block(child, class, module_level)
                }
                "ERROR" => self.errors.push((line_of(child), "unparsed region".to_string())),
                _ => {
                    let mut locals = Locals::default();
                    self.collect_sites(class, child, &mut locals);
                }
            }
        }
    }

    fn module_statement(&mut self, stmt: Node<'_>) {
        let assignment = named_children(stmt).into_iter().find(|c| c.kind() == "assignment");
        let Some(assign) = assignment else {
            let mut locals = Locals::default();
            self.collect_sites(None, stmt, &mut locals);
            return;
        };
        let mut targets = Vec::new();
        if let Some(left) = assign.child_by_field_name("left") {
            self.target_names(left, &mut targets);
        }
        let first = self.defs.len();
        for name in targets {
            self.defs.push(Definition {
                kind: EntityKind::GlobalVariable,
                segments: vec![name],
                span: span_of(stmt),
                signature: None,
                body_text: self.text(stmt).to_string(),
                parent: None,
                out_of_line: false,
            });
        }
        let owner = (self.defs.len() > first).then_some(first);
        if let Some(right) = assign.child_by_field_name("right") {
            let mut locals = Locals::default();
            self.collect_sites(owner, right, &mut locals);
            if let Some(o) = owner {
                self.finish_references(o, &locals);
            }
        }
    }

    fn target_names(&self, node: Node<'_>, out: &mut Vec<String>) {
        match node.kind() {
            "identifier" => out.push(self.text(node).to_string()),
            "pattern_list" | "tuple_pattern" | "list_pattern" | "list_splat_pattern" | "parenthesized_expression" => {
                for c in named_children(node) {
                    self.target_names(c, out);
                }
            }
            _ => {}
        }
    }

    fn function(&mut self, outer: Node<'_>, node: Node<'_>, class: Option<usize>) {
        if outer.has_error() {
            let line = first_error_line(outer).unwrap_or_else(|| line_of(outer));
            self.errors.push((line, "function definition does not parse".to_string()));
            return;
        }
        let Some(name) = node.child_by_field_name("name") else { return };
        let is_static = outer.kind() == "decorated_definition"
            && named_children(outer)
                .iter()
                .any(|d| d.kind() == "decorator" && self.text(*d).contains("staticmethod"));
        let mut signature = node.child_by_field_name("parameters").map(|p| self.signature(p)).unwrap_or_default();
        let mut locals = Locals::default();
        locals.names.extend(signature.params.iter().map(|p| p.name.clone()));
        if class.is_some()
            && !is_static
            && signature.params.first().is_some_and(|p| p.name == "self" || p.name == "cls")
        {
            signature.params.remove(0);
        }
        let mut segments = class.map(|c| self.defs[c].segments.clone()).unwrap_or_default();
        segments.push(self.text(name).to_string());
        let idx = self.defs.len();
        self.defs.push(Definition {
            kind: if class.is_some() { EntityKind::Method } else { EntityKind::Function },
            segments,
            span: span_of(outer),
            signature: Some(signature),
            body_text: self.text(outer).to_string(),
            parent: class,
            out_of_line: false,
        });
        if let Some(body) = node.child_by_field_name("body") {
            self.collect_sites(Some(idx), body, &mut locals);
        }
        self.finish_references(idx, &locals);
    }

    fn class(&mut self, outer: Node<'_>, node: Node<'_>, parent: Option<usize>) {
        if outer.has_error() {
            let line = first_error_line(outer).unwrap_or_else(|| line_of(outer));
            self.errors.push((line, "class definition does not parse".to_string()));
            return;
        }
        let Some(name) = node.child_by_field_name("name") else { return };
        let mut segments = parent.map(|c| self.defs[c].segments.clone()).unwrap_or_default();
        segments.push(self.text(name).to_string());
        let idx = self.defs.len();
        self.defs.push(Definition {
            kind: EntityKind::Class,
            segments,
            span: span_of(outer),
            signature: None,
            body_text: self.text(outer).to_string(),
            parent,
            out_of_line: false,
        });
        if let Some(body) = node.child_by_field_name("body") {
            self.block(body, Some(idx), false);
        }
    }

    fn signature(&self, params: Node<'_>) -> Signature {
        let mut sig = Signature::default();
        for p in named_children(params) {
            match p.kind() {
                "identifier" => sig.params.push(Param::required(self.text(p))),
                "typed_parameter" => {
                    let inner = named_children(p).into_iter().next();
                    match inner {
                        Some(i) if i.kind() == "identifier" => sig.params.push(Param::required(self.text(i))),
                        _ => sig.variadic = true,
                    }
                }
                "default_parameter" | "typed_default_parameter" => {
                    if let Some(n) = p.child_by_field_name("name") {
                        sig.params.push(Param::optional(self.text(n)));
                    }
                }
                "list_splat_pattern" | "dictionary_splat_pattern" => sig.variadic = true,
                _ => {}
            }
        }
        sig
    }

    fn receiver_chain(&self, node: Node<'_>) -> Vec<String> {
        match node.kind() {
            "identifier" => vec![self.text(node).to_string()],
            "attribute" => {
                let mut v = node.child_by_field_name("object").map(|o| self.receiver_chain(o)).unwrap_or_default();
                if let Some(a) = node.child_by_field_name("attribute") {
                    v.push(self.text(a).to_string());
                }
                v
            }
            _ => vec!["<expr>".to_string()],
        }
    }

    fn collect_sites(&mut self, owner: Option<usize>, node: Node<'_>, locals: &mut Locals) {
        match node.kind() {
            "call" => {
                let func = node.child_by_field_name("function");
                let args = node.child_by_field_name("arguments");
                let count = args.and_then(|a| match a.kind() {
                    "generator_expression" => Some(1),
                    _ => {
                        let items: Vec<_> = named_children(a).into_iter().filter(|c| c.kind() != "comment").collect();
                        let unpacked = items.iter().any(|c| matches!(c.kind(), "list_splat" | "dictionary_splat"));
                        (!unpacked).then_some(items.len())
                    }
                });
                let callee = func.and_then(|f| match f.kind() {
                    "identifier" => Some((Access::Plain, Vec::new(), self.text(f).to_string())),
                    "attribute" => {
                        let name = self.text(f.child_by_field_name("attribute")?).to_string();
                        let qual = f.child_by_field_name("object").map(|o| self.receiver_chain(o)).unwrap_or_default();
                        Some((Access::Member, qual, name))
                    }
                    _ => None,
                });
                match (callee, func) {
                    (Some((access, qualifier, name)), Some(f)) => {
                        self.sites.push(UseSite {
                            owner,
                            kind: SiteKind::Call,
                            name,
                            qualifier,
                            access,
                            args: count,
                            line: line_of(node),
                        });
                        if let Some(obj) = f.child_by_field_name("object") {
                            self.collect_sites(owner, obj, locals);
                        }
                    }
                    (_, Some(f)) => self.collect_sites(owner, f, locals),
                    _ => {}
                }
                if let Some(a) = args {
                    self.collect_sites(owner, a, locals);
                }
                return;
            }
            "identifier" => {
                self.push_reference(owner, Vec::new(), self.text(node).to_string(), Access::Plain, node);
                return;
            }
            "attribute" => {
                if let (Some(obj), Some(attr)) = (node.child_by_field_name("object"), node.child_by_field_name("attribute")) {
                    let chain = self.receiver_chain(obj);
                    if !chain.iter().any(|s| s == "<expr>") {
                        self.push_reference(owner, chain, self.text(attr).to_string(), Access::Member, node);
                    }
                    self.collect_sites(owner, obj, locals);
                }
                return;
            }
            "keyword_argument" => {
                if let Some(v) = node.child_by_field_name("value") {
                    self.collect_sites(owner, v, locals);
                }
                return;
            }
            "assignment" | "augmented_assignment" => {
                if let Some(left) = node.child_by_field_name("left") {
                    let mut names = Vec::new();
                    self.target_names(left, &mut names);
                    if node.kind() == "assignment" {
                        locals.names.extend(names);
                    }
                    if !matches!(left.kind(), "identifier" | "pattern_list" | "tuple_pattern") {
                        self.collect_sites(owner, left, locals);
                    }
                }
                if let Some(right) = node.child_by_field_name("right") {
                    self.collect_sites(owner, right, locals);
                }
                return;
            }
            "for_statement" | "for_in_clause" => {
                if let Some(left) = node.child_by_field_name("left") {
                    let mut names = Vec::new();
                    self.target_names(left, &mut names);
                    locals.names.extend(names);
                }
                for c in named_children(node) {
                    if Some(c) != node.child_by_field_name("left") {
                        self.collect_sites(owner, c, locals);
                    }
                }
                return;
            }
            "as_pattern" => {
                if let Some(alias) = node.child_by_field_name("alias") {
                    let mut names = Vec::new();
                    for c in named_children(alias).into_iter().chain([alias]) {
                        self.target_names(c, &mut names);
                    }
                    locals.names.extend(names);
                }
                if let Some(first) = named_children(node).into_iter().next() {
                    self.collect_sites(owner, first, locals);
                }
                return;
            }
            "function_definition" | "class_definition" => {
                if let Some(n) = node.child_by_field_name("name") {
                    locals.names.insert(self.text(n).to_string());
                }
                if let Some(p) = node.child_by_field_name("parameters") {
                    locals.names.extend(self.signature(p).params.into_iter().map(|p| p.name));
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.collect_sites(owner, b, locals);
                }
                return;
            }
            "lambda" => {
                if let Some(p) = node.child_by_field_name("parameters") {
                    locals.names.extend(self.signature(p).params.into_iter().map(|p| p.name));
                }
                if let Some(b) = node.child_by_field_name("body") {
                    self.collect_sites(owner, b, locals);
                }
                return;
            }
            "global_statement" | "nonlocal_statement" => {
                for c in named_children(node) {
                    locals.declared_global.insert(self.text(c).to_string());
                }
                return;
            }
            "import_statement" | "import_from_statement" => {
                for c in named_children(node) {
                    let bound = match c.kind() {
                        "aliased_import" => c.child_by_field_name("alias"),
                        "dotted_name" => named_children(c).into_iter().next(),
                        _ => None,
                    };
                    if let Some(b) = bound {
                        locals.names.insert(self.text(b).to_string());
                    }
                }
                return;
            }
            "string" => {
                for c in named_children(node) {
                    if c.kind() == "interpolation" {
                        self.collect_sites(owner, c, locals);
                    }
                }
                return;
            }
            "comment" => return,
            _ => {}
        }
        for child in named_children(node) {
            self.collect_sites(owner, child, locals);
        }
    }

    fn push_reference(&mut self, owner: Option<usize>, qualifier: Vec<String>, name: String, access: Access, node: Node<'_>) {
        self.sites.push(UseSite { owner, kind: SiteKind::Reference, name, qualifier, access, args: None, line: line_of(node) });
    }

    fn finish_references(&mut self, owner: usize, locals: &Locals) {
        self.all_locals.extend(locals.names.iter().cloned());
        let shadowed: BTreeSet<&String> = locals.names.difference(&locals.declared_global).collect();
        let mut seen = BTreeSet::new();
        self.sites.retain(|s| {
            if s.owner != Some(owner) || s.kind != SiteKind::Reference {
                return true;
            }
            let head = s.qualifier.first().unwrap_or(&s.name);
            if shadowed.contains(head) && (s.access == Access::Plain || head == "self" || head == "cls") {
                return false;
            }
            seen.insert((s.qualifier.clone(), s.name.clone()))
        });
    }

    fn collect_imports(&mut self, node: Node<'_>) {
        match node.kind() {
            "import_statement" => {
                let mut cursor = node.walk();
                let names: Vec<Node<'_>> = node.children_by_field_name("name", &mut cursor).collect();
                for n in names {
                    let (module, alias) = match n.kind() {
                        "aliased_import" => (
                            n.child_by_field_name("name").map(|m| self.text(m).to_string()).unwrap_or_default(),
                            n.child_by_field_name("alias").map(|a| self.text(a).to_string()),
                        ),
                        _ => (self.text(n).to_string(), None),
                    };
                    self.imports.push(Import {
                        line: line_of(node),
                        target: ImportTarget::Module { module, level: 0, names: Vec::new(), alias },
                    });
                }
            }
            "import_from_statement" => {
                let (module, level) = match node.child_by_field_name("module_name") {
                    Some(m) if m.kind() == "relative_import" => {
                        let text = self.text(m);
                        let level = text.chars().take_while(|c| *c == '.').count();
                        (text[level..].to_string(), level)
                    }
                    Some(m) => (self.text(m).to_string(), 0),
                    None => (String::new(), 0),
                };
                let mut cursor = node.walk();
                let name_nodes: Vec<Node<'_>> = node.children_by_field_name("name", &mut cursor).collect();
                let mut names: Vec<ImportedName> = name_nodes
                    .into_iter()
                    .map(|n| match n.kind() {
                        "aliased_import" => ImportedName {
                            name: n.child_by_field_name("name").map(|m| self.text(m).to_string()).unwrap_or_default(),
                            alias: n.child_by_field_name("alias").map(|a| self.text(a).to_string()),
                        },
                        _ => ImportedName { name: self.text(n).to_string(), alias: None },
                    })
                    .collect();
                if named_children(node).iter().any(|c| c.kind() == "wildcard_import") {
                    names.push(ImportedName { name: "*".to_string(), alias: None });
                }
                self.imports.push(Import {
                    line: line_of(node),
                    target: ImportTarget::Module { module, level, names, alias: None },
                });
            }
            _ => {
                for c in named_children(node) {
                    self.collect_imports(c);
                }
            }
        }
    }
}
