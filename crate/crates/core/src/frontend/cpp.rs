use std::collections::BTreeSet;

use tree_sitter::{Node, Parser, Tree};

use super::syntax::{
    children, first_error_line, line_of, named_children, node_text, span_of, Access, Definition, Import,
    ImportTarget, ParsedFile, SiteKind, Snippet, SnippetError, SyntaxBackend, UseSite,
};
use crate::graph::{EntityKind, Language, Param, Signature};

/// gtest-style test macros; `TEST(Suite, Name)` becomes `Suite_Name_Test`.
const TEST_MACROS: &[&str] = &["TEST", "TEST_F", "TEST_P", "TYPED_TEST", "TYPED_TEST_P"];
const SNIPPET_WRAPPER: &str = "__graphsynth_snippet__";

#[derive(Clone, Copy, Debug, Default)]
pub struct CppBackend;

impl CppBackend {
    fn parse(source: &str) -> Tree {
        let mut parser = Parser::new();
        parser
            .set_language(&tree_sitter_cpp::LANGUAGE.into())
            .expect("bundled C++ grammar is compatible");
        parser.parse(source, None).expect("parser has a language")
    }
}

impl SyntaxBackend for CppBackend {
    fn language(&self) -> Language {
        Language::Cpp
    }

    fn parse_file(&self, path: &str, source: &str) -> ParsedFile {
        let tree = Self::parse(source);
        let mut w = Walker::new(source);
        w.scope(tree.root_node(), &mut Vec::new(), None);
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
        let tree = Self::parse(source);
        // The grammar accepts bare statements at file scope but the walker
        // only collects sites inside definitions, so those get wrapped too.
        let bare_statements =
            named_children(tree.root_node()).iter().any(|n| n.kind().ends_with("_statement"));
        if !tree.root_node().has_error() && !bare_statements {
            return Ok(snippet_from(source, &tree, false));
        }
        // Statements are not valid at file scope; retry inside a function.
        let wrapped = format!("void {SNIPPET_WRAPPER}() {{\n{source}\n}}\n");
        let tree = Self::parse(&wrapped);
        if let Some(line) = first_error_line(tree.root_node()) {
            return Err(SnippetError { line: line.saturating_sub(1).max(1) });
        }
        Ok(snippet_from(&wrapped, &tree, true))
    }
}

fn snippet_from(source: &str, tree: &Tree, wrapped: bool) -> Snippet {
    let mut w = Walker::new(source);
    w.scope(tree.root_node(), &mut Vec::new(), None);
    let shift = |line: u32| if wrapped { line.saturating_sub(1).max(1) } else { line };
    let wrapper = w.defs.iter().position(|d| d.short_name() == SNIPPET_WRAPPER);
    let mut defined_names = w.all_locals.clone();
    let mut definitions = Vec::new();
    for (i, d) in w.defs.iter().enumerate() {
        if Some(i) == wrapper {
            continue;
        }
        defined_names.insert(d.short_name().to_string());
        definitions.push(d.clone());
    }
    let calls = w
        .sites
        .iter()
        .filter(|s| s.kind == SiteKind::Call)
        .map(|s| UseSite { line: shift(s.line), ..s.clone() })
        .collect();
    Snippet { calls, defined_names, definitions, imports: w.imports }
}

struct Walker<'s> {
    src: &'s str,
    defs: Vec<Definition>,
    imports: Vec<Import>,
    sites: Vec<UseSite>,
    errors: Vec<(u32, String)>,
    all_locals: BTreeSet<String>,
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

    fn scope(&mut self, node: Node<'_>, ns: &mut Vec<String>, class: Option<usize>) {
        for child in named_children(node) {
            self.item(child, ns, class);
        }
    }

    fn item(&mut self, node: Node<'_>, ns: &mut Vec<String>, class: Option<usize>) {
        match node.kind() {
            "preproc_include" => self.include(node),
            "namespace_definition" => {
                let pushed = match node.child_by_field_name("name") {
                    Some(name) => {
                        let segs: Vec<String> = self.text(name).split("::").map(|s| s.trim().to_string()).collect();
                        let n = segs.len();
                        ns.extend(segs);
                        n
                    }
                    None => 0,
                };
                if let Some(body) = node.child_by_field_name("body") {
                    self.scope(body, ns, class);
                }
                ns.truncate(ns.len() - pushed);
            }
            "linkage_specification" => {
                if let Some(body) = node.child_by_field_name("body") {
                    if body.kind() == "declaration_list" {
                        self.scope(body, ns, class);
                    } else {
                        self.item(body, ns, class);
                    }
                }
            }
            "preproc_if" | "preproc_ifdef" | "preproc_else" | "preproc_elif" | "preproc_elifdef" => {
                self.scope(node, ns, class)
            }
            "template_declaration" => {
                let inner = named_children(node).into_iter().find(|c| {
                    matches!(
                        c.kind(),
                        "function_definition" | "class_specifier" | "struct_specifier" | "union_specifier" | "declaration"
                    )
                });
                match inner {
                    Some(inner) if inner.kind() == "function_definition" => self.function(node, inner, ns, class),
                    Some(inner) if inner.kind() == "declaration" => {
                        if let Some(t) = inner.child_by_field_name("type") {
                            if is_class_spec(t) {
                                self.class(node, t, ns, class);
                            }
                        }
                    }
                    Some(inner) => self.class(node, inner, ns, class),
                    None => {}
                }
            }
            "function_definition" => self.function(node, node, ns, class),
            "class_specifier" | "struct_specifier" | "union_specifier" => self.class(node, node, ns, class),
            "declaration" | "field_declaration" => {
                if let Some(t) = node.child_by_field_name("type") {
                    if is_class_spec(t) && t.child_by_field_name("body").is_some() {
                        self.class(t, t, ns, class);
                    }
                }
                if node.kind() == "declaration" && class.is_none() {
                    self.globals(node, ns);
                } else if let Some(owner) = class {
                    if let Some(v) = node.child_by_field_name("default_value") {
                        let mut locals = BTreeSet::new();
                        self.collect_sites(Some(owner), v, &mut locals);
                    }
                }
            }
            "ERROR" => {
                self.errors.push((line_of(node), "unparsed region".to_string()));
            }
            _ => {}
        }
    }

    fn include(&mut self, node: Node<'_>) {
        let Some(path) = node.child_by_field_name("path") else { return };
        let raw = self.text(path).trim();
        let (path, system) = match path.kind() {
            "system_lib_string" => (raw.trim_start_matches('<').trim_end_matches('>'), true),
            _ => (raw.trim_matches('"'), false),
        };
        self.imports.push(Import {
            line: line_of(node),
            target: ImportTarget::Include { path: path.to_string(), system },
        });
    }

    fn function(&mut self, outer: Node<'_>, node: Node<'_>, ns: &[String], class: Option<usize>) {
        if outer.has_error() {
            let line = first_error_line(outer).unwrap_or_else(|| line_of(outer));
            self.errors.push((line, "function definition does not parse".to_string()));
            return;
        }
        let Some(fdecl) = find_function_declarator(node) else { return };
        let Some(name_node) = fdecl.child_by_field_name("declarator") else { return };
        let mut segs = match name_node.kind() {
            "qualified_identifier" => self.flatten_qualified(name_node),
            "template_function" => name_node
                .child_by_field_name("name")
                .map(|n| vec![self.text(n).to_string()])
                .unwrap_or_default(),
            _ => vec![self.text(name_node).to_string()],
        };
        if segs.is_empty() {
            return;
        }
        let params = fdecl.child_by_field_name("parameters");
        let is_test_macro = class.is_none()
            && segs.len() == 1
            && node.child_by_field_name("type").is_none()
            && TEST_MACROS.contains(&segs[0].as_str());
        let signature = if is_test_macro {
            let parts: Vec<&str> = params
                .map(named_children)
                .unwrap_or_default()
                .into_iter()
                .map(|p| self.text(p).trim())
                .collect();
            segs = vec![format!("{}_Test", parts.join("_"))];
            Signature::default()
        } else {
            params.map(|p| self.signature(p)).unwrap_or_default()
        };

        let out_of_line = class.is_none() && segs.len() > 1;
        let segments = match class {
            Some(c) => {
                let mut s = self.defs[c].segments.clone();
                s.push(segs.pop().unwrap_or_default());
                s
            }
            None => ns.iter().cloned().chain(segs).collect(),
        };
        let idx = self.defs.len();
        self.defs.push(Definition {
            kind: if class.is_some() { EntityKind::Method } else { EntityKind::Function },
            segments,
            span: span_of(outer),
            signature: Some(signature.clone()),
            body_text: self.text(outer).to_string(),
            parent: class,
            out_of_line,
        });

        let mut locals: BTreeSet<String> = signature.params.iter().map(|p| p.name.clone()).collect();
        // Return and parameter types count as type references.
        if !is_test_macro {
            if let Some(t) = node.child_by_field_name("type") {
                self.collect_sites(Some(idx), t, &mut locals);
            }
            for p in params.map(named_children).unwrap_or_default() {
                for field in ["type", "default_value"] {
                    if let Some(t) = p.child_by_field_name(field) {
                        self.collect_sites(Some(idx), t, &mut locals);
                    }
                }
            }
        }
        for child in children(node) {
            match child.kind() {
                "compound_statement" | "field_initializer_list" => self.collect_sites(Some(idx), child, &mut locals),
                _ => {}
            }
        }
        self.finish_references(idx, &locals);
    }

    fn class(&mut self, outer: Node<'_>, node: Node<'_>, ns: &[String], parent: Option<usize>) {
        let Some(body) = node.child_by_field_name("body") else { return };
        let Some(name) = node.child_by_field_name("name") else { return };
        if outer.has_error() {
            let line = first_error_line(outer).unwrap_or_else(|| line_of(outer));
            self.errors.push((line, "class definition does not parse".to_string()));
            return;
        }
        let short = match name.kind() {
            "template_type" => name.child_by_field_name("name").map(|n| self.text(n).to_string()),
            "qualified_identifier" => self.flatten_qualified(name).pop(),
            _ => Some(self.text(name).to_string()),
        };
        let Some(short) = short.filter(|s| !s.is_empty()) else { return };
        let mut segments = match parent {
            Some(p) => self.defs[p].segments.clone(),
            None => ns.to_vec(),
        };
        segments.push(short);
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
        let mut ns_inner = ns.to_vec();
        self.scope(body, &mut ns_inner, Some(idx));
    }

    fn globals(&mut self, decl: Node<'_>, ns: &[String]) {
        if decl.has_error() {
            return;
        }
        let is_extern = named_children(decl)
            .iter()
            .any(|c| c.kind() == "storage_class_specifier" && self.text(*c) == "extern");
        if is_extern {
            return;
        }
        let mut cursor = decl.walk();
        let declarators: Vec<Node<'_>> = decl.children_by_field_name("declarator", &mut cursor).collect();
        for d in declarators {
            let mut cur = d;
            let mut init = None;
            loop {
                match cur.kind() {
                    "init_declarator" => {
                        init = cur.child_by_field_name("value");
                        match cur.child_by_field_name("declarator") {
                            Some(n) => cur = n,
                            None => break,
                        }
                    }
                    "pointer_declarator" | "reference_declarator" | "array_declarator" | "parenthesized_declarator" => {
                        match cur.child_by_field_name("declarator").or_else(|| named_children(cur).into_iter().last()) {
                            Some(n) => cur = n,
                            None => break,
                        }
                    }
                    _ => break,
                }
            }
            if cur.kind() != "identifier" {
                continue;
            }
            let idx = self.defs.len();
            self.defs.push(Definition {
                kind: EntityKind::GlobalVariable,
                segments: ns.iter().cloned().chain([self.text(cur).to_string()]).collect(),
                span: span_of(decl),
                signature: None,
                body_text: self.text(decl).to_string(),
                parent: None,
                out_of_line: false,
            });
            if let Some(v) = init {
                let mut locals = BTreeSet::new();
                self.collect_sites(Some(idx), v, &mut locals);
                self.finish_references(idx, &locals);
            }
        }
    }

    fn signature(&self, params: Node<'_>) -> Signature {
        let mut sig = Signature::default();
        for (i, p) in children(params).into_iter().enumerate() {
            match p.kind() {
                "..." | "variadic_parameter_declaration" => sig.variadic = true,
                "parameter_declaration" | "optional_parameter_declaration" => {
                    let name = p.child_by_field_name("declarator").and_then(|d| self.declared_name(d));
                    if name.is_none()
                        && p.kind() == "parameter_declaration"
                        && p.child_by_field_name("type").map(|t| self.text(t)) == Some("void")
                    {
                        continue;
                    }
                    let name = name.unwrap_or_else(|| format!("_{i}"));
                    sig.params.push(Param { name, has_default: p.kind() == "optional_parameter_declaration" });
                }
                _ => {}
            }
        }
        sig
    }

    fn declared_name(&self, node: Node<'_>) -> Option<String> {
        match node.kind() {
            "identifier" | "field_identifier" => Some(self.text(node).to_string()),
            _ => node
                .child_by_field_name("declarator")
                .or_else(|| named_children(node).into_iter().find(|c| c.kind() == "identifier"))
                .and_then(|d| self.declared_name(d)),
        }
    }

    fn flatten_qualified(&self, node: Node<'_>) -> Vec<String> {
        let mut out = Vec::new();
        if let Some(scope) = node.child_by_field_name("scope") {
            match scope.kind() {
                "template_type" => {
                    if let Some(n) = scope.child_by_field_name("name") {
                        out.push(self.text(n).to_string());
                    }
                }
                "qualified_identifier" => out.extend(self.flatten_qualified(scope)),
                _ => out.push(self.text(scope).to_string()),
            }
        }
        if let Some(name) = node.child_by_field_name("name") {
            match name.kind() {
                "qualified_identifier" => out.extend(self.flatten_qualified(name)),
                "template_function" | "template_type" | "template_method" => {
                    if let Some(n) = name.child_by_field_name("name") {
                        out.push(self.text(n).to_string());
                    }
                }
                _ => out.push(self.text(name).to_string()),
            }
        }
        out
    }

    fn receiver_chain(&self, node: Node<'_>) -> Vec<String> {
        match node.kind() {
            "identifier" | "field_identifier" => vec![self.text(node).to_string()],
            "this" => vec!["this".to_string()],
            "qualified_identifier" => self.flatten_qualified(node),
            "field_expression" => {
                let mut v = node.child_by_field_name("argument").map(|a| self.receiver_chain(a)).unwrap_or_default();
                if let Some(f) = node.child_by_field_name("field") {
                    v.push(self.text(f).to_string());
                }
                v
            }
            "pointer_expression" | "parenthesized_expression" => named_children(node)
                .into_iter()
                .last()
                .map(|n| self.receiver_chain(n))
                .unwrap_or_else(|| vec!["<expr>".to_string()]),
            _ => vec!["<expr>".to_string()],
        }
    }

    /// `(access, qualifier, name)` of a call's callee expression.
    fn callee(&self, func: Node<'_>) -> Option<(Access, Vec<String>, String)> {
        match func.kind() {
            "identifier" => Some((Access::Plain, Vec::new(), self.text(func).to_string())),
            "template_function" => {
                let name = func.child_by_field_name("name")?;
                Some((Access::Plain, Vec::new(), self.text(name).to_string()))
            }
            "qualified_identifier" => {
                let mut segs = self.flatten_qualified(func);
                let name = segs.pop()?;
                Some((Access::Scoped, segs, name))
            }
            "field_expression" => {
                let field = func.child_by_field_name("field")?;
                let name = match field.kind() {
                    "template_method" | "template_function" => self.text(field.child_by_field_name("name")?).to_string(),
                    "qualified_identifier" => self.flatten_qualified(field).pop()?,
                    _ => self.text(field).to_string(),
                };
                let qual = func.child_by_field_name("argument").map(|a| self.receiver_chain(a)).unwrap_or_default();
                Some((Access::Member, qual, name))
            }
            _ => None,
        }
    }

    fn collect_sites(&mut self, owner: Option<usize>, node: Node<'_>, locals: &mut BTreeSet<String>) {
        match node.kind() {
            "call_expression" => {
                let func = node.child_by_field_name("function");
                if let Some((access, qualifier, name)) = func.and_then(|f| self.callee(f)) {
                    let args = node
                        .child_by_field_name("arguments")
                        .map(|a| named_children(a).into_iter().filter(|c| c.kind() != "comment").count());
                    self.sites.push(UseSite {
                        owner,
                        kind: SiteKind::Call,
                        name,
                        qualifier,
                        access,
                        args,
                        line: line_of(node),
                    });
                    // Receivers may themselves reference globals or make calls.
                    if let Some(f) = func {
                        if f.kind() == "field_expression" {
                            if let Some(arg) = f.child_by_field_name("argument") {
                                self.collect_sites(owner, arg, locals);
                            }
                        }
                    }
                } else if let Some(f) = func {
                    self.collect_sites(owner, f, locals);
                }
                if let Some(a) = node.child_by_field_name("arguments") {
                    self.collect_sites(owner, a, locals);
                }
                return;
            }
            "identifier" | "type_identifier" => {
                self.sites.push(UseSite {
                    owner,
                    kind: SiteKind::Reference,
                    name: self.text(node).to_string(),
                    qualifier: Vec::new(),
                    access: Access::Plain,
                    args: None,
                    line: line_of(node),
                });
                return;
            }
            "qualified_identifier" => {
                let mut segs = self.flatten_qualified(node);
                if let Some(name) = segs.pop() {
                    self.sites.push(UseSite {
                        owner,
                        kind: SiteKind::Reference,
                        name,
                        qualifier: segs,
                        access: Access::Scoped,
                        args: None,
                        line: line_of(node),
                    });
                }
                return;
            }
            "field_expression" => {
                if let Some(arg) = node.child_by_field_name("argument") {
                    self.collect_sites(owner, arg, locals);
                }
                return;
            }
            "string_literal" | "raw_string_literal" | "char_literal" | "comment" | "field_identifier" => return,
            "declaration" | "parameter_declaration" | "optional_parameter_declaration" | "for_range_loop" => {
                let mut cursor = node.walk();
                let decls: Vec<Node<'_>> = node.children_by_field_name("declarator", &mut cursor).collect();
                for d in decls {
                    if let Some(n) = self.declared_name(d) {
                        locals.insert(n);
                    }
                }
            }
            _ => {}
        }
        for child in named_children(node) {
            self.collect_sites(owner, child, locals);
        }
    }

    /// Drops references to locals and parameters recorded for `owner`.
    fn finish_references(&mut self, owner: usize, locals: &BTreeSet<String>) {
        self.all_locals.extend(locals.iter().cloned());
        let mut seen = BTreeSet::new();
        self.sites.retain(|s| {
            if s.owner != Some(owner) || s.kind != SiteKind::Reference {
                return true;
            }
            if s.access == Access::Plain && locals.contains(&s.name) {
                return false;
            }
            seen.insert((s.qualifier.clone(), s.name.clone()))
        });
    }
}

fn is_class_spec(node: Node<'_>) -> bool {
    matches!(node.kind(), "class_specifier" | "struct_specifier" | "union_specifier")
}

fn find_function_declarator(node: Node<'_>) -> Option<Node<'_>> {
    let mut cur = node.child_by_field_name("declarator")?;
    loop {
        if cur.kind() == "function_declarator" {
            return Some(cur);
        }
        cur = cur
            .child_by_field_name("declarator")
            .or_else(|| named_children(cur).into_iter().find(|c| c.kind().ends_with("declarator")))?;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(src: &str) -> ParsedFile {
        CppBackend.parse_file("x.cpp", src)
    }

    fn names(p: &ParsedFile) -> Vec<(EntityKind, String)> {
        p.definitions.iter().map(|d| (d.kind, d.qualified_name(Language::Cpp))).collect()
    }

    #[test]
    fn namespaces_classes_methods_globals() {
        let p = parse(
            "#include \"a.hpp\"\n#include <vector>\nnamespace geo {\nint counter = 0;\nstruct Widget {\n  int w;\n  Widget(int x) : w(x) {}\n  int area(int h) const { return w * h; }\n  void draw();\n};\nvoid Widget::draw() { helper(1, 2); }\ntemplate <typename T> T twice(T x) { return x + x; }\n}\n",
        );
        assert_eq!(
            names(&p),
            vec![
                (EntityKind::GlobalVariable, "geo::counter".into()),
                (EntityKind::Class, "geo::Widget".into()),
                (EntityKind::Method, "geo::Widget::Widget".into()),
                (EntityKind::Method, "geo::Widget::area".into()),
                (EntityKind::Function, "geo::Widget::draw".into()),
                (EntityKind::Function, "geo::twice".into()),
            ]
        );
        assert!(p.definitions[4].out_of_line);
        assert_eq!(p.definitions[2].parent, Some(1));
        assert_eq!(
            p.imports.iter().map(|i| i.target.clone()).collect::<Vec<_>>(),
            vec![
                ImportTarget::Include { path: "a.hpp".into(), system: false },
                ImportTarget::Include { path: "vector".into(), system: true },
            ]
        );
        let twice = &p.definitions[5];
        assert_eq!(twice.span.start, 12);
        assert!(twice.body_text.starts_with("template"));
    }

    #[test]
    fn call_sites_carry_access_and_arity() {
        let p = parse("void f() { helper(1, 2); obj.run(); ns::g<int>(3); ptr->go(a, b, c); }\n");
        let calls: Vec<_> = p
            .sites
            .iter()
            .filter(|s| s.kind == SiteKind::Call)
            .map(|s| (s.access, s.qualifier.join("::"), s.name.as_str(), s.args))
            .collect();
        assert_eq!(
            calls,
            vec![
                (Access::Plain, "".into(), "helper", Some(2)),
                (Access::Member, "obj".into(), "run", Some(0)),
                (Access::Scoped, "ns".into(), "g", Some(1)),
                (Access::Member, "ptr".into(), "go", Some(3)),
            ]
        );
    }

    #[test]
    fn references_skip_locals_and_params() {
        let p = parse("int f(int n) { Widget w; int k = LIMIT + n; return k + w.size; }\n");
        let refs: Vec<_> = p
            .sites
            .iter()
            .filter(|s| s.kind == SiteKind::Reference)
            .map(|s| s.name.as_str())
            .collect();
        assert_eq!(refs, vec!["Widget", "LIMIT"]);
    }

    #[test]
    fn signature_defaults_varargs_void() {
        let p = parse("int *make(int a, int b = 2, ...) { return 0; }\nvoid none(void) {}\n");
        let make = p.definitions[0].signature.clone().unwrap();
        assert_eq!(make.param_names(), vec!["a", "b"]);
        assert_eq!(make.required(), 1);
        assert!(make.variadic);
        assert_eq!(p.definitions[1].signature.as_ref().unwrap().count(), 0);
    }

    #[test]
    fn gtest_macro_gets_a_distinct_name() {
        let p = parse("TEST(Suite, Name) { EXPECT_EQ(1, 1); }\nTEST(Suite, Other) {}\n");
        assert_eq!(
            names(&p),
            vec![(EntityKind::Function, "Suite_Name_Test".into()), (EntityKind::Function, "Suite_Other_Test".into())]
        );
    }

    #[test]
    fn broken_region_degrades() {
        let p = parse("#include \"a.hpp\"\nint ok() { return 1; }\nint bad( { return ; }\n");
        assert!(!p.errors.is_empty());
        assert_eq!(p.imports.len(), 1);
        assert!(names(&p).iter().all(|(_, n)| n != "bad"));
    }

    #[test]
    fn snippet_statements_are_wrapped() {
        let s = CppBackend.parse_snippet("int r = add(1, 2);\nw.draw(r);").unwrap();
        let calls: Vec<_> = s.calls.iter().map(|c| (c.name.as_str(), c.args, c.line)).collect();
        assert_eq!(calls, vec![("add", Some(2), 1), ("draw", Some(1), 2)]);
        assert!(s.defined_names.contains("r"));
    }

    #[test]
    fn snippet_with_definitions() {
        let s = CppBackend.parse_snippet("int helper(int x) { return twice(x); }\n").unwrap();
        assert!(s.defined_names.contains("helper"));
        assert!(s.defined_names.contains("x"));
        assert_eq!(s.calls[0].name, "twice");
    }

    #[test]
    fn unparseable_snippet_is_an_error() {
        assert!(CppBackend.parse_snippet("int x = (1 + ;").is_err());
    }
}
