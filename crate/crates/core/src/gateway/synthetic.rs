//! Deterministic stand-in for the generation models.
//!
//! Replies are pure functions of the request payload, so pipeline runs are
//! reproducible offline. The replies are plausible rather than clever: trace
//! generation echoes the answer key, decomposition splits a test at its
//! assertions, repair adds includes or imports for undeclared names.

use std::collections::BTreeSet;

use serde_json::json;

use super::payload::{ApiBrief, Payload, TaskFormat};
use super::{Backend, Completion, GatewayError, WireRequest};
use crate::graph::Language;
use crate::utilization::is_assertion;

#[derive(Clone, Copy, Debug, Default)]
pub struct SyntheticBackend;

impl Backend for SyntheticBackend {
    fn complete(&self, wire: &WireRequest) -> Result<Completion, GatewayError> {
        let reply = match &wire.payload {
            Payload::Paraphrase { statement, count, .. } => Completion::text(paraphrase(statement, *count, wire.seed)),
            Payload::NegativeNaturalize { statement, .. } => Completion::text(statement.clone()),
            Payload::TaskDesign { language, format, difficulty, apis } => {
                Completion::text(design_task(*language, *format, *difficulty, apis).to_string())
            }
            Payload::TraceGeneration { expected } => {
                let items = wire.messages.iter().map(|m| m.content.matches("\n### ").count()).sum::<usize>()
                    + wire.messages.iter().filter(|m| m.content.starts_with("Context:\n### ")).count();
                let reasoning = format!(
                    "The context holds {items} relevant item(s). I check each name the question mentions against \
                     them, follow the calls between them, and state the answer they support."
                );
                Completion { reasoning, content: expected.clone() }
            }
            Payload::Decompose { language, test_name, preamble, body } => {
                Completion::text(decompose(*language, test_name, preamble, body).to_string())
            }
            Payload::Repair { language, code, diagnostic, known_headers } => {
                let missing = undeclared_names(diagnostic);
                let mut additions = Vec::new();
                for name in &missing {
                    if let Some(target) = known_headers.get(name) {
                        let line = match language {
                            Language::Cpp => format!("#include \"{target}\""),
                            Language::Python => format!("from {target} import {name}"),
                        };
                        if !code.contains(&line) && !additions.contains(&line) {
                            additions.push(line);
                        }
                    }
                }
                let reply = if additions.is_empty() {
                    json!({ "code": code, "summary": "no applicable fix" })
                } else {
                    let patched = format!("{}\n{code}", additions.join("\n"));
                    json!({ "code": patched, "summary": format!("added {}", additions.join("; ")) })
                };
                Completion::text(reply.to_string())
            }
            Payload::Judge { reference, candidate } => {
                let (r, c) = (squash(reference), squash(candidate));
                let same_polarity = first_word(&r).is_some() && first_word(&r) == first_word(&c);
                if r == c || c.contains(&r) || same_polarity {
                    Completion::text("VERDICT: consistent\nRATIONALE: the candidate states the same result")
                } else {
                    Completion::text("VERDICT: inconsistent\nRATIONALE: the candidate differs from the reference")
                }
            }
        };
        Ok(reply)
    }
}

fn squash(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

fn first_word(s: &str) -> Option<&str> {
    let w = s.split(|c: char| !c.is_alphanumeric()).next()?;
    matches!(w, "Yes" | "No").then_some(w)
}

const PARAPHRASES: [&str; 8] = [
    "{s}.",
    "In this codebase, {s}.",
    "It holds that {s}.",
    "Looking at the source, {s}.",
    "One relation in the repository: {s}.",
    "Note that {s}.",
    "As implemented, {s}.",
    "The code shows that {s}.",
];

fn paraphrase(statement: &str, count: usize, seed: u64) -> String {
    let start = (seed % PARAPHRASES.len() as u64) as usize;
    (0..count)
        .map(|i| {
            let t = PARAPHRASES[(start + i) % PARAPHRASES.len()];
            format!("{}. {}", i + 1, t.replace("{s}", statement))
        })
        .collect::<Vec<_>>()
        .join("\n")
}

fn receiver_name(class: &str) -> String {
    let short = class.rsplit(['.', ':']).next().unwrap_or(class);
    let mut out = String::new();
    for (i, ch) in short.chars().enumerate() {
        if ch.is_uppercase() && i > 0 {
            out.push('_');
        }
        out.extend(ch.to_lowercase());
    }
    if out.is_empty() {
        "obj".into()
    } else {
        out
    }
}

/// A call expression using `api` as the codebase declares it.
pub(crate) fn call_expression(language: Language, api: &ApiBrief) -> String {
    let args = api.params[..api.required.min(api.params.len())].join(", ");
    match (&api.class, language) {
        (Some(class), _) => format!("{}.{}({args})", receiver_name(class), api.short_name),
        (None, Language::Cpp) => format!("{}({args})", api.name),
        (None, Language::Python) => format!("{}({args})", api.short_name),
    }
}

fn design_task(language: Language, format: TaskFormat, difficulty: usize, apis: &[ApiBrief]) -> serde_json::Value {
    let chosen: Vec<&ApiBrief> = apis.iter().take(difficulty).collect();
    let names: Vec<String> = chosen.iter().map(|a| format!("`{}`", a.name)).collect();
    let calls: Vec<String> = chosen.iter().map(|a| call_expression(language, a)).collect();
    let criteria: Vec<serde_json::Value> = chosen
        .iter()
        .map(|a| json!({ "point": format!("uses `{}` with {} argument(s)", a.name, a.required), "entity": a.id }))
        .collect();
    let (stmt_end, indent) = match language {
        Language::Cpp => (";", "    "),
        Language::Python => ("", "    "),
    };
    let wrap = |lines: &[String]| -> String {
        let body: Vec<String> = lines.iter().map(|l| format!("{indent}{l}")).collect();
        match language {
            Language::Cpp => format!("void solution() {{\n{}\n}}\n", body.join("\n")),
            Language::Python => format!("def solution():\n{}\n", body.join("\n")),
        }
    };
    let lines: Vec<String> = calls.iter().map(|c| format!("{c}{stmt_end}")).collect();
    let (statement, reference) = match format {
        TaskFormat::QuestionAnswer => {
            let answer = chosen
                .iter()
                .map(|a| format!("`{}` (defined in {}) takes {} argument(s)", a.name, a.file, a.params.len()))
                .collect::<Vec<_>>()
                .join("; ");
            (
                format!("Explain what each of {} does and how a caller combines them.", names.join(", ")),
                format!("{answer}. A caller invokes them in the order listed."),
            )
        }
        TaskFormat::FillInBlank => {
            let mut skeleton = lines.clone();
            if let Some(first) = skeleton.first_mut() {
                *first = "____".into();
            }
            (
                format!("Fill in the blank so the code uses {}:\n{}", names.join(", "), wrap(&skeleton)),
                lines.first().cloned().unwrap_or_default(),
            )
        }
        TaskFormat::Programming => {
            (format!("Write a function `solution` that exercises {} from the codebase.", names.join(", ")), wrap(&lines))
        }
    };
    json!({ "statement": statement, "reference_answer": reference, "grading_criteria": criteria })
}

fn is_ident(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_alphanumeric() || c == '_') && !s.starts_with(|c: char| c.is_ascii_digit())
}

fn declared_names(language: Language, line: &str) -> Vec<String> {
    let l = line.trim();
    match language {
        Language::Cpp => {
            let cut = l.find(['=', '{', '(', ';']).unwrap_or(l.len());
            let head = &l[..cut];
            let tokens: Vec<&str> = head.split_whitespace().collect();
            if tokens.len() < 2 || matches!(tokens[0], "return" | "delete" | "throw" | "if" | "for" | "while") {
                return Vec::new();
            }
            let name = tokens[tokens.len() - 1].trim_start_matches(['&', '*']);
            if is_ident(name) {
                vec![name.to_string()]
            } else {
                Vec::new()
            }
        }
        Language::Python => {
            let Some(eq) = l.find('=') else { return Vec::new() };
            if l[eq..].starts_with("==") || l[..eq].ends_with(['!', '<', '>', '+', '-', '*', '/']) {
                return Vec::new();
            }
            let names: Vec<String> = l[..eq].split(',').map(|s| s.trim().to_string()).collect();
            if names.iter().all(|n| is_ident(n)) {
                names
            } else {
                Vec::new()
            }
        }
    }
}

fn identifiers(line: &str) -> BTreeSet<&str> {
    line.split(|c: char| !(c.is_alphanumeric() || c == '_')).filter(|s| is_ident(s)).collect()
}

fn body_lines(language: Language, body: &str) -> Vec<String> {
    let inner: Vec<&str> = match language {
        Language::Cpp => {
            let (Some(open), Some(close)) = (body.find('{'), body.rfind('}')) else { return Vec::new() };
            if close <= open {
                return Vec::new();
            }
            body[open + 1..close].lines().collect()
        }
        Language::Python => {
            let lines: Vec<&str> = body.lines().collect();
            let Some(def) = lines.iter().position(|l| l.trim_start().starts_with("def ")) else { return Vec::new() };
            let Some(colon) = lines[def..].iter().position(|l| l.trim_end().ends_with(':')) else { return Vec::new() };
            lines[def + colon + 1..].to_vec()
        }
    };
    let indent = inner
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.len() - l.trim_start().len())
        .min()
        .unwrap_or(0);
    inner
        .iter()
        .filter(|l| !l.trim().is_empty())
        .map(|l| l.get(indent..).unwrap_or(l.trim_start()).trim_end().to_string())
        .filter(|l| {
            let t = l.trim_start();
            !(t.starts_with("//") || t.starts_with('#') || t == "pass" || t == "docstring")
        })
        .collect()
}

fn function_name(test_name: &str) -> String {
    let short = test_name.rsplit(['.', ':']).next().unwrap_or(test_name);
    let core = short.strip_prefix("test_").or_else(|| short.strip_prefix("test")).unwrap_or(short);
    let core = core.trim_start_matches('_');
    if core.is_empty() {
        "run_case".into()
    } else {
        format!("run_{core}")
    }
}

fn decompose(language: Language, test_name: &str, preamble: &[String], body: &str) -> serde_json::Value {
    let lines = body_lines(language, body);
    let (asserts, setup): (Vec<String>, Vec<String>) = lines.into_iter().partition(|l| is_assertion(language, l));
    let assert_idents: BTreeSet<&str> = asserts.iter().flat_map(|l| identifiers(l)).collect();
    let mut returned: Vec<String> = Vec::new();
    for l in &setup {
        for name in declared_names(language, l) {
            if assert_idents.contains(name.as_str()) && !returned.contains(&name) {
                returned.push(name);
            }
        }
    }
    let func = function_name(test_name);
    let mut pre: Vec<String> = preamble.to_vec();
    let (code, call) = match language {
        Language::Cpp => {
            let ret = match returned.len() {
                0 => String::new(),
                1 => format!("    return {};\n", returned[0]),
                _ => {
                    if !pre.iter().any(|p| p.contains("<tuple>")) {
                        pre.push("#include <tuple>".into());
                    }
                    format!("    return std::make_tuple({});\n", returned.join(", "))
                }
            };
            let body: String = setup.iter().map(|l| format!("    {l}\n")).collect();
            let sig = if returned.is_empty() { format!("void {func}()") } else { format!("auto {func}()") };
            let call = match returned.len() {
                0 => format!("{func}();"),
                1 => format!("auto {} = {func}();", returned[0]),
                _ => format!("auto [{}] = {func}();", returned.join(", ")),
            };
            (format!("{}\n\n{sig} {{\n{body}{ret}}}\n", pre.join("\n")), call)
        }
        Language::Python => {
            let mut body: String = setup.iter().map(|l| format!("    {l}\n")).collect();
            if !returned.is_empty() {
                body.push_str(&format!("    return {}\n", returned.join(", ")));
            } else if body.is_empty() {
                body.push_str("    pass\n");
            }
            let call =
                if returned.is_empty() { format!("{func}()") } else { format!("{} = {func}()", returned.join(", ")) };
            (format!("{}\n\n\ndef {func}():\n{body}", pre.join("\n")), call)
        }
    };
    let assertions = std::iter::once(call).chain(asserts).collect::<Vec<_>>().join("\n");
    let what = if returned.is_empty() { "nothing".to_string() } else { returned.join(", ") };
    let instruction = format!("Implement `{func}`: perform the setup exercised by `{test_name}` and return {what}.");
    json!({ "functional_code": code.trim_start().to_string(), "assertions": assertions, "instruction": instruction })
}

/// Names a compiler or interpreter reports as undeclared.
pub(crate) fn undeclared_names(diagnostic: &str) -> BTreeSet<String> {
    let markers = [
        "was not declared",
        "has not been declared",
        "undeclared identifier",
        "is not defined",
        "does not name a type",
        "unknown type name",
        "cannot import name",
    ];
    let mut out = BTreeSet::new();
    for line in diagnostic.lines() {
        if !markers.iter().any(|m| line.contains(m)) {
            continue;
        }
        for quoted in quoted_spans(line) {
            let name = quoted.rsplit("::").next().unwrap_or(&quoted).to_string();
            if is_ident(&name) {
                out.insert(name);
            }
            if let Some(first) = quoted.split("::").next() {
                if is_ident(first) {
                    out.insert(first.to_string());
                }
            }
        }
    }
    out
}

fn quoted_spans(line: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut cur: Option<String> = None;
    for ch in line.chars() {
        match (ch, cur.as_mut()) {
            ('\'' | '\u{2018}' | '\u{2019}' | '"', None) => cur = Some(String::new()),
            ('\'' | '\u{2018}' | '\u{2019}' | '"', Some(s)) => {
                out.push(std::mem::take(s));
                cur = None;
            }
            (c, Some(s)) => s.push(c),
            _ => {}
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn paraphrases_keep_statement() {
        let out = paraphrase("function foo calls function bar", 5, 0);
        let lines: Vec<&str> = out.lines().collect();
        assert_eq!(lines.len(), 5);
        assert!(lines.iter().all(|l| l.contains("foo") && l.contains("bar")));
        assert!(lines[0].starts_with("1. "));
    }

    #[test]
    fn decompose_cpp_test() {
        let body = "void test_area() {\n    geo::Rect r{2, 3};\n    int a = geo::area(r);\n    assert(a == 6);\n    assert(a > 0);\n}\n";
        let v = decompose(Language::Cpp, "test_area", &["#include <cassert>".into()], body);
        let code = v["functional_code"].as_str().unwrap();
        assert!(code.starts_with("#include <cassert>"));
        assert!(code.contains("auto run_area() {\n    geo::Rect r{2, 3};\n    int a = geo::area(r);\n    return a;\n}"));
        assert_eq!(v["assertions"], "auto a = run_area();\nassert(a == 6);\nassert(a > 0);");
    }

    #[test]
    fn decompose_python_test_with_two_results() {
        let body = "def test_pair():\n    q = Query('t')\n    n = q.count()\n    m = q.limit(2).count()\n    assert n == 3\n    assert m == 2\n";
        let v = decompose(Language::Python, "test_pair", &["from db import Query".into()], body);
        let code = v["functional_code"].as_str().unwrap();
        assert!(code.contains("def run_pair():\n    q = Query('t')"));
        assert!(code.contains("    return n, m\n"));
        assert_eq!(v["assertions"], "n, m = run_pair()\nassert n == 3\nassert m == 2");
    }

    #[test]
    fn undeclared_names_from_diagnostics() {
        let gcc = "main.cpp:3:5: error: \u{2018}Counter\u{2019} was not declared in this scope";
        assert!(undeclared_names(gcc).contains("Counter"));
        let clang = "main.cpp:3:5: error: use of undeclared identifier 'geo'";
        assert!(undeclared_names(clang).contains("geo"));
        let py = "NameError: name 'area' is not defined";
        assert!(undeclared_names(py).contains("area"));
    }

    #[test]
    fn receiver_names() {
        assert_eq!(receiver_name("geo::ShapeList"), "shape_list");
        assert_eq!(receiver_name("Widget"), "widget");
    }
}
