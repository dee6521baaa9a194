use std::collections::BTreeSet;
use std::sync::OnceLock;

use crate::graph::Language;

const CPP: &str = include_str!("../../data/builtins_cpp.txt");
const PYTHON: &str = include_str!("../../data/builtins_python.txt");

/// Builtin allowlist for one language, loaded from the shipped data files.
#[derive(Debug)]
pub struct Builtins {
    language: Language,
    names: BTreeSet<&'static str>,
}

impl Builtins {
    pub fn for_language(language: Language) -> &'static Builtins {
        static CPP_SET: OnceLock<Builtins> = OnceLock::new();
        static PY_SET: OnceLock<Builtins> = OnceLock::new();
        match language {
            Language::Cpp => CPP_SET.get_or_init(|| Builtins::parse(Language::Cpp, CPP)),
            Language::Python => PY_SET.get_or_init(|| Builtins::parse(Language::Python, PYTHON)),
        }
    }

    fn parse(language: Language, data: &'static str) -> Builtins {
        let names = data
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        Builtins { language, names }
    }

    pub fn contains(&self, qualifier: &[String], name: &str) -> bool {
        if self.language == Language::Cpp && qualifier.first().is_some_and(|q| q == "std") {
            return true;
        }
        self.names.contains(name)
    }
}
