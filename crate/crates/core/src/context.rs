use serde::{Deserialize, Serialize};

use crate::graph::ClosureEntry;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKind {
    FileContents,
    EntityNameList,
    DependencyClosureCode,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextItem {
    pub label: String,
    pub text: String,
}

/// Evidence handed to the generator alongside an instruction.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContextBundle {
    pub kind: ContextKind,
    pub items: Vec<ContextItem>,
}

impl ContextBundle {
    pub fn new(kind: ContextKind) -> Self {
        ContextBundle { kind, items: Vec::new() }
    }

    pub fn push(&mut self, label: impl Into<String>, text: impl Into<String>) {
        self.items.push(ContextItem { label: label.into(), text: text.into() });
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    /// Implementation text, file location and namespace of every closure
    /// member.
    pub fn from_closure(entries: &[ClosureEntry<'_>]) -> Self {
        let mut b = ContextBundle::new(ContextKind::DependencyClosureCode);
        for e in entries {
            b.push(e.label(), e.entity.body_text.clone());
        }
        b
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for item in &self.items {
            out.push_str("### ");
            out.push_str(&item.label);
            out.push('\n');
            out.push_str(&item.text);
            if !item.text.ends_with('\n') {
                out.push('\n');
            }
        }
        out
    }

    /// All item texts joined, used when re-resolving names against a bundle.
    pub fn code(&self) -> String {
        self.items.iter().map(|i| i.text.as_str()).collect::<Vec<_>>().join("\n")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn render_labels_each_item() {
        let mut b = ContextBundle::new(ContextKind::FileContents);
        b.push("a.hpp", "int g();");
        b.push("b.cpp", "int f() { return g(); }\n");
        assert_eq!(b.render(), "### a.hpp\nint g();\n### b.cpp\nint f() { return g(); }\n");
        assert_eq!(b.len(), 2);
    }
}
