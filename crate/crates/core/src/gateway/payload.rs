//! Structured companion of each prompt.
//!
//! Every request carries the data its prompt was rendered from. Offline
//! backends read it instead of the prose; the HTTP backend never sends it.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::graph::Language;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Payload {
    Paraphrase {
        statement: String,
        names: Vec<String>,
        count: usize,
    },
    NegativeNaturalize {
        statement: String,
        fabricated: String,
    },
    TaskDesign {
        language: Language,
        format: TaskFormat,
        difficulty: usize,
        apis: Vec<ApiBrief>,
    },
    TraceGeneration {
        /// Answer key for offline backends.
        expected: String,
    },
    Decompose {
        language: Language,
        test_name: String,
        /// File-level include/import lines of the test's file.
        preamble: Vec<String>,
        body: String,
    },
    Repair {
        language: Language,
        code: String,
        diagnostic: String,
        /// Symbol name to the repository header or module that defines it.
        known_headers: BTreeMap<String, String>,
    },
    Judge {
        reference: String,
        candidate: String,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TaskFormat {
    QuestionAnswer,
    FillInBlank,
    Programming,
}

impl TaskFormat {
    pub const ALL: [TaskFormat; 3] = [TaskFormat::QuestionAnswer, TaskFormat::FillInBlank, TaskFormat::Programming];

    pub fn as_str(self) -> &'static str {
        match self {
            TaskFormat::QuestionAnswer => "question_answer",
            TaskFormat::FillInBlank => "fill_in_blank",
            TaskFormat::Programming => "programming",
        }
    }

    pub fn has_code(self) -> bool {
        self != TaskFormat::QuestionAnswer
    }
}

impl std::str::FromStr for TaskFormat {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "qa" | "question_answer" => Ok(TaskFormat::QuestionAnswer),
            "blank" | "fill_in_blank" => Ok(TaskFormat::FillInBlank),
            "prog" | "programming" => Ok(TaskFormat::Programming),
            other => Err(format!("unknown task format `{other}`")),
        }
    }
}

/// What a task designer needs to know about one API.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiBrief {
    pub id: String,
    /// Qualified name as written in the graph.
    pub name: String,
    pub short_name: String,
    /// Enclosing class for methods.
    pub class: Option<String>,
    pub params: Vec<String>,
    pub required: usize,
    pub file: String,
}
