use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Paraphrase,
    Negative,
    TaskDesign,
    RuleStage1,
    Trace,
    ConsistencyStage2,
    Decompose,
    Repair,
    Execution,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Paraphrase => "paraphrase",
            Stage::Negative => "negative",
            Stage::TaskDesign => "task_design",
            Stage::RuleStage1 => "rule_stage1",
            Stage::Trace => "trace",
            Stage::ConsistencyStage2 => "consistency_stage2",
            Stage::Decompose => "decompose",
            Stage::Repair => "repair",
            Stage::Execution => "execution",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Reason {
    Ok,
    UnknownEntity,
    ArityMismatch,
    PrefixMismatch,
    ParseFailure,
    Inconsistent,
    JudgeFailure,
    GatewayFailure,
    Rejected,
    NoApiInvocation,
    NoAssertion,
    CompileError,
    AssertionFailed,
    Timeout,
    ToolchainMissing,
    NameNotPreserved,
    InsufficientApis,
}

impl fmt::Display for Reason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

/// Outcome of one filter on one sample. Serialized as one verdict-log line.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FilterVerdict {
    pub sample_id: String,
    pub stage: Stage,
    pub pass: bool,
    pub reason: Reason,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub detail: String,
}

impl FilterVerdict {
    pub fn pass(sample_id: impl Into<String>, stage: Stage) -> Self {
        FilterVerdict { sample_id: sample_id.into(), stage, pass: true, reason: Reason::Ok, detail: String::new() }
    }

    pub fn fail(sample_id: impl Into<String>, stage: Stage, reason: Reason, detail: impl Into<String>) -> Self {
        FilterVerdict { sample_id: sample_id.into(), stage, pass: false, reason, detail: detail.into() }
    }

    pub fn with_id(mut self, sample_id: impl Into<String>) -> Self {
        self.sample_id = sample_id.into();
        self
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn serializes_as_log_line() {
        let v = FilterVerdict::fail("s1", Stage::RuleStage1, Reason::ArityMismatch, "add expects 2, got 1");
        let line = serde_json::to_string(&v).unwrap();
        assert_eq!(
            line,
            r#"{"sample_id":"s1","stage":"rule_stage1","pass":false,"reason":"arity_mismatch","detail":"add expects 2, got 1"}"#
        );
        assert_eq!(Reason::ArityMismatch.to_string(), "arity_mismatch");
    }
}
