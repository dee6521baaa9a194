//! Versioned prompt texts. Their digest goes into every sample's metadata.

use std::sync::OnceLock;

use crate::digest::sha256_parts;

pub const PROMPT_VERSION: &str = "1";

pub const TASK_DESIGN_PRINCIPLES: &str = "\
You design examination tasks about one specific codebase.
Principles:
1. Scope: tasks concern applications, design and code analysis of this codebase only. No generic programming trivia.
2. Output a problem statement, a reference answer and explicit grading criteria.
3. Each grading criterion is one scoring point aligned with exactly one knowledge unit, named by its entity id.
4. The number of scoring points equals the requested difficulty.
5. Reference code calls codebase APIs with their declared namespace or receiver and argument count.
Reply with JSON: {\"statement\": str, \"reference_answer\": str, \"grading_criteria\": [{\"point\": str, \"entity\": str}]}.";

pub const PARAPHRASE_PROMPT: &str = "Write {n} paraphrases of the statement below. Keep the names {names} verbatim.\nStatement: {statement}";

pub const NEGATIVE_PROMPT: &str =
    "Rewrite this statement about the codebase so it reads naturally; keep `{fabricated}` verbatim.\nStatement: {statement}";

pub const RELATION_INSTRUCTION: &str =
    "Decide whether the following statement about the codebase is true, and explain why: {statement}";

pub const DECOMPOSE_PROMPT: &str = "\
Split the test `{test}` into (1) a function holding the setup and API calls, returning the values the assertions check, \
and (2) the assertion statements calling that function. Also write a one-line comment describing the function.
Example:
  test: q = Query('t'); n = q.count(); assert n == 3
  functional_code: def run_count():\\n    q = Query('t')\\n    n = q.count()\\n    return n
  assertions: n = run_count()\\nassert n == 3
Test:
{body}";

pub const REPAIR_PROMPT: &str = "The code below fails to build:\n{diagnostic}\nCode:\n{code}";

/// Digest of every prompt text above.
pub fn prompt_version_hash() -> &'static str {
    static HASH: OnceLock<String> = OnceLock::new();
    HASH.get_or_init(|| {
        sha256_parts([
            PROMPT_VERSION,
            TASK_DESIGN_PRINCIPLES,
            PARAPHRASE_PROMPT,
            NEGATIVE_PROMPT,
            RELATION_INSTRUCTION,
            DECOMPOSE_PROMPT,
            REPAIR_PROMPT,
        ])[..16]
            .to_string()
    })
}

/// Fills `{key}` placeholders.
pub fn fill(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_string();
    for (k, v) in vars {
        out = out.replace(&format!("{{{k}}}"), v);
    }
    out
}
