//! Reasoning-trace synthesis by rejection sampling against a ground truth.

use std::cell::RefCell;

use crate::context::ContextBundle;
use crate::gateway::{Completion, Gateway, GatewayError, GenRequest, Payload, Role, TraceResult};
use crate::verdict::{FilterVerdict, Reason, Stage};

/// Result of one trace request: the accepted trace, or the verdict that
/// rejected the last candidate.
#[derive(Clone, Debug)]
pub struct TraceOutcome {
    pub result: TraceResult,
    pub verdict: FilterVerdict,
}

/// Draws reasoning-mode candidates for `instruction` given `context` until
/// `check` passes one. `check` returns the verdict for a candidate; the
/// verdict of the returned candidate is kept.
pub fn generate_trace(
    gateway: &Gateway,
    sample_id: &str,
    instruction: &str,
    context: &ContextBundle,
    ground_truth: &str,
    seed: u64,
    check: &dyn Fn(&Completion) -> FilterVerdict,
) -> Result<TraceOutcome, GatewayError> {
    if context.is_empty() {
        return Err(GatewayError::Precondition("trace generation needs a non-empty context".into()));
    }
    let payload = Payload::TraceGeneration { expected: ground_truth.to_string() };
    let req = GenRequest::new(Role::TraceGeneration, instruction, payload, gateway.sampling(seed)).with_context(context.clone());
    let last: RefCell<Option<FilterVerdict>> = RefCell::new(None);
    let result = gateway.rejection_sample(&req, &|c| {
        let v = if c.reasoning.trim().is_empty() || c.content.trim().is_empty() {
            FilterVerdict::fail(sample_id, Stage::Trace, Reason::Rejected, "empty reasoning trace or response")
        } else {
            check(c)
        };
        let pass = v.pass;
        *last.borrow_mut() = Some(v);
        pass
    })?;
    let verdict = last
        .into_inner()
        .unwrap_or_else(|| FilterVerdict::fail(sample_id, Stage::Trace, Reason::Rejected, "no candidate drawn"));
    Ok(TraceOutcome { result, verdict })
}

/// Check that asks the judge whether a candidate agrees with `ground_truth`.
pub fn judge_check<'a>(
    gateway: &'a Gateway,
    sample_id: &'a str,
    ground_truth: &'a str,
    seed: u64,
) -> impl Fn(&Completion) -> FilterVerdict + 'a {
    move |c| match gateway.judge_consistency(ground_truth, &c.content, seed) {
        Ok(v) if v.consistent => FilterVerdict::pass(sample_id, Stage::Trace),
        Ok(v) => match v.failure {
            Some(f) => FilterVerdict::fail(sample_id, Stage::Trace, Reason::JudgeFailure, f),
            None => FilterVerdict::fail(sample_id, Stage::Trace, Reason::Inconsistent, v.rationale),
        },
        Err(e) => FilterVerdict::fail(sample_id, Stage::Trace, Reason::GatewayFailure, e.to_string()),
    }
}
