use std::sync::Arc;

use graphsynth_core::gateway::{
    Completion, Gateway, GatewayConfig, GatewayError, GenRequest, Payload, Role, Sampling, ScriptedBackend,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

fn request(k: usize) -> GenRequest {
    let sampling = Sampling { temperature: 0.7, max_attempts: k, seed: 0 };
    GenRequest::new(Role::TraceGeneration, "q", Payload::TraceGeneration { expected: "a".into() }, sampling)
}

/// Scripts `k + 3` candidates, the `accept_at`-th (1-based) carrying the
/// accepted marker, and checks the draw count and result.
fn sampling_case(k: usize, accept_at: Option<usize>) -> Result<(), String> {
    let backend = Arc::new(ScriptedBackend::new());
    for i in 1..=k + 3 {
        let content = if Some(i) == accept_at { "good" } else { "bad" };
        backend.push(Role::TraceGeneration, Ok(Completion { reasoning: format!("r{i}"), content: content.into() }));
    }
    let gw = Gateway::new(Box::new(backend.clone()), GatewayConfig { max_attempts: k, ..GatewayConfig::default() });
    let result = gw.rejection_sample(&request(k), &|c| c.content == "good").map_err(|e| e.to_string())?;
    let calls = backend.calls(Role::TraceGeneration);
    if calls > k || result.attempt_index > k {
        return Err(format!("K={k}: {calls} draws, attempt index {}", result.attempt_index));
    }
    match accept_at.filter(|&a| a <= k) {
        Some(a) if result.accepted && result.attempt_index == a && calls == a && result.reasoning_trace == format!("r{a}") => Ok(()),
        None if !result.accepted && result.attempt_index == k && calls == k => Ok(()),
        _ => Err(format!("K={k} accept_at={accept_at:?}: got {result:?} after {calls} draws")),
    }
}

fn judge_case(reply: Result<Completion, GatewayError>) -> Result<bool, String> {
    let backend = ScriptedBackend::new();
    backend.push(Role::Judge, reply);
    let gw = Gateway::new(Box::new(backend), GatewayConfig::default());
    match gw.judge_consistency("The answer is 4.", "It returns four.", 0) {
        Ok(v) if v.consistent => Ok(true),
        Ok(v) if v.failure.is_none() => Err(format!("malformed reply read as a verdict: {v:?}")),
        Ok(_) => Ok(false),
        Err(_) => Ok(false),
    }
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut cases = 0;
    for k in 1..=6 {
        for accept_at in (1..=k + 2).map(Some).chain([None]) {
            cases += 1;
            if let Err(e) = sampling_case(k, accept_at) {
                return Outcome::Fail(e);
            }
        }
    }
    for _ in 0..200 {
        let k = rng.gen_range(1..=8);
        let accept_at = rng.gen_bool(0.5).then(|| rng.gen_range(1..=k + 3));
        cases += 1;
        if let Err(e) = sampling_case(k, accept_at) {
            return Outcome::Fail(e);
        }
    }

    let malformed = [
        "",
        "looks fine to me",
        "VERDICT maybe\nRATIONALE: unsure",
        "VERDICT: probably consistent",
        "RATIONALE: same\nVERDICT: consistent",
        "{\"verdict\": \"consistent\"}",
    ];
    for reply in malformed {
        match judge_case(Ok(Completion::text(reply))) {
            Ok(false) => {}
            Ok(true) => return Outcome::Fail(format!("malformed judge reply {reply:?} accepted")),
            Err(e) => return Outcome::Fail(e),
        }
    }
    if !matches!(judge_case(Err(GatewayError::Transport("reset".into()))), Ok(false)) {
        return Outcome::Fail("judge transport error did not fail closed".into());
    }
    match judge_case(Ok(Completion::text("VERDICT: consistent\nRATIONALE: same value"))) {
        Ok(true) => {}
        other => return Outcome::Fail(format!("well-formed consistent reply not accepted: {other:?}")),
    }
    Outcome::Pass(format!(
        "{cases} scripted requests never exceeded K, all-reject gave accepted=false; {} malformed judge replies failed closed",
        malformed.len() + 1
    ))
}
