//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero when a criterion whose inputs are present fails.

mod common;
mod context_completeness;
mod determinism;
mod graph_truth;
mod metrics;
mod rejection;
mod repair_loop;
mod repo_stats;
mod rule_filter;
mod windows;

use std::time::Instant;

/// `Blocked` marks a criterion whose external inputs are absent. It is
/// reported as FAIL and does not fail the run.
pub enum Outcome {
    Pass(String),
    Fail(String),
    Blocked(String),
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("window planner equals brute-force oracle", windows::run),
        ("fixture graphs equal hand-enumerated truth", graph_truth::run),
        ("repository statistics on public checkouts", repo_stats::run),
        ("stage-1 rule filter classifies crafted answers", rule_filter::run),
        ("compilation@k and pass@k exactness", metrics::run),
        ("compile-and-repair loop", repair_loop::run),
        ("end-to-end determinism and conservation", determinism::run),
        ("rejection-sampling contract", rejection::run),
        ("context completeness of accepted samples", context_completeness::run),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let t = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        let secs = t.elapsed().as_secs_f64();
        match outcome {
            Outcome::Pass(d) => println!("PASS criterion {}: {name} ({secs:.1}s) {d}", i + 1),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL criterion {}: {name} ({secs:.1}s) {d}", i + 1);
            }
            Outcome::Blocked(d) => println!("FAIL criterion {}: {name} ({secs:.1}s) blocked, not counted: {d}", i + 1),
        }
    }
    if failed > 0 {
        println!("{failed} criterion(s) failed");
        std::process::exit(1);
    }
}
