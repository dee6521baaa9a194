use graphsynth_core::sandbox::{compilation_at_k, pass_at_k, ExecOutcome};
use num_rational::Ratio;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

/// Attempts per task: `x` does not compile, `c` compiles and fails its
/// tests, `p` passes.
const TABLE: [&str; 12] = ["ppp", "xpp", "xxp", "xxx", "ccc", "cpx", "xcc", "cxp", "xxc", "pxx", "ccp", "xpc"];

/// Counted by hand from the table above.
const COMPILE: [(u64, u64); 3] = [(6, 12), (9, 12), (11, 12)];
const PASS: [(u64, u64); 3] = [(2, 12), (5, 12), (8, 12)];

fn outcome(task: usize, attempt: usize, c: char) -> ExecOutcome {
    ExecOutcome {
        task_id: format!("task-{task:02}"),
        attempt_index: attempt,
        compiled: c != 'x',
        tests_passed: c == 'p',
        stderr_digest: String::new(),
        wall_time: 0.0,
        failure: None,
        diagnostic: String::new(),
    }
}

fn table(rows: &[String], rng: &mut ChaCha8Rng) -> Vec<ExecOutcome> {
    let mut out: Vec<ExecOutcome> = rows
        .iter()
        .enumerate()
        .flat_map(|(t, row)| row.chars().enumerate().map(move |(a, c)| outcome(t, a + 1, c)))
        .collect();
    out.shuffle(rng);
    out
}

pub fn run() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let rows: Vec<String> = TABLE.iter().map(|s| s.to_string()).collect();
    let outcomes = table(&rows, &mut rng);
    for k in 1..=3 {
        let c = compilation_at_k(&outcomes, k).unwrap();
        let p = pass_at_k(&outcomes, k).unwrap();
        let (cn, cd) = COMPILE[k - 1];
        let (pn, pd) = PASS[k - 1];
        if c.exact != Ratio::new(cn, cd) || p.exact != Ratio::new(pn, pd) {
            return Outcome::Fail(format!(
                "k={k}: compilation {} (want {}), pass {} (want {})",
                c.exact,
                Ratio::new(cn, cd),
                p.exact,
                Ratio::new(pn, pd)
            ));
        }
    }

    for trial in 0..1000 {
        let tasks = rng.gen_range(1..=20);
        let attempts = rng.gen_range(3..=5);
        let rows: Vec<String> = (0..tasks)
            .map(|_| (0..attempts).map(|_| *['x', 'c', 'p'].choose(&mut rng).unwrap()).collect())
            .collect();
        let outcomes = table(&rows, &mut rng);
        let mut prev = (Ratio::new(0u64, 1), Ratio::new(0u64, 1));
        for k in 1..=attempts {
            let c = compilation_at_k(&outcomes, k).unwrap().exact;
            let p = pass_at_k(&outcomes, k).unwrap().exact;
            if p > c || c < prev.0 || p < prev.1 {
                return Outcome::Fail(format!("random table {trial} k={k}: compilation {c}, pass {p}, previous {prev:?}"));
            }
            prev = (c, p);
        }
    }
    Outcome::Pass("12x3 table matches hand rationals for k=1..3; 1000 random tables monotone with pass <= compile".into())
}
