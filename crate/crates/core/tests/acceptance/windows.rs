use std::collections::BTreeSet;
use std::time::Instant;

use graphsynth_core::cpt::{enumerate_dfs_paths, generate_windows, CptConfig, PointerMode};
use graphsynth_core::graph::{DagNode, FileDag};
use graphsynth_core::tokenizer::ApproxTokenizer;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::Outcome;

type Span = (usize, usize, bool);

/// Every root-to-terminal node sequence, by trying all sequences of
/// distinct nodes.
fn brute_paths(n: usize, edges: &BTreeSet<(usize, usize)>) -> BTreeSet<Vec<usize>> {
    fn extend(seq: &mut Vec<usize>, n: usize, edges: &BTreeSet<(usize, usize)>, out: &mut BTreeSet<Vec<usize>>) {
        let last = *seq.last().unwrap();
        if !(0..n).any(|v| edges.contains(&(last, v))) {
            out.insert(seq.clone());
        }
        for v in 0..n {
            if !seq.contains(&v) && edges.contains(&(last, v)) {
                seq.push(v);
                extend(seq, n, edges, out);
                seq.pop();
            }
        }
    }
    let mut out = BTreeSet::new();
    for root in (0..n).filter(|&r| !edges.iter().any(|&(_, v)| v == r)) {
        extend(&mut vec![root], n, edges, &mut out);
    }
    out
}

fn fits(sizes: &[usize], i: usize, j: usize, limit: usize) -> bool {
    sizes[i..=j].iter().sum::<usize>() <= limit
}

/// Largest end of a fitting interval starting at `l`.
fn reach(sizes: &[usize], l: usize, limit: usize) -> Option<usize> {
    (l..sizes.len()).filter(|&e| fits(sizes, l, e, limit)).max()
}

/// Slide by one: the inclusion-maximal fitting intervals plus every
/// oversized file alone, ordered by start. The interval reaching the end of
/// the path is the tail window.
fn oracle_step_one(sizes: &[usize], limit: usize, tail: bool) -> Vec<Span> {
    let n = sizes.len();
    let feasible: Vec<(usize, usize)> =
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).filter(|&(i, j)| fits(sizes, i, j, limit)).collect();
    let mut out: Vec<Span> = feasible
        .iter()
        .filter(|&&(i, j)| !feasible.iter().any(|&(a, b)| (a, b) != (i, j) && a <= i && j <= b))
        .filter(|&&(_, j)| tail || j + 1 < n)
        .map(|&(i, j)| (i, j, false))
        .collect();
    out.extend((0..n).filter(|&i| sizes[i] > limit).map(|i| (i, i, true)));
    out.sort();
    out
}

/// Overlap by one: each window is the longest fitting run from its start;
/// the next starts on the last file of the previous one, or one further
/// when that would not move. Windows inside the last emitted one are
/// dropped.
fn oracle_overlap_one(sizes: &[usize], limit: usize, tail: bool) -> Vec<Span> {
    let n = sizes.len();
    let mut out: Vec<Span> = Vec::new();
    let mut s = 0;
    while s < n {
        let w = match reach(sizes, s, limit) {
            None => (s, s, true),
            Some(e) => (s, e, false),
        };
        let reaches_end = !w.2 && w.1 == n - 1;
        let inside_last = !w.2 && out.last().is_some_and(|p| !p.2 && p.0 <= w.0 && w.1 <= p.1);
        if (!reaches_end || tail) && !inside_last {
            out.push(w);
        }
        if reaches_end {
            break;
        }
        s = if w.2 { s + 1 } else { w.1.max(s + 1) };
    }
    out
}

struct Case {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    sizes: Vec<usize>,
    limit: usize,
}

fn random_case(rng: &mut ChaCha8Rng) -> Case {
    let n = rng.gen_range(1..=6);
    let mut order: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        order.swap(i, rng.gen_range(0..=i));
    }
    let p = rng.gen_range(0.2..0.8);
    let mut edges = BTreeSet::new();
    for a in 0..n {
        for b in a + 1..n {
            if rng.gen_bool(p) {
                edges.insert((order[a], order[b]));
            }
        }
    }
    let limit = rng.gen_range(20..=120);
    let sizes = (0..n).map(|_| rng.gen_range(1..=limit + limit / 4)).collect();
    Case { n, edges, sizes, limit }
}

fn check_case(c: &Case) -> Result<(), String> {
    let nodes: Vec<DagNode> = (0..c.n).map(|i| DagNode::file(format!("f{i}"), format!("file {i}\n"))).collect();
    let dag = FileDag::new(nodes, c.edges.iter().map(|&(u, v)| (format!("f{u}"), format!("f{v}"))));
    let key: Vec<usize> = (0..c.n).map(|i| dag.index_of(&format!("f{i}")).unwrap()).collect();
    let back = |node: usize| key.iter().position(|&k| k == node).unwrap();
    let texts: Vec<String> = (0..c.n).map(|i| dag.node(i).text()).collect();
    let sizes: Vec<usize> = (0..c.n).map(|i| c.sizes[back(i)]).collect();

    let got: BTreeSet<Vec<usize>> = enumerate_dfs_paths(&dag, 10_000)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|p| p.into_iter().map(back).collect())
        .collect();
    let want = brute_paths(c.n, &c.edges);
    if got != want {
        return Err(format!("paths differ: got {got:?}, want {want:?}"));
    }

    for mode in [PointerMode::OverlapOne, PointerMode::StepOne] {
        let mut adjacent: BTreeSet<(usize, usize)> = BTreeSet::new();
        for tail in [true, false] {
            let cfg = CptConfig { context_limit: c.limit, emit_tail_window: tail, pointer_mode: mode, ..CptConfig::default() };
            for path in &want {
                let dag_path: Vec<usize> = path.iter().map(|&v| key[v]).collect();
                let samples = generate_windows(&dag, &dag_path, &texts, &sizes, &ApproxTokenizer, &cfg);
                let path_sizes: Vec<usize> = path.iter().map(|&v| c.sizes[v]).collect();
                let expect = match mode {
                    PointerMode::OverlapOne => oracle_overlap_one(&path_sizes, c.limit, tail),
                    PointerMode::StepOne => oracle_step_one(&path_sizes, c.limit, tail),
                };
                let expect_seq: Vec<(Vec<String>, bool)> = expect
                    .iter()
                    .map(|&(i, j, t)| (path[i..=j].iter().map(|v| format!("f{v}")).collect(), t))
                    .collect();
                let got_seq: Vec<(Vec<String>, bool)> =
                    samples.iter().map(|s| (s.file_sequence.clone(), s.truncated)).collect();
                if got_seq != expect_seq {
                    return Err(format!(
                        "{mode:?} tail={tail} path {path:?} sizes {path_sizes:?} L={}: got {got_seq:?}, want {expect_seq:?}",
                        c.limit
                    ));
                }
                if tail {
                    for s in &samples {
                        for w in s.file_sequence.windows(2) {
                            let u: usize = w[0][1..].parse().unwrap();
                            let v: usize = w[1][1..].parse().unwrap();
                            adjacent.insert((u, v));
                        }
                    }
                }
            }
        }
        for &(u, v) in &c.edges {
            if c.sizes[u] + c.sizes[v] <= c.limit && !adjacent.contains(&(u, v)) {
                return Err(format!("{mode:?}: edge f{u}->f{v} fits but is never adjacent"));
            }
        }
    }
    Ok(())
}

pub fn run() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let cases = 600;
    let mut paths = 0;
    for i in 0..cases {
        let c = random_case(&mut rng);
        paths += brute_paths(c.n, &c.edges).len();
        if let Err(e) = check_case(&c) {
            return Outcome::Fail(format!("case {i}: {e}"));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    if secs >= 60.0 {
        return Outcome::Fail(format!("{cases} cases took {secs:.1}s"));
    }
    Outcome::Pass(format!("{cases} random DAGs, {paths} paths, both pointer modes, adjacency verified"))
}
