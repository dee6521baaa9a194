use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_graphsynth"));
    c.env_remove("RUST_BACKTRACE");
    c
}

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../core/tests/fixtures").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn build_python_graph(dir: &Path) -> PathBuf {
    let graph = dir.join("graph.jsonl");
    ok(&["graph", "build", "--lang", "python", "--root", s(&fixture("python_repo")), "--out", s(&graph)]);
    graph
}

#[test]
fn graph_build_and_stats() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_python_graph(dir.path());
    let out = ok(&["graph", "stats", "--in", s(&graph), "--json"]);
    let v: serde_json::Value = serde_json::from_str(out.trim()).unwrap();
    assert_eq!(v["files"], 9);
    let text = ok(&["graph", "stats", "--in", s(&graph)]);
    assert!(text.contains("Number of Files"));
}

#[test]
fn cpt_corpus_validates() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_python_graph(dir.path());
    let cpt = dir.path().join("cpt.jsonl");
    ok(&["cpt", "generate", "--graph", s(&graph), "--limit", "512", "--mode", "step_one", "--out", s(&cpt)]);
    assert!(ok(&["corpus", "validate", "--in", s(&cpt)]).contains("ok"));
}

#[test]
fn validate_rejects_tampered_corpus() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_python_graph(dir.path());
    let cpt = dir.path().join("cpt.jsonl");
    ok(&["cpt", "generate", "--graph", s(&graph), "--out", s(&cpt)]);
    let text = std::fs::read_to_string(&cpt).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.push("{\"not\": \"a sample\"}");
    std::fs::write(&cpt, lines.join("\n") + "\n").unwrap();
    let out = run(&["corpus", "validate", "--in", s(&cpt)]);
    assert!(!out.status.success());
}

#[test]
fn sft_composition_then_rule_filter() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_python_graph(dir.path());
    let sft = dir.path().join("comp.jsonl");
    let out = ok(&[
        "sft", "composition", "--graph", s(&graph), "--formats", "qa,prog", "--difficulty", "1..3", "--seed", "5", "--out",
        s(&sft),
    ]);
    assert!(out.contains("composition.rule_stage1"));
    assert!(dir.path().join("comp.verdicts.jsonl").is_file());
    ok(&["corpus", "validate", "--in", s(&sft)]);
    ok(&["filter", "rules", "--graph", s(&graph), "--in", s(&sft)]);
}

#[test]
fn sft_relation_respects_seed() {
    let dir = tempfile::tempdir().unwrap();
    let graph = build_python_graph(dir.path());
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for out in [&a, &b] {
        ok(&["sft", "relation", "--graph", s(&graph), "--n1", "2", "--n2", "1", "--seed", "9", "--out", s(out)]);
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn bad_arguments_fail() {
    assert!(!run(&["cpt", "generate", "--graph", "x", "--mode", "sideways", "--out", "y"]).status.success());
    assert!(!run(&["graph", "stats", "--in", "/nonexistent/graph.jsonl"]).status.success());
}

#[test]
fn eval_reports_rates() {
    let dir = tempfile::tempdir().unwrap();
    let task = dir.path().join("tasks/double");
    std::fs::create_dir_all(&task).unwrap();
    std::fs::write(task.join("task.toml"), "language = \"python\"\ndescription = \"Twice x.\"\n").unwrap();
    std::fs::write(task.join("reference.py"), "def double(x):\n    return 2 * x\n").unwrap();
    std::fs::write(task.join("tests.py"), "assert double(3) == 6\n").unwrap();
    let attempts = dir.path().join("attempts.jsonl");
    std::fs::write(
        &attempts,
        "{\"task_id\":\"double\",\"attempt_index\":1,\"code\":\"def double(x):\\n    return x\\n\"}\n",
    )
    .unwrap();
    let has_python = Command::new("python3").arg("--version").output().is_ok_and(|o| o.status.success());
    if !has_python {
        return;
    }
    let out = ok(&["eval", "run", "--tasks", s(&dir.path().join("tasks")), "--attempts", s(&attempts), "--k", "1"]);
    let last: serde_json::Value = serde_json::from_str(out.lines().last().unwrap()).unwrap();
    assert_eq!(last["pass@1"]["value"], 0.0);
    assert_eq!(last["compilation@1"]["value"], 1.0);
}

#[test]
fn pipeline_writes_report() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = ok(&["pipeline", "--repo", s(&fixture("python_repo")), "--lang", "python", "--out-dir", s(&out_dir)]);
    let report: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(report["entities"], 28);
    for f in ["graph.jsonl", "cpt.jsonl", "sft.jsonl", "verdicts.jsonl", "report.json"] {
        assert!(out_dir.join(f).is_file(), "{f} missing");
    }
}

#[test]
fn config_file_is_honoured() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.toml");
    std::fs::write(&cfg, "version = 1\nseed = 42\n[frontend]\nlanguage = \"python\"\n").unwrap();
    let out = ok(&["--config", s(&cfg), "corpus", "config"]);
    assert!(out.contains("seed = 42"));
    std::fs::write(&cfg, "version = 7\n[frontend]\nlanguage = \"python\"\n").unwrap();
    assert!(!run(&["--config", s(&cfg), "corpus", "config"]).status.success());
}
