use std::path::PathBuf;

use graphsynth_core::frontend::{scan_repository, FrontendConfig};
use graphsynth_core::graph::{graph_stats, Language};

use crate::Outcome;

struct Target {
    name: &'static str,
    env: &'static str,
    language: Language,
    include_roots: &'static [&'static str],
    files: f64,
    avg_fld: f64,
}

const TARGETS: [Target; 2] = [
    Target {
        name: "reaction",
        env: "GRAPHSYNTH_REACTION_CHECKOUT",
        language: Language::Cpp,
        include_roots: &[".", "include", "src"],
        files: 26.0,
        avg_fld: 2.7,
    },
    Target {
        name: "LEANN",
        env: "GRAPHSYNTH_LEANN_CHECKOUT",
        language: Language::Python,
        include_roots: &[".", "packages", "src"],
        files: 14.0,
        avg_fld: 1.6,
    },
];

fn within(got: f64, want: f64, tol: f64) -> bool {
    (got - want).abs() <= want * tol
}

pub fn run() -> Outcome {
    let mut lines = Vec::new();
    let mut missing = Vec::new();
    let mut off = false;
    for t in &TARGETS {
        let Some(root) = std::env::var_os(t.env).map(PathBuf::from).filter(|p| p.is_dir()) else {
            missing.push(format!("{} checkout not available (set {} to a local clone)", t.name, t.env));
            continue;
        };
        let mut cfg = FrontendConfig::new(t.language);
        cfg.include_roots = t.include_roots.iter().map(|s| s.to_string()).collect();
        let stats = match scan_repository(&root, &cfg) {
            Ok(a) => graph_stats(&a.graph),
            Err(e) => return crate::Outcome::Fail(format!("{}: {e}", t.name)),
        };
        let files_ok = within(stats.files as f64, t.files, 0.15);
        let fld_ok = within(stats.avg_file_dependencies, t.avg_fld, 0.25);
        off |= !(files_ok && fld_ok);
        lines.push(format!(
            "{}: files {} (want {} +-15%{}), avg FLD {:.2} (want {} +-25%{})",
            t.name,
            stats.files,
            t.files,
            if files_ok { "" } else { ", OUTSIDE" },
            stats.avg_file_dependencies,
            t.avg_fld,
            if fld_ok { "" } else { ", OUTSIDE" },
        ));
    }
    if !missing.is_empty() {
        lines.extend(missing);
        return Outcome::Blocked(format!(
            "{}; the pinned checkouts are not present and source hosts are unreachable from this sandbox",
            lines.join("; ")
        ));
    }
    if off {
        Outcome::Fail(format!(
            "{}; counting differs from the reference (test, example and build-script files, header/source pairing)",
            lines.join("; ")
        ))
    } else {
        Outcome::Pass(lines.join("; "))
    }
}
