use std::path::PathBuf;

use graphsynth_core::corpus::PipelineConfig;
use graphsynth_core::frontend::FrontendConfig;
use graphsynth_core::graph::Language;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn frontend(language: Language) -> FrontendConfig {
    let mut cfg = FrontendConfig::new(language);
    if language == Language::Cpp {
        cfg.include_roots = vec!["include".into(), ".".into()];
    }
    cfg
}

/// Pipeline settings for the fixture repositories.
pub fn pipeline_config(language: Language) -> PipelineConfig {
    let mut cfg = PipelineConfig::new(language);
    cfg.frontend = frontend(language);
    cfg.seed = 17;
    cfg.cpt.context_limit = 2048;
    cfg
}

pub fn repo_for(language: Language) -> PathBuf {
    match language {
        Language::Cpp => fixture("cpp_repo"),
        Language::Python => fixture("python_repo"),
    }
}
