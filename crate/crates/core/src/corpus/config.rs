use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::TestMatcher;
use crate::cpt::CptConfig;
use crate::digest::json_digest;
use crate::frontend::FrontendConfig;
use crate::gateway::{GatewayConfig, TaskFormat};
use crate::graph::Language;
use crate::relation::RelationConfig;
use crate::sandbox::SandboxConfig;
use crate::utilization::DEFAULT_MAX_REPAIRS;

pub const CONFIG_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("config does not parse: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CompositionConfig {
    pub formats: Vec<TaskFormat>,
    pub difficulty_min: usize,
    pub difficulty_max: usize,
    pub test_matcher: TestMatcher,
}

impl Default for CompositionConfig {
    fn default() -> Self {
        CompositionConfig {
            formats: TaskFormat::ALL.to_vec(),
            difficulty_min: 1,
            difficulty_max: 4,
            test_matcher: TestMatcher::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct UtilizationConfig {
    pub enabled: bool,
    pub max_repairs: usize,
}

impl Default for UtilizationConfig {
    fn default() -> Self {
        UtilizationConfig { enabled: true, max_repairs: DEFAULT_MAX_REPAIRS }
    }
}

/// Optional caps on accepted records per kind.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Targets {
    pub relation: Option<usize>,
    pub composition: Option<usize>,
    pub utilization: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub version: u32,
    #[serde(default)]
    pub seed: u64,
    pub frontend: FrontendConfig,
    #[serde(default)]
    pub cpt: CptConfig,
    /// Line-delimited general-domain text records for CPT mixing.
    #[serde(default)]
    pub cpt_general_data: Option<PathBuf>,
    #[serde(default)]
    pub relation: RelationConfig,
    #[serde(default)]
    pub composition: CompositionConfig,
    #[serde(default)]
    pub utilization: UtilizationConfig,
    #[serde(default)]
    pub gateway: GatewayConfig,
    #[serde(default)]
    pub sandbox: SandboxConfig,
    #[serde(default)]
    pub sft_general_mix_ratio: f64,
    #[serde(default)]
    pub sft_general_data: Option<PathBuf>,
    #[serde(default)]
    pub targets: Targets,
}

impl PipelineConfig {
    pub fn new(language: Language) -> Self {
        PipelineConfig {
            version: CONFIG_VERSION,
            seed: 0,
            frontend: FrontendConfig::new(language),
            cpt: CptConfig::default(),
            cpt_general_data: None,
            relation: RelationConfig::default(),
            composition: CompositionConfig::default(),
            utilization: UtilizationConfig::default(),
            gateway: GatewayConfig::default(),
            sandbox: SandboxConfig::default(),
            sft_general_mix_ratio: 0.0,
            sft_general_data: None,
            targets: Targets::default(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read { path: path.to_path_buf(), source })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).unwrap_or_default()
    }

    /// Checks every section; run before any stage.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.version != CONFIG_VERSION {
            return bad(format!("version {} unsupported, expected {CONFIG_VERSION}", self.version));
        }
        self.frontend.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.cpt.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.gateway.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..1.0).contains(&self.sft_general_mix_ratio) {
            return bad(format!("sft_general_mix_ratio {} outside [0, 1)", self.sft_general_mix_ratio));
        }
        let c = &self.composition;
        if c.difficulty_min == 0 || c.difficulty_min > c.difficulty_max {
            return bad(format!("difficulty range {}..={} is empty or starts at 0", c.difficulty_min, c.difficulty_max));
        }
        c.test_matcher.compile().map_err(|e| ConfigError::Invalid(format!("test matcher: {e}")))?;
        if self.sandbox.wall_time_secs == 0 || self.sandbox.output_cap_bytes == 0 {
            return bad("sandbox limits must be positive".into());
        }
        Ok(())
    }

    /// Digest of the whole configuration.
    pub fn digest(&self) -> String {
        json_digest(self)
    }
}
