//! The run configuration: one TOML file describing a whole bootstrap run.
//!
//! ```toml
//! seed = 7
//! architecture = "compact"
//!
//! [paths]
//! manifest = "manifest.jsonl"
//! eval_manifest = "eval.jsonl"
//! teacher = "teacher.svdm"
//! run_root = "runs"
//!
//! [bootstrap]
//! rounds = 2
//!
//! [policy]
//! kind = "agreement"
//! tolerance = 0.5
//! ```
//!
//! Every table and key is optional. Relative paths resolve against the
//! directory holding the config file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::align::SearchConfig;
use crate::features::FeatureConfig;
use crate::pipeline::{PipelineError, TargetPolicy};
use crate::svd::{Architecture, TrainerConfig, DEFAULT_MEDIAN_WIDTH};

/// Names the run-directory hash in `--version` output.
pub const CONFIG_HASH_ALGORITHM: &str = "sha256(canonical-toml)[..16]";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub manifest: String,
    /// Held-out tracks; empty skips evaluation.
    pub eval_manifest: String,
    pub teacher: String,
    /// Parent of the run directory. Not part of the run hash.
    pub run_root: String,
}

impl Default for PathsConfig {
    fn default() -> Self {
        PathsConfig {
            manifest: "manifest.jsonl".into(),
            eval_manifest: String::new(),
            teacher: "teacher.svdm".into(),
            run_root: "runs".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BootstrapConfig {
    pub rounds: usize,
    /// Binarization threshold for frame accuracy; `p >= threshold` is voiced.
    pub eval_threshold: f64,
    pub median_width: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            rounds: 1,
            eval_threshold: 0.5,
            median_width: DEFAULT_MEDIAN_WIDTH,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Student initialization seed; round `k` uses `seed + k`. The trainer's
    /// shuffle seed is offset by the round the same way.
    pub seed: u64,
    /// `"default"`, `"compact"` or a full layer descriptor.
    pub architecture: String,
    pub paths: PathsConfig,
    pub features: FeatureConfig,
    /// `hop_seconds` here is ignored and always taken from `features`.
    pub search: SearchConfig,
    pub trainer: TrainerConfig,
    pub policy: TargetPolicy,
    pub bootstrap: BootstrapConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            architecture: "default".into(),
            paths: PathsConfig::default(),
            features: FeatureConfig::default(),
            search: SearchConfig::default(),
            trainer: TrainerConfig::default(),
            policy: TargetPolicy::default(),
            bootstrap: BootstrapConfig::default(),
            base_dir: PathBuf::new(),
        }
    }
}

impl RunConfig {
    pub fn parse(text: &str, base_dir: impl Into<PathBuf>) -> Result<Self, PipelineError> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| PipelineError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.into();
        cfg.search.hop_seconds = cfg.features.hop_seconds();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, PipelineError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(crate::pipeline::io_err(path))?;
        Self::parse(&text, path.parent().map(Path::to_path_buf).unwrap_or_default())
    }

    pub fn validate(&self) -> Result<(), PipelineError> {
        let cfg_err = |m: String| PipelineError::Config(m);
        self.features.validate().map_err(|e| cfg_err(e.to_string()))?;
        self.search.validate()?;
        self.policy.validate()?;
        self.arch()?;
        if self.bootstrap.rounds == 0 {
            return Err(cfg_err("bootstrap.rounds must be at least 1".into()));
        }
        if self.bootstrap.median_width % 2 == 0 {
            return Err(cfg_err(format!("median_width {} must be odd", self.bootstrap.median_width)));
        }
        if !(0.0..=1.0).contains(&self.bootstrap.eval_threshold) {
            return Err(cfg_err("eval_threshold must lie in [0, 1]".into()));
        }
        if self.trainer.batch_size == 0 {
            return Err(cfg_err("trainer.batch_size must be positive".into()));
        }
        for (key, p) in [
            ("manifest", &self.paths.manifest),
            ("teacher", &self.paths.teacher),
        ] {
            if p.is_empty() {
                return Err(cfg_err(format!("paths.{key} is empty")));
            }
        }
        for p in [&self.paths.manifest, &self.paths.teacher, &self.paths.run_root, &self.paths.eval_manifest] {
            if p.contains('\0') {
                return Err(cfg_err(format!("{p:?} is not a valid path")));
            }
        }
        Ok(())
    }

    pub fn arch(&self) -> Result<Architecture, PipelineError> {
        let arch = match self.architecture.as_str() {
            "default" => Architecture::default(),
            "compact" => Architecture::compact(),
            text => Architecture::parse(text)?,
        };
        arch.shapes()?;
        Ok(arch)
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        self.base_dir.join(path)
    }

    /// The configuration as TOML, with `run_root` blanked.
    pub fn canonical_toml(&self) -> String {
        let mut c = self.clone();
        c.paths.run_root = String::new();
        toml::to_string(&c).expect("config serializes")
    }

    /// First 16 hex digits of the SHA-256 of [`Self::canonical_toml`].
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.canonical_toml().as_bytes());
        digest[..8].iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn run_dir(&self) -> PathBuf {
        self.resolve(&self.paths.run_root).join(self.hash())
    }
}
