//! One TOML file drives every stage of a run: generation, windowing,
//! training, calibration, and evaluation all read the same `RunConfig`, and
//! every random decision descends from its single `seed`.
//!
//! All tuning sections have defaults; only `[paths]` must be spelled out,
//! because it names where artifacts land on the user's disk. Unknown keys
//! are rejected so typos cannot silently fall back to defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classifier::train::TrainConfig;
use crate::error::{Error, Result};
use crate::evaluation::EvalConfig;
use crate::preprocess::PreprocessConfig;
use crate::signalgen::GeneratorConfig;

/// How many records each dataset region contains.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    /// Records generated per catalog anomaly class.
    pub records_per_class: usize,
    /// Fully nominal records.
    pub nominal_records: usize,
    /// Records of the held-out class written to `data_dir/held_out`,
    /// never used for training — the unknown-anomaly probe. Zero disables.
    pub held_out_records: usize,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig { records_per_class: 64, nominal_records: 64, held_out_records: 10 }
    }
}

impl DatasetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.records_per_class == 0 {
            return Err(Error::config("records_per_class must be at least 1"));
        }
        Ok(())
    }
}

/// Conformal prediction settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConformalConfig {
    /// Acceptable miscoverage: sets are built to contain the true class
    /// with probability at least `1 - alpha`.
    pub alpha: f64,
}

impl Default for ConformalConfig {
    fn default() -> Self {
        ConformalConfig { alpha: 0.01 }
    }
}

impl ConformalConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::config(format!("alpha must be in (0, 1), got {}", self.alpha)));
        }
        Ok(())
    }
}

/// Where a run reads and writes. Relative paths are interpreted against
/// the directory containing the config file (see [`RunConfig::resolve_paths`]).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PathsConfig {
    /// Dataset directory: record CSVs plus `manifest.json`.
    pub data_dir: PathBuf,
    /// Trained model JSON. The training log CSV is written next to it.
    pub model_path: PathBuf,
    /// Calibration JSON.
    pub calib_path: PathBuf,
    /// Report artifacts directory.
    pub report_dir: PathBuf,
}

/// The complete, self-contained description of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Master seed. Every stage derives its own stream from it, so one
    /// number pins down the entire run. (The `[train]` section's `seed`
    /// field is overridden from this when running through the pipeline.)
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub generator: GeneratorConfig,
    #[serde(default)]
    pub dataset: DatasetConfig,
    #[serde(default)]
    pub preprocess: PreprocessConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub conformal: ConformalConfig,
    #[serde(default)]
    pub evaluation: EvalConfig,
    pub paths: PathsConfig,
}

fn default_seed() -> u64 {
    42
}

impl RunConfig {
    /// A full default configuration with the conventional layout rooted at
    /// `root`: `data/`, `artifacts/model.json`, `artifacts/calibration.json`,
    /// `report/`.
    pub fn with_standard_layout(root: &Path) -> RunConfig {
        RunConfig {
            seed: default_seed(),
            generator: GeneratorConfig::default(),
            dataset: DatasetConfig::default(),
            preprocess: PreprocessConfig::default(),
            train: TrainConfig::default(),
            conformal: ConformalConfig::default(),
            evaluation: EvalConfig::default(),
            paths: PathsConfig {
                data_dir: root.join("data"),
                model_path: root.join("artifacts/model.json"),
                calib_path: root.join("artifacts/calibration.json"),
                report_dir: root.join("report"),
            },
        }
    }

    /// Parses and validates a TOML document.
    pub fn from_toml_str(body: &str) -> Result<RunConfig> {
        let config: RunConfig = toml::from_str(body).map_err(|e| Error::config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    /// Reads, parses, and validates a config file. Paths are left exactly
    /// as written; call [`resolve_paths`](Self::resolve_paths) to anchor
    /// relative ones.
    pub fn load(path: &Path) -> Result<RunConfig> {
        let body = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        RunConfig::from_toml_str(&body)
            .map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(format!("cannot serialize config: {e}")))
    }

    /// Rewrites each relative path to live under `base` (typically the
    /// config file's directory). Absolute paths are untouched.
    pub fn resolve_paths(&mut self, base: &Path) {
        for p in [
            &mut self.paths.data_dir,
            &mut self.paths.model_path,
            &mut self.paths.calib_path,
            &mut self.paths.report_dir,
        ] {
            if p.is_relative() {
                *p = base.join(&p);
            }
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        self.dataset.validate()?;
        self.preprocess.validate()?;
        self.train.validate()?;
        self.conformal.validate()?;
        self.evaluation.validate()?;
        for (name, p) in [
            ("data_dir", &self.paths.data_dir),
            ("model_path", &self.paths.model_path),
            ("calib_path", &self.paths.calib_path),
            ("report_dir", &self.paths.report_dir),
        ] {
            if p.as_os_str().is_empty() {
                return Err(Error::config(format!("paths.{name} must not be empty")));
            }
        }
        Ok(())
    }
}
