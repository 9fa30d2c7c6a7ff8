//! TOML experiment configuration. Every table is optional; command-line
//! flags override whatever the file sets.
//!
//! ```toml
//! seed = 11
//! out_dir = "runs/loso"
//! dataset = "data/manifest.json"   # or a [synthetic] table, not both
//!
//! [window]
//! lengths_s = [3.0]
//! overlap = 0.75
//! padding = "zero"
//!
//! [labels]
//! kind = "tri"
//! n = 3
//!
//! [model]
//! architecture = "dual-stream"
//!
//! [train]
//! epochs = 20
//!
//! [folds]
//! kind = "lsso"
//! folds = 6
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use pbd_core::dataio::SynthSpec;
use pbd_core::eval::{ExperimentSpec, FoldScheme, WindowConfig};
use pbd_core::{AugmentSpec, Dataset, LabelScheme, ModelConfig, TrainConfig};
use serde::Deserialize;

use crate::CliError;

#[derive(Clone, Debug, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    /// Dataset manifest; relative paths resolve against the config file.
    pub dataset: Option<PathBuf>,
    /// Generate the dataset in memory instead of loading one.
    pub synthetic: Option<SynthSpec>,
    pub window: WindowConfig,
    pub augment: AugmentSpec,
    pub labels: LabelScheme,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub folds: FoldScheme,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg: ExperimentConfig =
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(d) = cfg.dataset.as_mut() {
            if d.is_relative() {
                *d = base.join(&*d);
            }
        }
        if let Some(o) = cfg.out_dir.as_mut() {
            if o.is_relative() {
                *o = base.join(&*o);
            }
        }
        Ok(cfg)
    }

    pub fn load_optional(path: Option<&Path>) -> Result<Self, CliError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out_dir.clone().unwrap_or_else(|| PathBuf::from("pbd-out"))
    }

    /// Loads the manifest or generates the synthetic set; exactly one source
    /// must be configured.
    pub fn dataset(&self) -> Result<Dataset, CliError> {
        match (&self.dataset, &self.synthetic) {
            (Some(_), Some(_)) => Err(CliError::Usage(
                "both a dataset manifest and a [synthetic] table are configured; pick one".into(),
            )),
            (None, None) => Err(CliError::Usage(
                "no dataset: pass --dataset <manifest.json> or add a [synthetic] table to the config".into(),
            )),
            (Some(path), None) => {
                if !path.exists() {
                    return Err(CliError::Data(format!("dataset manifest {} not found", path.display())));
                }
                Ok(Dataset::load(path)?)
            }
            (None, Some(spec)) => Ok(pbd_core::dataio::generate_synthetic(spec)?),
        }
    }

    pub fn experiment(&self) -> ExperimentSpec {
        ExperimentSpec {
            window: self.window.clone(),
            augment: self.augment.clone(),
            labels: self.labels,
            model: self.model.clone(),
            train: self.train.clone(),
            folds: self.folds,
            seed: self.seed(),
        }
    }
}
