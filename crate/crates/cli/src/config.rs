//! Training configuration: built-in defaults, then an optional JSON file,
//! then command-line flags.
//!
//! A config file is a single JSON object. Every key is optional:
//!
//! ```json
//! {
//!   "epochs": 30,
//!   "batch_size": 64,
//!   "learning_rate": 0.01,
//!   "momentum": 0.9,
//!   "seed": 0,
//!   "split": 0.8,
//!   "shuffle_each_epoch": true,
//!   "already_processed": false,
//!   "architecture": { "conv1_filters": 6, "conv2_filters": 16, "kernel": 5,
//!                     "pool": 2, "hidden": 128, "pool_affine": false }
//! }
//! ```

use std::path::{Path, PathBuf};

use dcnn::{Architecture, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::{CliError, TrainArgs};

pub const DEFAULT_SPLIT: f64 = 0.8;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub learning_rate: Option<f64>,
    pub momentum: Option<f64>,
    pub seed: Option<u64>,
    pub split: Option<f64>,
    pub shuffle_each_epoch: Option<bool>,
    pub already_processed: Option<bool>,
    pub architecture: Option<Architecture>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Failed(format!("cannot read config {}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))
    }
}

/// Everything a training run uses, echoed before it starts.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolvedTrain {
    pub data: PathBuf,
    pub out: PathBuf,
    pub log: Option<PathBuf>,
    pub split: f64,
    pub already_processed: bool,
    pub train: TrainConfig,
    pub architecture: Architecture,
}

impl ResolvedTrain {
    pub fn resolve(args: &TrainArgs) -> Result<Self, CliError> {
        let file = match &args.config {
            Some(path) => ConfigFile::read(path)?,
            None => ConfigFile::default(),
        };
        let defaults = TrainConfig::default();
        let train = TrainConfig {
            epochs: args.epochs.or(file.epochs).unwrap_or(defaults.epochs),
            batch_size: args.batch.or(file.batch_size).unwrap_or(defaults.batch_size),
            learning_rate: args.lr.or(file.learning_rate).unwrap_or(defaults.learning_rate),
            momentum: args.momentum.or(file.momentum).unwrap_or(defaults.momentum),
            seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
            shuffle_each_epoch: file.shuffle_each_epoch.unwrap_or(defaults.shuffle_each_epoch),
        };
        train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        let split = args.split.or(file.split).unwrap_or(DEFAULT_SPLIT);
        if !(split > 0.0 && split < 1.0) {
            return Err(CliError::Usage(format!("split must be in (0, 1), got {split}")));
        }
        Ok(ResolvedTrain {
            data: args.data.clone(),
            out: args.out.clone(),
            log: args.log.clone(),
            split,
            already_processed: args.already_processed || file.already_processed.unwrap_or(false),
            train,
            architecture: file.architecture.unwrap_or_default(),
        })
    }
}
