use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{validate_levels, DEFAULT_LEVELS, DEFAULT_SEEDS};
use crate::data::SyntheticConfig;
use crate::error::{Error, Result};
use crate::models::ModelKind;
use crate::training::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProtocolConfig {
    pub model: ModelKind,
    pub levels: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Tie band; defaults to 1 accuracy point or 0.005 MAE.
    pub tau: Option<f64>,
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            model: ModelKind::BiEflstm,
            levels: DEFAULT_LEVELS.to_vec(),
            seeds: DEFAULT_SEEDS.to_vec(),
            tau: None,
        }
    }
}

/// Everything a sweep needs, as read from a TOML file with
/// `[data]`, `[train]` and `[protocol]` tables.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub data: SyntheticConfig,
    pub train: TrainConfig,
    pub protocol: ProtocolConfig,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml(&fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        self.train.validate()?;
        validate_levels(&self.protocol.levels)?;
        if self.protocol.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = ExperimentConfig::from_toml(
            "[data]\nn_samples = 200\n[train]\nhidden_size = 32\n[protocol]\nlevels = [0.0, 0.8]\nseeds = [7]\n",
        )
        .unwrap();
        assert_eq!(cfg.data.n_samples, 200);
        assert_eq!(cfg.data.snr_audio, 6.0);
        assert_eq!(cfg.train.hidden_size, 32);
        assert_eq!(cfg.train.batch_size, 15);
        assert_eq!(cfg.protocol.levels, vec![0.0, 0.8]);
        assert_eq!(cfg.protocol.model, ModelKind::BiEflstm);
    }

    #[test]
    fn written_config_reads_back() {
        let cfg = ExperimentConfig::default();
        assert_eq!(
            ExperimentConfig::from_toml(&cfg.to_toml().unwrap()).unwrap(),
            cfg
        );
    }

    #[test]
    fn bad_files_are_config_errors() {
        for text in [
            "[protocol]\nlevels = [1.2]\n",
            "[protocol]\nseeds = []\n",
            "[train]\nlr = 1\n",
            "[data",
        ] {
            assert!(
                matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))),
                "{text}"
            );
        }
    }
}
