//! TOML configuration file. Every key is optional and every key has a
//! command-line flag of the same meaning; flags win.
//!
//! ```toml
//! [data]
//! train = "data/train.jsonl"
//! dev = "data/dev.jsonl"
//! cross = "data/trial.en-fr.jsonl"
//! embeddings = "data/embeddings"
//! parses = "data/parses"
//! cache_dir = "cache"
//! out = "results"
//!
//! [features]
//! variant = "concat+sum"
//! marker = "none"
//! dim = 768
//! dependent_filter = "all"
//!
//! [train]
//! classifier = "mlp"
//! seeds = [0, 1, 2]
//! train_sizes = [8000]
//! learning_rate = 0.001
//! hidden = 256
//!
//! [synth]
//! train_pairs = 2000
//! dev_pairs = 400
//! dim = 32
//! lemmas = 12
//! seed = 0
//! ```

use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::HarnessError;
use crate::classify::TrainConfig;
use crate::compose::DependentFilter;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub train: Option<PathBuf>,
    pub dev: Option<PathBuf>,
    pub cross: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub parses: Option<PathBuf>,
    pub cache_dir: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureSection {
    pub variant: Option<String>,
    pub marker: Option<String>,
    pub dim: Option<usize>,
    pub dependent_filter: Option<DependentFilter>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainSection {
    pub classifier: Option<String>,
    pub seed: Option<u64>,
    pub seeds: Option<Vec<u64>>,
    pub train_sizes: Option<Vec<usize>>,
    pub learning_rate: Option<f64>,
    pub batch_size: Option<usize>,
    pub max_epochs: Option<usize>,
    pub tolerance: Option<f64>,
    pub l2: Option<f64>,
    pub momentum: Option<f64>,
    pub patience: Option<usize>,
    pub validation_fraction: Option<f64>,
    pub hidden: Option<usize>,
}

impl TrainSection {
    /// `base` with every key set here copied over it. `l2` is left to the
    /// caller, which may need to know whether it was given.
    pub fn apply(&self, base: TrainConfig) -> TrainConfig {
        TrainConfig {
            seed: self.seed.unwrap_or(base.seed),
            learning_rate: self.learning_rate.unwrap_or(base.learning_rate),
            batch_size: self.batch_size.unwrap_or(base.batch_size),
            max_epochs: self.max_epochs.unwrap_or(base.max_epochs),
            tolerance: self.tolerance.unwrap_or(base.tolerance),
            l2: base.l2,
            momentum: self.momentum.unwrap_or(base.momentum),
            patience: self.patience.unwrap_or(base.patience),
            validation_fraction: self.validation_fraction.unwrap_or(base.validation_fraction),
            hidden: self.hidden.or(base.hidden),
        }
    }

    /// Fills every unset key of `self` from `fallback`.
    pub fn or(self, fallback: &TrainSection) -> TrainSection {
        let f = fallback.clone();
        TrainSection {
            classifier: self.classifier.or(f.classifier),
            seed: self.seed.or(f.seed),
            seeds: self.seeds.or(f.seeds),
            train_sizes: self.train_sizes.or(f.train_sizes),
            learning_rate: self.learning_rate.or(f.learning_rate),
            batch_size: self.batch_size.or(f.batch_size),
            max_epochs: self.max_epochs.or(f.max_epochs),
            tolerance: self.tolerance.or(f.tolerance),
            l2: self.l2.or(f.l2),
            momentum: self.momentum.or(f.momentum),
            patience: self.patience.or(f.patience),
            validation_fraction: self.validation_fraction.or(f.validation_fraction),
            hidden: self.hidden.or(f.hidden),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSection {
    pub train_pairs: Option<usize>,
    pub dev_pairs: Option<usize>,
    pub dim: Option<usize>,
    pub lemmas: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub data: DataSection,
    #[serde(default)]
    pub features: FeatureSection,
    #[serde(default)]
    pub train: TrainSection,
    #[serde(default)]
    pub synth: SynthSection,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::parse(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn documented_example_parses() {
        let doc: String = include_str!("config.rs")
            .lines()
            .skip_while(|l| !l.starts_with("//! ```toml"))
            .skip(1)
            .take_while(|l| !l.starts_with("//! ```"))
            .map(|l| l.trim_start_matches("//!").trim_start())
            .collect::<Vec<_>>()
            .join("\n");
        let c = ConfigFile::parse(&doc).unwrap();
        assert_eq!(c.features.dim, Some(768));
        assert_eq!(c.features.dependent_filter, Some(DependentFilter::All));
        assert_eq!(c.train.seeds, Some(vec![0, 1, 2]));
        assert_eq!(c.synth.lemmas, Some(12));
        assert_eq!(c.data.cache_dir, Some(PathBuf::from("cache")));
    }

    #[test]
    fn empty_and_unknown() {
        assert_eq!(ConfigFile::parse("").unwrap(), ConfigFile::default());
        assert!(ConfigFile::parse("[train]\nlearning_rat = 1.0\n").is_err());
        assert!(ConfigFile::parse("[model]\n").is_err());
    }

    #[test]
    fn overrides() {
        let file = TrainSection {
            learning_rate: Some(0.5),
            hidden: Some(64),
            ..Default::default()
        };
        let flags = TrainSection {
            learning_rate: Some(0.01),
            ..Default::default()
        };
        let merged = flags.or(&file);
        assert_eq!(merged.learning_rate, Some(0.01));
        assert_eq!(merged.hidden, Some(64));
        let cfg = merged.apply(TrainConfig::mlp());
        assert_eq!(cfg.learning_rate, 0.01);
        assert_eq!(cfg.hidden, Some(64));
        assert_eq!(cfg.batch_size, 32);
    }
}
