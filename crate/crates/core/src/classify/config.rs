use serde::{Deserialize, Serialize};

use super::ClassifyError;

/// Training hyperparameters shared by both classifiers.
///
/// Logistic regression reads `learning_rate` as its initial line-search step,
/// `max_epochs` as the iteration cap and stops once the gradient's ∞-norm is
/// below `tolerance`. The MLP uses `batch_size`, `momentum`, `patience` and
/// `validation_fraction`; `hidden` overrides the hidden width, which is
/// otherwise the input width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub seed: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub tolerance: f64,
    pub l2: f64,
    pub momentum: f64,
    pub patience: usize,
    pub validation_fraction: f64,
    pub hidden: Option<usize>,
}

impl TrainConfig {
    pub fn logreg() -> Self {
        Self {
            seed: 0,
            learning_rate: 1.0,
            batch_size: 1,
            max_epochs: 1000,
            tolerance: 1e-6,
            l2: 1.0,
            momentum: 0.0,
            patience: 0,
            validation_fraction: 0.0,
            hidden: None,
        }
    }

    pub fn mlp() -> Self {
        Self {
            seed: 0,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 50,
            tolerance: 1e-8,
            l2: 0.0,
            momentum: 0.9,
            patience: 5,
            validation_fraction: 0.1,
            hidden: None,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<(), ClassifyError> {
        let fail = |msg: &str| Err(ClassifyError::InvalidConfig(msg.to_string()));
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return fail("learning_rate must be positive");
        }
        if self.batch_size == 0 {
            return fail("batch_size must be positive");
        }
        if self.max_epochs == 0 {
            return fail("max_epochs must be positive");
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return fail("tolerance must be positive");
        }
        if !(self.l2.is_finite() && self.l2 >= 0.0) {
            return fail("l2 must be non-negative");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return fail("momentum must lie in [0, 1)");
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return fail("validation_fraction must lie in [0, 1)");
        }
        if self.hidden == Some(0) {
            return fail("hidden width must be positive");
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        TrainConfig::logreg().validate().unwrap();
        TrainConfig::mlp().validate().unwrap();
    }

    #[test]
    fn rejects_bad_values() {
        let bad = [
            TrainConfig { learning_rate: 0.0, ..TrainConfig::mlp() },
            TrainConfig { batch_size: 0, ..TrainConfig::mlp() },
            TrainConfig { max_epochs: 0, ..TrainConfig::mlp() },
            TrainConfig { tolerance: -1.0, ..TrainConfig::mlp() },
            TrainConfig { l2: -0.5, ..TrainConfig::mlp() },
            TrainConfig { momentum: 1.0, ..TrainConfig::mlp() },
            TrainConfig { validation_fraction: 1.0, ..TrainConfig::mlp() },
            TrainConfig { hidden: Some(0), ..TrainConfig::mlp() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(ClassifyError::InvalidConfig(_))), "{cfg:?}");
        }
    }
}
