//! Binary classifiers trained from scratch: L2-regularised logistic
//! regression and a two-layer ReLU/softmax perceptron.
//!
//! Labels are `1` for "same sense" (T) and `0` for "different sense" (F).
//! All arithmetic is `f64`. Predictions that land exactly on probability 0.5
//! go to class 0.

mod config;
mod logreg;
mod mlp;
mod persist;

use thiserror::Error;

pub use config::TrainConfig;
pub use logreg::{lr_loss, lr_predict, lr_train, lr_train_traced, LogRegModel};
pub use mlp::{mlp_forward, mlp_train, MlpGrad, MlpModel};
pub use persist::{load_model, read_model, save_model, write_model, ModelFile};

#[derive(Debug, Error)]
pub enum ClassifyError {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("{features} feature vectors but {labels} labels")]
    LabelCountMismatch { features: usize, labels: usize },
    #[error("training labels contain a single class")]
    DegenerateLabels,
    #[error("label {0} is not 0 or 1")]
    BadLabel(u8),
    #[error("loss became non-finite at epoch {epoch}; lower the learning rate")]
    NonFiniteLoss { epoch: usize },
    #[error("input contains a non-finite value")]
    NonFiniteInput,
    #[error("empty dataset")]
    EmptyDataset,
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("model file line {line}: {reason}")]
    ModelFormat { line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Anything that scores a feature vector with P(label = 1).
pub trait Classifier {
    fn input_dim(&self) -> usize;

    fn prob_positive(&self, x: &[f64]) -> Result<f64, ClassifyError>;

    fn predict(&self, x: &[f64]) -> Result<u8, ClassifyError> {
        Ok(u8::from(self.prob_positive(x)? > 0.5))
    }
}

/// A trained model of either family.
#[derive(Debug, Clone, PartialEq)]
pub enum Model {
    LogReg(LogRegModel),
    Mlp(MlpModel),
}

impl Classifier for Model {
    fn input_dim(&self) -> usize {
        match self {
            Model::LogReg(m) => m.input_dim(),
            Model::Mlp(m) => m.input_dim(),
        }
    }

    fn prob_positive(&self, x: &[f64]) -> Result<f64, ClassifyError> {
        match self {
            Model::LogReg(m) => m.prob_positive(x),
            Model::Mlp(m) => m.prob_positive(x),
        }
    }

    fn predict(&self, x: &[f64]) -> Result<u8, ClassifyError> {
        match self {
            Model::LogReg(m) => m.predict(x),
            Model::Mlp(m) => m.predict(x),
        }
    }
}

/// Fraction of examples whose prediction equals the label.
pub fn evaluate<C, X>(model: &C, xs: &[X], ys: &[u8]) -> Result<f64, ClassifyError>
where
    C: Classifier + ?Sized,
    X: AsRef<[f64]>,
{
    if xs.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    if xs.len() != ys.len() {
        return Err(ClassifyError::LabelCountMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    let mut correct = 0usize;
    for (x, &y) in xs.iter().zip(ys) {
        if model.predict(x.as_ref())? == y {
            correct += 1;
        }
    }
    Ok(correct as f64 / xs.len() as f64)
}

/// Shared input checks for both trainers; returns the feature dimension.
pub(crate) fn check_training_data<X: AsRef<[f64]>>(xs: &[X], ys: &[u8]) -> Result<usize, ClassifyError> {
    if xs.is_empty() {
        return Err(ClassifyError::EmptyDataset);
    }
    if xs.len() != ys.len() {
        return Err(ClassifyError::LabelCountMismatch {
            features: xs.len(),
            labels: ys.len(),
        });
    }
    if let Some(&bad) = ys.iter().find(|&&y| y > 1) {
        return Err(ClassifyError::BadLabel(bad));
    }
    let dim = xs[0].as_ref().len();
    for x in xs {
        let x = x.as_ref();
        if x.len() != dim {
            return Err(ClassifyError::DimensionMismatch {
                expected: dim,
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::NonFiniteInput);
        }
    }
    let positives = ys.iter().filter(|&&y| y == 1).count();
    if positives == 0 || positives == ys.len() {
        return Err(ClassifyError::DegenerateLabels);
    }
    Ok(dim)
}

pub(crate) fn check_dim(expected: usize, x: &[f64]) -> Result<(), ClassifyError> {
    if x.len() != expected {
        return Err(ClassifyError::DimensionMismatch {
            expected,
            found: x.len(),
        });
    }
    Ok(())
}
