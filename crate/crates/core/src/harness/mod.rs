//! Experiment orchestration: datasets, cached preprocessing, experiment
//! matrices, reports and the synthetic corpus.

mod config;
mod dataset;
mod experiment;
mod preprocess;
mod report;
mod synth;

use std::path::Path;

use thiserror::Error;

use crate::classify::ClassifyError;
use crate::compose::ComposeError;
use crate::conllu::ConlluError;
use crate::embedstore::EmbedError;

pub use config::{ConfigFile, DataSection, FeatureSection, SynthSection, TrainSection};
pub use dataset::{labels, load_dataset, parse_dataset, write_dataset, Label, PairRecord};
pub use experiment::{run_experiment, train_model, Cell, ClassifierKind, EvalSet, ExperimentSpec, Plan};
pub use preprocess::{preprocess, target_tokens, Artifacts, FeatureMatrix, PreprocessOptions};
pub use report::{emit_report, render_report, ExperimentReport, ReportFormat, ReportRow};
pub use synth::{generate_corpus, SynthOptions, SynthSummary};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: missing field {field}")]
    MissingField { line: usize, field: &'static str },
    #[error("line {line}: label must be \"T\" or \"F\", found {value}")]
    BadLabel { line: usize, value: String },
    #[error("record {id}: span {start}..{end} of sentence {sentence} exceeds its {len} characters")]
    SpanOutOfBounds {
        id: String,
        sentence: usize,
        start: usize,
        end: usize,
        len: usize,
    },
    #[error("duplicate record id {id}")]
    DuplicateId { id: String },
    #[error("record {id} has no label")]
    MissingLabel { id: String },
    #[error("no {kind} found for sentence {id}")]
    MissingArtifact { id: String, kind: &'static str },
    #[error("record {id}: {source}")]
    AlignmentFailure {
        id: String,
        #[source]
        source: EmbedError,
    },
    #[error("record {id}, sentence {sentence}: {reason}")]
    TargetNotInParse {
        id: String,
        sentence: usize,
        reason: String,
    },
    #[error("record {id}: {source}")]
    Compose {
        id: String,
        #[source]
        source: ComposeError,
    },
    #[error("{path}: {source}")]
    Conllu {
        path: String,
        #[source]
        source: ConlluError,
    },
    #[error("{path}: {source}")]
    Embed {
        path: String,
        #[source]
        source: EmbedError,
    },
    #[error("{what}: embedding width {found} differs from expected {expected}")]
    DimensionMismatch {
        what: String,
        found: usize,
        expected: usize,
    },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("record {id} occurs in both training and evaluation data")]
    OverlappingSplits { id: String },
    #[error("bad configuration: {0}")]
    Config(String),
}

impl HarnessError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Stable name of the error kind, for machine-readable messages.
    pub fn kind(&self) -> &'static str {
        match self {
            HarnessError::Io { .. } => "Io",
            HarnessError::Json { .. } => "Json",
            HarnessError::MissingField { .. } => "MissingField",
            HarnessError::BadLabel { .. } => "BadLabel",
            HarnessError::SpanOutOfBounds { .. } => "SpanOutOfBounds",
            HarnessError::DuplicateId { .. } => "DuplicateId",
            HarnessError::MissingLabel { .. } => "MissingLabel",
            HarnessError::MissingArtifact { .. } => "MissingArtifact",
            HarnessError::AlignmentFailure { .. } => "AlignmentFailure",
            HarnessError::TargetNotInParse { .. } => "TargetNotInParse",
            HarnessError::Compose { .. } => "Compose",
            HarnessError::Conllu { .. } => "Conllu",
            HarnessError::Embed { .. } => "Embed",
            HarnessError::DimensionMismatch { .. } => "DimensionMismatch",
            HarnessError::Classify(_) => "Classify",
            HarnessError::InsufficientData(_) => "InsufficientData",
            HarnessError::OverlappingSplits { .. } => "OverlappingSplits",
            HarnessError::Config(_) => "Config",
        }
    }
}
