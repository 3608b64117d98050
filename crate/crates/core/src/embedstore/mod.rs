//! Per-sentence wordpiece embeddings.
//!
//! Embeddings arrive as one vector per wordpiece (continuation pieces carry a
//! `##` prefix) plus the encoder's separator vector. A word's embedding is the
//! mean of the pieces that tile it; [`align_words`] finds those pieces for
//! each parser token.

mod align;
mod synthetic;
mod wpe;

use std::ops::Range;

use thiserror::Error;

pub use align::{align_words, align_texts, WordAlignment};
pub use synthetic::{stable_hash, synthetic_embeddings, token_vector};
pub use wpe::{parse_wpe, read_embedding_file, to_wpe_string, write_embedding_file};

/// Embedding width of the multilingual distilled encoder.
pub const DEFAULT_DIM: usize = 768;

pub const CONTINUATION_PREFIX: &str = "##";
pub const SEP_TOKEN: &str = "[SEP]";
pub const UNK_TOKEN: &str = "[UNK]";

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("empty wordpiece range")]
    EmptyRange,
    #[error("wordpiece range {start}..{end} exceeds {len} pieces")]
    RangeOutOfBounds { start: usize, end: usize, len: usize },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("embedding dimension must be positive")]
    ZeroDimension,
    #[error("sentence {id}: first wordpiece {text:?} is a continuation piece")]
    LeadingContinuation { id: String, text: String },
    #[error("cannot align token {index} ({form:?}) to wordpieces: {reason}")]
    AlignmentFailure {
        index: usize,
        form: String,
        reason: String,
    },
    #[error("line {line}: bad header: {reason}")]
    BadHeader { line: usize, reason: String },
    #[error("line {line}: cannot parse float {value:?}")]
    FloatParseError { line: usize, value: String },
    #[error("line {line}: sentence {id} has no [SEP] row")]
    MissingSepVector { line: usize, id: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordpieceRecord {
    pub text: String,
    pub vector: Vec<f32>,
}

impl WordpieceRecord {
    pub fn new(text: impl Into<String>, vector: Vec<f32>) -> Self {
        Self {
            text: text.into(),
            vector,
        }
    }

    pub fn is_continuation(&self) -> bool {
        self.text.starts_with(CONTINUATION_PREFIX)
    }
}

/// Wordpiece vectors of one sentence together with its separator vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SentenceEmbeddings {
    pub id: String,
    pieces: Vec<WordpieceRecord>,
    sep_vector: Vec<f32>,
    dim: usize,
}

impl SentenceEmbeddings {
    pub fn new(
        id: impl Into<String>,
        pieces: Vec<WordpieceRecord>,
        sep_vector: Vec<f32>,
        dim: usize,
    ) -> Result<Self, EmbedError> {
        let id = id.into();
        if dim == 0 {
            return Err(EmbedError::ZeroDimension);
        }
        if sep_vector.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: sep_vector.len(),
            });
        }
        if let Some(bad) = pieces.iter().find(|p| p.vector.len() != dim) {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: bad.vector.len(),
            });
        }
        if let Some(first) = pieces.first().filter(|p| p.is_continuation()) {
            return Err(EmbedError::LeadingContinuation {
                id,
                text: first.text.clone(),
            });
        }
        Ok(Self {
            id,
            pieces,
            sep_vector,
            dim,
        })
    }

    pub fn pieces(&self) -> &[WordpieceRecord] {
        &self.pieces
    }

    pub fn sep_vector(&self) -> &[f32] {
        &self.sep_vector
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn piece_texts(&self) -> Vec<&str> {
        self.pieces.iter().map(|p| p.text.as_str()).collect()
    }
}

/// Mean of the piece vectors in `range`, accumulated in `f64`.
pub fn merge_subwords(pieces: &[WordpieceRecord], range: Range<usize>) -> Result<Vec<f64>, EmbedError> {
    if range.is_empty() {
        return Err(EmbedError::EmptyRange);
    }
    if range.end > pieces.len() {
        return Err(EmbedError::RangeOutOfBounds {
            start: range.start,
            end: range.end,
            len: pieces.len(),
        });
    }
    let slice = &pieces[range];
    let dim = slice[0].vector.len();
    let mut acc = vec![0.0f64; dim];
    for piece in slice {
        if piece.vector.len() != dim {
            return Err(EmbedError::DimensionMismatch {
                expected: dim,
                found: piece.vector.len(),
            });
        }
        for (a, &v) in acc.iter_mut().zip(&piece.vector) {
            *a += f64::from(v);
        }
    }
    let n = slice.len() as f64;
    acc.iter_mut().for_each(|a| *a /= n);
    Ok(acc)
}
