//! Syntax-augmented features for sentence-pair word sense disambiguation.
//!
//! The pipeline reads dependency parses ([`conllu`]) and wordpiece embeddings
//! ([`embedstore`]), composes target/head/dependent feature vectors
//! ([`compose`]), trains logistic-regression and two-layer MLP classifiers
//! ([`classify`]) and runs experiment matrices over them ([`harness`]).

pub mod classify;
pub mod compose;
pub mod conllu;
pub mod embedstore;
pub mod harness;
