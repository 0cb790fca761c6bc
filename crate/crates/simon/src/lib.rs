//! Semantic column-type inference for tabular data.
//!
//! A column of text cells is classified into multi-label semantic types
//! (int, email, datetime, ...) by a two-stage network: a character-level
//! convolutional encoder turns each cell into a fixed-width feature
//! vector, and a bidirectional LSTM over the cell sequence encodes the
//! column as a whole. Training runs on seeded synthetic corpora; new
//! label sets are adopted by freezing the encoders and retraining only
//! the output head. Statistical heuristics cover the categorical and
//! ordinal labels, and an evaluation harness provides the usual
//! multi-label metrics plus an annotation similarity score.

pub mod datagen;
pub mod encode;
pub mod error;
pub mod eval;
pub mod ingest;
pub mod model;
pub mod recurrent;
pub mod tensor;

pub use encode::{Alphabet, Column};
pub use error::{Result, SimonError};
pub use model::{LabelSpace, LabeledDataset, ModelConfig, SimonModel};

/// Forward-pass mode. Training enables dropout; inference is a
/// deterministic function of inputs and parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Inference,
}
