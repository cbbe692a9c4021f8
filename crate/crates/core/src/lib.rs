//! Tokenizer-and-corpus diagnostics: byte-level BPE training (standard and
//! two-stage cross-whitespace), tokenized-text complexity measurement, and
//! word-level decomposition of per-token loss logs.

pub mod bpe;
pub mod corpus;
pub mod embedding;
pub mod lossdecomp;
pub mod metrics;
pub mod textgen;
pub mod unigram;
pub mod error;
pub mod kahan;

pub use error::{Error, ErrorCategory, Result};
