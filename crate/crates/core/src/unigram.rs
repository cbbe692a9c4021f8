//! Unigram token models: maximum-likelihood fitting, cross-entropy
//! evaluation, and loss-log emission.
//!
//! The MLE unigram closes a loop used throughout the test suite: its
//! cross-entropy on the stream it was fitted to equals the stream's Shannon
//! entropy in nats, so every pipeline stage downstream of a unigram loss log
//! has an exact expected value.

use std::path::Path;

use crate::bpe::{Encoder, TokenFreqTable, TokenizerModel};
use crate::corpus::Corpus;
use crate::error::{Error, Result};
use crate::kahan::KahanSum;
use crate::lossdecomp::{LossLogWriter, LossRecord};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Smoothing {
    /// Maximum likelihood: p_i = c_i / N; unseen ids get probability zero.
    None,
    /// Add-k: p_i = (c_i + k) / (N + k·V); every id gets positive mass.
    AddK { k: f64 },
}

#[derive(Debug, Clone)]
pub struct UnigramModel {
    probs: Vec<f64>,
    smoothing: Smoothing,
    /// Token count of the fitting table (0 for hand-built models).
    fitted_n: u64,
}

impl UnigramModel {
    /// Fits on a token frequency table.
    pub fn fit(table: &TokenFreqTable, smoothing: Smoothing) -> Result<Self> {
        let n = table.total();
        if n == 0 {
            return Err(Error::EmptyInput("cannot fit on an empty table".into()));
        }
        let v = table.vocab_size();
        let probs: Vec<f64> = match smoothing {
            Smoothing::None => (0..v)
                .map(|id| table.count(id) as f64 / n as f64)
                .collect(),
            Smoothing::AddK { k } => {
                if !(k > 0.0 && k.is_finite()) {
                    return Err(Error::InvalidArgument(format!(
                        "smoothing constant k must be finite and positive, got {k}"
                    )));
                }
                let denom = n as f64 + k * f64::from(v);
                (0..v)
                    .map(|id| (table.count(id) as f64 + k) / denom)
                    .collect()
            }
        };
        debug_assert!({
            let mut s = KahanSum::new();
            probs.iter().for_each(|&p| s.add(p));
            (s.value() - 1.0).abs() < 1e-12
        });
        Ok(UnigramModel {
            probs,
            smoothing,
            fitted_n: n,
        })
    }

    /// Builds a model from explicit probabilities (tests and what-if
    /// evaluation). Probabilities must be non-negative and sum to 1 ± 1e-9.
    pub fn from_probs(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyInput("probability vector is empty".into()));
        }
        if probs.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidArgument(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        let mut sum = KahanSum::new();
        probs.iter().for_each(|&p| sum.add(p));
        if (sum.value() - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!(
                "probabilities sum to {}, not 1",
                sum.value()
            )));
        }
        Ok(UnigramModel {
            probs,
            smoothing: Smoothing::None,
            fitted_n: 0,
        })
    }

    #[must_use]
    pub fn vocab_size(&self) -> u32 {
        self.probs.len() as u32
    }

    #[must_use]
    pub fn prob(&self, id: u32) -> f64 {
        self.probs.get(id as usize).copied().unwrap_or(0.0)
    }

    #[must_use]
    pub fn smoothing(&self) -> Smoothing {
        self.smoothing
    }

    #[must_use]
    pub fn fitted_n(&self) -> u64 {
        self.fitted_n
    }

    /// Mean negative log-probability of the stream, in nats per token.
    pub fn cross_entropy(&self, stream: &[u32]) -> Result<f64> {
        if stream.is_empty() {
            return Err(Error::EmptyInput("empty token stream".into()));
        }
        let mut sum = KahanSum::new();
        for (index, &id) in stream.iter().enumerate() {
            if id as usize >= self.probs.len() {
                return Err(Error::TokenOutOfRange {
                    id,
                    index,
                    vocab_size: self.vocab_size(),
                });
            }
            let p = self.probs[id as usize];
            if p <= 0.0 {
                return Err(Error::ZeroProbability { token_id: id });
            }
            sum.add(-p.ln());
        }
        Ok(sum.value() / stream.len() as f64)
    }

    /// Count-weighted cross-entropy against a frequency table: identical to
    /// [`Self::cross_entropy`] on the stream the table was counted from, but
    /// O(V) instead of O(N).
    pub fn cross_entropy_table(&self, table: &TokenFreqTable) -> Result<f64> {
        let n = table.total();
        if n == 0 {
            return Err(Error::EmptyInput("empty token table".into()));
        }
        let mut sum = KahanSum::new();
        for (id, count) in table.iter() {
            if id as usize >= self.probs.len() {
                return Err(Error::TokenOutOfRange {
                    id,
                    index: 0,
                    vocab_size: self.vocab_size(),
                });
            }
            let p = self.probs[id as usize];
            if p <= 0.0 {
                return Err(Error::ZeroProbability { token_id: id });
            }
            sum.add(count as f64 * -p.ln());
        }
        Ok(sum.value() / n as f64)
    }

    /// Tokenizes every document and writes a loss log whose per-token losses
    /// are this model's self-information, −ln p(id).
    pub fn emit_loss_log(
        &self,
        tokenizer: &TokenizerModel,
        corpus: &Corpus,
        path: &Path,
    ) -> Result<EmitStats> {
        let neg_ln: Vec<f64> = self.probs.iter().map(|&p| -p.ln()).collect();
        let encoder = Encoder::new(tokenizer);
        let mut writer = LossLogWriter::create(path, tokenizer.fingerprint())?;
        let mut stats = EmitStats::default();
        for doc in &corpus.docs {
            let token_ids = encoder.encode(&doc.text);
            let mut losses_nats = Vec::with_capacity(token_ids.len());
            for &id in &token_ids {
                let loss = neg_ln.get(id as usize).copied().unwrap_or(f64::INFINITY);
                if !loss.is_finite() {
                    return Err(Error::ZeroProbability { token_id: id });
                }
                losses_nats.push(loss);
            }
            stats.documents += 1;
            stats.tokens += token_ids.len() as u64;
            writer.write_record(&LossRecord {
                doc_id: doc.id,
                token_ids,
                losses_nats,
            })?;
        }
        writer.finish()?;
        Ok(stats)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EmitStats {
    pub documents: u64,
    pub tokens: u64,
}
