//! Information-theoretic metrics over token frequency tables.
//!
//! Entropy and the complexity bound are computed in bits (with an explicit
//! natural-log variant); loss accounting elsewhere in the crate works in nats.
//! Every report field name carries its unit so the two never mix silently.

use serde::{Deserialize, Serialize};

use crate::bpe::TokenFreqTable;
use crate::error::{Error, Result};
use crate::kahan::KahanSum;

/// Logarithm base for entropy computations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogBase {
    /// Base 2: entropies in bits.
    Two,
    /// Base e: entropies in nats.
    E,
}

/// Shannon entropy of the empirical token distribution, −Σ (c/N)·log(c/N)
/// over observed tokens. Zero-count ids contribute nothing.
pub fn shannon_entropy(table: &TokenFreqTable, base: LogBase) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyInput("token table has no observations".into()));
    }
    let n = n as f64;
    let mut acc = KahanSum::new();
    for (_, count) in table.iter() {
        let p = count as f64 / n;
        let term = match base {
            LogBase::Two => p * p.log2(),
            LogBase::E => p * p.ln(),
        };
        acc.add(term);
    }
    Ok((-acc.value()).max(0.0))
}

/// The analytic complexity bound before corpus normalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KolmogorovBound {
    pub n_tokens: u64,
    pub vocab_size: u32,
    pub h_bits: f64,
    pub k_bits: f64,
    pub k_bytes: f64,
}

/// Upper-bounds the description length of the token stream:
/// K_bits = N·H₂(p) + V·log₂N, where the V·log₂N term pays for the code
/// table and the O(log N) residual is dropped.
pub fn kolmogorov_upper_bound(table: &TokenFreqTable) -> Result<KolmogorovBound> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyInput("token table has no observations".into()));
    }
    if n < 2 {
        return Err(Error::DegenerateInput(
            "complexity bound needs at least 2 tokens (log₂N must be positive)".into(),
        ));
    }
    let h_bits = shannon_entropy(table, LogBase::Two)?;
    let v = table.vocab_size();
    let k_bits = n as f64 * h_bits + f64::from(v) * (n as f64).log2();
    Ok(KolmogorovBound {
        n_tokens: n,
        vocab_size: v,
        h_bits,
        k_bits,
        k_bytes: k_bits / 8.0,
    })
}

/// Normalized compression ratio: bound bytes over raw corpus bytes.
pub fn ncr(k_bytes: f64, corpus_bytes: f64) -> Result<f64> {
    if k_bytes.is_nan() || k_bytes < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "K_bytes must be non-negative, got {k_bytes}"
        )));
    }
    if corpus_bytes.is_nan() || corpus_bytes <= 0.0 {
        return Err(Error::DegenerateInput(format!(
            "corpus_bytes must be positive, got {corpus_bytes}"
        )));
    }
    Ok(k_bytes / corpus_bytes)
}

/// Jensen–Shannon divergence (base 2) between the empirical token
/// distribution and the uniform distribution over the full vocabulary.
/// Unseen ids participate with p = 0; the result lies in [0, 1].
pub fn jsd_from_uniform(table: &TokenFreqTable) -> Result<f64> {
    let n = table.total();
    if n == 0 {
        return Err(Error::EmptyInput("token table has no observations".into()));
    }
    let n = n as f64;
    let v = table.vocab_size();
    debug_assert!(v >= 1);
    let u = 1.0 / f64::from(v);
    let mut kl_p = KahanSum::new(); // KL(p ‖ m), zero terms skipped
    let mut kl_u = KahanSum::new(); // KL(u ‖ m), all V terms
    for id in 0..v {
        let p = table.count(id) as f64 / n;
        let m = 0.5 * (p + u);
        if p > 0.0 {
            kl_p.add(p * (p / m).log2());
        }
        kl_u.add(u * (u / m).log2());
    }
    let jsd = 0.5 * kl_p.value() + 0.5 * kl_u.value();
    debug_assert!(
        (-1e-9..=1.0 + 1e-9).contains(&jsd),
        "JSD out of bounds before clamp: {jsd}"
    );
    Ok(jsd.clamp(0.0, 1.0))
}

/// One row of the complexity sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityReport {
    pub vocab_size: u32,
    #[serde(rename = "N")]
    pub n_tokens: u64,
    #[serde(rename = "H_bits")]
    pub h_bits: f64,
    #[serde(rename = "K_bits")]
    pub k_bits: f64,
    #[serde(rename = "K_bytes")]
    pub k_bytes: f64,
    pub corpus_bytes: u64,
    pub ncr: f64,
}

impl KolmogorovBound {
    /// Completes the report by normalizing against the raw corpus size.
    pub fn into_report(self, corpus_bytes: u64) -> Result<ComplexityReport> {
        let ratio = ncr(self.k_bytes, corpus_bytes as f64)?;
        Ok(ComplexityReport {
            vocab_size: self.vocab_size,
            n_tokens: self.n_tokens,
            h_bits: self.h_bits,
            k_bits: self.k_bits,
            k_bytes: self.k_bytes,
            corpus_bytes,
            ncr: ratio,
        })
    }
}

/// Convenience: bound plus normalization in one call.
pub fn complexity_report(table: &TokenFreqTable, corpus_bytes: u64) -> Result<ComplexityReport> {
    kolmogorov_upper_bound(table)?.into_report(corpus_bytes)
}
