//! Applying merges to text: encoding, token counting, per-word segmentation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rayon::prelude::*;

use crate::bpe::model::{Pair, TokenFreqTable, TokenizerModel, TrainMode, BYTE_VOCAB};
use crate::corpus::{segment_units, Corpus};
use crate::error::{Error, Result};

const DEAD: u32 = u32::MAX;
const NONE: u32 = u32::MAX;

/// Applies merges in rank order (lowest rank first, leftmost occurrence first)
/// to one unit of bytes. This reproduces exactly the segmentation the greedy
/// trainer left behind on its training data.
pub(crate) fn apply_merges(bytes: &[u8], merges: &[Pair], ranks: &HashMap<Pair, u32>) -> Vec<u32> {
    let n = bytes.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![bytes[0] as u32];
    }
    let mut sym: Vec<u32> = bytes.iter().map(|&b| b as u32).collect();
    let mut next: Vec<u32> = (1..=n as u32).collect();
    next[n - 1] = NONE;
    let mut prev: Vec<u32> = (0..n as u32).map(|i| i.wrapping_sub(1)).collect();
    prev[0] = NONE;

    // (rank, position of the left symbol); min-heap → lowest rank, then
    // leftmost position. Entries may go stale and are re-validated on pop.
    let mut heap: BinaryHeap<Reverse<(u32, u32)>> = BinaryHeap::new();
    for i in 0..n - 1 {
        if let Some(&r) = ranks.get(&(sym[i], sym[i + 1])) {
            heap.push(Reverse((r, i as u32)));
        }
    }

    while let Some(Reverse((rank, pos))) = heap.pop() {
        let p = pos as usize;
        let (a, b) = merges[rank as usize];
        if sym[p] != a {
            continue; // stale: symbol at this position changed or died
        }
        let q = next[p];
        if q == NONE || sym[q as usize] != b {
            continue;
        }
        let new_id = BYTE_VOCAB + rank;
        sym[p] = new_id;
        sym[q as usize] = DEAD;
        let r = next[q as usize];
        next[p] = r;
        if r != NONE {
            prev[r as usize] = pos;
        }
        let l = prev[p];
        if l != NONE {
            if let Some(&rk) = ranks.get(&(sym[l as usize], new_id)) {
                heap.push(Reverse((rk, l)));
            }
        }
        if r != NONE {
            if let Some(&rk) = ranks.get(&(new_id, sym[r as usize])) {
                heap.push(Reverse((rk, pos)));
            }
        }
    }

    let mut out = Vec::new();
    let mut i = 0u32;
    while i != NONE {
        debug_assert_ne!(sym[i as usize], DEAD);
        out.push(sym[i as usize]);
        i = next[i as usize];
    }
    out
}

/// Reusable encoder: precomputes the merge-rank lookup once per model.
pub struct Encoder<'a> {
    model: &'a TokenizerModel,
    ranks: HashMap<Pair, u32>,
}

impl<'a> Encoder<'a> {
    #[must_use]
    pub fn new(model: &'a TokenizerModel) -> Self {
        Self {
            model,
            ranks: model.merge_ranks(),
        }
    }

    /// Encodes text into token ids. In standard mode merges apply within
    /// pretokenization units; in two-stage mode the whole text is one unit.
    #[must_use]
    pub fn encode(&self, text: &str) -> Vec<u32> {
        match self.model.mode() {
            TrainMode::Standard => {
                let mut out = Vec::new();
                for unit in segment_units(text, self.model.pretok_mode()) {
                    out.extend(apply_merges(
                        unit.as_bytes(),
                        self.model.merges(),
                        &self.ranks,
                    ));
                }
                out
            }
            TrainMode::TwoStage => {
                apply_merges(text.as_bytes(), self.model.merges(), &self.ranks)
            }
        }
    }

    /// Encodes a single pretokenization unit (no further splitting).
    #[must_use]
    pub fn encode_unit(&self, surface: &str) -> Vec<u32> {
        apply_merges(surface.as_bytes(), self.model.merges(), &self.ranks)
    }
}

impl TokenizerModel {
    /// One-off convenience; for many documents build an [`Encoder`] once.
    #[must_use]
    pub fn encode(&self, text: &str) -> Vec<u32> {
        Encoder::new(self).encode(text)
    }
}

/// Encodes every document and tallies token occurrences. Documents are
/// processed in parallel; counts merge associatively so the result does not
/// depend on the number of threads.
#[must_use]
pub fn token_counts(model: &TokenizerModel, corpus: &Corpus) -> TokenFreqTable {
    let encoder = Encoder::new(model);
    let v = model.vocab_size() as usize;
    let dense = corpus
        .docs
        .par_chunks(512)
        .fold(
            || vec![0u64; v],
            |mut acc, docs| {
                for doc in docs {
                    for id in encoder.encode(&doc.text) {
                        acc[id as usize] += 1;
                    }
                }
                acc
            },
        )
        .reduce(
            || vec![0u64; v],
            |mut a, b| {
                for (x, y) in a.iter_mut().zip(b) {
                    *x += y;
                }
                a
            },
        );
    let mut table = TokenFreqTable::new(model.vocab_size());
    for (id, &c) in dense.iter().enumerate() {
        if c > 0 {
            table.add(id as u32, c);
        }
    }
    table
}

/// Count-weighted segmentation statistics over a ranked word list.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentationStats {
    /// Mean number of tokens per word occurrence.
    pub avg_tokens_per_word: f64,
    /// Fraction of word occurrences whose word encodes to exactly one token.
    pub single_token_fraction: f64,
}

/// Encodes each word in isolation and aggregates token counts weighted by the
/// word's occurrence count.
pub fn tokens_per_word(model: &TokenizerModel, words: &[(&str, u64)]) -> Result<SegmentationStats> {
    if words.is_empty() {
        return Err(Error::InvalidArgument(
            "tokens_per_word requires a non-empty word list".into(),
        ));
    }
    let encoder = Encoder::new(model);
    let mut weight = 0u64;
    let mut tokens = 0u64;
    let mut single = 0u64;
    for &(surface, count) in words {
        let len = encoder.encode_unit(surface).len() as u64;
        weight += count;
        tokens += len * count;
        if len == 1 {
            single += count;
        }
    }
    if weight == 0 {
        return Err(Error::InvalidArgument(
            "tokens_per_word requires positive word counts".into(),
        ));
    }
    Ok(SegmentationStats {
        avg_tokens_per_word: tokens as f64 / weight as f64,
        single_token_fraction: single as f64 / weight as f64,
    })
}
