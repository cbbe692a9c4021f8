//! Tokenizer model: vocabulary, ordered merges, and serialization.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::PretokMode;
use crate::error::{Error, Result};

/// A merge rule: the two token ids joined by this rule, in order.
pub type Pair = (u32, u32);

/// Number of base byte tokens; ids below this are the raw bytes themselves.
pub const BYTE_VOCAB: u32 = 256;

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TrainMode {
    /// Merges never cross pretokenization boundaries.
    Standard,
    /// After the vocabulary reaches the threshold `t`, merges are learned over
    /// whole documents and may cross whitespace.
    TwoStage,
}

/// A trained byte-level tokenizer.
///
/// The vocabulary always starts with the 256 single-byte tokens; each merge at
/// index `k` concatenates two earlier tokens into id `256 + k`. The
/// fingerprint is a SHA-256 over the canonical serialization (all fields minus
/// the fingerprint itself), so any change to the model changes it.
#[derive(Debug, Clone, PartialEq)]
pub struct TokenizerModel {
    vocab: Vec<Vec<u8>>,
    merges: Vec<Pair>,
    mode: TrainMode,
    t: Option<u32>,
    pretok_mode: PretokMode,
    fingerprint: String,
}

#[derive(Serialize, Deserialize)]
struct ModelFile {
    format_version: u32,
    mode: TrainMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    t: Option<u32>,
    pretok_mode: PretokMode,
    /// Token byte strings, hex-encoded, indexed by id.
    vocab: Vec<String>,
    merges: Vec<Pair>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fingerprint: Option<String>,
}

impl TokenizerModel {
    /// Builds a model from an ordered merge list, deriving the vocabulary and
    /// fingerprint. Validates the merge structure.
    pub fn from_merges(
        merges: Vec<Pair>,
        mode: TrainMode,
        t: Option<u32>,
        pretok_mode: PretokMode,
    ) -> Result<Self> {
        match (mode, t) {
            (TrainMode::Standard, Some(_)) => {
                return Err(Error::ModelFormat(
                    "threshold t is only meaningful in two_stage mode".into(),
                ))
            }
            (TrainMode::TwoStage, None) => {
                return Err(Error::ModelFormat("two_stage model missing threshold t".into()))
            }
            (TrainMode::TwoStage, Some(t)) if t <= BYTE_VOCAB => {
                return Err(Error::ModelFormat(format!(
                    "threshold t = {t} must exceed the byte alphabet ({BYTE_VOCAB})"
                )))
            }
            _ => {}
        }
        let mut vocab: Vec<Vec<u8>> = (0..=255u8).map(|b| vec![b]).collect();
        for (k, &(l, r)) in merges.iter().enumerate() {
            let id = BYTE_VOCAB + k as u32;
            if l >= id || r >= id {
                return Err(Error::ModelFormat(format!(
                    "merge {k} references id {} not created yet",
                    l.max(r)
                )));
            }
            let mut bytes = vocab[l as usize].clone();
            bytes.extend_from_slice(&vocab[r as usize]);
            vocab.push(bytes);
        }
        let mut model = Self {
            vocab,
            merges,
            mode,
            t,
            pretok_mode,
            fingerprint: String::new(),
        };
        model.fingerprint = model.compute_fingerprint();
        Ok(model)
    }

    #[must_use]
    pub fn vocab_size(&self) -> u32 {
        self.vocab.len() as u32
    }

    #[must_use]
    pub fn token_bytes(&self, id: u32) -> Option<&[u8]> {
        self.vocab.get(id as usize).map(Vec::as_slice)
    }

    #[must_use]
    pub fn merges(&self) -> &[Pair] {
        &self.merges
    }

    #[must_use]
    pub fn mode(&self) -> TrainMode {
        self.mode
    }

    #[must_use]
    pub fn threshold(&self) -> Option<u32> {
        self.t
    }

    #[must_use]
    pub fn pretok_mode(&self) -> PretokMode {
        self.pretok_mode
    }

    /// Lowercase-hex SHA-256 over the canonical serialization.
    #[must_use]
    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// Merge pair → rank, for encoders.
    #[must_use]
    pub fn merge_ranks(&self) -> HashMap<Pair, u32> {
        self.merges
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, k as u32))
            .collect()
    }

    /// Concatenates token byte strings. Fails on any out-of-range id, naming
    /// the offending position.
    pub fn decode(&self, ids: &[u32]) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        for (index, &id) in ids.iter().enumerate() {
            let bytes = self
                .token_bytes(id)
                .ok_or(Error::TokenOutOfRange {
                    id,
                    index,
                    vocab_size: self.vocab_size(),
                })?;
            out.extend_from_slice(bytes);
        }
        Ok(out)
    }

    fn to_file(&self, with_fingerprint: bool) -> ModelFile {
        ModelFile {
            format_version: MODEL_FORMAT_VERSION,
            mode: self.mode,
            t: self.t,
            pretok_mode: self.pretok_mode,
            vocab: self.vocab.iter().map(hex::encode).collect(),
            merges: self.merges.clone(),
            fingerprint: with_fingerprint.then(|| self.fingerprint.clone()),
        }
    }

    fn compute_fingerprint(&self) -> String {
        let canonical =
            serde_json::to_vec(&self.to_file(false)).expect("model serialization cannot fail");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file(true)).expect("model serialization cannot fail")
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }

    pub fn from_json(json: &str) -> Result<Self> {
        let file: ModelFile =
            serde_json::from_str(json).map_err(|e| Error::ModelFormat(e.to_string()))?;
        if file.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::ModelFormat(format!(
                "unsupported format_version {}",
                file.format_version
            )));
        }
        let model = Self::from_merges(file.merges, file.mode, file.t, file.pretok_mode)?;
        // The stored vocabulary is redundant with the merge list; require it
        // to agree so silent corruption cannot slip through.
        if file.vocab.len() != model.vocab.len() {
            return Err(Error::ModelFormat(format!(
                "vocab length {} does not match 256 + {} merges",
                file.vocab.len(),
                model.merges.len()
            )));
        }
        for (id, hex_str) in file.vocab.iter().enumerate() {
            let bytes = hex::decode(hex_str)
                .map_err(|_| Error::ModelFormat(format!("vocab entry {id} is not valid hex")))?;
            if bytes != model.vocab[id] {
                return Err(Error::ModelFormat(format!(
                    "vocab entry {id} does not match its merge derivation"
                )));
            }
        }
        match file.fingerprint {
            Some(fp) if fp == model.fingerprint => Ok(model),
            Some(fp) => Err(Error::ModelFormat(format!(
                "stored fingerprint {fp} does not match recomputed {}",
                model.fingerprint
            ))),
            None => Err(Error::ModelFormat("missing fingerprint".into())),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let json = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        Self::from_json(&json)
    }
}

/// Token id → occurrence count over some encoded stream, with the producing
/// model's vocabulary size attached (unseen ids count zero but still shape
/// distributional metrics).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TokenFreqTable {
    counts: HashMap<u32, u64>,
    total: u64,
    vocab_size: u32,
}

impl TokenFreqTable {
    #[must_use]
    pub fn new(vocab_size: u32) -> Self {
        Self {
            counts: HashMap::new(),
            total: 0,
            vocab_size,
        }
    }

    pub fn add(&mut self, id: u32, n: u64) {
        debug_assert!(id < self.vocab_size, "token id beyond vocab");
        *self.counts.entry(id).or_insert(0) += n;
        self.total += n;
    }

    /// Total token count N.
    #[must_use]
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Vocabulary size V of the producing model.
    #[must_use]
    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    #[must_use]
    pub fn count(&self, id: u32) -> u64 {
        self.counts.get(&id).copied().unwrap_or(0)
    }

    #[must_use]
    pub fn num_observed(&self) -> usize {
        self.counts.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (u32, u64)> + '_ {
        self.counts.iter().map(|(&id, &c)| (id, c))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_model() -> TokenizerModel {
        // merges: (h,i) → 256, (256,!) → 257
        TokenizerModel::from_merges(
            vec![(b'h' as u32, b'i' as u32), (256, b'!' as u32)],
            TrainMode::Standard,
            None,
            PretokMode::Whitespace,
        )
        .unwrap()
    }

    #[test]
    fn vocab_is_bytes_plus_merges() {
        let m = toy_model();
        assert_eq!(m.vocab_size(), 258);
        assert_eq!(m.token_bytes(256).unwrap(), b"hi");
        assert_eq!(m.token_bytes(257).unwrap(), b"hi!");
    }

    #[test]
    fn decode_concatenates_and_rejects_bad_ids() {
        let m = toy_model();
        assert_eq!(m.decode(&[257, b' ' as u32, 256]).unwrap(), b"hi! hi");
        match m.decode(&[256, 999]) {
            Err(Error::TokenOutOfRange { id: 999, index: 1, .. }) => {}
            other => panic!("unexpected: {other:?}"),
        }
    }

    #[test]
    fn merge_referencing_future_id_is_rejected() {
        let err = TokenizerModel::from_merges(
            vec![(0, 300)],
            TrainMode::Standard,
            None,
            PretokMode::Whitespace,
        )
        .unwrap_err();
        assert!(matches!(err, Error::ModelFormat(_)));
    }

    #[test]
    fn mode_threshold_pairing_is_enforced() {
        assert!(TokenizerModel::from_merges(
            vec![],
            TrainMode::Standard,
            Some(300),
            PretokMode::Whitespace
        )
        .is_err());
        assert!(TokenizerModel::from_merges(
            vec![],
            TrainMode::TwoStage,
            None,
            PretokMode::Whitespace
        )
        .is_err());
        assert!(TokenizerModel::from_merges(
            vec![],
            TrainMode::TwoStage,
            Some(100),
            PretokMode::Whitespace
        )
        .is_err());
    }

    #[test]
    fn json_round_trip_preserves_model_and_fingerprint() {
        let m = toy_model();
        let json = m.to_json();
        let back = TokenizerModel::from_json(&json).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.fingerprint(), m.fingerprint());
        assert_eq!(m.fingerprint().len(), 64);
        assert!(m.fingerprint().chars().all(|c| c.is_ascii_hexdigit()));
    }

    #[test]
    fn fingerprint_changes_when_any_field_changes() {
        let m = toy_model();
        let different_merges = TokenizerModel::from_merges(
            vec![(b'h' as u32, b'i' as u32)],
            TrainMode::Standard,
            None,
            PretokMode::Whitespace,
        )
        .unwrap();
        let different_pretok = TokenizerModel::from_merges(
            vec![(b'h' as u32, b'i' as u32), (256, b'!' as u32)],
            TrainMode::Standard,
            None,
            PretokMode::Plain,
        )
        .unwrap();
        assert_ne!(m.fingerprint(), different_merges.fingerprint());
        assert_ne!(m.fingerprint(), different_pretok.fingerprint());
    }

    #[test]
    fn tampered_json_is_rejected() {
        let m = toy_model();
        let json = m.to_json().replace("\"standard\"", "\"two_stage\"");
        assert!(TokenizerModel::from_json(&json).is_err());
    }

    #[test]
    fn token_freq_table_accumulates() {
        let mut t = TokenFreqTable::new(300);
        t.add(1, 3);
        t.add(256, 2);
        t.add(1, 1);
        assert_eq!(t.total(), 6);
        assert_eq!(t.count(1), 4);
        assert_eq!(t.count(2), 0);
        assert_eq!(t.num_observed(), 2);
    }
}
