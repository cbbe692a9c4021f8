//! Greedy BPE training over a 256-byte base alphabet.
//!
//! Both stages run the same incremental engine: sequences of symbols in a
//! linked-list arena, exact pair counts maintained under merges, and a lazy
//! max-heap keyed by (count, byte-lexicographic pair) for selection. Stage one
//! trains on distinct pretokenized words weighted by count, so merges never
//! cross word boundaries. In two-stage mode, once the vocabulary reaches the
//! threshold `t` the engine is rebuilt over whole documents (encoded with the
//! stage-one merges) and later merges may cross whitespace.

use std::cmp::Ordering;
use std::collections::{BinaryHeap, HashMap, HashSet};

use crate::bpe::encoder::apply_merges;
use crate::bpe::model::{Pair, TokenizerModel, TrainMode, BYTE_VOCAB};
use crate::corpus::{count_words, segment_units, Corpus, PretokMode, WordFreqTable};
use crate::error::{Error, Result};

const NONE: u32 = u32::MAX;
const DEAD: u32 = u32::MAX;

/// Pairs must occur at least this often to be merged.
pub const DEFAULT_MIN_PAIR_FREQ: u64 = 2;

#[derive(Debug, Clone)]
pub struct TrainConfig {
    /// Target vocabulary size including the 256 byte tokens. Must be ≥ 257.
    pub vocab_size: u32,
    pub mode: TrainMode,
    /// Stage-switch threshold; required in two-stage mode, 256 < t < vocab_size.
    pub t: Option<u32>,
    pub pretok_mode: PretokMode,
    /// Minimum pair frequency for a merge.
    pub min_pair_freq: u64,
    /// Upper bound on documents used for stage-two counting (first n in
    /// stream order); bounds arena memory on large corpora. `None` = all.
    pub stage_two_doc_cap: Option<usize>,
}

impl TrainConfig {
    #[must_use]
    pub fn standard(vocab_size: u32) -> Self {
        Self {
            vocab_size,
            mode: TrainMode::Standard,
            t: None,
            pretok_mode: PretokMode::Whitespace,
            min_pair_freq: DEFAULT_MIN_PAIR_FREQ,
            stage_two_doc_cap: None,
        }
    }

    #[must_use]
    pub fn two_stage(vocab_size: u32, t: u32) -> Self {
        Self {
            vocab_size,
            mode: TrainMode::TwoStage,
            t: Some(t),
            pretok_mode: PretokMode::Whitespace,
            min_pair_freq: DEFAULT_MIN_PAIR_FREQ,
            stage_two_doc_cap: None,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.vocab_size <= BYTE_VOCAB {
            return Err(Error::InvalidArgument(format!(
                "vocab_size {} must exceed the byte alphabet ({BYTE_VOCAB})",
                self.vocab_size
            )));
        }
        if self.min_pair_freq == 0 {
            return Err(Error::InvalidArgument("min_pair_freq must be >= 1".into()));
        }
        match (self.mode, self.t) {
            (TrainMode::Standard, None) => Ok(()),
            (TrainMode::Standard, Some(_)) => Err(Error::InvalidArgument(
                "threshold t is only valid in two_stage mode".into(),
            )),
            (TrainMode::TwoStage, None) => Err(Error::InvalidArgument(
                "two_stage mode requires a threshold t".into(),
            )),
            (TrainMode::TwoStage, Some(t)) => {
                if t <= BYTE_VOCAB || t >= self.vocab_size {
                    Err(Error::InvalidArgument(format!(
                        "threshold t = {t} must satisfy {BYTE_VOCAB} < t < vocab_size ({})",
                        self.vocab_size
                    )))
                } else {
                    Ok(())
                }
            }
        }
    }
}

/// Per-run training telemetry.
#[derive(Debug, Clone)]
pub struct TrainStats {
    /// Selected pair frequency for each merge, in merge order.
    pub merge_freqs: Vec<u64>,
    /// Number of merges learned in stage one (equals all merges when standard).
    pub stage_one_merges: usize,
    pub requested_vocab: u32,
}

#[derive(Debug, Clone)]
pub struct TrainerArtifacts {
    pub model: TokenizerModel,
    pub stats: TrainStats,
}

pub struct Trainer {
    cfg: TrainConfig,
}

impl Trainer {
    pub fn new(cfg: TrainConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    /// Trains a standard model from a word-frequency table.
    pub fn train_from_table(&self, table: &WordFreqTable) -> Result<TrainerArtifacts> {
        if self.cfg.mode == TrainMode::TwoStage {
            return Err(Error::InvalidArgument(
                "two_stage training requires documents; use train_from_corpus".into(),
            ));
        }
        if table.total() == 0 {
            return Err(Error::EmptyInput("empty training data".into()));
        }
        let mut engine = MergeEngine::from_word_table(table, self.cfg.min_pair_freq);
        engine.run(self.cfg.vocab_size);
        let stage_one_merges = engine.merges.len();
        self.finish(engine, stage_one_merges)
    }

    /// Trains from documents. Standard mode counts words first; two-stage mode
    /// additionally rebuilds the engine over whole documents at the threshold.
    pub fn train_from_corpus(&self, corpus: &Corpus) -> Result<TrainerArtifacts> {
        let table = count_words(corpus, self.cfg.pretok_mode);
        if table.total() == 0 {
            return Err(Error::EmptyInput("empty training data".into()));
        }
        let stage_one_target = match self.cfg.mode {
            TrainMode::Standard => self.cfg.vocab_size,
            TrainMode::TwoStage => self.cfg.t.expect("validated"),
        };
        let mut engine = MergeEngine::from_word_table(&table, self.cfg.min_pair_freq);
        engine.run(stage_one_target);
        let stage_one_merges = engine.merges.len();

        if self.cfg.mode == TrainMode::TwoStage {
            if (engine.vocab.len() as u32) < stage_one_target {
                // Stage one saturated below t: cross-boundary merges are only
                // allowed once |vocab| >= t, so training stops here.
                log::warn!(
                    "stage one saturated at vocab {} before threshold {stage_one_target}; \
                     no cross-boundary merges learned",
                    engine.vocab.len()
                );
            } else {
                engine = engine.into_document_stage(corpus, &self.cfg);
                engine.run(self.cfg.vocab_size);
            }
        }
        self.finish(engine, stage_one_merges)
    }

    fn finish(&self, engine: MergeEngine, stage_one_merges: usize) -> Result<TrainerArtifacts> {
        let MergeEngine {
            merges,
            merge_freqs,
            ..
        } = engine;
        let model = TokenizerModel::from_merges(
            merges,
            self.cfg.mode,
            self.cfg.t,
            self.cfg.pretok_mode,
        )?;
        if model.vocab_size() < self.cfg.vocab_size {
            log::info!(
                "training stopped at vocab {} of requested {}: no pair occurs >= {} times",
                model.vocab_size(),
                self.cfg.vocab_size,
                self.cfg.min_pair_freq
            );
        }
        Ok(TrainerArtifacts {
            model,
            stats: TrainStats {
                merge_freqs,
                stage_one_merges,
                requested_vocab: self.cfg.vocab_size,
            },
        })
    }
}

/// Heap entry for pair selection: highest count wins; ties go to the smallest
/// (left bytes, right bytes) in raw byte order. Distinct token ids can share a
/// byte string (two merge paths can concatenate to the same bytes), so the
/// pair ids are the final tie-break to keep the order total and deterministic.
struct Candidate {
    count: u64,
    left: Vec<u8>,
    right: Vec<u8>,
    pair: Pair,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Candidate {}
impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        self.count
            .cmp(&other.count)
            .then_with(|| other.left.cmp(&self.left))
            .then_with(|| other.right.cmp(&self.right))
            .then_with(|| other.pair.cmp(&self.pair))
    }
}

/// Symbol sequences in a flat arena with intrusive prev/next links.
struct Arena {
    sym: Vec<u32>,
    next: Vec<u32>,
    prev: Vec<u32>,
    /// Position → owning sequence, for weight lookup.
    seq_of: Vec<u32>,
    /// Sequence → multiplicity of that sequence in the training data.
    weights: Vec<u64>,
}

impl Arena {
    fn from_sequences<I>(seqs: I) -> Self
    where
        I: IntoIterator<Item = (Vec<u32>, u64)>,
    {
        let mut arena = Arena {
            sym: Vec::new(),
            next: Vec::new(),
            prev: Vec::new(),
            seq_of: Vec::new(),
            weights: Vec::new(),
        };
        for (seq, weight) in seqs {
            if seq.is_empty() {
                continue;
            }
            let seq_id = arena.weights.len() as u32;
            arena.weights.push(weight);
            let start = arena.sym.len() as u32;
            let len = seq.len() as u32;
            for (k, s) in seq.into_iter().enumerate() {
                let k = k as u32;
                arena.sym.push(s);
                arena.prev.push(if k == 0 { NONE } else { start + k - 1 });
                arena
                    .next
                    .push(if k + 1 == len { NONE } else { start + k + 1 });
                arena.seq_of.push(seq_id);
            }
        }
        arena
    }

    fn weight_at(&self, pos: u32) -> u64 {
        self.weights[self.seq_of[pos as usize] as usize]
    }
}

struct MergeEngine {
    arena: Arena,
    pair_counts: HashMap<Pair, i64>,
    pair_pos: HashMap<Pair, Vec<u32>>,
    heap: BinaryHeap<Candidate>,
    vocab: Vec<Vec<u8>>,
    merges: Vec<Pair>,
    merge_freqs: Vec<u64>,
    min_freq: u64,
}

impl MergeEngine {
    /// Builds the stage-one engine: one sequence per distinct word, weighted
    /// by its count, ordered by surface bytes for determinism.
    fn from_word_table(table: &WordFreqTable, min_freq: u64) -> Self {
        let mut words: Vec<(&str, u64)> = table.iter().collect();
        words.sort_unstable_by(|a, b| a.0.cmp(b.0));
        let arena = Arena::from_sequences(words.into_iter().map(|(w, c)| {
            (w.bytes().map(u32::from).collect::<Vec<u32>>(), c)
        }));
        Self::from_arena(arena, initial_vocab(), Vec::new(), Vec::new(), min_freq)
    }

    /// Rebuilds over whole documents for stage two, carrying the learned
    /// merges. Documents are encoded with the stage-one merges, then treated
    /// as single sequences so pairs may cross whitespace.
    fn into_document_stage(self, corpus: &Corpus, cfg: &TrainConfig) -> Self {
        let ranks: HashMap<Pair, u32> = self
            .merges
            .iter()
            .enumerate()
            .map(|(k, &p)| (p, k as u32))
            .collect();
        let cap = cfg.stage_two_doc_cap.unwrap_or(usize::MAX);
        let seqs = corpus.docs.iter().take(cap).filter_map(|doc| {
            if doc.text.is_empty() {
                return None;
            }
            let mut seq = Vec::new();
            for unit in segment_units(&doc.text, cfg.pretok_mode) {
                seq.extend(apply_merges(unit.as_bytes(), &self.merges, &ranks));
            }
            Some((seq, 1u64))
        });
        let arena = Arena::from_sequences(seqs);
        Self::from_arena(arena, self.vocab, self.merges, self.merge_freqs, self.min_freq)
    }

    fn from_arena(
        arena: Arena,
        vocab: Vec<Vec<u8>>,
        merges: Vec<Pair>,
        merge_freqs: Vec<u64>,
        min_freq: u64,
    ) -> Self {
        let mut engine = MergeEngine {
            arena,
            pair_counts: HashMap::new(),
            pair_pos: HashMap::new(),
            heap: BinaryHeap::new(),
            vocab,
            merges,
            merge_freqs,
            min_freq,
        };
        engine.scan_initial_pairs();
        engine
    }

    fn scan_initial_pairs(&mut self) {
        for pos in 0..self.arena.sym.len() as u32 {
            let q = self.arena.next[pos as usize];
            if q == NONE {
                continue;
            }
            let pair = (self.arena.sym[pos as usize], self.arena.sym[q as usize]);
            let w = self.arena.weight_at(pos);
            *self.pair_counts.entry(pair).or_insert(0) += w as i64;
            self.pair_pos.entry(pair).or_default().push(pos);
        }
        let candidates: Vec<Pair> = self
            .pair_counts
            .iter()
            .filter(|&(_, &c)| c as u64 >= self.min_freq)
            .map(|(&p, _)| p)
            .collect();
        for pair in candidates {
            self.push_candidate(pair);
        }
    }

    fn push_candidate(&mut self, pair: Pair) {
        let count = *self.pair_counts.get(&pair).unwrap_or(&0);
        if count <= 0 || (count as u64) < self.min_freq {
            return;
        }
        self.heap.push(Candidate {
            count: count as u64,
            left: self.vocab[pair.0 as usize].clone(),
            right: self.vocab[pair.1 as usize].clone(),
            pair,
        });
    }

    /// Runs greedy merging until the vocabulary reaches `target` or no pair
    /// meets the frequency floor.
    fn run(&mut self, target: u32) {
        while (self.vocab.len() as u32) < target {
            let Some((pair, count)) = self.pop_valid() else {
                break;
            };
            self.apply_merge(pair, count);
        }
    }

    /// Pops candidates until one matches the live count for its pair.
    /// Every count change pushes a fresh candidate, so discarding stale
    /// entries never loses the true maximum.
    fn pop_valid(&mut self) -> Option<(Pair, u64)> {
        while let Some(c) = self.heap.pop() {
            let live = *self.pair_counts.get(&c.pair).unwrap_or(&0);
            if live <= 0 || (live as u64) < self.min_freq {
                continue;
            }
            if live as u64 == c.count {
                return Some((c.pair, c.count));
            }
        }
        None
    }

    fn apply_merge(&mut self, pair: Pair, count: u64) {
        let (a, b) = pair;
        let new_id = self.vocab.len() as u32;
        let mut bytes = self.vocab[a as usize].clone();
        bytes.extend_from_slice(&self.vocab[b as usize]);
        self.vocab.push(bytes);
        self.merges.push(pair);
        self.merge_freqs.push(count);

        let mut positions = self.pair_pos.remove(&pair).unwrap_or_default();
        positions.sort_unstable();
        positions.dedup();

        let mut touched: HashSet<Pair> = HashSet::new();
        let arena = &mut self.arena;
        for pos in positions {
            let p = pos as usize;
            if arena.sym[p] != a {
                continue; // stale occurrence
            }
            let q = arena.next[p];
            if q == NONE || arena.sym[q as usize] != b {
                continue;
            }
            let w = arena.weight_at(pos) as i64;
            let l = arena.prev[p];
            let r = arena.next[q as usize];

            if l != NONE {
                let left_pair = (arena.sym[l as usize], a);
                *self.pair_counts.entry(left_pair).or_insert(0) -= w;
                touched.insert(left_pair);
            }
            if r != NONE {
                let right_pair = (b, arena.sym[r as usize]);
                *self.pair_counts.entry(right_pair).or_insert(0) -= w;
                touched.insert(right_pair);
            }
            *self.pair_counts.entry(pair).or_insert(0) -= w;

            arena.sym[p] = new_id;
            arena.sym[q as usize] = DEAD;
            arena.next[p] = r;
            if r != NONE {
                arena.prev[r as usize] = pos;
            }

            if l != NONE {
                let np = (arena.sym[l as usize], new_id);
                *self.pair_counts.entry(np).or_insert(0) += w;
                self.pair_pos.entry(np).or_default().push(l);
                touched.insert(np);
            }
            if r != NONE {
                let np = (new_id, arena.sym[r as usize]);
                *self.pair_counts.entry(np).or_insert(0) += w;
                self.pair_pos.entry(np).or_default().push(pos);
                touched.insert(np);
            }
        }

        let residual = self.pair_counts.remove(&pair).unwrap_or(0);
        debug_assert_eq!(residual, 0, "merged pair count must drain to zero");
        touched.remove(&pair);

        let mut touched: Vec<Pair> = touched.into_iter().collect();
        touched.sort_unstable(); // heap pushes in deterministic order
        for t in touched {
            debug_assert!(*self.pair_counts.get(&t).unwrap_or(&0) >= 0);
            self.push_candidate(t);
        }
    }
}

fn initial_vocab() -> Vec<Vec<u8>> {
    (0..=255u8).map(|b| vec![b]).collect()
}
