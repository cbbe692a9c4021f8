//! Word-level decomposition of per-token loss logs.
//!
//! A loss log pairs every token of a tokenized corpus with its loss in nats.
//! This module aligns those tokens back onto pretokenized words, accumulates
//! per-word totals and means, and aggregates a global cross-entropy with
//! frequent/rare bucketing against a reference word ranking.
//!
//! Log format: line-delimited JSON. The first line is a header
//! `{"schema_version":1,"tokenizer_fingerprint":"…","loss_unit":"nats"}`;
//! each following line is `{"doc_id":…,"token_ids":[…],"losses_nats":[…]}`.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bpe::{Encoder, TokenizerModel, TrainMode};
use crate::corpus::{segment_units, Corpus, WordFreqTable};
use crate::error::{Error, Result};
use crate::kahan::KahanSum;

pub const LOSS_LOG_SCHEMA_VERSION: u32 = 1;

/// How many frequent words make up the "frequent" bucket by default.
pub const DEFAULT_FREQUENT_CUTOFF: u32 = 2500;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossLogHeader {
    pub schema_version: u32,
    pub tokenizer_fingerprint: String,
    pub loss_unit: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossRecord {
    pub doc_id: u64,
    pub token_ids: Vec<u32>,
    pub losses_nats: Vec<f64>,
}

/// An in-memory loss log; for corpora that don't fit, use [`LossLogReader`].
#[derive(Debug, Clone)]
pub struct LossLog {
    pub header: LossLogHeader,
    pub records: Vec<LossRecord>,
}

impl LossLog {
    pub fn read(path: &Path) -> Result<Self> {
        let mut reader = LossLogReader::open(path)?;
        let header = reader.header().clone();
        let records = reader.by_ref().collect::<Result<Vec<_>>>()?;
        Ok(LossLog { header, records })
    }
}

/// Streaming reader: validates the header on open, then yields one record per
/// line with length/finiteness checks. When the log was written in bits and
/// conversion was requested, losses are scaled to nats on the fly.
pub struct LossLogReader {
    lines: std::io::Lines<BufReader<File>>,
    header: LossLogHeader,
    /// Multiplier applied to every loss (ln 2 when converting bits → nats).
    scale: f64,
    line_no: u64,
}

impl LossLogReader {
    /// Opens a log whose losses must already be in nats.
    pub fn open(path: &Path) -> Result<Self> {
        Self::open_inner(path, false)
    }

    /// Opens a log in nats or bits; bit losses are multiplied by ln 2.
    pub fn open_with_bits_conversion(path: &Path) -> Result<Self> {
        Self::open_inner(path, true)
    }

    fn open_inner(path: &Path, allow_bits: bool) -> Result<Self> {
        let file = File::open(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut lines = BufReader::new(file).lines();
        let first = match lines.next() {
            Some(Ok(line)) => line,
            Some(Err(source)) => {
                return Err(Error::Io {
                    path: path.to_path_buf(),
                    source,
                })
            }
            None => {
                return Err(Error::LossLog {
                    locus: "line 1".into(),
                    reason: "missing header line".into(),
                })
            }
        };
        let header: LossLogHeader =
            serde_json::from_str(&first).map_err(|e| Error::LossLog {
                locus: "line 1".into(),
                reason: format!("bad header: {e}"),
            })?;
        if header.schema_version != LOSS_LOG_SCHEMA_VERSION {
            return Err(Error::LossLog {
                locus: "line 1".into(),
                reason: format!(
                    "unsupported schema_version {} (supported: {LOSS_LOG_SCHEMA_VERSION})",
                    header.schema_version
                ),
            });
        }
        let scale = match header.loss_unit.as_str() {
            "nats" => 1.0,
            "bits" if allow_bits => std::f64::consts::LN_2,
            "bits" => {
                return Err(Error::LossLog {
                    locus: "line 1".into(),
                    reason: "losses are in bits; pass the bits→nats conversion flag to accept them"
                        .into(),
                })
            }
            other => {
                return Err(Error::LossLog {
                    locus: "line 1".into(),
                    reason: format!("unknown loss_unit {other:?} (expected \"nats\" or \"bits\")"),
                })
            }
        };
        Ok(LossLogReader {
            lines,
            header,
            scale,
            line_no: 1,
        })
    }

    pub fn header(&self) -> &LossLogHeader {
        &self.header
    }

    fn parse_record(&self, line: &str) -> Result<LossRecord> {
        let mut record: LossRecord =
            serde_json::from_str(line).map_err(|e| Error::LossLog {
                locus: format!("line {}", self.line_no),
                reason: format!("bad record: {e}"),
            })?;
        if record.token_ids.len() != record.losses_nats.len() {
            return Err(Error::LossLog {
                locus: format!("line {} (doc_id {})", self.line_no, record.doc_id),
                reason: format!(
                    "{} token_ids but {} losses",
                    record.token_ids.len(),
                    record.losses_nats.len()
                ),
            });
        }
        for (i, loss) in record.losses_nats.iter_mut().enumerate() {
            if !loss.is_finite() || *loss < 0.0 {
                return Err(Error::LossLog {
                    locus: format!(
                        "line {} (doc_id {}, token index {i})",
                        self.line_no, record.doc_id
                    ),
                    reason: format!("loss {loss} is not a finite non-negative number"),
                });
            }
            *loss *= self.scale;
        }
        Ok(record)
    }
}

impl Iterator for LossLogReader {
    type Item = Result<LossRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            self.line_no += 1;
            match self.lines.next()? {
                Ok(line) if line.trim().is_empty() => continue,
                Ok(line) => return Some(self.parse_record(&line)),
                Err(e) => {
                    return Some(Err(Error::LossLog {
                        locus: format!("line {}", self.line_no),
                        reason: e.to_string(),
                    }))
                }
            }
        }
    }
}

/// Buffered writer for the log format; always writes nats.
pub struct LossLogWriter {
    out: BufWriter<File>,
    path: std::path::PathBuf,
}

impl LossLogWriter {
    pub fn create(path: &Path, tokenizer_fingerprint: &str) -> Result<Self> {
        let io_err = |source| Error::Io {
            path: path.to_path_buf(),
            source,
        };
        let file = File::create(path).map_err(io_err)?;
        let mut out = BufWriter::new(file);
        let header = LossLogHeader {
            schema_version: LOSS_LOG_SCHEMA_VERSION,
            tokenizer_fingerprint: tokenizer_fingerprint.to_string(),
            loss_unit: "nats".to_string(),
        };
        let line = serde_json::to_string(&header).expect("header serializes");
        writeln!(out, "{line}").map_err(io_err)?;
        Ok(LossLogWriter {
            out,
            path: path.to_path_buf(),
        })
    }

    pub fn write_record(&mut self, record: &LossRecord) -> Result<()> {
        debug_assert_eq!(record.token_ids.len(), record.losses_nats.len());
        let line = serde_json::to_string(record).expect("record serializes");
        writeln!(self.out, "{line}").map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }

    pub fn finish(mut self) -> Result<()> {
        self.out.flush().map_err(|source| Error::Io {
            path: self.path.clone(),
            source,
        })
    }
}

/// One word occurrence with the loss attributed to it: the sum of the losses
/// of the tokens whose first byte lies inside the word.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WordLossEvent {
    /// Index into [`AlignmentOutcome::words`].
    pub word: u32,
    pub loss_nats: f64,
    /// Tokens attributed to this occurrence (0 when a preceding
    /// boundary-crossing token swallowed the whole word).
    pub token_count: u32,
}

#[derive(Debug, Clone, Default)]
pub struct AlignmentOutcome {
    /// Interned word surfaces; event `word` fields index into this.
    pub words: Vec<String>,
    pub events: Vec<WordLossEvent>,
    /// Tokens whose bytes span more than one word (two-stage models only);
    /// each such token's loss went entirely to the word holding its first byte.
    pub crossed_boundary_tokens: u64,
}

/// Re-tokenizes each logged document, checks the log's token ids against the
/// model exactly, and splits the losses into per-word-occurrence events.
pub fn align_words<I>(
    header: &LossLogHeader,
    records: I,
    model: &TokenizerModel,
    corpus: &Corpus,
) -> Result<AlignmentOutcome>
where
    I: IntoIterator<Item = Result<LossRecord>>,
{
    if header.tokenizer_fingerprint != model.fingerprint() {
        return Err(Error::FingerprintMismatch {
            log_fingerprint: header.tokenizer_fingerprint.clone(),
            model_fingerprint: model.fingerprint().to_string(),
        });
    }
    let docs: HashMap<u64, &str> = corpus
        .docs
        .iter()
        .map(|d| (d.id, d.text.as_str()))
        .collect();
    let encoder = Encoder::new(model);
    let mut intern: HashMap<String, u32> = HashMap::new();
    let mut outcome = AlignmentOutcome::default();
    let mut seen_docs: std::collections::HashSet<u64> = std::collections::HashSet::new();

    for record in records {
        let record = record?;
        let doc_id = record.doc_id;
        if !seen_docs.insert(doc_id) {
            return Err(Error::LossLog {
                locus: format!("doc_id {doc_id}"),
                reason: "duplicate document entry; each document may be logged once".into(),
            });
        }
        let Some(text) = docs.get(&doc_id).copied() else {
            return Err(Error::Alignment {
                doc_id,
                index: 0,
                reason: "document id not present in the supplied corpus".into(),
            });
        };
        let expected = encoder.encode(text);
        if expected.len() != record.token_ids.len() {
            let index = first_divergence(&expected, &record.token_ids);
            return Err(Error::Alignment {
                doc_id,
                index,
                reason: format!(
                    "log has {} tokens, re-encoding gives {}",
                    record.token_ids.len(),
                    expected.len()
                ),
            });
        }
        if let Some(index) = (0..expected.len()).find(|&i| expected[i] != record.token_ids[i]) {
            return Err(Error::Alignment {
                doc_id,
                index,
                reason: format!(
                    "token id {} in log, {} from re-encoding",
                    record.token_ids[index], expected[index]
                ),
            });
        }
        align_document(
            text,
            &record,
            model,
            &mut intern,
            &mut outcome,
        )?;
    }
    Ok(outcome)
}

fn first_divergence(a: &[u32], b: &[u32]) -> usize {
    a.iter()
        .zip(b.iter())
        .position(|(x, y)| x != y)
        .unwrap_or_else(|| a.len().min(b.len()))
}

fn align_document(
    text: &str,
    record: &LossRecord,
    model: &TokenizerModel,
    intern: &mut HashMap<String, u32>,
    outcome: &mut AlignmentOutcome,
) -> Result<()> {
    // Word spans cover the text contiguously, so each span is delimited by
    // the end offsets of successive units.
    let units = segment_units(text, model.pretok_mode());
    let mut unit_ends = Vec::with_capacity(units.len());
    let mut offset = 0usize;
    let mut unit_ids = Vec::with_capacity(units.len());
    for unit in &units {
        offset += unit.len();
        unit_ends.push(offset);
        let next_id = intern.len() as u32;
        let id = *intern.entry((*unit).to_string()).or_insert(next_id);
        if id == next_id {
            outcome.words.push((*unit).to_string());
        }
        unit_ids.push(id);
    }

    let mut event_loss = vec![0.0f64; units.len()];
    let mut event_tokens = vec![0u32; units.len()];
    let mut unit_idx = 0usize;
    let mut byte_off = 0usize;
    for (i, (&id, &loss)) in record
        .token_ids
        .iter()
        .zip(record.losses_nats.iter())
        .enumerate()
    {
        let len = model
            .token_bytes(id)
            .ok_or(Error::TokenOutOfRange {
                id,
                index: i,
                vocab_size: model.vocab_size(),
            })?
            .len();
        while unit_idx < unit_ends.len() && byte_off >= unit_ends[unit_idx] {
            unit_idx += 1;
        }
        debug_assert!(unit_idx < units.len(), "token starts past the last unit");
        event_loss[unit_idx] += loss;
        event_tokens[unit_idx] += 1;
        let end = byte_off + len;
        if end > unit_ends[unit_idx] {
            debug_assert_eq!(model.mode(), TrainMode::TwoStage);
            outcome.crossed_boundary_tokens += 1;
        }
        byte_off = end;
    }
    debug_assert_eq!(byte_off, text.len(), "token bytes must tile the document");

    for k in 0..units.len() {
        outcome.events.push(WordLossEvent {
            word: unit_ids[k],
            loss_nats: event_loss[k],
            token_count: event_tokens[k],
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Bucket {
    /// Reference rank within the frequent cutoff.
    Frequent,
    /// Ranked in the reference table, but below the cutoff.
    Rare,
    /// Seen in the loss log but absent from the reference table.
    Unranked,
}

impl Bucket {
    #[must_use]
    pub fn as_str(self) -> &'static str {
        match self {
            Bucket::Frequent => "frequent",
            Bucket::Rare => "rare",
            Bucket::Unranked => "unranked",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WordLossEntry {
    pub surface: String,
    /// Occurrences of the word in the evaluated documents.
    pub occurrences: u64,
    /// Tokens attributed to the word across all its occurrences.
    pub token_count: u64,
    pub total_loss_nats: f64,
    /// Mean loss per occurrence: total / occurrences.
    pub mu_nats: f64,
    /// 1-based rank in the reference table, if present there.
    pub rank: Option<u32>,
    pub bucket: Bucket,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BucketShares {
    pub frequent: f64,
    pub rare: f64,
    pub unranked: f64,
}

#[derive(Debug, Clone)]
pub struct LossLedger {
    /// Sorted by total loss descending, ties by surface ascending.
    pub per_word: Vec<WordLossEntry>,
    /// Total tokens across all events.
    pub t_total_tokens: u64,
    /// Total word occurrences across all events.
    pub word_occurrences: u64,
    /// Sum of all attributed losses; equals the sum of the three bucket
    /// totals by construction.
    pub total_loss_nats: f64,
    /// total_loss_nats / t_total_tokens: mean loss per token.
    pub global_ce_nats: f64,
    pub bucket_totals: [f64; 3],
    pub bucket_token_counts: [u64; 3],
    pub bucket_shares: BucketShares,
    pub crossed_boundary_tokens: u64,
    pub frequent_cutoff: u32,
}

/// Aggregates word-loss events into the ledger. `reference` supplies the
/// frequency ranking that splits words into frequent/rare at `frequent_cutoff`
/// (1-based rank ≤ cutoff ⇒ frequent); logged words missing from the
/// reference are kept and reported under "unranked".
pub fn decompose(
    outcome: &AlignmentOutcome,
    reference: &WordFreqTable,
    frequent_cutoff: u32,
) -> Result<LossLedger> {
    if outcome.events.is_empty() {
        return Err(Error::EmptyInput("no word-loss events to decompose".into()));
    }
    if frequent_cutoff == 0 {
        return Err(Error::InvalidArgument("frequent_cutoff must be ≥ 1".into()));
    }

    // Reference ranking: count descending, surface ascending, 1-based.
    let mut ranked: Vec<(&str, u64)> = reference.iter().collect();
    ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let rank_of: HashMap<&str, u32> = ranked
        .iter()
        .enumerate()
        .map(|(i, &(w, _))| (w, (i + 1) as u32))
        .collect();

    struct Acc {
        occurrences: u64,
        token_count: u64,
        total: KahanSum,
    }
    let mut acc: Vec<Acc> = outcome
        .words
        .iter()
        .map(|_| Acc {
            occurrences: 0,
            token_count: 0,
            total: KahanSum::new(),
        })
        .collect();
    for ev in &outcome.events {
        let a = &mut acc[ev.word as usize];
        a.occurrences += 1;
        a.token_count += u64::from(ev.token_count);
        a.total.add(ev.loss_nats);
    }

    let mut per_word: Vec<WordLossEntry> = acc
        .into_iter()
        .enumerate()
        .map(|(w, a)| {
            let surface = outcome.words[w].clone();
            let rank = rank_of.get(surface.as_str()).copied();
            let bucket = match rank {
                Some(r) if r <= frequent_cutoff => Bucket::Frequent,
                Some(_) => Bucket::Rare,
                None => Bucket::Unranked,
            };
            let total = a.total.value();
            WordLossEntry {
                surface,
                occurrences: a.occurrences,
                token_count: a.token_count,
                total_loss_nats: total,
                mu_nats: total / a.occurrences as f64,
                rank,
                bucket,
            }
        })
        .collect();
    per_word.sort_unstable_by(|a, b| {
        b.total_loss_nats
            .total_cmp(&a.total_loss_nats)
            .then_with(|| a.surface.cmp(&b.surface))
    });

    let mut bucket_sums = [KahanSum::new(), KahanSum::new(), KahanSum::new()];
    let mut bucket_token_counts = [0u64; 3];
    let mut t_total_tokens = 0u64;
    let mut word_occurrences = 0u64;
    for entry in &per_word {
        let b = entry.bucket as usize;
        bucket_sums[b].add(entry.total_loss_nats);
        bucket_token_counts[b] += entry.token_count;
        t_total_tokens += entry.token_count;
        word_occurrences += entry.occurrences;
    }
    let bucket_totals = [
        bucket_sums[0].value(),
        bucket_sums[1].value(),
        bucket_sums[2].value(),
    ];
    let total_loss_nats = bucket_totals.iter().sum::<f64>();
    if t_total_tokens == 0 {
        return Err(Error::DegenerateInput(
            "events carry zero tokens; nothing to average".into(),
        ));
    }
    let global_ce_nats = total_loss_nats / t_total_tokens as f64;
    let share = |b: f64| if total_loss_nats > 0.0 { b / total_loss_nats } else { 0.0 };

    Ok(LossLedger {
        per_word,
        t_total_tokens,
        word_occurrences,
        total_loss_nats,
        global_ce_nats,
        bucket_totals,
        bucket_token_counts,
        bucket_shares: BucketShares {
            frequent: share(bucket_totals[0]),
            rare: share(bucket_totals[1]),
            unranked: share(bucket_totals[2]),
        },
        crossed_boundary_tokens: outcome.crossed_boundary_tokens,
        frequent_cutoff,
    })
}

/// Summary block emitted alongside the per-word CSV.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerSummary {
    pub global_ce_nats: f64,
    pub bucket_shares: BucketShares,
    pub crossed_boundary_tokens: u64,
    /// Total token count (the denominator of the global cross-entropy).
    #[serde(rename = "T_total")]
    pub t_total: u64,
    pub word_occurrences: u64,
    pub frequent_cutoff: u32,
}

impl LossLedger {
    #[must_use]
    pub fn summary(&self) -> LedgerSummary {
        LedgerSummary {
            global_ce_nats: self.global_ce_nats,
            bucket_shares: self.bucket_shares.clone(),
            crossed_boundary_tokens: self.crossed_boundary_tokens,
            t_total: self.t_total_tokens,
            word_occurrences: self.word_occurrences,
            frequent_cutoff: self.frequent_cutoff,
        }
    }

    /// Writes the per-word table as CSV: word, T_v, total_loss_nats,
    /// mu_nats, rank, bucket. Rank is blank for unranked words.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| Error::LossLog {
            locus: "ledger csv".into(),
            reason: e.to_string(),
        };
        w.write_record(["word", "T_v", "total_loss_nats", "mu_nats", "rank", "bucket"])
            .map_err(io)?;
        for e in &self.per_word {
            w.write_record([
                e.surface.as_str(),
                &e.occurrences.to_string(),
                &format!("{}", e.total_loss_nats),
                &format!("{}", e.mu_nats),
                &e.rank.map_or(String::new(), |r| r.to_string()),
                e.bucket.as_str(),
            ])
            .map_err(io)?;
        }
        w.flush().map_err(|e| Error::LossLog {
            locus: "ledger csv".into(),
            reason: e.to_string(),
        })
    }
}
