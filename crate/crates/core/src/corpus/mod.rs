//! Corpus ingestion, pretokenization, and word statistics.

mod freq;
mod ingest;
mod pretok;

pub use freq::{count_words, count_words_stream, overlap, CoverageCurve, CoveragePoint, WordFreqTable};
pub use ingest::{Corpus, DocUnit, Document, DocumentStream, IngestConfig, Utf8Policy};
pub use pretok::{pretokenize, segment_units, PretokMode};
