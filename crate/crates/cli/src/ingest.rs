//! Shared corpus-reading flags and their mapping onto core ingestion types.

use std::path::PathBuf;

use clap::{Args, ValueEnum};
use tokscope_core::corpus::{Corpus, DocUnit, DocumentStream, IngestConfig, PretokMode, Utf8Policy};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PretokArg {
    /// Split on whitespace; each word keeps one preceding space.
    Whitespace,
    /// No pretokenization; whole documents are single units.
    Plain,
}

impl From<PretokArg> for PretokMode {
    fn from(arg: PretokArg) -> Self {
        match arg {
            PretokArg::Whitespace => PretokMode::Whitespace,
            PretokArg::Plain => PretokMode::Plain,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DocUnitArg {
    /// One document per line.
    Line,
    /// One document per file.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Utf8Arg {
    /// Invalid UTF-8 is a fatal error.
    Reject,
    /// Invalid sequences become U+FFFD.
    Replace,
}

/// Flags shared by every subcommand that reads a text corpus.
#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Input text files, read in order.
    #[arg(long = "input", required = true, num_args = 1.., value_name = "FILE")]
    pub input: Vec<PathBuf>,

    #[arg(long, value_enum, default_value = "line")]
    pub doc_unit: DocUnitArg,

    #[arg(long, value_enum, default_value = "reject")]
    pub utf8: Utf8Arg,

    /// Lowercase documents after decoding.
    #[arg(long)]
    pub lowercase: bool,
}

impl CorpusArgs {
    pub fn ingest_config(&self) -> IngestConfig {
        IngestConfig {
            doc_unit: match self.doc_unit {
                DocUnitArg::Line => DocUnit::Line,
                DocUnitArg::File => DocUnit::File,
            },
            utf8_policy: match self.utf8 {
                Utf8Arg::Reject => Utf8Policy::Reject,
                Utf8Arg::Replace => Utf8Policy::Replace,
            },
            lowercase: self.lowercase,
        }
    }

    /// Reads the whole corpus into memory.
    pub fn read(&self) -> tokscope_core::Result<Corpus> {
        Corpus::read(&self.input, &self.ingest_config())
    }

    /// Opens the corpus as a lazy document stream.
    pub fn open_stream(&self) -> tokscope_core::Result<DocumentStream> {
        DocumentStream::open(&self.input, &self.ingest_config())
    }
}
