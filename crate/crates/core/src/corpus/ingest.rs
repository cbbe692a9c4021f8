//! Corpus ingestion: files in, validated UTF-8 documents out.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One unit of text. `id` is assigned sequentially over an ingestion pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Document {
    pub id: u64,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DocUnit {
    /// One document per newline-terminated line (the delimiter is stripped).
    Line,
    /// The whole file is a single document.
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Utf8Policy {
    /// Invalid UTF-8 is a fatal error reporting the byte offset.
    Reject,
    /// Invalid sequences are replaced with U+FFFD.
    Replace,
}

#[derive(Debug, Clone)]
pub struct IngestConfig {
    pub doc_unit: DocUnit,
    pub utf8_policy: Utf8Policy,
    /// Unicode-lowercase document text after decoding. Off by default; word
    /// statistics are case-sensitive unless a caller opts in.
    pub lowercase: bool,
}

impl Default for IngestConfig {
    fn default() -> Self {
        Self {
            doc_unit: DocUnit::Line,
            utf8_policy: Utf8Policy::Reject,
            lowercase: false,
        }
    }
}

/// Lazily reads documents from a list of files, in order.
///
/// Yields `Err` at most once and then stops: ingestion errors are fatal.
/// `corpus_bytes` tracks raw on-disk bytes consumed, including line
/// delimiters; it is the denominator later used for compression ratios.
pub struct DocumentStream {
    cfg: IngestConfig,
    pending: std::vec::IntoIter<PathBuf>,
    current: Option<FileCursor>,
    next_id: u64,
    corpus_bytes: u64,
    poisoned: bool,
}

struct FileCursor {
    path: PathBuf,
    reader: BufReader<File>,
    /// Byte offset of the next unread byte, for UTF-8 error loci.
    offset: u64,
}

impl DocumentStream {
    pub fn open<P: AsRef<Path>>(paths: &[P], cfg: &IngestConfig) -> Result<Self> {
        if paths.is_empty() {
            return Err(Error::InvalidArgument("no input files given".into()));
        }
        Ok(Self {
            cfg: cfg.clone(),
            pending: paths
                .iter()
                .map(|p| p.as_ref().to_path_buf())
                .collect::<Vec<_>>()
                .into_iter(),
            current: None,
            next_id: 0,
            corpus_bytes: 0,
            poisoned: false,
        })
    }

    /// Raw bytes consumed so far.
    #[must_use]
    pub fn corpus_bytes(&self) -> u64 {
        self.corpus_bytes
    }

    fn decode(&self, raw: Vec<u8>, path: &Path, base_offset: u64) -> Result<String> {
        let text = match self.cfg.utf8_policy {
            Utf8Policy::Reject => String::from_utf8(raw).map_err(|e| Error::InvalidUtf8 {
                path: path.to_path_buf(),
                byte_offset: base_offset + e.utf8_error().valid_up_to() as u64,
            })?,
            Utf8Policy::Replace => String::from_utf8_lossy(&raw).into_owned(),
        };
        Ok(if self.cfg.lowercase {
            text.to_lowercase()
        } else {
            text
        })
    }

    fn next_doc(&mut self) -> Result<Option<Document>> {
        loop {
            if self.current.is_none() {
                let Some(path) = self.pending.next() else {
                    return Ok(None);
                };
                let file = File::open(&path).map_err(|e| Error::Io {
                    path: path.clone(),
                    source: e,
                })?;
                self.current = Some(FileCursor {
                    path,
                    reader: BufReader::new(file),
                    offset: 0,
                });
            }
            let cursor = self.current.as_mut().expect("cursor set above");
            match self.cfg.doc_unit {
                DocUnit::File => {
                    let mut raw = Vec::new();
                    cursor.reader.read_to_end(&mut raw).map_err(|e| Error::Io {
                        path: cursor.path.clone(),
                        source: e,
                    })?;
                    self.corpus_bytes += raw.len() as u64;
                    let (path, base) = (cursor.path.clone(), cursor.offset);
                    self.current = None;
                    let text = self.decode(raw, &path, base)?;
                    let id = self.next_id;
                    self.next_id += 1;
                    return Ok(Some(Document { id, text }));
                }
                DocUnit::Line => {
                    let mut raw = Vec::new();
                    let n = cursor
                        .reader
                        .read_until(b'\n', &mut raw)
                        .map_err(|e| Error::Io {
                            path: cursor.path.clone(),
                            source: e,
                        })?;
                    if n == 0 {
                        self.current = None;
                        continue;
                    }
                    self.corpus_bytes += n as u64;
                    let base = cursor.offset;
                    cursor.offset += n as u64;
                    let path = cursor.path.clone();
                    if raw.last() == Some(&b'\n') {
                        raw.pop();
                        if raw.last() == Some(&b'\r') {
                            raw.pop();
                        }
                    }
                    let text = self.decode(raw, &path, base)?;
                    let id = self.next_id;
                    self.next_id += 1;
                    return Ok(Some(Document { id, text }));
                }
            }
        }
    }
}

impl Iterator for DocumentStream {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.poisoned {
            return None;
        }
        match self.next_doc() {
            Ok(Some(doc)) => Some(Ok(doc)),
            Ok(None) => None,
            Err(e) => {
                self.poisoned = true;
                Some(Err(e))
            }
        }
    }
}

/// A fully materialized corpus. Most analyses make several passes over the
/// documents, so the command-line driver reads once and reuses this.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    pub docs: Vec<Document>,
    /// Raw ingested bytes including line delimiters (see [`DocumentStream`]).
    pub corpus_bytes: u64,
}

impl Corpus {
    pub fn read<P: AsRef<Path>>(paths: &[P], cfg: &IngestConfig) -> Result<Self> {
        let mut stream = DocumentStream::open(paths, cfg)?;
        let mut docs = Vec::new();
        for doc in &mut stream {
            docs.push(doc?);
        }
        Ok(Self {
            corpus_bytes: stream.corpus_bytes(),
            docs,
        })
    }

    /// Builds an in-memory corpus; `corpus_bytes` counts one delimiter byte
    /// per document to match what line-based file ingestion would report.
    #[must_use]
    pub fn from_texts<S: Into<String>>(texts: Vec<S>) -> Self {
        let mut corpus_bytes = 0u64;
        let docs = texts
            .into_iter()
            .enumerate()
            .map(|(i, t)| {
                let text = t.into();
                corpus_bytes += text.len() as u64 + 1;
                Document {
                    id: i as u64,
                    text,
                }
            })
            .collect();
        Self { docs, corpus_bytes }
    }
}
