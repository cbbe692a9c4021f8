//! Word-frequency tables, coverage curves, and top-N overlap.

use std::collections::HashMap;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::corpus::ingest::{Corpus, DocumentStream};
use crate::corpus::pretok::{pretokenize, PretokMode};
use crate::error::{Error, Result};

const CACHE_MAGIC: &[u8; 4] = b"WFTB";
const CACHE_VERSION: u32 = 1;

/// Word surface → occurrence count, plus corpus-level totals.
///
/// Ordering everywhere is by count descending with ties broken by raw byte
/// order of the surface ascending, so that every ranking this crate produces
/// is deterministic.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct WordFreqTable {
    counts: HashMap<String, u64>,
    total: u64,
    corpus_bytes: u64,
}

/// One point of a cumulative coverage curve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoveragePoint {
    /// Rank cutoff (top-n words).
    pub n: usize,
    /// Fraction of all word occurrences covered by the top-n words.
    pub covered_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CoverageCurve {
    pub points: Vec<CoveragePoint>,
}

impl WordFreqTable {
    #[must_use]
    pub fn total(&self) -> u64 {
        self.total
    }

    #[must_use]
    pub fn corpus_bytes(&self) -> u64 {
        self.corpus_bytes
    }

    #[must_use]
    pub fn num_types(&self) -> usize {
        self.counts.len()
    }

    #[must_use]
    pub fn count(&self, word: &str) -> u64 {
        self.counts.get(word).copied().unwrap_or(0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, u64)> {
        self.counts.iter().map(|(w, &c)| (w.as_str(), c))
    }

    pub fn add(&mut self, word: &str, n: u64) {
        *self.counts.entry(word.to_owned()).or_insert(0) += n;
        self.total += n;
    }

    pub fn set_corpus_bytes(&mut self, bytes: u64) {
        self.corpus_bytes = bytes;
    }

    /// Associatively merges another table into this one (for sharded counts).
    pub fn merge(&mut self, other: WordFreqTable) {
        for (w, c) in other.counts {
            *self.counts.entry(w).or_insert(0) += c;
        }
        self.total += other.total;
        self.corpus_bytes += other.corpus_bytes;
    }

    /// Top `n` words by count descending, ties by byte order ascending.
    /// Returns `min(n, num_types)` entries.
    pub fn top_n(&self, n: usize) -> Result<Vec<(&str, u64)>> {
        if n == 0 {
            return Err(Error::InvalidArgument("top_n requires n >= 1".into()));
        }
        let mut entries: Vec<(&str, u64)> = self.iter().collect();
        entries.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        entries.truncate(n);
        Ok(entries)
    }

    /// Cumulative covered fraction at each rank cutoff.
    ///
    /// Cutoffs must be ≥ 1 and strictly increasing. A cutoff at or past the
    /// number of types covers exactly 1.0.
    pub fn coverage_curve(&self, cutoffs: &[usize]) -> Result<CoverageCurve> {
        if self.total == 0 {
            return Err(Error::EmptyInput("no word occurrences".into()));
        }
        if cutoffs.is_empty() {
            return Err(Error::InvalidArgument("no coverage cutoffs given".into()));
        }
        for pair in cutoffs.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::InvalidArgument(
                    "coverage cutoffs must be strictly increasing".into(),
                ));
            }
        }
        if cutoffs[0] == 0 {
            return Err(Error::InvalidArgument("coverage cutoffs must be >= 1".into()));
        }
        let mut counts: Vec<u64> = self.counts.values().copied().collect();
        counts.sort_unstable_by(|a, b| b.cmp(a));
        let mut points = Vec::with_capacity(cutoffs.len());
        let mut cum = 0u64;
        let mut consumed = 0usize;
        for &cutoff in cutoffs {
            let upto = cutoff.min(counts.len());
            while consumed < upto {
                cum += counts[consumed];
                consumed += 1;
            }
            points.push(CoveragePoint {
                n: cutoff,
                covered_fraction: cum as f64 / self.total as f64,
            });
        }
        Ok(CoverageCurve { points })
    }

    /// Writes the full table as CSV (`surface,count`), sorted.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["surface", "count"]).map_err(csv_io)?;
        if self.num_types() > 0 {
            for (surface, count) in self.top_n(self.num_types())? {
                w.write_record([surface, &count.to_string()]).map_err(csv_io)?;
            }
        }
        w.flush().map_err(|e| Error::Io {
            path: "<csv>".into(),
            source: e,
        })?;
        Ok(())
    }

    /// Writes the compact binary cache. Entries are stored sorted so the file
    /// is byte-deterministic for a given table.
    pub fn save_cache(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut w = BufWriter::new(file);
        let io_err = |e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        };
        w.write_all(CACHE_MAGIC).map_err(io_err)?;
        w.write_all(&CACHE_VERSION.to_le_bytes()).map_err(io_err)?;
        w.write_all(&self.corpus_bytes.to_le_bytes()).map_err(io_err)?;
        w.write_all(&self.total.to_le_bytes()).map_err(io_err)?;
        w.write_all(&(self.counts.len() as u64).to_le_bytes())
            .map_err(io_err)?;
        if self.num_types() > 0 {
            for (surface, count) in self.top_n(self.num_types())? {
                w.write_all(&(surface.len() as u32).to_le_bytes()).map_err(io_err)?;
                w.write_all(surface.as_bytes()).map_err(io_err)?;
                w.write_all(&count.to_le_bytes()).map_err(io_err)?;
            }
        }
        w.flush().map_err(io_err)?;
        Ok(())
    }

    pub fn load_cache(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut r = BufReader::new(file);
        let bad = |msg: &str| Error::CacheFormat(format!("{}: {msg}", path.display()));
        let mut magic = [0u8; 4];
        read_exact(&mut r, &mut magic, path)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("bad magic"));
        }
        let version = read_u32(&mut r, path)?;
        if version != CACHE_VERSION {
            return Err(bad(&format!("unsupported cache version {version}")));
        }
        let corpus_bytes = read_u64(&mut r, path)?;
        let total = read_u64(&mut r, path)?;
        let n_entries = read_u64(&mut r, path)?;
        let mut counts = HashMap::with_capacity(n_entries as usize);
        let mut sum = 0u64;
        for _ in 0..n_entries {
            let len = read_u32(&mut r, path)? as usize;
            let mut buf = vec![0u8; len];
            read_exact(&mut r, &mut buf, path)?;
            let surface = String::from_utf8(buf).map_err(|_| bad("non-UTF-8 surface"))?;
            let count = read_u64(&mut r, path)?;
            sum += count;
            if counts.insert(surface, count).is_some() {
                return Err(bad("duplicate surface"));
            }
        }
        if sum != total {
            return Err(bad("entry counts do not sum to recorded total"));
        }
        Ok(Self {
            counts,
            total,
            corpus_bytes,
        })
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io {
        path: "<csv>".into(),
        source: std::io::Error::other(e),
    }
}

fn read_exact<R: Read>(r: &mut R, buf: &mut [u8], path: &Path) -> Result<()> {
    r.read_exact(buf).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn read_u32<R: Read>(r: &mut R, path: &Path) -> Result<u32> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b, path)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R, path: &Path) -> Result<u64> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b, path)?;
    Ok(u64::from_le_bytes(b))
}

/// Counts pretokenized words over an in-memory corpus.
#[must_use]
pub fn count_words(corpus: &Corpus, mode: PretokMode) -> WordFreqTable {
    let mut table = WordFreqTable::default();
    for doc in &corpus.docs {
        for word in pretokenize(&doc.text, mode) {
            table.add(word, 1);
        }
    }
    table.set_corpus_bytes(corpus.corpus_bytes);
    table
}

/// Streaming variant of [`count_words`]; propagates ingestion errors.
pub fn count_words_stream(mut stream: DocumentStream, mode: PretokMode) -> Result<WordFreqTable> {
    let mut table = WordFreqTable::default();
    for doc in &mut stream {
        let doc = doc?;
        for word in pretokenize(&doc.text, mode) {
            table.add(word, 1);
        }
    }
    table.set_corpus_bytes(stream.corpus_bytes());
    Ok(table)
}

/// Fraction of shared surfaces between the two tables' top-n lists.
///
/// Requires `n` to be at most the number of types in each table, since the
/// result is normalized by `n`.
pub fn overlap(a: &WordFreqTable, b: &WordFreqTable, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::InvalidArgument("overlap requires n >= 1".into()));
    }
    if n > a.num_types() || n > b.num_types() {
        return Err(Error::InvalidArgument(format!(
            "overlap n = {n} exceeds type count ({} vs {})",
            a.num_types(),
            b.num_types()
        )));
    }
    let top_a: std::collections::HashSet<&str> =
        a.top_n(n)?.into_iter().map(|(w, _)| w).collect();
    let shared = b
        .top_n(n)?
        .into_iter()
        .filter(|(w, _)| top_a.contains(w))
        .count();
    Ok(shared as f64 / n as f64)
}
