//! Corpus-side subcommands: synthesis, word counting, coverage, overlap.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::Args;
use serde::Serialize;
use tokscope_core::corpus::{count_words_stream, overlap, PretokMode, WordFreqTable};
use tokscope_core::textgen::{generate_file, TextGenConfig};

use crate::ingest::{CorpusArgs, PretokArg};
use crate::manifest::ManifestBuilder;

#[derive(Debug, Args)]
pub struct MakeCorpusArgs {
    /// RNG seed; the output is a pure function of (seed, bytes).
    #[arg(long)]
    pub seed: u64,

    /// Target size; generation stops at the first document boundary past it.
    #[arg(long, value_name = "BYTES")]
    pub bytes: u64,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn make_corpus(args: &MakeCorpusArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.set_seed(args.seed);
    let cfg = TextGenConfig {
        seed: args.seed,
        target_bytes: args.bytes,
    };
    let stats = generate_file(&args.out, &cfg)
        .with_context(|| format!("generating corpus {}", args.out.display()))?;
    log::info!(
        "wrote {} documents ({} bytes) to {}",
        stats.documents,
        stats.bytes,
        args.out.display()
    );
    manifest.write_beside(&args.out)
}

#[derive(Debug, Args)]
pub struct CountWordsArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[arg(long, value_enum, default_value = "whitespace")]
    pub pretok: PretokArg,

    /// Output CSV of (word, count), most frequent first.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn count_words(args: &CountWordsArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_inputs(&args.corpus.input)?;
    let stream = args.corpus.open_stream()?;
    let table = count_words_stream(stream, args.pretok.into())?;
    let file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    table.write_csv(BufWriter::new(file))?;
    log::info!(
        "{} word types, {} occurrences, {} corpus bytes",
        table.num_types(),
        table.total(),
        table.corpus_bytes()
    );
    manifest.write_beside(&args.out)
}

#[derive(Debug, Args)]
pub struct CoverageArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[arg(long, value_enum, default_value = "whitespace")]
    pub pretok: PretokArg,

    /// Comma-separated rank cutoffs, strictly increasing.
    #[arg(long, value_name = "N1,N2,...", value_delimiter = ',', required = true)]
    pub cutoffs: Vec<usize>,

    /// Output CSV of (n, covered_fraction).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct CoverageRow {
    n: usize,
    covered_fraction: f64,
}

pub fn coverage(args: &CoverageArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_inputs(&args.corpus.input)?;
    let stream = args.corpus.open_stream()?;
    let table = count_words_stream(stream, args.pretok.into())?;
    let curve = table.coverage_curve(&args.cutoffs)?;
    let mut writer = csv::Writer::from_path(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    for point in &curve.points {
        writer.serialize(CoverageRow {
            n: point.n,
            covered_fraction: point.covered_fraction,
        })?;
    }
    writer.flush()?;
    manifest.write_beside(&args.out)
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    /// Files of the first corpus.
    #[arg(long = "a", required = true, num_args = 1.., value_name = "FILE")]
    pub a: Vec<PathBuf>,

    /// Files of the second corpus.
    #[arg(long = "b", required = true, num_args = 1.., value_name = "FILE")]
    pub b: Vec<PathBuf>,

    /// Compare the top-n words of each side.
    #[arg(long, default_value_t = 2500)]
    pub top: usize,

    #[arg(long, value_enum, default_value = "whitespace")]
    pub pretok: PretokArg,

    /// Output file holding one JSON number in [0, 1].
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn overlap_cmd(args: &OverlapArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_inputs(&args.a)?;
    manifest.hash_inputs(&args.b)?;
    let mode: PretokMode = args.pretok.into();
    let table_a = side_table(&args.a, mode)?;
    let table_b = side_table(&args.b, mode)?;
    let value = overlap(&table_a, &table_b, args.top)?;
    let mut file = File::create(&args.out)
        .with_context(|| format!("creating {}", args.out.display()))?;
    writeln!(file, "{}", serde_json::to_string(&value)?)?;
    log::info!("top-{} overlap: {value:.6}", args.top);
    manifest.write_beside(&args.out)
}

fn side_table(paths: &[PathBuf], mode: PretokMode) -> anyhow::Result<WordFreqTable> {
    let stream = tokscope_core::corpus::DocumentStream::open(
        paths,
        &tokscope_core::corpus::IngestConfig::default(),
    )?;
    Ok(count_words_stream(stream, mode)?)
}
