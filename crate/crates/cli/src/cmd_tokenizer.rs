//! Tokenizer-side subcommands: training and the model/corpus stats report.

use std::collections::HashMap;
use std::fs::File;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use serde::Serialize;
use tokscope_core::bpe::{
    token_counts, tokens_per_word, TokenizerModel, TrainConfig, Trainer, DEFAULT_MIN_PAIR_FREQ,
};
use tokscope_core::corpus::{count_words, Corpus, PretokMode};
use tokscope_core::metrics::{complexity_report, jsd_from_uniform};
use tokscope_core::Error;

use crate::ingest::{CorpusArgs, PretokArg};
use crate::manifest::ManifestBuilder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Standard BPE: merges stay within pretokenization units.
    Bpe,
    /// Two-stage training: past --t merges may cross unit boundaries.
    Superbpe,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Final vocabulary size, including the 256 byte tokens.
    #[arg(long)]
    pub vocab_size: u32,

    #[arg(long, value_enum, default_value = "bpe")]
    pub mode: ModeArg,

    /// Vocabulary size at which two-stage training switches to
    /// whole-document sequences. Required with --mode superbpe.
    #[arg(long)]
    pub t: Option<u32>,

    #[arg(long, value_enum, default_value = "whitespace")]
    pub pretok: PretokArg,

    /// Stop merging when no pair occurs at least this often.
    #[arg(long, default_value_t = DEFAULT_MIN_PAIR_FREQ)]
    pub min_pair_freq: u64,

    /// Output model JSON.
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn train_tokenizer(args: &TrainArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_inputs(&args.corpus.input)?;
    let mut cfg = match args.mode {
        ModeArg::Bpe => {
            if args.t.is_some() {
                return Err(Error::InvalidArgument(
                    "--t only applies to --mode superbpe".into(),
                )
                .into());
            }
            TrainConfig::standard(args.vocab_size)
        }
        ModeArg::Superbpe => {
            let t = args.t.ok_or_else(|| {
                Error::InvalidArgument("--mode superbpe requires --t".into())
            })?;
            TrainConfig::two_stage(args.vocab_size, t)
        }
    };
    cfg.pretok_mode = args.pretok.into();
    cfg.min_pair_freq = args.min_pair_freq;

    let corpus = args.corpus.read()?;
    let artifacts = Trainer::new(cfg)?.train_from_corpus(&corpus)?;
    let model = &artifacts.model;
    model.save(&args.out)?;
    log::info!(
        "trained {} tokens ({} merges, {} in stage 1), fingerprint {}",
        model.vocab_size(),
        model.merges().len(),
        artifacts.stats.stage_one_merges,
        model.fingerprint()
    );
    manifest.set_fingerprint(model.fingerprint());
    manifest.write_beside(&args.out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FormatArg {
    Csv,
    Json,
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    /// Model files; one report row each, in argument order.
    #[arg(long = "model", required = true, num_args = 1.., value_name = "FILE")]
    pub models: Vec<PathBuf>,

    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Word-level segmentation stats cover the corpus's top-n words.
    #[arg(long, default_value_t = 2500)]
    pub top_words: usize,

    #[arg(long, value_enum, default_value = "csv")]
    pub format: FormatArg,

    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

#[derive(Debug, Serialize)]
struct StatsRow {
    vocab_size: u32,
    #[serde(rename = "N")]
    n_tokens: u64,
    #[serde(rename = "H_bits")]
    h_bits: f64,
    #[serde(rename = "K_bytes")]
    k_bytes: f64,
    ncr: f64,
    jsd: f64,
    avg_tokens_per_word: f64,
    single_token_fraction: f64,
}

pub fn stats(args: &StatsArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_inputs(&args.models)?;
    manifest.hash_inputs(&args.corpus.input)?;

    let mut models = Vec::with_capacity(args.models.len());
    for path in &args.models {
        let model = TokenizerModel::load(path)
            .with_context(|| format!("loading model {}", path.display()))?;
        models.push(model);
    }
    if let [only] = models.as_slice() {
        manifest.set_fingerprint(only.fingerprint());
    }
    if models
        .windows(2)
        .any(|pair| pair[0].pretok_mode() != pair[1].pretok_mode())
    {
        log::warn!("models disagree on pretokenization; rows are not directly comparable");
    }

    let corpus = args.corpus.read()?;
    // Word tables are per pretokenization mode, shared across models.
    let mut word_tables: HashMap<PretokMode, _> = HashMap::new();
    let mut rows = Vec::with_capacity(models.len());
    for model in &models {
        rows.push(stats_row(model, &corpus, args.top_words, &mut word_tables)?);
    }

    match args.format {
        FormatArg::Csv => {
            let mut writer = csv::Writer::from_path(&args.out)
                .with_context(|| format!("creating {}", args.out.display()))?;
            for row in &rows {
                writer.serialize(row)?;
            }
            writer.flush()?;
        }
        FormatArg::Json => {
            let mut file = File::create(&args.out)
                .with_context(|| format!("creating {}", args.out.display()))?;
            serde_json::to_writer_pretty(&mut file, &rows)?;
            use std::io::Write;
            file.write_all(b"\n")?;
        }
    }
    manifest.write_beside(&args.out)
}

fn stats_row(
    model: &TokenizerModel,
    corpus: &Corpus,
    top_words: usize,
    word_tables: &mut HashMap<PretokMode, tokscope_core::corpus::WordFreqTable>,
) -> anyhow::Result<StatsRow> {
    let counts = token_counts(model, corpus);
    let report = complexity_report(&counts, corpus.corpus_bytes)?;
    let jsd = jsd_from_uniform(&counts)?;
    let mode = model.pretok_mode();
    let table = word_tables
        .entry(mode)
        .or_insert_with(|| count_words(corpus, mode));
    let top = table.top_n(top_words)?;
    let seg = tokens_per_word(model, &top)?;
    Ok(StatsRow {
        vocab_size: model.vocab_size(),
        n_tokens: report.n_tokens,
        h_bits: report.h_bits,
        k_bytes: report.k_bytes,
        ncr: report.ncr,
        jsd,
        avg_tokens_per_word: seg.avg_tokens_per_word,
        single_token_fraction: seg.single_token_fraction,
    })
}
