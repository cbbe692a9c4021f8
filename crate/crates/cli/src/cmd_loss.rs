//! Loss-pipeline subcommands: word-level decomposition of a per-token loss
//! log, and the unigram baseline that emits such logs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};
use tokscope_core::bpe::TokenizerModel;
use tokscope_core::corpus::count_words;
use tokscope_core::lossdecomp::{align_words, decompose, LossLogReader, DEFAULT_FREQUENT_CUTOFF};
use tokscope_core::unigram::{Smoothing, UnigramModel};
use tokscope_core::Error;

use crate::ingest::CorpusArgs;
use crate::manifest::ManifestBuilder;

#[derive(Debug, Args)]
pub struct DecomposeArgs {
    /// Per-token loss log (JSONL) to decompose.
    #[arg(long, value_name = "FILE")]
    pub loss_log: PathBuf,

    /// Tokenizer the log was produced with.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[command(flatten)]
    pub corpus: CorpusArgs,

    /// Words ranked within the top-n count as frequent.
    #[arg(long, default_value_t = DEFAULT_FREQUENT_CUTOFF)]
    pub cutoff: u32,

    /// Accept logs recorded in bits and convert losses to nats.
    #[arg(long)]
    pub convert_bits: bool,

    /// Output per-word ledger CSV.
    #[arg(long, value_name = "FILE")]
    pub out_ledger: PathBuf,

    /// Output summary JSON.
    #[arg(long, value_name = "FILE")]
    pub out_summary: PathBuf,
}

pub fn decompose_cmd(args: &DecomposeArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_input(&args.loss_log)?;
    manifest.hash_input(&args.model)?;
    manifest.hash_inputs(&args.corpus.input)?;

    let model = TokenizerModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    manifest.set_fingerprint(model.fingerprint());
    let reader = if args.convert_bits {
        LossLogReader::open_with_bits_conversion(&args.loss_log)?
    } else {
        LossLogReader::open(&args.loss_log)?
    };
    let header = reader.header().clone();
    let corpus = args.corpus.read()?;
    let outcome = align_words(&header, reader, &model, &corpus)?;
    let words = count_words(&corpus, model.pretok_mode());
    let ledger = decompose(&outcome, &words, args.cutoff)?;

    let file = File::create(&args.out_ledger)
        .with_context(|| format!("creating {}", args.out_ledger.display()))?;
    ledger.write_csv(BufWriter::new(file))?;
    let summary = ledger.summary();
    let mut file = File::create(&args.out_summary)
        .with_context(|| format!("creating {}", args.out_summary.display()))?;
    serde_json::to_writer_pretty(&mut file, &summary)?;
    file.write_all(b"\n")?;

    log::info!(
        "global CE {:.6} nats over {} tokens; bucket shares frequent {:.4} / rare {:.4} / unranked {:.4}",
        summary.global_ce_nats,
        summary.t_total,
        summary.bucket_shares.frequent,
        summary.bucket_shares.rare,
        summary.bucket_shares.unranked
    );
    manifest.write_beside(&args.out_ledger)?;
    manifest.write_beside(&args.out_summary)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SmoothingArg {
    /// Maximum likelihood; unseen tokens get probability zero.
    Mle,
    /// Add-k smoothing; every token gets positive mass.
    AddK,
}

#[derive(Debug, Args)]
pub struct UnigramArgs {
    /// Tokenizer used to tokenize the corpus.
    #[arg(long, value_name = "FILE")]
    pub model: PathBuf,

    #[command(flatten)]
    pub corpus: CorpusArgs,

    #[arg(long, value_enum, default_value = "mle")]
    pub smoothing: SmoothingArg,

    /// Pseudo-count for add-k smoothing.
    #[arg(long)]
    pub k: Option<f64>,

    /// Output loss log (JSONL, losses in nats).
    #[arg(long, value_name = "FILE")]
    pub out: PathBuf,
}

pub fn unigram_cmd(args: &UnigramArgs) -> anyhow::Result<()> {
    let mut manifest = ManifestBuilder::start();
    manifest.hash_input(&args.model)?;
    manifest.hash_inputs(&args.corpus.input)?;

    let smoothing = match (args.smoothing, args.k) {
        (SmoothingArg::Mle, None) => Smoothing::None,
        (SmoothingArg::Mle, Some(_)) => {
            return Err(Error::InvalidArgument(
                "--k only applies to --smoothing add-k".into(),
            )
            .into())
        }
        (SmoothingArg::AddK, k) => Smoothing::AddK { k: k.unwrap_or(1.0) },
    };

    let model = TokenizerModel::load(&args.model)
        .with_context(|| format!("loading model {}", args.model.display()))?;
    manifest.set_fingerprint(model.fingerprint());
    let corpus = args.corpus.read()?;
    let counts = tokscope_core::bpe::token_counts(&model, &corpus);
    let unigram = UnigramModel::fit(&counts, smoothing)?;
    let self_ce = unigram.cross_entropy_table(&counts)?;
    let stats = unigram.emit_loss_log(&model, &corpus, &args.out)?;
    log::info!(
        "wrote {} records ({} tokens), self cross-entropy {:.6} nats",
        stats.documents,
        stats.tokens,
        self_ce
    );
    manifest.write_beside(&args.out)
}
