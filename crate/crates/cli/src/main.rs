//! `tokscope`: tokenizer training, corpus statistics, loss decomposition,
//! and embedding-dynamics experiments behind one reproducible CLI.
//!
//! Exit codes: 0 success, 1 data/runtime error, 2 usage error.

mod cmd_corpus;
mod cmd_lab;
mod cmd_loss;
mod cmd_tokenizer;
mod ingest;
mod manifest;

use clap::{Parser, Subcommand};
use tokscope_core::{Error, ErrorCategory};

/// Environment variable holding the worker thread count; defaults to the
/// number of available cores.
const THREADS_ENV: &str = "TOKSCOPE_THREADS";

#[derive(Parser)]
#[command(name = "tokscope", version, about = "Tokenizer and corpus diagnostics toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a deterministic English-like text corpus.
    MakeCorpus(cmd_corpus::MakeCorpusArgs),
    /// Count word frequencies into a CSV table.
    CountWords(cmd_corpus::CountWordsArgs),
    /// Fraction of word occurrences covered by the top-n word types.
    Coverage(cmd_corpus::CoverageArgs),
    /// Jaccard overlap of two corpora's top-n word sets.
    Overlap(cmd_corpus::OverlapArgs),
    /// Train a byte-level BPE tokenizer (standard or two-stage).
    TrainTokenizer(cmd_tokenizer::TrainArgs),
    /// Tokenized-corpus complexity and segmentation report per model.
    Stats(cmd_tokenizer::StatsArgs),
    /// Word-level decomposition of a per-token loss log.
    Decompose(cmd_loss::DecomposeArgs),
    /// Fit a unigram model and emit its self-information loss log.
    Unigram(cmd_loss::UnigramArgs),
    /// Check analytic softmax gradients against finite differences.
    Gradcheck(cmd_lab::GradcheckArgs),
    /// Simulate embedding-norm dynamics under SGD with weight decay.
    Simnorm(cmd_lab::SimnormArgs),
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    if let Err(err) = run(&cli) {
        eprintln!("error: {err:#}");
        std::process::exit(exit_code(&err));
    }
}

fn run(cli: &Cli) -> anyhow::Result<()> {
    configure_threads()?;
    match &cli.command {
        Command::MakeCorpus(args) => cmd_corpus::make_corpus(args),
        Command::CountWords(args) => cmd_corpus::count_words(args),
        Command::Coverage(args) => cmd_corpus::coverage(args),
        Command::Overlap(args) => cmd_corpus::overlap_cmd(args),
        Command::TrainTokenizer(args) => cmd_tokenizer::train_tokenizer(args),
        Command::Stats(args) => cmd_tokenizer::stats(args),
        Command::Decompose(args) => cmd_loss::decompose_cmd(args),
        Command::Unigram(args) => cmd_loss::unigram_cmd(args),
        Command::Gradcheck(args) => cmd_lab::gradcheck(args),
        Command::Simnorm(args) => cmd_lab::simnorm(args),
    }
}

fn configure_threads() -> anyhow::Result<()> {
    if let Ok(raw) = std::env::var(THREADS_ENV) {
        let threads: usize = raw.trim().parse().unwrap_or(0);
        if threads == 0 {
            return Err(Error::InvalidArgument(format!(
                "{THREADS_ENV} must be a positive integer, got {raw:?}"
            ))
            .into());
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|err| Error::InvalidArgument(format!("thread pool setup failed: {err}")))?;
    }
    Ok(())
}

fn exit_code(err: &anyhow::Error) -> i32 {
    match err.downcast_ref::<Error>() {
        Some(core) if core.category() == ErrorCategory::Usage => 2,
        _ => 1,
    }
}
