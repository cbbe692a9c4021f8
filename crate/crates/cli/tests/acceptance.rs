//! Acceptance gate: nine numbered criteria covering the whole toolkit, each
//! printing one PASS/FAIL line. All criteria share a single deterministic
//! 50 MB corpus fixture (generated once per run) plus a tokenizer ladder
//! trained on it, so the suite exercises realistic data volumes while every
//! expected value stays pinned.
//!
//! Numeric tolerances are constants below; directional checks (strict
//! monotonicity across the vocabulary ladder) carry no tolerance by design.

use std::fs;
use std::panic::{catch_unwind, resume_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::sync::OnceLock;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tokscope_core::bpe::{
    token_counts, tokens_per_word, Encoder, TokenFreqTable, TokenizerModel, TrainConfig, Trainer,
};
use tokscope_core::corpus::{
    count_words, overlap, Corpus, IngestConfig, PretokMode, WordFreqTable,
};
use tokscope_core::embedding::{
    finite_diff_check, simulate_norm_dynamics, softmax_xent_grads, zipf_freqs, EmbeddingMatrix,
    HiddenSampler, SimConfig, UpdateRule,
};
use tokscope_core::kahan::KahanSum;
use tokscope_core::lossdecomp::{align_words, decompose, LossLogHeader, LossRecord};
use tokscope_core::metrics::{complexity_report, jsd_from_uniform, shannon_entropy, LogBase};
use tokscope_core::textgen::{write_corpus, TextGenConfig};
use tokscope_core::unigram::{Smoothing, UnigramModel};

const CORPUS_SEED: u64 = 20240817;
const CORPUS_BYTES: u64 = 50_000_000;
const LADDER: [u32; 4] = [1_000, 4_000, 16_000, 64_000];
const TWO_STAGE_VOCAB: u32 = 16_000;
const TWO_STAGE_T: u32 = 12_000;

const AC1_CE_ABS_TOL: f64 = 1e-9;
const AC2_MEAN_REL_TOL: f64 = 1e-12;
const AC3_GRAD_REL_TOL: f64 = 1e-4;
const AC3_ROW_SUM_TOL: f64 = 1e-12;
const AC4_FUZZ_STRINGS: usize = 10_000;
const AC6_MIN_SINGLE_TOKEN_FRACTION: f64 = 0.90;
const AC8_MIN_SPEARMAN: f64 = 0.9;
const AC8_NORM_TOL: f64 = 1e-12;
const AC9_MIN_HALF_OVERLAP: f64 = 0.5;

struct Fixture {
    dir: PathBuf,
    corpus_path: PathBuf,
    model_64k_path: PathBuf,
    /// The bundled corpus, read back from disk so document ids match what
    /// any CLI invocation on the same file sees.
    full: Corpus,
    /// Last 10% of documents; never used for training.
    holdout: Corpus,
    /// Whitespace word table over the full corpus.
    words_full: WordFreqTable,
    /// Whitespace word table over the training split (ladder training input).
    train_table: WordFreqTable,
    /// Standard models at `LADDER` sizes, trained on the training split.
    ladder: Vec<TokenizerModel>,
    /// Per-ladder-model token counts over the full corpus.
    full_counts: Vec<TokenFreqTable>,
    /// Per-ladder-model token counts over the holdout split.
    holdout_counts: Vec<TokenFreqTable>,
    /// Two-stage model at the same final vocabulary as ladder step 3 (16K).
    two_stage: TokenizerModel,
    two_stage_holdout_counts: TokenFreqTable,
}

static FIXTURE: OnceLock<Fixture> = OnceLock::new();

fn fixture() -> &'static Fixture {
    FIXTURE.get_or_init(build_fixture)
}

fn build_fixture() -> Fixture {
    let started = Instant::now();
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR")).join("acceptance");
    fs::create_dir_all(&dir).expect("create fixture dir");

    let mut buf = Vec::with_capacity(CORPUS_BYTES as usize + 4096);
    write_corpus(
        &mut buf,
        &TextGenConfig {
            seed: CORPUS_SEED,
            target_bytes: CORPUS_BYTES,
        },
    )
    .expect("generate corpus");
    let corpus_path = dir.join("corpus.txt");
    fs::write(&corpus_path, &buf).expect("write corpus");
    drop(buf);
    let full = Corpus::read(&[&corpus_path], &IngestConfig::default()).expect("read corpus");
    eprintln!(
        "fixture: corpus {} docs / {} bytes ({:.1?})",
        full.docs.len(),
        full.corpus_bytes,
        started.elapsed()
    );

    // 90/10 split by position; both sides keep the generator's distribution.
    let cut = full.docs.len() * 9 / 10;
    let train = Corpus::from_texts(full.docs[..cut].iter().map(|d| d.text.as_str()).collect());
    let holdout = Corpus::from_texts(full.docs[cut..].iter().map(|d| d.text.as_str()).collect());
    let train_table = count_words(&train, PretokMode::Whitespace);
    let words_full = count_words(&full, PretokMode::Whitespace);

    let mut ladder = Vec::new();
    let mut full_counts = Vec::new();
    let mut holdout_counts = Vec::new();
    for vocab in LADDER {
        let t = Instant::now();
        let model = Trainer::new(TrainConfig::standard(vocab))
            .expect("ladder config")
            .train_from_table(&train_table)
            .expect("ladder training")
            .model;
        full_counts.push(token_counts(&model, &full));
        holdout_counts.push(token_counts(&model, &holdout));
        eprintln!("fixture: {vocab}-token model trained + encoded ({:.1?})", t.elapsed());
        ladder.push(model);
    }
    let model_64k_path = dir.join("model-64k.json");
    ladder[3].save(&model_64k_path).expect("save 64K model");

    let t = Instant::now();
    let two_stage = Trainer::new(TrainConfig::two_stage(TWO_STAGE_VOCAB, TWO_STAGE_T))
        .expect("two-stage config")
        .train_from_corpus(&train)
        .expect("two-stage training")
        .model;
    let two_stage_holdout_counts = token_counts(&two_stage, &holdout);
    eprintln!("fixture: two-stage model trained + encoded ({:.1?})", t.elapsed());
    eprintln!("fixture: ready in {:.1?}", started.elapsed());

    Fixture {
        dir,
        corpus_path,
        model_64k_path,
        full,
        holdout,
        words_full,
        train_table,
        ladder,
        full_counts,
        holdout_counts,
        two_stage,
        two_stage_holdout_counts,
    }
}

/// Runs one criterion body, printing exactly one PASS/FAIL line for it.
fn criterion<F>(name: &str, what: &str, body: F)
where
    F: FnOnce(),
{
    let started = Instant::now();
    match catch_unwind(AssertUnwindSafe(body)) {
        Ok(()) => println!("{name} PASS ({:.1?}): {what}", started.elapsed()),
        Err(payload) => {
            println!("{name} FAIL ({:.1?}): {what}", started.elapsed());
            resume_unwind(payload);
        }
    }
}

#[test]
fn ac1_unigram_loss_log_closes_on_token_entropy() {
    criterion(
        "AC-1",
        "decomposed unigram loss log reproduces token-distribution entropy",
        || {
            let f = fixture();
            let counts = &f.full_counts[3];
            let unigram = UnigramModel::fit(counts, Smoothing::None).expect("fit unigram");
            let log_path = f.dir.join("unigram-64k.jsonl");
            let stats = unigram
                .emit_loss_log(&f.ladder[3], &f.full, &log_path)
                .expect("emit loss log");
            assert_eq!(stats.tokens, counts.total());

            let ledger_path = f.dir.join("ac1-ledger.csv");
            let summary_path = f.dir.join("ac1-summary.json");
            let status = Command::new(env!("CARGO_BIN_EXE_tokscope"))
                .args([
                    "decompose",
                    "--loss-log", &f.dir.join("unigram-64k.jsonl").display().to_string(),
                    "--model", &f.model_64k_path.display().to_string(),
                    "--input", &f.corpus_path.display().to_string(),
                    "--out-ledger", &ledger_path.display().to_string(),
                    "--out-summary", &summary_path.display().to_string(),
                ])
                .status()
                .expect("run decompose");
            assert!(status.success(), "decompose exited {status}");

            let summary: serde_json::Value =
                serde_json::from_str(&fs::read_to_string(&summary_path).unwrap()).unwrap();
            let got = summary["global_ce_nats"].as_f64().expect("global_ce_nats");
            let want = shannon_entropy(counts, LogBase::E).expect("entropy");
            let diff = (got - want).abs();
            assert!(
                diff <= AC1_CE_ABS_TOL,
                "global CE {got} vs entropy {want} differ by {diff:e}"
            );
            // The emitted log covers every token exactly once.
            assert_eq!(summary["T_total"].as_u64().unwrap(), counts.total());
        },
    );
}

#[test]
fn ac2_decomposition_conserves_loss_mass() {
    criterion(
        "AC-2",
        "ledger mean equals per-token mean and bucket totals conserve the sum",
        || {
            let pool = [
                "drip", "stone", "river", "winter", "apple", "query", "zero", "flux",
                "mire", "quartz", "xylem", "vow",
            ];
            let mut rng = ChaCha8Rng::seed_from_u64(424242);
            for trial in 0..60 {
                // Random little corpus over a fixed word pool.
                let docs: Vec<String> = (0..rng.gen_range(1..=30))
                    .map(|_| {
                        let len = rng.gen_range(1..=25);
                        (0..len)
                            .map(|_| pool[rng.gen_range(0..pool.len())])
                            .collect::<Vec<_>>()
                            .join(" ")
                    })
                    .collect();
                let corpus = Corpus::from_texts(docs.iter().map(String::as_str).collect());
                let table = count_words(&corpus, PretokMode::Whitespace);
                let vocab = 258 + rng.gen_range(0..40);
                let model = Trainer::new(TrainConfig::standard(vocab))
                    .unwrap()
                    .train_from_table(&table)
                    .unwrap()
                    .model;

                // True tokenization with random per-token losses.
                let encoder = Encoder::new(&model);
                let mut direct_sum = KahanSum::new();
                let mut n_tokens = 0u64;
                let records: Vec<_> = corpus
                    .docs
                    .iter()
                    .map(|doc| {
                        let token_ids = encoder.encode(&doc.text);
                        let losses_nats: Vec<f64> =
                            token_ids.iter().map(|_| rng.gen_range(0.0..6.0)).collect();
                        for &l in &losses_nats {
                            direct_sum.add(l);
                        }
                        n_tokens += token_ids.len() as u64;
                        Ok(LossRecord {
                            doc_id: doc.id,
                            token_ids,
                            losses_nats,
                        })
                    })
                    .collect();
                let header = LossLogHeader {
                    schema_version: 1,
                    tokenizer_fingerprint: model.fingerprint().to_string(),
                    loss_unit: "nats".to_string(),
                };
                let outcome = align_words(&header, records, &model, &corpus).unwrap();
                let cutoff = rng.gen_range(1..=6);
                let ledger = decompose(&outcome, &table, cutoff).unwrap();

                // Global mean identity, relative to the independent sum.
                let direct_mean = direct_sum.value() / n_tokens as f64;
                let rel = ((ledger.global_ce_nats - direct_mean) / direct_mean).abs();
                assert!(
                    rel <= AC2_MEAN_REL_TOL,
                    "trial {trial}: mean {} vs {direct_mean} rel err {rel:e}",
                    ledger.global_ce_nats
                );

                // Bucket totals conserve the ledger total exactly (bitwise).
                let bucket_sum = ledger.bucket_totals.iter().sum::<f64>();
                assert_eq!(ledger.total_loss_nats.to_bits(), bucket_sum.to_bits());

                // Integer conservation: every token lands in exactly one word.
                let entry_tokens: u64 = ledger.per_word.iter().map(|e| e.token_count).sum();
                assert_eq!(entry_tokens, n_tokens);
            }
        },
    );
}

#[test]
fn ac3_analytic_gradients_match_finite_differences() {
    criterion(
        "AC-3",
        "softmax gradients agree with central differences and sum to zero",
        || {
            let mut worst = 0.0f64;
            for i in 0..120u64 {
                let mut rng = ChaCha8Rng::seed_from_u64(90_000 + i);
                let v = rng.gen_range(2..=64);
                let d = rng.gen_range(1..=32);
                let e = EmbeddingMatrix::gaussian(v, d, 0.5, &mut rng).unwrap();
                // Components bounded away from zero so the relative-error
                // denominator never sits on the roundoff floor.
                let mut h: Vec<f64> = (0..d)
                    .map(|_| {
                        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                        sign * rng.gen_range(0.1..=1.0)
                    })
                    .collect();
                let norm = h.iter().map(|x| x * x).sum::<f64>().sqrt();
                let scale = rng.gen_range(0.2..=1.0) / norm;
                for x in &mut h {
                    *x *= scale;
                }
                let target = rng.gen_range(0..v) as u32;

                let rel = finite_diff_check(&h, &e, target, 1e-5).unwrap();
                worst = worst.max(rel);
                assert!(rel < AC3_GRAD_REL_TOL, "instance {i}: rel err {rel:e}");

                let grads = softmax_xent_grads(&h, &e, target).unwrap();
                for k in 0..d {
                    let sum: f64 = (0..v).map(|j| grads.row(j)[k]).sum();
                    assert!(
                        sum.abs() <= AC3_ROW_SUM_TOL,
                        "instance {i}: row sum component {sum:e}"
                    );
                }
            }
            eprintln!("AC-3 worst relative error: {worst:.3e}");
        },
    );
}

#[test]
fn ac4_tokenizer_roundtrip_determinism_and_nesting() {
    criterion(
        "AC-4",
        "byte-exact round-trips, reproducible training, nested merge lists, shrinking N",
        || {
            let f = fixture();

            // Round-trip fuzzing across the full UTF-8 range.
            let mut rng = ChaCha8Rng::seed_from_u64(777_000);
            let standard = Encoder::new(&f.ladder[1]);
            let crossing = Encoder::new(&f.two_stage);
            for i in 0..AC4_FUZZ_STRINGS {
                let s = random_utf8(&mut rng);
                let ids = standard.encode(&s);
                let bytes = f.ladder[1].decode(&ids).unwrap();
                assert_eq!(bytes, s.as_bytes(), "standard round-trip diverged at string {i}");
                if i % 5 == 0 {
                    let ids = crossing.encode(&s);
                    let bytes = f.two_stage.decode(&ids).unwrap();
                    assert_eq!(bytes, s.as_bytes(), "two-stage round-trip diverged at string {i}");
                }
            }

            // Determinism: identical fingerprints across two training runs.
            let again = Trainer::new(TrainConfig::standard(LADDER[0]))
                .unwrap()
                .train_from_table(&f.train_table)
                .unwrap()
                .model;
            assert_eq!(again.fingerprint(), f.ladder[0].fingerprint());

            // Nested vocabularies share a common merge-list prefix.
            for pair in f.ladder.windows(2) {
                let small = pair[0].merges();
                let large = pair[1].merges();
                assert_eq!(small, &large[..small.len()]);
            }

            // More vocabulary never costs tokens on held-out text.
            let totals: Vec<u64> = f.holdout_counts.iter().map(TokenFreqTable::total).collect();
            assert!(
                totals.windows(2).all(|w| w[1] <= w[0]),
                "holdout N not non-increasing: {totals:?}"
            );
        },
    );
}

#[test]
fn ac5_complexity_falls_and_divergence_rises_with_vocab() {
    criterion(
        "AC-5",
        "K_bytes and NCR strictly decrease, JSD strictly increases across the ladder",
        || {
            let f = fixture();
            let mut rows = Vec::new();
            for counts in &f.full_counts {
                let report = complexity_report(counts, f.full.corpus_bytes).unwrap();
                let jsd = jsd_from_uniform(counts).unwrap();
                eprintln!(
                    "AC-5 V={} N={} K_bytes={:.0} ncr={:.4} jsd={:.4}",
                    counts.vocab_size(),
                    report.n_tokens,
                    report.k_bytes,
                    report.ncr,
                    jsd
                );
                rows.push((report.k_bytes, report.ncr, jsd));
            }
            for w in rows.windows(2) {
                assert!(w[1].0 < w[0].0, "K_bytes not strictly decreasing: {rows:?}");
                assert!(w[1].1 < w[0].1, "NCR not strictly decreasing: {rows:?}");
                assert!(w[1].2 > w[0].2, "JSD not strictly increasing: {rows:?}");
            }
        },
    );
}

#[test]
fn ac6_top_words_become_single_tokens_at_ladder_top() {
    criterion(
        "AC-6",
        "top-2500 words are almost all single tokens under the largest model",
        || {
            let f = fixture();
            let top = f.words_full.top_n(2500).unwrap();
            let stats = tokens_per_word(&f.ladder[3], &top).unwrap();
            eprintln!(
                "AC-6 single_token_fraction={:.4} avg_tokens_per_word={:.4}",
                stats.single_token_fraction, stats.avg_tokens_per_word
            );
            assert!(
                stats.single_token_fraction >= AC6_MIN_SINGLE_TOKEN_FRACTION,
                "single-token fraction {} below {}",
                stats.single_token_fraction,
                AC6_MIN_SINGLE_TOKEN_FRACTION
            );
        },
    );
}

#[test]
fn ac7_two_stage_beats_standard_at_equal_vocab() {
    criterion(
        "AC-7",
        "two-stage training yields fewer held-out tokens and lower K_bytes",
        || {
            let f = fixture();
            let standard = complexity_report(&f.holdout_counts[2], f.holdout.corpus_bytes).unwrap();
            let two_stage =
                complexity_report(&f.two_stage_holdout_counts, f.holdout.corpus_bytes).unwrap();
            eprintln!(
                "AC-7 standard N={} K_bytes={:.0} | two-stage N={} K_bytes={:.0}",
                standard.n_tokens, standard.k_bytes, two_stage.n_tokens, two_stage.k_bytes
            );
            assert!(two_stage.n_tokens < standard.n_tokens);
            assert!(two_stage.k_bytes < standard.k_bytes);
        },
    );
}

#[test]
fn ac8_norms_track_frequency_unless_constrained() {
    criterion(
        "AC-8",
        "final norm order tracks sampling frequency; constrained norms stay at one",
        || {
            let freqs = zipf_freqs(50, 1.0).unwrap();
            let config = SimConfig {
                freqs: freqs.clone(),
                steps: 20_000,
                lr: 0.01,
                weight_decay: 0.01,
                hidden_sampler: HiddenSampler::FixedNorm,
                update_rule: UpdateRule::FullSoftmax,
                constrain_norms: false,
                seed: 42,
            };
            let mut init_rng = ChaCha8Rng::seed_from_u64(999);
            let e0 = EmbeddingMatrix::gaussian(50, 256, 0.01, &mut init_rng).unwrap();
            let result = simulate_norm_dynamics(&config, &e0).unwrap();
            eprintln!("AC-8 spearman={:.4}", result.freq_norm_spearman);
            assert!(
                result.freq_norm_spearman > AC8_MIN_SPEARMAN,
                "spearman {} not above {}",
                result.freq_norm_spearman,
                AC8_MIN_SPEARMAN
            );

            // Same run with per-step re-normalization from a unit-norm start.
            let mut constrained_cfg = config;
            constrained_cfg.constrain_norms = true;
            let mut unit_e0 = e0;
            unit_e0.norm_constrain().unwrap();
            let constrained = simulate_norm_dynamics(&constrained_cfg, &unit_e0).unwrap();
            for (step, norms) in constrained.norms.iter().enumerate() {
                for (row, &norm) in norms.iter().enumerate() {
                    assert!(
                        (norm - 1.0).abs() <= AC8_NORM_TOL,
                        "step {step} row {row}: norm {norm}"
                    );
                }
            }
        },
    );
}

#[test]
fn ac9_coverage_and_overlap_behave() {
    criterion(
        "AC-9",
        "coverage is monotone to exactly 1.0; overlap is 1.0 on self, > 0.5 across halves",
        || {
            let f = fixture();
            let n_types = f.words_full.num_types();
            let cutoffs = [10, 100, 1_000, 2_500, 10_000, 100_000, n_types];
            let curve = f.words_full.coverage_curve(&cutoffs).unwrap();
            let fractions: Vec<f64> = curve.points.iter().map(|p| p.covered_fraction).collect();
            assert!(fractions.windows(2).all(|w| w[0] <= w[1]), "not monotone: {fractions:?}");
            assert_eq!(*fractions.last().unwrap(), 1.0);

            assert_eq!(overlap(&f.words_full, &f.words_full, 2500).unwrap(), 1.0);

            let cut = f.full.docs.len() / 2;
            let first = Corpus::from_texts(f.full.docs[..cut].iter().map(|d| d.text.as_str()).collect());
            let second = Corpus::from_texts(f.full.docs[cut..].iter().map(|d| d.text.as_str()).collect());
            let table_first = count_words(&first, PretokMode::Whitespace);
            let table_second = count_words(&second, PretokMode::Whitespace);
            let cross = overlap(&table_first, &table_second, 2500).unwrap();
            eprintln!("AC-9 halves overlap: {cross:.4}");
            assert!(cross > AC9_MIN_HALF_OVERLAP);
        },
    );
}

/// Random UTF-8 string mixing ASCII, two/three/four-byte scalars, spaces,
/// and newlines; empty strings included.
fn random_utf8(rng: &mut ChaCha8Rng) -> String {
    let len = rng.gen_range(0..=60);
    let mut s = String::new();
    for _ in 0..len {
        let c = match rng.gen_range(0..10u32) {
            0..=3 => rng.gen_range(b'a'..=b'z') as char,
            4 => ' ',
            5 => rng.gen_range(b'A'..=b'Z') as char,
            6 => rng.gen_range('\u{00a0}'..='\u{02ff}'),
            7 => rng.gen_range('\u{3041}'..='\u{30ff}'),
            8 => {
                if rng.gen_bool(0.3) {
                    '\n'
                } else {
                    rng.gen_range('\u{1f300}'..='\u{1f64f}')
                }
            }
            _ => loop {
                if let Some(c) = char::from_u32(rng.gen_range(0..=0x0010_ffff)) {
                    break c;
                }
            },
        };
        s.push(c);
    }
    s
}
