use criterion::{criterion_group, criterion_main, Criterion, Throughput};
use tokscope_bench::sample_text;
use tokscope_core::bpe::TokenFreqTable;
use tokscope_core::corpus::{count_words, Corpus, PretokMode};
use tokscope_core::metrics::{jsd_from_uniform, shannon_entropy, LogBase};

fn zipf_table(vocab: u32) -> TokenFreqTable {
    let mut table = TokenFreqTable::new(vocab);
    for id in 0..vocab {
        table.add(id, 1_000_000_000 / u64::from(id + 1));
    }
    table
}

fn bench_distribution_metrics(c: &mut Criterion) {
    let table = zipf_table(64_000);
    let mut group = c.benchmark_group("distribution");
    group.bench_function("shannon_entropy_64k", |b| {
        b.iter(|| shannon_entropy(&table, LogBase::Two).unwrap())
    });
    group.bench_function("jsd_from_uniform_64k", |b| {
        b.iter(|| jsd_from_uniform(&table).unwrap())
    });
    group.finish();
}

fn bench_word_counting(c: &mut Criterion) {
    let text = sample_text(5_000_000);
    let corpus = Corpus::from_texts(text.lines().collect::<Vec<_>>());
    let mut group = c.benchmark_group("count_words");
    group.sample_size(10);
    group.throughput(Throughput::Bytes(corpus.corpus_bytes));
    group.bench_function("whitespace_5mb", |b| {
        b.iter(|| count_words(&corpus, PretokMode::Whitespace))
    });
    group.finish();
}

criterion_group!(benches, bench_distribution_metrics, bench_word_counting);
criterion_main!(benches);
