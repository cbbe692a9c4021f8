//! Benchmark-only crate; see `benches/`.

use tokscope_core::textgen::{write_corpus, TextGenConfig};

/// Deterministic benchmark corpus of roughly `target_bytes` bytes.
pub fn sample_text(target_bytes: u64) -> String {
    let mut buf = Vec::with_capacity(target_bytes as usize + 4096);
    write_corpus(
        &mut buf,
        &TextGenConfig {
            seed: 0xBE7C,
            target_bytes,
        },
    )
    .expect("benchmark corpus generation");
    String::from_utf8(buf).expect("generator emits UTF-8")
}
