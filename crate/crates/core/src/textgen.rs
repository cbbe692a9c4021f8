//! Deterministic English-like corpus synthesis.
//!
//! Produces text with the statistical shape that the rest of the crate
//! cares about — a Zipf–Mandelbrot unigram distribution with a real
//! function-word head, productive suffix morphology, sticky word bigrams,
//! sentence casing and punctuation — while being fully reproducible from a
//! seed. One document per output line.
//!
//! Content words are built from consonant+vowel syllables via bijective
//! base-B numeration of the frequency rank, so distinct ranks can never
//! collide on the same surface and the realized distribution stays clean.

use std::io::Write;
use std::path::Path;

use rand::distributions::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Real high-frequency English words, roughly in frequency order; these
/// occupy the head ranks so generated text reads plausibly and tokenizers
/// see an authentic function-word head.
const FUNCTION_WORDS: &[&str] = &[
    "the", "of", "and", "a", "to", "in", "is", "was", "it", "for", "on", "are", "as", "with",
    "his", "they", "i", "at", "be", "this", "have", "from", "or", "one", "had", "by", "but",
    "not", "what", "all", "were", "we", "when", "your", "can", "said", "there", "use", "an",
    "each", "which", "she", "do", "how", "their", "if", "will", "up", "other", "about", "out",
    "many", "then", "them", "these", "so", "some", "her", "would", "make", "like", "him",
    "into", "time", "has", "look", "two", "more", "write", "go", "see", "number", "no", "way",
    "could", "people", "my", "than", "first", "water", "been", "call", "who", "its", "now",
    "find", "long", "down", "day", "did", "get", "come", "made", "may", "part", "over", "new",
    "sound", "take", "only", "little", "work", "know", "place", "year", "live", "me", "back",
    "give", "most", "very", "after", "thing", "our", "just", "name", "good", "man", "think",
    "say", "great", "where", "help", "through", "much", "before", "line", "right", "too",
    "mean", "old", "any", "same", "tell", "boy", "follow", "came", "want", "show", "also",
    "around", "form", "three", "small", "set", "put", "end", "does", "another", "well",
    "large", "must", "big", "even", "such", "because", "turn", "here", "why", "ask", "went",
    "men", "read", "need", "land", "different", "home", "us", "move", "try", "kind", "hand",
    "again", "change", "off", "play", "air", "house", "point", "page", "letter", "mother",
    "answer", "found", "study", "still", "learn", "should", "world", "high", "every", "near",
    "add", "food", "between", "own", "below", "country", "plant", "last", "school", "father",
    "keep", "tree", "never", "start", "city", "earth", "eye", "light", "thought", "head",
    "under", "story", "saw", "left", "few", "while", "along", "might", "close", "something",
];

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "h", "k", "l", "m", "n", "p", "r", "s", "t", "v", "w", "br",
    "ch", "cl", "dr", "fl", "gr", "pl", "pr", "sh", "sl", "sp", "st", "th", "tr", "qu", "str",
];

const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ai", "ea", "ou"];

/// Consonant-only suffixes keep stem+suffix parses unambiguous, since every
/// generated stem ends in a vowel.
const SUFFIXES: &[&str] = &["", "s", "n", "r", "d", "l", "st", "nt"];
const SUFFIX_WEIGHTS: &[u32] = &[55, 18, 8, 7, 5, 4, 2, 1];

/// Number of distinct word ranks the sampler draws from.
const RANK_COUNT: usize = 200_000;
/// Zipf–Mandelbrot exponent and shift: p(rank) ∝ 1/(rank + SHIFT)^EXPONENT.
const EXPONENT: f64 = 1.15;
const SHIFT: f64 = 2.7;

/// Ranks below this threshold get a sticky-follower table, creating
/// recurring word bigrams (needed for cross-word merge structure).
const HOT_RANKS: usize = 4096;
const FOLLOWERS_PER_WORD: usize = 3;
/// Probability that the next word comes from the previous word's follower
/// table instead of an independent draw.
const STICKY_P: f64 = 0.25;

#[derive(Debug, Clone)]
pub struct TextGenConfig {
    pub seed: u64,
    /// Generation stops at the first document boundary at or past this size.
    pub target_bytes: u64,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenStats {
    pub documents: u64,
    pub bytes: u64,
}

/// Builds the content-word stem for a global rank ≥ `FUNCTION_WORDS.len()`.
/// Bijective base-B numeration over (onset, vowel) syllables, offset so the
/// shortest stem has two syllables.
fn content_stem(rank: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut m = rank - FUNCTION_WORDS.len() + base + 1;
    let mut syllables = Vec::with_capacity(3);
    while m > 0 {
        let digit = (m - 1) % base;
        syllables.push((ONSETS[digit / VOWELS.len()], VOWELS[digit % VOWELS.len()]));
        m = (m - 1) / base;
    }
    let mut word = String::with_capacity(3 * syllables.len());
    for (onset, vowel) in syllables.into_iter().rev() {
        word.push_str(onset);
        word.push_str(vowel);
    }
    word
}

/// SplitMix64: cheap stateless hash for deterministic derived choices.
fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

struct WordSampler {
    /// Cumulative rank probabilities for binary-search sampling.
    cdf: Vec<f64>,
    /// follower[r] lists the sticky continuations of hot rank r.
    followers: Vec<[u32; FOLLOWERS_PER_WORD]>,
}

impl WordSampler {
    fn new() -> Self {
        let mut cdf = Vec::with_capacity(RANK_COUNT);
        let mut acc = 0.0f64;
        for i in 0..RANK_COUNT {
            acc += 1.0 / (i as f64 + SHIFT).powf(EXPONENT);
            cdf.push(acc);
        }
        let total = acc;
        for p in &mut cdf {
            *p /= total;
        }
        // Followers are fixed by rank alone so the bigram structure is part
        // of the distribution, not of any one sampling run. Skewing the
        // follower pool toward the head keeps the pairs frequent.
        let followers = (0..HOT_RANKS)
            .map(|r| {
                let mut f = [0u32; FOLLOWERS_PER_WORD];
                for (k, slot) in f.iter_mut().enumerate() {
                    let h = splitmix((r as u64) << 8 | k as u64);
                    *slot = (h % (HOT_RANKS as u64 / 4)) as u32;
                }
                f
            })
            .collect();
        WordSampler { cdf, followers }
    }

    fn draw_rank<R: Rng>(&self, rng: &mut R, prev: Option<u32>) -> u32 {
        if let Some(p) = prev {
            if (p as usize) < HOT_RANKS && rng.gen::<f64>() < STICKY_P {
                let k = rng.gen_range(0..FOLLOWERS_PER_WORD);
                return self.followers[p as usize][k];
            }
        }
        let u: f64 = rng.gen();
        self.cdf.partition_point(|&c| c < u) as u32
    }
}

/// Surface form for a rank: function word verbatim, or stem plus a sampled
/// suffix for content ranks.
fn surface<R: Rng>(rank: u32, rng: &mut R, suffix_dist: &rand::distributions::WeightedIndex<u32>) -> String {
    let rank = rank as usize;
    if rank < FUNCTION_WORDS.len() {
        FUNCTION_WORDS[rank].to_string()
    } else {
        let mut w = content_stem(rank);
        w.push_str(SUFFIXES[suffix_dist.sample(rng)]);
        w
    }
}

fn capitalize(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().collect::<String>() + chars.as_str(),
        None => String::new(),
    }
}

/// Streams documents to `out` until `target_bytes` is reached at a document
/// boundary. Identical (seed, target) always produces identical bytes.
pub fn write_corpus<W: Write>(out: &mut W, cfg: &TextGenConfig) -> Result<GenStats> {
    if cfg.target_bytes == 0 {
        return Err(Error::InvalidArgument("target_bytes must be positive".into()));
    }
    let sampler = WordSampler::new();
    let suffix_dist = rand::distributions::WeightedIndex::new(SUFFIX_WEIGHTS.iter().copied())
        .expect("static weights are valid");
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut stats = GenStats::default();
    let mut doc = String::with_capacity(1024);
    let io_err = |e: std::io::Error| Error::Io {
        path: "<writer>".into(),
        source: e,
    };

    while stats.bytes < cfg.target_bytes {
        doc.clear();
        let sentences = rng.gen_range(1..=6);
        let mut prev: Option<u32> = None;
        for s in 0..sentences {
            if s > 0 {
                doc.push(' ');
            }
            let words = rng.gen_range(4..=14);
            for w in 0..words {
                let rank = sampler.draw_rank(&mut rng, prev);
                prev = Some(rank);
                let mut word = surface(rank, &mut rng, &suffix_dist);
                if w == 0 {
                    word = capitalize(&word);
                }
                if w > 0 {
                    doc.push(' ');
                }
                doc.push_str(&word);
                if w + 1 < words && rng.gen::<f64>() < 0.06 {
                    doc.push(',');
                }
            }
            let roll: f64 = rng.gen();
            doc.push(if roll < 0.85 {
                '.'
            } else if roll < 0.92 {
                '?'
            } else {
                '!'
            });
        }
        doc.push('\n');
        out.write_all(doc.as_bytes()).map_err(io_err)?;
        stats.documents += 1;
        stats.bytes += doc.len() as u64;
    }
    Ok(stats)
}

/// Writes a corpus file (buffered) and returns its document/byte counts.
pub fn generate_file(path: &Path, cfg: &TextGenConfig) -> Result<GenStats> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut out = std::io::BufWriter::new(file);
    let stats = write_corpus(&mut out, cfg)?;
    out.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(stats)
}
