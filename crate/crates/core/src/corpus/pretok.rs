//! Whitespace pretokenization.
//!
//! Words are maximal runs of non-whitespace characters. In [`PretokMode::Whitespace`]
//! a single immediately preceding ASCII space (U+0020, and only that character)
//! is attached to the following word as a leading marker, the convention used
//! by common byte-level tokenizers. Whitespace that is not absorbed this way
//! (runs of two or more, tabs, newlines, trailing whitespace) is kept as its
//! own piece so that concatenating the pieces reproduces the input exactly.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PretokMode {
    /// Attach a single preceding space to each word; keep residual whitespace.
    #[default]
    Whitespace,
    /// Bare words only; separators are discarded.
    Plain,
}

/// Splits `text` into words for counting and ranking.
///
/// In `Whitespace` mode the output covers every byte of the input and
/// concatenating it reproduces `text` exactly. In `Plain` mode the output is
/// the bare non-whitespace runs; separators are dropped and the exact
/// byte-level round trip does not apply.
#[must_use]
pub fn pretokenize(text: &str, mode: PretokMode) -> Vec<&str> {
    match mode {
        PretokMode::Whitespace => split_full_cover(text, true),
        PretokMode::Plain => text.split_whitespace().collect(),
    }
}

/// Splits `text` into the units that bound tokenizer merges.
///
/// Unlike [`pretokenize`], the output covers every input byte in both modes
/// (in `Plain` mode whitespace runs become their own units instead of being
/// dropped), so encoders built on top of it are lossless.
#[must_use]
pub fn segment_units(text: &str, mode: PretokMode) -> Vec<&str> {
    match mode {
        PretokMode::Whitespace => split_full_cover(text, true),
        PretokMode::Plain => split_full_cover(text, false),
    }
}

/// Full-cover segmentation: alternating whitespace / non-whitespace runs,
/// optionally peeling one trailing U+0020 off a whitespace run onto the word
/// that follows it.
fn split_full_cover(text: &str, attach_space: bool) -> Vec<&str> {
    // (start, end) byte spans of maximal same-class runs, in order.
    let mut runs: Vec<(usize, usize, bool)> = Vec::new();
    let mut run_start = 0usize;
    let mut run_is_ws: Option<bool> = None;
    for (i, ch) in text.char_indices() {
        let ws = ch.is_whitespace();
        match run_is_ws {
            None => {
                run_start = i;
                run_is_ws = Some(ws);
            }
            Some(cur) if cur == ws => {}
            Some(cur) => {
                runs.push((run_start, i, cur));
                run_start = i;
                run_is_ws = Some(ws);
            }
        }
    }
    if let Some(ws) = run_is_ws {
        runs.push((run_start, text.len(), ws));
    }

    let mut pieces = Vec::with_capacity(runs.len());
    let mut k = 0;
    while k < runs.len() {
        let (s, e, ws) = runs[k];
        if !ws {
            pieces.push(&text[s..e]);
            k += 1;
            continue;
        }
        // Runs alternate, so a successor of a whitespace run is a word run.
        let followed_by_word = k + 1 < runs.len();
        if attach_space && followed_by_word && text.as_bytes()[e - 1] == b' ' {
            if e - 1 > s {
                pieces.push(&text[s..e - 1]);
            }
            let (_, word_end, _) = runs[k + 1];
            pieces.push(&text[e - 1..word_end]);
            k += 2;
        } else {
            pieces.push(&text[s..e]);
            k += 1;
        }
    }
    pieces
}
