//! Byte-level BPE: model representation, encoding, and training.

mod encoder;
mod model;
mod trainer;

pub use encoder::{token_counts, tokens_per_word, Encoder, SegmentationStats};
pub use model::{
    Pair, TokenFreqTable, TokenizerModel, TrainMode, BYTE_VOCAB, MODEL_FORMAT_VERSION,
};
pub use trainer::{
    TrainConfig, TrainStats, Trainer, TrainerArtifacts, DEFAULT_MIN_PAIR_FREQ,
};
