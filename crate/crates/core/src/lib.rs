//! Learned text interpolation for mixup-style data augmentation.
//!
//! An encoder-decoder model reads two token sequences, resamples both hidden
//! sequences to a common interpolated length, mixes them with a ratio α and
//! decodes text that moves from one source toward the other as α changes.
//! The crate covers data loading, the model, training, decoding, dataset
//! augmentation with soft labels, and evaluation.

pub mod augmentation;
pub mod corpus;
pub mod decoding;
pub mod error;
pub mod evaluation;
pub mod model;
pub mod synthetic;
pub mod training;

pub use augmentation::{augment_dataset, interpolate_labels, sharpen, teacher_label, LabelPolicy, SoftLabel};
pub use corpus::{build_vocabulary, tokenize, Dataset, TokenSequence, Vocabulary};
pub use decoding::{batch_interpolate, interpolate_text, DecodeConfig, DecodeResult, Strategy};
pub use error::{Error, Result};
pub use model::{interp_length, InterpModel, MixRatio, ModelConfig};
pub use training::{train, TrainingConfig};
