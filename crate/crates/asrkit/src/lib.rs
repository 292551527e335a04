//! Multilingual ASR evaluation toolkit.
//!
//! Everything the neural acoustic model is *not*: dataset manifests, transcript
//! cleaning, character-vocabulary language identification, WER/T-WER scoring,
//! n-gram language modeling with ARPA serialization, audio preprocessing and
//! augmentation, and pipeline orchestration over pluggable decoders.

pub mod audioprep;
pub mod corpus;
pub mod error;
pub mod lid;
pub mod lm;
pub mod metrics;
pub mod pipeline;
pub mod seed;
pub mod textnorm;
pub mod vocab;

pub use error::{Error, Result};
