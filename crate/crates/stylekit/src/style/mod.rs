//! Speaking-style modeling: spectrogram features, a reference-driven style
//! extractor, a text-driven style predictor, and the self-supervised
//! training loop that ties them together.
//!
//! The pieces fit together as follows:
//!
//! - [`mel`] turns waveforms into log-mel spectrograms and produces the
//!   masked views used by the contrastive objective.
//! - [`tensor`] and the private tape module provide the `f64` numerics:
//!   dense tensors and reverse-mode differentiation.
//! - [`model`] holds the parameterized networks: a convolutional+recurrent
//!   reference encoder, a token-attention style layer, and a byte-level
//!   text predictor.
//! - [`loss`] implements the normalized-temperature cross-entropy loss
//!   over paired masked views.
//! - [`train`] assembles batches and runs gradient-descent steps.
//! - [`checkpoint`] persists parameters bit-exactly.
//!
//! Everything here is deterministic given a seed: batch preparation,
//! initialization, and optimization draw from labeled, derived RNG streams
//! (see [`crate::seed`]), so retraining with the same inputs reproduces
//! the same parameters bit for bit.

pub mod checkpoint;
pub mod loss;
pub mod mel;
pub mod model;
pub(crate) mod tape;
pub mod tensor;
pub mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, CHECKPOINT_HEADER};
pub use loss::{nt_xent_loss, ContrastiveBatch};
pub use mel::{
    compute_mel, compute_mel_samples, hz_to_mel, mask_view, mel_to_hz, MaskOutcome,
    MelConfig, MelSpectrogram, MASK_SPAN_S,
};
pub use model::{GstAttention, StyleConfig, StyleModel, TextEncoding};
pub use tensor::Tensor;
pub use train::{
    apply_gradients, batch_gradients, batch_loss, pair_boundary, prepare_batch,
    training_step, ConditioningSource, LossBreakdown, PreparedBatch, StepReport,
    TrainSample,
};

use std::fmt;
use std::path::PathBuf;

use thiserror::Error;

/// Errors from style feature extraction, modeling, and training.
#[derive(Debug, Error)]
pub enum StyleError {
    #[error("reading {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("input too short: {got} samples, need at least {needed}")]
    TooShortInput { needed: usize, got: usize },

    #[error("{what} is not finite")]
    NonFinite { what: String },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("view {index} has zero norm and cannot be compared")]
    ZeroNormView { index: usize },

    #[error("bad batch: {message}")]
    BadBatch { message: String },

    #[error("bad configuration: {message}")]
    BadConfig { message: String },

    #[error("sentence boundary {boundary} out of range for {len} encoded steps")]
    BoundaryOutOfRange { boundary: usize, len: usize },

    #[error("checkpoint {path} line {line}: {message}")]
    CheckpointParse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("checkpoint parameter {name}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        got: Vec<usize>,
    },

    #[error("checkpoint has unknown parameter {name}")]
    UnknownParam { name: String },

    #[error("checkpoint is missing parameter {name}")]
    MissingParam { name: String },
}

/// Which network produced a style embedding.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbeddingSource {
    /// Attention over style tokens, driven by reference audio.
    Gst,
    /// Predicted from text alone.
    Tpgst,
}

impl fmt::Display for EmbeddingSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EmbeddingSource::Gst => "gst",
            EmbeddingSource::Tpgst => "tpgst",
        })
    }
}

/// A fixed-length speaking-style vector with its provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct StyleEmbedding {
    /// The embedding values.
    pub vector: Vec<f64>,
    /// Which network produced it.
    pub source: EmbeddingSource,
}

impl StyleEmbedding {
    /// Wraps a vector, validating it is non-empty and finite.
    pub fn new(vector: Vec<f64>, source: EmbeddingSource) -> Result<Self, StyleError> {
        if vector.is_empty() {
            return Err(StyleError::BadBatch {
                message: "empty style embedding".into(),
            });
        }
        if !vector.iter().all(|v| v.is_finite()) {
            return Err(StyleError::NonFinite {
                what: format!("{source} style embedding"),
            });
        }
        Ok(Self { vector, source })
    }

    /// Embedding dimensionality.
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}
