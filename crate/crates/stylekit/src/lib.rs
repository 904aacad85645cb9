//! Corpus augmentation and expressive-style training toolkit for
//! concatenative text-to-speech data.
//!
//! The crate covers the data side of training an expressive style module:
//!
//! - [`corpus`]: utterance manifests, segmentation statistics, inter-sentence
//!   pause extraction and fitting.
//! - [`emotion`]: per-sentence emotion labels, confidence thresholding, label
//!   statistics, and a small remote-classifier client.
//! - [`augment`]: emotion-coherent pair construction, pause sampling, audio
//!   concatenation with inserted silence, and augmented-manifest emission.
//! - [`style`]: mel front-end, masked views, reference encoder, style-token
//!   attention, text-predicted style embeddings, NT-Xent loss, and the
//!   combined training step.
//! - [`eval`]: two-sample Kolmogorov-Smirnov test, TextGrid word intervals,
//!   inter-sentence pause measurement, and a repeated-split emotion probe.
//!
//! Every stochastic operation takes an explicit seed or generator; see
//! [`seed`] for the derivation scheme shared with the command-line pipeline.

pub mod audio;
pub mod augment;
pub mod corpus;
pub mod emotion;
pub mod eval;
pub mod seed;
pub mod style;
