//! Batch assembly and the combined self-supervised training step.
//!
//! A step computes, per sample:
//!
//! 1. the audio-driven style embedding of the **full** spectrogram, then
//!    freezes it (`stop_grad`) as the regression target;
//! 2. the text-driven embedding of each sentence (split at the boundary
//!    for two-sentence samples) against that frozen whole-utterance
//!    target, under an L1 penalty;
//! 3. audio-driven embeddings of **two independently masked** views, which
//!    enter a contrastive term weighted by `simclr_scale`.
//!
//! The total is `L1 + simclr_scale × nt_xent`. Gradients therefore reach
//! the text path only through the L1 term and the audio path (reference
//! encoder, token bank, attention projections) only through the
//! contrastive term — the frozen target carries none by construction.
//!
//! Each sample also draws a conditioning source: with probability
//! `conditioning_prob` the audio-driven embedding, otherwise the
//! text-driven one. The draw simulates which embedding a downstream
//! synthesizer would consume (synthesis itself is out of scope) and is
//! recorded in the step report without affecting the loss.
//!
//! All randomness of step `k` comes from one stream derived as
//! `("train-step", k)` from the master seed, so a run can be stopped and
//! resumed at any step boundary and remain bit-identical. Within a
//! sample, the draw order is fixed: conditioning first, then the first
//! view's mask, then the second's.

use std::collections::BTreeMap;
use std::fmt;

use rand::Rng;

use super::loss::tape_nt_xent;
use super::mel::{mask_view, MaskOutcome, MelSpectrogram, MASK_SPAN_S};
use super::model::{StyleConfig, StyleModel, TextEncoding};
use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::StyleError;
use crate::seed;

/// One training example: the rendered audio's spectrogram and the
/// encoding of its text (with the sentence boundary for pairs).
#[derive(Debug, Clone)]
pub struct TrainSample {
    /// Spectrogram of the full (unmasked) utterance.
    pub mel: MelSpectrogram,
    /// Byte-level encoding of the matching training text.
    pub text: TextEncoding,
}

/// Which embedding a sample would hand to a downstream synthesizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConditioningSource {
    /// The audio-driven embedding, taken directly.
    Gst,
    /// The text-predicted embedding, simulating inference.
    Tpgst,
}

impl fmt::Display for ConditioningSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ConditioningSource::Gst => "gst",
            ConditioningSource::Tpgst => "tpgst",
        })
    }
}

pub(crate) struct PreparedSample {
    full: Tensor,
    views: [Tensor; 2],
    outcomes: [MaskOutcome; 2],
    bytes: Vec<u8>,
    boundary: Option<usize>,
    conditioning: ConditioningSource,
}

/// A batch with masking and conditioning decisions already drawn, so the
/// loss is a pure function of the parameters.
pub struct PreparedBatch {
    samples: Vec<PreparedSample>,
    simclr_scale: f64,
    temperature: f64,
}

impl PreparedBatch {
    /// Number of samples.
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    /// True when the batch holds no samples (never produced by
    /// [`prepare_batch`]).
    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Conditioning draws, one per sample.
    pub fn conditioning(&self) -> Vec<ConditioningSource> {
        self.samples.iter().map(|s| s.conditioning).collect()
    }

    /// Mask placements per sample, two per entry.
    pub fn mask_outcomes(&self) -> Vec<[MaskOutcome; 2]> {
        self.samples.iter().map(|s| s.outcomes).collect()
    }
}

/// Draws masks and conditioning choices for one batch.
///
/// Fails on an empty batch, on a single-sample batch when the contrastive
/// term is active (one pair has no negatives), and on spectrograms whose
/// band count does not match the configuration.
pub fn prepare_batch(
    samples: &[TrainSample],
    cfg: &StyleConfig,
    rng: &mut impl Rng,
) -> Result<PreparedBatch, StyleError> {
    if samples.is_empty() {
        return Err(StyleError::BadBatch { message: "empty batch".into() });
    }
    if cfg.simclr_scale > 0.0 && samples.len() < 2 {
        return Err(StyleError::BadBatch {
            message: "the contrastive term needs at least 2 samples per batch, got 1".into(),
        });
    }
    let mut prepared = Vec::with_capacity(samples.len());
    for sample in samples {
        if sample.mel.n_mels() != cfg.n_mels {
            return Err(StyleError::DimensionMismatch {
                expected: cfg.n_mels,
                got: sample.mel.n_mels(),
            });
        }
        let conditioning = if rng.random::<f64>() < cfg.conditioning_prob {
            ConditioningSource::Gst
        } else {
            ConditioningSource::Tpgst
        };
        let (view_a, outcome_a) = mask_view(&sample.mel, MASK_SPAN_S, rng);
        let (view_b, outcome_b) = mask_view(&sample.mel, MASK_SPAN_S, rng);
        prepared.push(PreparedSample {
            full: sample.mel.data().clone(),
            views: [view_a.data().clone(), view_b.data().clone()],
            outcomes: [outcome_a, outcome_b],
            bytes: sample.text.bytes().to_vec(),
            boundary: sample.text.sentence_boundary(),
            conditioning,
        });
    }
    Ok(PreparedBatch {
        samples: prepared,
        simclr_scale: cfg.simclr_scale,
        temperature: cfg.temperature,
    })
}

/// The loss and its parts; `total = l1 + simclr_scale × simclr`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossBreakdown {
    /// The optimized objective.
    pub total: f64,
    /// Mean absolute error of text predictions against frozen targets.
    pub l1: f64,
    /// Unscaled contrastive loss; 0 when the term is disabled.
    pub simclr: f64,
}

struct TapeLoss {
    params: BTreeMap<String, Var>,
    total: Var,
    l1: Var,
    ntx: Option<Var>,
}

fn batch_terms(
    model: &StyleModel,
    batch: &PreparedBatch,
    tape: &mut Tape,
) -> Result<TapeLoss, StyleError> {
    let params = model.leaf_params(tape);
    let mut l1_rows = Vec::new();
    let mut view_rows = Vec::new();
    for sample in &batch.samples {
        let query = model.reference_encode_on(tape, &params, &sample.full)?;
        let (_, gst) = model.gst_attend_on(tape, &params, query)?;
        let target = tape.stop_grad(gst);
        let states = model.text_states_on(tape, &params, &sample.bytes, sample.boundary)?;
        let predictions = model.tpgst_heads_on(tape, &params, states, sample.boundary)?;
        for prediction in predictions {
            let diff = tape.sub(prediction, target);
            l1_rows.push(tape.abs(diff));
        }
        if batch.simclr_scale > 0.0 {
            for view in &sample.views {
                let query = model.reference_encode_on(tape, &params, view)?;
                let (_, embedding) = model.gst_attend_on(tape, &params, query)?;
                view_rows.push(embedding);
            }
        }
    }
    let stacked = tape.concat_rows(&l1_rows);
    let l1 = tape.mean_all(stacked);

    let (total, ntx) = if batch.simclr_scale > 0.0 {
        let views = tape.concat_rows(&view_rows);
        for (index, row) in (0..tape.value(views).rows()).map(|i| (i, tape.value(views).row(i)))
        {
            if row.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                return Err(StyleError::ZeroNormView { index });
            }
        }
        let ntx = tape_nt_xent(tape, views, batch.temperature);
        let weighted = tape.scale(ntx, batch.simclr_scale);
        (tape.add(l1, weighted), Some(ntx))
    } else {
        (l1, None)
    };
    Ok(TapeLoss { params, total, l1, ntx })
}

fn breakdown(tape: &Tape, terms: &TapeLoss) -> LossBreakdown {
    LossBreakdown {
        total: tape.value(terms.total).scalar_value(),
        l1: tape.value(terms.l1).scalar_value(),
        simclr: terms.ntx.map_or(0.0, |v| tape.value(v).scalar_value()),
    }
}

/// Evaluates the loss of a prepared batch under the current parameters.
pub fn batch_loss(model: &StyleModel, batch: &PreparedBatch) -> Result<LossBreakdown, StyleError> {
    let mut tape = Tape::new();
    let terms = batch_terms(model, batch, &mut tape)?;
    Ok(breakdown(&tape, &terms))
}

/// Evaluates the loss and differentiates it with respect to every
/// parameter. Parameters untouched by the batch get zero gradients.
pub fn batch_gradients(
    model: &StyleModel,
    batch: &PreparedBatch,
) -> Result<(LossBreakdown, BTreeMap<String, Tensor>), StyleError> {
    let mut tape = Tape::new();
    let terms = batch_terms(model, batch, &mut tape)?;
    let loss = breakdown(&tape, &terms);
    let mut grads = tape.backward(terms.total);
    let gradients = terms
        .params
        .iter()
        .map(|(name, &var)| {
            let grad = grads
                .take(var)
                .unwrap_or_else(|| Tensor::zeros(model.param(name).unwrap().shape()));
            (name.clone(), grad)
        })
        .collect();
    Ok((loss, gradients))
}

/// One plain gradient-descent update: `p ← p − lr · g`.
pub fn apply_gradients(
    model: &mut StyleModel,
    gradients: &BTreeMap<String, Tensor>,
    learning_rate: f64,
) -> Result<(), StyleError> {
    for (name, grad) in gradients {
        let Some(param) = model.param_mut(name) else {
            return Err(StyleError::UnknownParam { name: name.clone() });
        };
        if param.shape() != grad.shape() {
            return Err(StyleError::ShapeMismatch {
                name: name.clone(),
                expected: param.shape().to_vec(),
                got: grad.shape().to_vec(),
            });
        }
        for (p, g) in param.data_mut().iter_mut().zip(grad.data()) {
            *p -= learning_rate * g;
        }
    }
    Ok(())
}

/// What one training step did.
#[derive(Debug, Clone, PartialEq)]
pub struct StepReport {
    /// The step index the report belongs to.
    pub step: u64,
    /// Loss values before the update.
    pub loss: LossBreakdown,
    /// Conditioning draw per sample.
    pub conditioning: Vec<ConditioningSource>,
    /// Mask placements per sample.
    pub masks: Vec<[MaskOutcome; 2]>,
}

/// Runs one optimization step over a batch.
///
/// Randomness is rederived from `(master_seed, "train-step", step)`, so
/// repeating a step index reproduces it exactly. A non-finite total loss
/// aborts before any parameter changes.
pub fn training_step(
    model: &mut StyleModel,
    samples: &[TrainSample],
    step: u64,
    master_seed: u64,
) -> Result<StepReport, StyleError> {
    let mut rng = seed::rng_indexed(master_seed, "train-step", step);
    let batch = prepare_batch(samples, model.cfg(), &mut rng)?;
    let (loss, gradients) = batch_gradients(model, &batch)?;
    if !loss.total.is_finite() {
        return Err(StyleError::NonFinite { what: format!("total loss at step {step}") });
    }
    let learning_rate = model.cfg().learning_rate;
    apply_gradients(model, &gradients, learning_rate)?;
    Ok(StepReport {
        step,
        loss,
        conditioning: batch.conditioning(),
        masks: batch.mask_outcomes(),
    })
}

/// Byte index where the second sentence of a joined pair text starts.
///
/// Pair texts have the form `"{first} {second}~"`; the separating space
/// is grouped with the first sentence and the terminator with the second,
/// so the boundary sits one byte past the first text.
pub fn pair_boundary(first_text: &str) -> usize {
    first_text.len() + 1
}
