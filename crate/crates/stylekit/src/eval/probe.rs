//! Repeated-split emotion probe over style embeddings.
//!
//! The probe asks how much emotion information a set of embeddings carries:
//! a small linear classifier is trained on 75% of the embeddings and scored
//! on the held-out 25%, and the split-train-score cycle repeats 50 times
//! with fresh seeded splits. The classifier is deliberately simple — a
//! regularized multinomial logistic regression trained by full-batch
//! gradient descent — because the probe measures the embeddings, not the
//! classifier. Splits are stratified per class so small minority classes
//! appear on both sides of every split.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;

use super::EvalError;
use crate::emotion::EmotionLabel;
use crate::seed;
use crate::style::StyleEmbedding;

/// Probe output: the accuracy trajectory and its mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeResult {
    /// Mean of `per_run`.
    pub mean_accuracy: f64,
    /// Test accuracy of each repeat, in repeat order.
    pub per_run: Vec<f64>,
    /// Seed the splits were derived from.
    pub seed: u64,
}

const EPOCHS: usize = 200;
const LEARNING_RATE: f64 = 0.5;
const L2_PENALTY: f64 = 1e-3;
const STD_FLOOR: f64 = 1e-9;

/// Runs the repeated-split probe.
///
/// Each repeat `r` derives its own generator from `(seed, "probe-repeat",
/// r)`, shuffles every class's indices, holds out `max(1,
/// round(test_fraction · n_class))` of them, z-scores features on the train
/// portion, fits the classifier from zero weights, and records test
/// accuracy. Everything is a pure function of the inputs and seed.
pub fn emotion_probe(
    embeddings: &[StyleEmbedding],
    labels: &[EmotionLabel],
    test_fraction: f64,
    repeats: usize,
    seed: u64,
) -> Result<ProbeResult, EvalError> {
    if embeddings.len() != labels.len() {
        return Err(EvalError::LengthMismatch {
            left: embeddings.len(),
            right: labels.len(),
        });
    }
    if embeddings.len() < 8 {
        return Err(EvalError::TooFewSamples { needed: 8, found: embeddings.len() });
    }
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(EvalError::BadFraction { got: test_fraction });
    }
    if repeats == 0 {
        return Err(EvalError::BadFraction { got: 0.0 });
    }
    let dim = embeddings[0].vector.len();
    for e in embeddings {
        if e.vector.len() != dim {
            return Err(EvalError::DimensionMismatch { expected: dim, got: e.vector.len() });
        }
        if e.vector.iter().any(|v| !v.is_finite()) {
            return Err(EvalError::NonFinite { what: "embedding".into() });
        }
    }

    // Class index per sample, classes in canonical label order.
    let mut by_class: BTreeMap<EmotionLabel, Vec<usize>> = BTreeMap::new();
    for (i, label) in labels.iter().enumerate() {
        by_class.entry(*label).or_default().push(i);
    }
    if by_class.len() < 2 {
        return Err(EvalError::SingleClass);
    }
    for (class, members) in &by_class {
        if members.len() < 2 {
            return Err(EvalError::TooFewPerClass { class: *class, count: members.len() });
        }
    }
    let class_of: BTreeMap<EmotionLabel, usize> =
        by_class.keys().enumerate().map(|(c, label)| (*label, c)).collect();
    let n_classes = class_of.len();
    let targets: Vec<usize> = labels.iter().map(|l| class_of[l]).collect();

    let mut per_run = Vec::with_capacity(repeats);
    for repeat in 0..repeats {
        let mut rng = seed::rng_indexed(seed, "probe-repeat", repeat as u64);
        let mut train = Vec::new();
        let mut test = Vec::new();
        for members in by_class.values() {
            let mut pool = members.clone();
            pool.shuffle(&mut rng);
            let n_test = ((test_fraction * pool.len() as f64).round() as usize)
                .clamp(1, pool.len() - 1);
            test.extend_from_slice(&pool[..n_test]);
            train.extend_from_slice(&pool[n_test..]);
        }
        per_run.push(run_once(embeddings, &targets, &train, &test, dim, n_classes));
    }
    let mean_accuracy = per_run.iter().sum::<f64>() / per_run.len() as f64;
    Ok(ProbeResult { mean_accuracy, per_run, seed })
}

/// Trains on `train`, returns accuracy on `test`.
fn run_once(
    embeddings: &[StyleEmbedding],
    targets: &[usize],
    train: &[usize],
    test: &[usize],
    dim: usize,
    n_classes: usize,
) -> f64 {
    // z-score normalization fitted on the train portion only.
    let mut mean = vec![0.0; dim];
    for &i in train {
        for (m, v) in mean.iter_mut().zip(&embeddings[i].vector) {
            *m += v;
        }
    }
    for m in &mut mean {
        *m /= train.len() as f64;
    }
    let mut std = vec![0.0; dim];
    for &i in train {
        for (s, (v, m)) in std.iter_mut().zip(embeddings[i].vector.iter().zip(&mean)) {
            *s += (v - m) * (v - m);
        }
    }
    for s in &mut std {
        *s = (*s / train.len() as f64).sqrt().max(STD_FLOOR);
    }
    let feature = |i: usize, j: usize| -> f64 {
        if j == dim {
            1.0 // bias feature
        } else {
            (embeddings[i].vector[j] - mean[j]) / std[j]
        }
    };

    // Multinomial logistic regression, full-batch gradient descent from 0.
    let width = dim + 1;
    let mut weights = vec![0.0; n_classes * width];
    let mut scores = vec![0.0; n_classes];
    for _ in 0..EPOCHS {
        let mut grad = vec![0.0; n_classes * width];
        for &i in train {
            softmax_scores(&weights, &mut scores, width, |j| feature(i, j));
            for (c, &p) in scores.iter().enumerate() {
                let residual = p - if c == targets[i] { 1.0 } else { 0.0 };
                for j in 0..width {
                    grad[c * width + j] += residual * feature(i, j);
                }
            }
        }
        let scale = LEARNING_RATE / train.len() as f64;
        for (w, g) in weights.iter_mut().zip(&grad) {
            *w -= scale * g + LEARNING_RATE * L2_PENALTY * *w;
        }
    }

    let mut correct = 0usize;
    for &i in test {
        softmax_scores(&weights, &mut scores, width, |j| feature(i, j));
        let predicted = scores
            .iter()
            .enumerate()
            .max_by(|(_, x), (_, y)| x.partial_cmp(y).expect("finite scores"))
            .map(|(c, _)| c)
            .expect("at least one class");
        if predicted == targets[i] {
            correct += 1;
        }
    }
    correct as f64 / test.len() as f64
}

fn softmax_scores(
    weights: &[f64],
    scores: &mut [f64],
    width: usize,
    feature: impl Fn(usize) -> f64,
) {
    for (c, score) in scores.iter_mut().enumerate() {
        *score = (0..width).map(|j| weights[c * width + j] * feature(j)).sum();
    }
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        total += *s;
    }
    for s in scores.iter_mut() {
        *s /= total;
    }
}
