//! Normalized-temperature cross-entropy over paired views.
//!
//! Views arrive in positive-pair order — `views[2k]` and `views[2k+1]`
//! are the two views of sample `k` — and each view `i` is scored against
//! its partner `p(i) = i XOR 1`:
//!
//! ```text
//! ℓ_i = −log( exp(sim(i, p(i))/τ) / Σ_{k≠i} exp(sim(i, k)/τ) )
//! ```
//!
//! with cosine similarity and the mean of ℓ over all views as the loss.
//! Self-similarity is excluded from the denominator by adding `−1e30` to
//! the diagonal of the scaled similarity matrix: after the shifted
//! log-sum-exp that entry underflows to an exact zero contribution in
//! both the value and the gradient, so the exclusion is exact rather than
//! approximate.
//!
//! Because similarities are cosines, the loss is invariant under any
//! uniform positive rescaling of the view vectors; zero-norm views have
//! no direction and are rejected up front.

use super::tape::{Tape, Var};
use super::tensor::Tensor;
use super::{StyleEmbedding, StyleError};

/// Additive mask that removes an entry from a shifted log-sum-exp.
pub(crate) const NEG_MASK: f64 = -1e30;

/// A validated set of contrastive views.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastiveBatch {
    views: Tensor,
    temperature: f64,
}

impl ContrastiveBatch {
    /// Validates and packs `2N` views ordered as consecutive positive
    /// pairs.
    ///
    /// Requires an even count of at least 4 (one pair has no negatives),
    /// a common dimension, finite entries, nonzero norms, and a positive
    /// temperature.
    pub fn new(views: &[StyleEmbedding], temperature: f64) -> Result<Self, StyleError> {
        if views.len() < 4 || views.len() % 2 != 0 {
            return Err(StyleError::BadBatch {
                message: format!(
                    "contrastive batch needs an even count of at least 4 views, got {}",
                    views.len()
                ),
            });
        }
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(StyleError::BadConfig {
                message: format!("temperature must be positive, got {temperature}"),
            });
        }
        let dim = views[0].dim();
        for (index, view) in views.iter().enumerate() {
            if view.dim() != dim {
                return Err(StyleError::DimensionMismatch { expected: dim, got: view.dim() });
            }
            if !view.vector.iter().all(|v| v.is_finite()) {
                return Err(StyleError::NonFinite { what: format!("view {index}") });
            }
            if view.vector.iter().map(|v| v * v).sum::<f64>() == 0.0 {
                return Err(StyleError::ZeroNormView { index });
            }
        }
        let data = views.iter().flat_map(|v| v.vector.iter().copied()).collect();
        Ok(Self {
            views: Tensor::new(&[views.len(), dim], data),
            temperature,
        })
    }

    /// Number of views (`2N`).
    pub fn n_views(&self) -> usize {
        self.views.rows()
    }

    /// Dimension of each view.
    pub fn dim(&self) -> usize {
        self.views.cols()
    }

    /// The softmax temperature.
    pub fn temperature(&self) -> f64 {
        self.temperature
    }
}

/// Mean contrastive loss over all views of the batch.
pub fn nt_xent_loss(batch: &ContrastiveBatch) -> f64 {
    let mut tape = Tape::new();
    let views = tape.leaf(batch.views.clone());
    let loss = tape_nt_xent(&mut tape, views, batch.temperature);
    tape.value(loss).scalar_value()
}

/// Records the loss on an existing tape so gradients can flow into the
/// view embeddings. `views` is `[2N × d]` in positive-pair order; norms
/// must already be verified nonzero.
pub(crate) fn tape_nt_xent(tape: &mut Tape, views: Var, temperature: f64) -> Var {
    let n = tape.value(views).rows();
    debug_assert!(n >= 4 && n % 2 == 0, "ill-formed contrastive batch of {n} views");

    let normed = tape.l2_normalize_rows(views);
    let normed_t = tape.transpose(normed);
    let sims = tape.matmul(normed, normed_t);
    let scaled = tape.scale(sims, 1.0 / temperature);

    let mut diag = Tensor::zeros(&[n, n]);
    let mut partners = Tensor::zeros(&[n, n]);
    for i in 0..n {
        diag.data_mut()[i * n + i] = NEG_MASK;
        partners.data_mut()[i * n + (i ^ 1)] = 1.0;
    }
    let diag = tape.leaf(diag);
    let partners = tape.leaf(partners);

    let masked = tape.add(scaled, diag);
    let denominators = tape.logsumexp_rows(masked);
    let picked = tape.mul(scaled, partners);
    let positives = tape.row_sums(picked);
    let per_view = tape.sub(denominators, positives);
    tape.mean_all(per_view)
}
