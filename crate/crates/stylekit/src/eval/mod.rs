//! Objective evaluation: pause-distribution comparison, TP-GST L1,
//! and the emotion probe.
//!
//! Three questions are answered here. Do synthesized inter-sentence pauses
//! follow the ground-truth pause distribution (two-sample K-S test over
//! pauses measured from forced alignments)? How closely does the
//! text-predicted style embedding track the audio-derived one (mean absolute
//! difference)? And do style embeddings carry emotion information (linear
//! probe with repeated stratified splits)?
//!
//! Reports come in two shapes: a human-readable summary and machine lines,
//! one per metric, tab-separated `metric \t value \t n \t seed` with `-` for
//! a missing seed.

pub mod ks;
pub mod probe;
pub mod textgrid;

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

pub use ks::{ks_two_sample, KsResult};
pub use probe::{emotion_probe, ProbeResult};
pub use textgrid::{
    format_alignment, measure_intersentence_pause, parse_alignment, parse_alignment_str,
    write_alignment, PauseMeasurement, WordInterval,
};

use crate::emotion::EmotionLabel;
use crate::style::StyleEmbedding;

/// Errors from evaluation metrics and alignment parsing.
#[derive(Debug, Error)]
pub enum EvalError {
    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        /// File being read or written.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A TextGrid line could not be parsed.
    #[error("{path}:{line}: {message}")]
    Parse {
        /// Alignment file.
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },
    /// The TextGrid has no `words` tier.
    #[error("{path}: no word tier found")]
    MissingWordTier {
        /// Offending file.
        path: PathBuf,
    },
    /// A statistic over an empty sample is undefined.
    #[error("{which} sample is empty")]
    EmptySample {
        /// Which argument was empty.
        which: String,
    },
    /// An input contains NaN or infinity.
    #[error("{what} contains a non-finite value")]
    NonFinite {
        /// Offending input.
        what: String,
    },
    /// Embedding dimensions disagree.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch {
        /// Expected dimension.
        expected: usize,
        /// Found dimension.
        got: usize,
    },
    /// Parallel lists have different lengths.
    #[error("length mismatch: {left} embeddings vs {right} labels")]
    LengthMismatch {
        /// Left list length.
        left: usize,
        /// Right list length.
        right: usize,
    },
    /// The alignment has too few words for the requested boundary.
    #[error("alignment has {found} words, need at least {needed}")]
    InsufficientWords {
        /// Words needed (boundary + 1).
        needed: usize,
        /// Words found.
        found: usize,
    },
    /// The probe needs at least two classes.
    #[error("probe needs at least 2 distinct labels")]
    SingleClass,
    /// The probe needs a minimum sample count.
    #[error("probe needs at least {needed} samples, found {found}")]
    TooFewSamples {
        /// Minimum count.
        needed: usize,
        /// Found count.
        found: usize,
    },
    /// A class too small to appear on both sides of a stratified split.
    #[error("class {class} has only {count} sample(s); stratified splits need 2")]
    TooFewPerClass {
        /// Offending class.
        class: EmotionLabel,
        /// Member count.
        count: usize,
    },
    /// test_fraction outside (0, 1) or zero repeats.
    #[error("test fraction {got} outside (0, 1), or zero repeats")]
    BadFraction {
        /// Offending value.
        got: f64,
    },
}

/// Mean absolute difference between two style embeddings.
pub fn tpgst_l1(predicted: &StyleEmbedding, target: &StyleEmbedding) -> Result<f64, EvalError> {
    if predicted.vector.len() != target.vector.len() {
        return Err(EvalError::DimensionMismatch {
            expected: target.vector.len(),
            got: predicted.vector.len(),
        });
    }
    if predicted.vector.is_empty() {
        return Err(EvalError::EmptySample { which: "embedding".into() });
    }
    let sum: f64 = predicted
        .vector
        .iter()
        .zip(&target.vector)
        .map(|(p, t)| (p - t).abs())
        .sum();
    Ok(sum / predicted.vector.len() as f64)
}

/// One machine-readable report line.
#[derive(Debug, Clone, PartialEq)]
pub struct ReportLine {
    /// Metric name.
    pub metric: String,
    /// Metric value.
    pub value: f64,
    /// Sample count behind the value.
    pub n: usize,
    /// Seed the metric depended on, if any.
    pub seed: Option<u64>,
}

impl ReportLine {
    /// Builds a line.
    pub fn new(metric: impl Into<String>, value: f64, n: usize, seed: Option<u64>) -> Self {
        Self { metric: metric.into(), value, n, seed }
    }

    /// The tab-separated machine form, `metric \t value \t n \t seed`.
    pub fn to_tsv(&self) -> String {
        let seed = self.seed.map_or_else(|| "-".to_string(), |s| s.to_string());
        format!("{}\t{}\t{}\t{}", self.metric, self.value, self.n, seed)
    }
}

/// Serializes report lines, one metric per line.
pub fn format_report(lines: &[ReportLine]) -> String {
    let mut out = String::new();
    for line in lines {
        let _ = writeln!(out, "{}", line.to_tsv());
    }
    out
}

/// Writes a machine-readable report file.
pub fn write_report(lines: &[ReportLine], path: &Path) -> Result<(), EvalError> {
    std::fs::write(path, format_report(lines))
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// K-S comparison of synthesized vs ground-truth pauses, with reports.
#[derive(Debug, Clone, PartialEq)]
pub struct PauseComparison {
    /// The underlying test result.
    pub ks: KsResult,
    /// One-word verdict.
    pub verdict: String,
    /// Human-readable summary.
    pub summary: String,
    /// Machine lines (`ks_statistic`, `ks_p_value`).
    pub machine_lines: Vec<ReportLine>,
}

/// Compares synthesized pauses against ground truth with the K-S test.
///
/// A smaller statistic means the synthesized pauses sit closer to the
/// ground-truth distribution; a statistic of 0 means the empirical CDFs are
/// indistinguishable.
pub fn compare_pause_distributions(
    synth_pauses: &[f64],
    ground_truth_pauses: &[f64],
) -> Result<PauseComparison, EvalError> {
    let ks = ks_two_sample(synth_pauses, ground_truth_pauses)?;
    let verdict = if ks.statistic == 0.0 {
        "indistinguishable".to_string()
    } else if ks.p_value >= 0.05 {
        "consistent with ground truth".to_string()
    } else {
        "distinguishable from ground truth".to_string()
    };
    let summary = format!(
        "pause distributions: K-S statistic {} (smaller is closer to ground truth), \
         p-value {}, n_synth {}, n_truth {} -> {}",
        ks.statistic, ks.p_value, ks.n1, ks.n2, verdict
    );
    let n = ks.n1 + ks.n2;
    let machine_lines = vec![
        ReportLine::new("ks_statistic", ks.statistic, n, None),
        ReportLine::new("ks_p_value", ks.p_value, n, None),
    ];
    Ok(PauseComparison { ks, verdict, summary, machine_lines })
}
