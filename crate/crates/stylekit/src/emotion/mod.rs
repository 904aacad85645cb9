//! Per-sentence emotion labels: ingestion, thresholding, and statistics.
//!
//! Sentence-level emotion comes from an external text classifier whose
//! outputs arrive either as a label file or through the small TCP client in
//! [`client`]. A label is one of seven fixed categories together with a
//! confidence score in `[0, 1]`. Low-confidence predictions fall back to
//! `neutral`: with the default threshold of 0.7, a sentence keeps its raw
//! category only when the classifier scored it at or above the threshold.
//!
//! The label file format mirrors the manifest format: UTF-8, tab-separated
//! `id \t category \t score`, `#` comments allowed.

pub mod client;

use std::collections::BTreeMap;
use std::fmt;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::corpus::CorpusManifest;

/// Confidence threshold below which labels fall back to neutral.
pub const DEFAULT_THRESHOLD: f64 = 0.7;

/// Errors from label parsing and statistics.
#[derive(Debug, Error)]
pub enum LabelError {
    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        /// File being read or written.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A line could not be parsed as a label record.
    #[error("{path}:{line}: {message}")]
    Parse {
        /// Label file.
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },
    /// A category string outside the closed 7-label set.
    #[error("unknown emotion category {got:?}")]
    UnknownCategory {
        /// Offending string.
        got: String,
    },
    /// A confidence score outside `[0, 1]`.
    #[error("score {got} outside [0, 1]")]
    ScoreRange {
        /// Offending value.
        got: f64,
    },
    /// The same utterance id was labelled twice.
    #[error("duplicate label for utterance {id}")]
    DuplicateId {
        /// Offending id.
        id: String,
    },
    /// Statistics over no labels are undefined.
    #[error("label collection is empty")]
    Empty,
    /// A manifest utterance has no label.
    #[error("no label for utterance {id}")]
    MissingLabel {
        /// Unlabelled id.
        id: String,
    },
    /// The manifest has no within-story consecutive pairs to measure.
    #[error("manifest has no consecutive sentence pairs")]
    NoPairs,
}

/// The closed set of sentence emotion categories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EmotionLabel {
    /// No marked emotion (also the low-confidence fallback).
    Neutral,
    /// Joy.
    Joy,
    /// Fear.
    Fear,
    /// Anger.
    Anger,
    /// Sadness.
    Sadness,
    /// Love.
    Love,
    /// Surprise.
    Surprise,
}

impl EmotionLabel {
    /// All seven categories, in canonical order.
    pub const ALL: [EmotionLabel; 7] = [
        EmotionLabel::Neutral,
        EmotionLabel::Joy,
        EmotionLabel::Fear,
        EmotionLabel::Anger,
        EmotionLabel::Sadness,
        EmotionLabel::Love,
        EmotionLabel::Surprise,
    ];

    /// Canonical lowercase name.
    pub fn as_str(self) -> &'static str {
        match self {
            EmotionLabel::Neutral => "neutral",
            EmotionLabel::Joy => "joy",
            EmotionLabel::Fear => "fear",
            EmotionLabel::Anger => "anger",
            EmotionLabel::Sadness => "sadness",
            EmotionLabel::Love => "love",
            EmotionLabel::Surprise => "surprise",
        }
    }
}

impl fmt::Display for EmotionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for EmotionLabel {
    type Err = LabelError;

    fn from_str(s: &str) -> Result<Self, LabelError> {
        EmotionLabel::ALL
            .into_iter()
            .find(|label| label.as_str() == s)
            .ok_or_else(|| LabelError::UnknownCategory { got: s.to_string() })
    }
}

/// One classifier output for one utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelRecord {
    /// Utterance the label belongs to.
    pub utterance_id: String,
    /// Category the classifier predicted.
    pub raw_category: EmotionLabel,
    /// Classifier confidence in `[0, 1]`.
    pub score: f64,
    /// Category after thresholding; equals `raw_category` until a threshold
    /// is applied.
    pub effective_category: EmotionLabel,
}

impl LabelRecord {
    /// Builds an un-thresholded record (`effective = raw`), validating the
    /// score range.
    pub fn new(
        utterance_id: impl Into<String>,
        raw_category: EmotionLabel,
        score: f64,
    ) -> Result<Self, LabelError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(LabelError::ScoreRange { got: score });
        }
        Ok(Self {
            utterance_id: utterance_id.into(),
            raw_category,
            score,
            effective_category: raw_category,
        })
    }
}

/// Applies the neutral-fallback rule to one record.
///
/// Scores *below* the threshold fall back to neutral; a score exactly at the
/// threshold keeps the raw category. Raw fields are never modified, so the
/// operation is idempotent and re-thresholding with a different value is
/// always possible.
pub fn apply_threshold(record: &LabelRecord, threshold: f64) -> LabelRecord {
    let effective = if record.score >= threshold {
        record.raw_category
    } else {
        EmotionLabel::Neutral
    };
    LabelRecord { effective_category: effective, ..record.clone() }
}

/// Applies [`apply_threshold`] to every record of a label map.
pub fn apply_threshold_all(
    labels: &BTreeMap<String, LabelRecord>,
    threshold: f64,
) -> BTreeMap<String, LabelRecord> {
    labels
        .iter()
        .map(|(id, rec)| (id.clone(), apply_threshold(rec, threshold)))
        .collect()
}

/// Loads a label file into a map keyed by utterance id.
///
/// Thresholding is not applied here: every record's effective category
/// equals its raw category, so callers decide the threshold explicitly.
pub fn load_labels(path: &Path) -> Result<BTreeMap<String, LabelRecord>, LabelError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| LabelError::Io { path: path.to_path_buf(), source })?;
    let mut labels = BTreeMap::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(LabelError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        let id = fields[0].trim();
        let category: EmotionLabel =
            fields[1].trim().parse().map_err(|e: LabelError| LabelError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: e.to_string(),
            })?;
        let score: f64 = fields[2].trim().parse().map_err(|_| LabelError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("score: invalid number {:?}", fields[2]),
        })?;
        let record = LabelRecord::new(id, category, score).map_err(|e| LabelError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: e.to_string(),
        })?;
        if labels.insert(id.to_string(), record).is_some() {
            return Err(LabelError::DuplicateId { id: id.to_string() });
        }
    }
    Ok(labels)
}

/// Serializes a label map in the file format of [`load_labels`].
///
/// Effective categories are written, so the output of a thresholding pass
/// reloads as already-thresholded raw labels; re-thresholding it at the same
/// value is a no-op.
pub fn format_labels(labels: &BTreeMap<String, LabelRecord>) -> String {
    let mut out = String::new();
    for rec in labels.values() {
        let _ = writeln!(out, "{}\t{}\t{}", rec.utterance_id, rec.effective_category, rec.score);
    }
    out
}

/// Writes a label file.
pub fn write_labels(
    labels: &BTreeMap<String, LabelRecord>,
    path: &Path,
) -> Result<(), LabelError> {
    std::fs::write(path, format_labels(labels))
        .map_err(|source| LabelError::Io { path: path.to_path_buf(), source })
}

/// Percentage of records per effective category, over all 7 categories.
///
/// Categories that never occur map to 0; values sum to 100 up to rounding
/// noise.
pub fn label_distribution<'a>(
    labels: impl IntoIterator<Item = &'a LabelRecord>,
) -> Result<BTreeMap<EmotionLabel, f64>, LabelError> {
    let mut counts: BTreeMap<EmotionLabel, usize> =
        EmotionLabel::ALL.into_iter().map(|l| (l, 0)).collect();
    let mut total = 0usize;
    for rec in labels {
        *counts.get_mut(&rec.effective_category).expect("closed label set") += 1;
        total += 1;
    }
    if total == 0 {
        return Err(LabelError::Empty);
    }
    Ok(counts
        .into_iter()
        .map(|(label, count)| (label, 100.0 * count as f64 / total as f64))
        .collect())
}

/// Fraction of within-story consecutive pairs whose effective categories are
/// equal and non-neutral.
///
/// This is the statistic motivating augmentation: if only a few percent of
/// naturally consecutive sentences share a non-neutral emotion, coherent
/// long-form training data must be constructed rather than harvested.
pub fn consecutive_match_rate(
    manifest: &CorpusManifest,
    labels: &BTreeMap<String, LabelRecord>,
) -> Result<f64, LabelError> {
    let mut pairs = 0usize;
    let mut matched = 0usize;
    for story in manifest.story_slices() {
        for pair in story.windows(2) {
            let a = labels
                .get(&pair[0].id)
                .ok_or_else(|| LabelError::MissingLabel { id: pair[0].id.clone() })?;
            let b = labels
                .get(&pair[1].id)
                .ok_or_else(|| LabelError::MissingLabel { id: pair[1].id.clone() })?;
            pairs += 1;
            if a.effective_category == b.effective_category
                && a.effective_category != EmotionLabel::Neutral
            {
                matched += 1;
            }
        }
    }
    if pairs == 0 {
        return Err(LabelError::NoPairs);
    }
    Ok(matched as f64 / pairs as f64)
}
