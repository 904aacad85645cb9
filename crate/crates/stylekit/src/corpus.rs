//! Utterance manifests, segmentation statistics, and pause fitting.
//!
//! A corpus is a set of stories, each segmented into sentences with manually
//! labelled start and end times. The manifest format is line-oriented UTF-8,
//! one record per line, tab-separated:
//!
//! ```text
//! id \t story_id \t position \t start_s \t end_s \t audio_path \t text
//! ```
//!
//! Lines beginning with `#` are comments; blank lines are skipped. Times are
//! decimal seconds with a `.` separator. Relative audio paths are resolved
//! against the manifest's directory.
//!
//! Records are kept sorted by `(story_id, position)`. Two records of the same
//! story are *consecutive* when they are adjacent in that order; positions do
//! not have to be contiguous integers. Story boundaries are never crossed by
//! any statistic here: the paper's corpus deliberately avoids merging audio
//! across pages, and `story_id` is this toolkit's non-mergeable unit.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use thiserror::Error;

/// Default outlier cutoff for pause fitting, in seconds.
pub const DEFAULT_PAUSE_CUTOFF_S: f64 = 1.0;

/// Errors from manifest loading, validation, and statistics.
#[derive(Debug, Error)]
pub enum CorpusError {
    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        /// File being read or written.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// A line could not be parsed as a manifest record.
    #[error("{path}:{line}: {message}")]
    Parse {
        /// Manifest file.
        path: PathBuf,
        /// 1-based line number.
        line: usize,
        /// What was wrong.
        message: String,
    },
    /// A parsed record violates a manifest invariant.
    #[error("{path}:{line}: {message}")]
    Invalid {
        /// Manifest file.
        path: PathBuf,
        /// 1-based line number of the offending record.
        line: usize,
        /// Violated invariant.
        message: String,
    },
    /// A programmatically constructed record violates an invariant.
    #[error("record {id}: {message}")]
    InvalidRecord {
        /// Offending record id.
        id: String,
        /// Violated invariant.
        message: String,
    },
    /// The manifest contains no records.
    #[error("manifest is empty")]
    Empty,
    /// No story is long enough to form a single group.
    #[error("no story has {group_size} consecutive records; no groups to measure")]
    NoGroups {
        /// Requested group size.
        group_size: usize,
    },
    /// Group size zero is meaningless.
    #[error("group_size must be at least 1")]
    BadGroupSize,
    /// Too few pauses survive the cutoff to fit a distribution.
    #[error("pause fit needs at least 2 values within the cutoff, found {survivors}")]
    TooFewPauses {
        /// Number of in-range pauses.
        survivors: usize,
    },
    /// The fitted mean falls outside the distribution's valid range.
    #[error("fitted pause mean {mean_s} s lies outside [0, {cutoff_s}) s")]
    DegenerateFit {
        /// Fitted mean.
        mean_s: f64,
        /// Cutoff used.
        cutoff_s: f64,
    },
}

/// One segmented sentence of a story.
#[derive(Debug, Clone, PartialEq)]
pub struct UtteranceRecord {
    /// Unique utterance id.
    pub id: String,
    /// Story (non-mergeable unit) this sentence belongs to.
    pub story_id: String,
    /// Index of the sentence within its story.
    pub position: u32,
    /// Sentence start time in the story audio, seconds.
    pub start_s: f64,
    /// Sentence end time in the story audio, seconds.
    pub end_s: f64,
    /// Audio file holding exactly this sentence.
    pub audio_path: PathBuf,
    /// Sentence text, whitespace-trimmed, non-empty.
    pub text: String,
}

impl UtteranceRecord {
    /// Sentence duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.end_s - self.start_s
    }
}

/// A validated, ordered collection of utterance records.
#[derive(Debug, Clone)]
pub struct CorpusManifest {
    records: Vec<UtteranceRecord>,
    sample_rate_hz: u32,
    base_dir: Option<PathBuf>,
    by_id: BTreeMap<String, usize>,
}

impl CorpusManifest {
    /// Builds a manifest from records, validating every invariant.
    ///
    /// Records may arrive in any order; they are sorted by
    /// `(story_id, position)`.
    pub fn new(
        mut records: Vec<UtteranceRecord>,
        sample_rate_hz: u32,
    ) -> Result<Self, CorpusError> {
        if sample_rate_hz == 0 {
            return Err(CorpusError::InvalidRecord {
                id: String::new(),
                message: "sample_rate_hz must be positive".into(),
            });
        }
        records.sort_by(|a, b| {
            (a.story_id.as_str(), a.position).cmp(&(b.story_id.as_str(), b.position))
        });
        let mut by_id = BTreeMap::new();
        for (idx, rec) in records.iter().enumerate() {
            validate_record(rec).map_err(|message| CorpusError::InvalidRecord {
                id: rec.id.clone(),
                message,
            })?;
            if by_id.insert(rec.id.clone(), idx).is_some() {
                return Err(CorpusError::InvalidRecord {
                    id: rec.id.clone(),
                    message: "duplicate utterance id".into(),
                });
            }
            if idx > 0 {
                let prev = &records[idx - 1];
                if prev.story_id == rec.story_id {
                    if prev.position == rec.position {
                        return Err(CorpusError::InvalidRecord {
                            id: rec.id.clone(),
                            message: format!(
                                "duplicate (story_id, position) = ({}, {})",
                                rec.story_id, rec.position
                            ),
                        });
                    }
                    if rec.start_s < prev.start_s {
                        return Err(CorpusError::InvalidRecord {
                            id: rec.id.clone(),
                            message: format!(
                                "non-monotonic timing within story {}: start {} s \
                                 precedes start {} s of position {}",
                                rec.story_id, rec.start_s, prev.start_s, prev.position
                            ),
                        });
                    }
                }
            }
        }
        Ok(Self { records, sample_rate_hz, base_dir: None, by_id })
    }

    /// Records, sorted by `(story_id, position)`.
    pub fn records(&self) -> &[UtteranceRecord] {
        &self.records
    }

    /// Declared sample rate of all referenced audio, Hz.
    pub fn sample_rate_hz(&self) -> u32 {
        self.sample_rate_hz
    }

    /// Directory relative audio paths resolve against, when known.
    pub fn base_dir(&self) -> Option<&Path> {
        self.base_dir.as_deref()
    }

    /// Sets the directory relative audio paths resolve against.
    pub fn with_base_dir(mut self, dir: PathBuf) -> Self {
        self.base_dir = Some(dir);
        self
    }

    /// Looks a record up by id.
    pub fn get(&self, id: &str) -> Option<&UtteranceRecord> {
        self.by_id.get(id).map(|&i| &self.records[i])
    }

    /// Absolute-or-resolved path of a record's audio file.
    pub fn resolve_audio(&self, record: &UtteranceRecord) -> PathBuf {
        match (&self.base_dir, record.audio_path.is_absolute()) {
            (Some(base), false) => base.join(&record.audio_path),
            _ => record.audio_path.clone(),
        }
    }

    /// Per-story slices, each ordered by position.
    pub fn story_slices(&self) -> Vec<&[UtteranceRecord]> {
        let mut slices = Vec::new();
        let mut begin = 0;
        for i in 1..=self.records.len() {
            if i == self.records.len() || self.records[i].story_id != self.records[begin].story_id
            {
                slices.push(&self.records[begin..i]);
                begin = i;
            }
        }
        slices
    }
}

fn validate_record(rec: &UtteranceRecord) -> Result<(), String> {
    if rec.id.trim().is_empty() {
        return Err("empty utterance id".into());
    }
    if rec.story_id.trim().is_empty() {
        return Err("empty story id".into());
    }
    for (name, value) in [("start_s", rec.start_s), ("end_s", rec.end_s)] {
        if !value.is_finite() {
            return Err(format!("{name} is not finite"));
        }
    }
    if rec.start_s < 0.0 {
        return Err(format!("start_s {} is negative", rec.start_s));
    }
    if rec.end_s <= rec.start_s {
        return Err(format!("end_s {} does not exceed start_s {}", rec.end_s, rec.start_s));
    }
    if rec.text.trim().is_empty() {
        return Err("text is empty after trimming".into());
    }
    if rec.text != rec.text.trim() {
        return Err("text has leading or trailing whitespace".into());
    }
    if rec.text.contains('\t') || rec.text.contains('\n') {
        return Err("text contains a tab or newline".into());
    }
    Ok(())
}

/// Loads and validates a manifest file.
///
/// The manifest format carries no sample rate, so the caller supplies the
/// rate the corpus audio was recorded at; audio readers check files against
/// it on open.
pub fn load_manifest(path: &Path, sample_rate_hz: u32) -> Result<CorpusManifest, CorpusError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let mut records = Vec::new();
    let mut lines_by_index = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 7 {
            return Err(CorpusError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("expected 7 tab-separated fields, found {}", fields.len()),
            });
        }
        let parse_f64 = |name: &str, value: &str| -> Result<f64, CorpusError> {
            value.trim().parse::<f64>().map_err(|_| CorpusError::Parse {
                path: path.to_path_buf(),
                line: lineno,
                message: format!("{name}: invalid number {value:?}"),
            })
        };
        let position = fields[2].trim().parse::<u32>().map_err(|_| CorpusError::Parse {
            path: path.to_path_buf(),
            line: lineno,
            message: format!("position: invalid integer {:?}", fields[2]),
        })?;
        let record = UtteranceRecord {
            id: fields[0].trim().to_string(),
            story_id: fields[1].trim().to_string(),
            position,
            start_s: parse_f64("start_s", fields[3])?,
            end_s: parse_f64("end_s", fields[4])?,
            audio_path: PathBuf::from(fields[5].trim()),
            text: fields[6].trim().to_string(),
        };
        validate_record(&record).map_err(|message| CorpusError::Invalid {
            path: path.to_path_buf(),
            line: lineno,
            message,
        })?;
        records.push(record);
        lines_by_index.push(lineno);
    }
    // Cross-record invariants, reported with the later line involved.
    let id_lines: Vec<(String, usize)> = records
        .iter()
        .zip(&lines_by_index)
        .map(|(r, &line)| (r.id.clone(), line))
        .collect();
    let line_of = move |id: &str| -> usize {
        id_lines
            .iter()
            .find(|(rid, _)| rid == id)
            .map(|&(_, line)| line)
            .unwrap_or(0)
    };
    match CorpusManifest::new(records, sample_rate_hz) {
        Ok(manifest) => {
            let base = path.parent().unwrap_or_else(|| Path::new(".")).to_path_buf();
            Ok(manifest.with_base_dir(base))
        }
        Err(CorpusError::InvalidRecord { id, message }) => Err(CorpusError::Invalid {
            path: path.to_path_buf(),
            line: line_of(&id),
            message,
        }),
        Err(other) => Err(other),
    }
}

/// Serializes a manifest in the file format of [`load_manifest`].
pub fn format_manifest(manifest: &CorpusManifest) -> String {
    let mut out = String::new();
    for rec in manifest.records() {
        let _ = writeln!(
            out,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            rec.id,
            rec.story_id,
            rec.position,
            rec.start_s,
            rec.end_s,
            rec.audio_path.display(),
            rec.text
        );
    }
    out
}

/// Writes a manifest file.
pub fn write_manifest(manifest: &CorpusManifest, path: &Path) -> Result<(), CorpusError> {
    std::fs::write(path, format_manifest(manifest))
        .map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })
}

/// Duration statistics over groups of consecutive sentences.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LengthStats {
    /// Number of groups measured.
    pub count: usize,
    /// Mean group duration, seconds.
    pub mean_s: f64,
    /// Shortest group duration, seconds.
    pub min_s: f64,
    /// Longest group duration, seconds.
    pub max_s: f64,
}

/// Measures every sliding window of `group_size` consecutive sentences
/// within a story.
///
/// A group's duration runs from the first sentence's `start_s` to the last
/// sentence's `end_s`, so inter-sentence gaps inside the group count toward
/// its length. Windows never cross story boundaries.
pub fn compute_length_stats(
    manifest: &CorpusManifest,
    group_size: usize,
) -> Result<LengthStats, CorpusError> {
    if group_size == 0 {
        return Err(CorpusError::BadGroupSize);
    }
    if manifest.records().is_empty() {
        return Err(CorpusError::Empty);
    }
    let mut count = 0usize;
    let mut sum = 0.0;
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for story in manifest.story_slices() {
        for window in story.windows(group_size) {
            let duration = window[group_size - 1].end_s - window[0].start_s;
            count += 1;
            sum += duration;
            min = min.min(duration);
            max = max.max(duration);
        }
    }
    if count == 0 {
        return Err(CorpusError::NoGroups { group_size });
    }
    Ok(LengthStats { count, mean_s: sum / count as f64, min_s: min, max_s: max })
}

/// Pauses between within-story consecutive sentences.
#[derive(Debug, Clone, PartialEq)]
pub struct PauseExtraction {
    /// One pause per consecutive pair, in pair order, clamped to ≥ 0.
    pub pauses: Vec<f64>,
    /// How many negative gaps (overlapping labels) were clamped to 0.
    pub clamped_overlaps: usize,
}

/// Extracts the silence between each within-story consecutive sentence pair.
///
/// The pause is `start_s` of the later sentence minus `end_s` of the earlier
/// one. Manual timing labels occasionally overlap slightly; negative gaps are
/// clamped to 0 and tallied rather than rejected, since only gross outliers
/// (handled by the fit cutoff) indicate bad data.
pub fn extract_pauses(manifest: &CorpusManifest) -> PauseExtraction {
    let mut pauses = Vec::new();
    let mut clamped = 0usize;
    for story in manifest.story_slices() {
        for pair in story.windows(2) {
            let gap = pair[1].start_s - pair[0].end_s;
            if gap < 0.0 {
                clamped += 1;
                pauses.push(0.0);
            } else {
                pauses.push(gap);
            }
        }
    }
    PauseExtraction { pauses, clamped_overlaps: clamped }
}

/// A normal distribution fitted to in-range pauses, with its cutoff.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauseDistribution {
    /// Sample mean of surviving pauses, seconds.
    pub mean_s: f64,
    /// Sample standard deviation (denominator n−1), seconds.
    pub std_s: f64,
    /// Outlier cutoff: pauses above this were excluded, and sampling
    /// truncates to `[0, cutoff_s]`.
    pub cutoff_s: f64,
    /// Number of pauses the fit used.
    pub n_samples: usize,
    /// Number of pauses excluded by the cutoff.
    pub n_excluded: usize,
}

impl PauseDistribution {
    /// Builds a distribution from already-computed parameters, validating
    /// the type's invariants.
    pub fn new(
        mean_s: f64,
        std_s: f64,
        cutoff_s: f64,
        n_samples: usize,
        n_excluded: usize,
    ) -> Result<Self, CorpusError> {
        if n_samples < 2 {
            return Err(CorpusError::TooFewPauses { survivors: n_samples });
        }
        if !(mean_s >= 0.0 && mean_s < cutoff_s) || !std_s.is_finite() || std_s < 0.0 {
            return Err(CorpusError::DegenerateFit { mean_s, cutoff_s });
        }
        Ok(Self { mean_s, std_s, cutoff_s, n_samples, n_excluded })
    }
}

/// Fits a normal distribution to the pauses at or below `cutoff_s`.
///
/// Pauses above the cutoff are treated as paragraph-level breaks rather than
/// inter-sentence pauses and are excluded before fitting. Mean and standard
/// deviation are the sample estimators with denominator `n−1`.
pub fn fit_pause_distribution(
    pauses: &[f64],
    cutoff_s: f64,
) -> Result<PauseDistribution, CorpusError> {
    let surviving: Vec<f64> = pauses.iter().copied().filter(|&p| p <= cutoff_s).collect();
    let n = surviving.len();
    if n < 2 {
        return Err(CorpusError::TooFewPauses { survivors: n });
    }
    let mean = surviving.iter().sum::<f64>() / n as f64;
    let ss = surviving.iter().map(|p| (p - mean) * (p - mean)).sum::<f64>();
    let std = (ss / (n - 1) as f64).sqrt();
    PauseDistribution::new(mean, std, cutoff_s, n, pauses.len() - n)
}
