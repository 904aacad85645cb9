//! Emotion-coherent pair construction and concatenative augmentation.
//!
//! Long-form training data is synthesized by joining two single-sentence
//! utterances: their audio is concatenated with an inserted silence drawn
//! from the fitted pause distribution, and their texts are joined with a
//! single space plus a trailing `~` marking the end of the training text.
//!
//! Pairing has two modes. `consecutive` reproduces natural story order (the
//! baseline construction), pairing every within-story adjacent sentence
//! pair. `emotion_matched` pairs sentences that share an effective emotion
//! label, which is the construction that makes expressive long-form data
//! abundant: naturally consecutive sentences rarely agree on a non-neutral
//! emotion, matched sampling makes agreement the rule.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::audio::{read_wav_expecting, write_wav, AudioError, Waveform};
use crate::corpus::{
    write_manifest, CorpusError, CorpusManifest, PauseDistribution, UtteranceRecord,
};
use crate::emotion::{EmotionLabel, LabelRecord};
use crate::seed;

/// End-of-training-text marker appended to every emitted text.
pub const TEXT_TERMINATOR: char = '~';

/// Errors from pairing, rendering, and manifest emission.
#[derive(Debug, Error)]
pub enum AugmentError {
    /// Underlying I/O failure.
    #[error("{path}: {source}")]
    Io {
        /// File or directory involved.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// Audio could not be read or written.
    #[error(transparent)]
    Audio(#[from] AudioError),
    /// The emitted manifest violated a corpus invariant.
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    /// Emotion-matched pairing needs a label for every utterance.
    #[error("no label for utterance {id}")]
    MissingLabel {
        /// Unlabelled id.
        id: String,
    },
    /// A pair references an id absent from the manifest.
    #[error("pair references unknown utterance {id}")]
    UnknownId {
        /// Offending id.
        id: String,
    },
    /// Pairing produced nothing to augment.
    #[error("no pairs could be constructed: {reason}")]
    NoPairs {
        /// Why the pair list came out empty.
        reason: String,
    },
    /// A pair would join an utterance with itself.
    #[error("utterance {id} cannot be paired with itself")]
    SelfPair {
        /// Offending id.
        id: String,
    },
    /// Text that cannot be joined under the `~` convention.
    #[error("cannot join texts: {message}")]
    BadText {
        /// Violated rule.
        message: String,
    },
    /// A negative or non-finite pause cannot be rendered.
    #[error("invalid pause duration {pause_s} s")]
    BadPause {
        /// Offending value.
        pause_s: f64,
    },
    /// Waveform concatenation needs non-empty inputs.
    #[error("cannot render an empty waveform")]
    EmptyWaveform,
    /// Waveform sample rates disagree.
    #[error("sample rate mismatch: {first} Hz vs {second} Hz (expected {expected} Hz)")]
    RateMismatch {
        /// First parent's rate.
        first: u32,
        /// Second parent's rate.
        second: u32,
        /// Manifest rate.
        expected: u32,
    },
    /// Two pairs would write the same output file.
    #[error("output path collision: {path}")]
    PathCollision {
        /// Colliding path.
        path: PathBuf,
    },
}

/// How pairs are selected.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PairingMode {
    /// Every within-story adjacent sentence pair, in manifest order.
    /// Emotion labels are ignored.
    Consecutive,
    /// Seeded random matching within each effective-emotion bucket.
    EmotionMatched,
}

/// Pair-construction policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairingPolicy {
    /// Pair selection mode.
    pub mode: PairingMode,
    /// Whether neutral–neutral pairs are built in emotion-matched mode.
    pub include_neutral: bool,
    /// Upper bound on how often one utterance appears as the first member.
    pub max_pairs_per_utterance: usize,
    /// Seed for the matching shuffles.
    pub seed: u64,
}

impl Default for PairingPolicy {
    fn default() -> Self {
        Self {
            mode: PairingMode::EmotionMatched,
            include_neutral: true,
            max_pairs_per_utterance: 1,
            seed: 0,
        }
    }
}

/// A selected pair before pauses are sampled or audio rendered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CandidatePair {
    /// First (left) parent utterance.
    pub first_id: String,
    /// Second (right) parent utterance.
    pub second_id: String,
    /// Shared effective emotion of the parents. Consecutive mode ignores
    /// labels and records `Neutral` here as an informational placeholder.
    pub emotion: EmotionLabel,
}

/// Selects utterance pairs under a policy.
///
/// Emotion-matched mode buckets utterances by effective category and runs
/// `max_pairs_per_utterance` rounds; each round shuffles every bucket with a
/// seed derived from `(policy.seed, category, round)` and takes disjoint
/// adjacent pairs of the shuffled order, so an utterance appears as `first`
/// at most once per round and is never paired with itself. The result is a
/// pure function of (manifest, labels, policy).
pub fn build_pairs(
    manifest: &CorpusManifest,
    labels: Option<&BTreeMap<String, LabelRecord>>,
    policy: &PairingPolicy,
) -> Result<Vec<CandidatePair>, AugmentError> {
    let pairs = match policy.mode {
        PairingMode::Consecutive => {
            let mut pairs = Vec::new();
            for story in manifest.story_slices() {
                for pair in story.windows(2) {
                    pairs.push(CandidatePair {
                        first_id: pair[0].id.clone(),
                        second_id: pair[1].id.clone(),
                        emotion: EmotionLabel::Neutral,
                    });
                }
            }
            pairs
        }
        PairingMode::EmotionMatched => {
            let labels = labels.ok_or_else(|| AugmentError::MissingLabel {
                id: "(no label map supplied)".into(),
            })?;
            let mut buckets: BTreeMap<EmotionLabel, Vec<&str>> = BTreeMap::new();
            for rec in manifest.records() {
                let label = labels
                    .get(&rec.id)
                    .ok_or_else(|| AugmentError::MissingLabel { id: rec.id.clone() })?;
                buckets.entry(label.effective_category).or_default().push(&rec.id);
            }
            if !policy.include_neutral {
                buckets.remove(&EmotionLabel::Neutral);
            }
            let mut pairs = Vec::new();
            for round in 0..policy.max_pairs_per_utterance {
                for (emotion, ids) in &buckets {
                    let mut perm = ids.clone();
                    let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_indexed(
                        policy.seed,
                        &format!("pairs/{emotion}"),
                        round as u64,
                    ));
                    perm.shuffle(&mut rng);
                    for chunk in perm.chunks_exact(2) {
                        pairs.push(CandidatePair {
                            first_id: chunk[0].to_string(),
                            second_id: chunk[1].to_string(),
                            emotion: *emotion,
                        });
                    }
                }
            }
            pairs
        }
    };
    if pairs.is_empty() {
        let reason = match policy.mode {
            PairingMode::Consecutive => "no story has two consecutive sentences".to_string(),
            PairingMode::EmotionMatched => {
                "no emotion bucket holds two or more utterances".to_string()
            }
        };
        return Err(AugmentError::NoPairs { reason });
    }
    Ok(pairs)
}

/// Draws one pause from the fitted normal, truncated to `[0, cutoff_s]` by
/// rejection.
///
/// The fitted normal has positive density at negative durations, which are
/// physically impossible, and the cutoff mirrors the outlier rule used at
/// fitting time. Rejection preserves the distribution's shape inside the
/// window, and terminates with probability 1 because the mean lies inside
/// `[0, cutoff_s)` by the distribution's invariant.
pub fn sample_pause(dist: &PauseDistribution, rng: &mut impl Rng) -> f64 {
    debug_assert!(dist.mean_s >= 0.0 && dist.mean_s < dist.cutoff_s);
    let normal = Normal::new(dist.mean_s, dist.std_s).expect("validated std");
    loop {
        let draw = normal.sample(rng);
        if (0.0..=dist.cutoff_s).contains(&draw) {
            return draw;
        }
    }
}

/// Concatenates two waveforms with an inserted silence.
///
/// The silence is `round(pause_s × sample_rate_hz)` zero samples, so the
/// output length is exactly `len(first) + round(pause_s·sr) + len(second)`
/// and both parents appear bit-identically at their offsets.
pub fn render_pair(
    first: &Waveform,
    second: &Waveform,
    pause_s: f64,
    sample_rate_hz: u32,
) -> Result<Waveform, AugmentError> {
    if first.samples.is_empty() || second.samples.is_empty() {
        return Err(AugmentError::EmptyWaveform);
    }
    if first.sample_rate_hz != sample_rate_hz || second.sample_rate_hz != sample_rate_hz {
        return Err(AugmentError::RateMismatch {
            first: first.sample_rate_hz,
            second: second.sample_rate_hz,
            expected: sample_rate_hz,
        });
    }
    if !pause_s.is_finite() || pause_s < 0.0 {
        return Err(AugmentError::BadPause { pause_s });
    }
    let silence = (pause_s * f64::from(sample_rate_hz)).round() as usize;
    let mut samples = Vec::with_capacity(first.samples.len() + silence + second.samples.len());
    samples.extend_from_slice(&first.samples);
    samples.resize(first.samples.len() + silence, 0);
    samples.extend_from_slice(&second.samples);
    Ok(Waveform { samples, sample_rate_hz })
}

fn check_joinable_text(text: &str) -> Result<(), AugmentError> {
    if text.trim().is_empty() {
        return Err(AugmentError::BadText { message: "text is empty".into() });
    }
    if text != text.trim() {
        return Err(AugmentError::BadText {
            message: "text has leading or trailing whitespace".into(),
        });
    }
    if text.contains(TEXT_TERMINATOR) {
        return Err(AugmentError::BadText {
            message: format!("text already contains the terminator {TEXT_TERMINATOR:?}"),
        });
    }
    if text.contains('\t') || text.contains('\n') {
        return Err(AugmentError::BadText { message: "text contains a tab or newline".into() });
    }
    Ok(())
}

/// Joins two sentence texts: `first + " " + second + "~"`.
///
/// A single space separates the sentences and the `~` terminator marks the
/// end of the training text. Inputs must be non-empty, trimmed, and free of
/// the terminator, so `~` appears exactly once, at the end.
pub fn join_texts(first: &str, second: &str) -> Result<String, AugmentError> {
    check_joinable_text(first)?;
    check_joinable_text(second)?;
    Ok(format!("{first} {second}{TEXT_TERMINATOR}"))
}

/// Appends the terminator to a single-sentence training text.
///
/// The terminator marks end-of-training-text, not pair joins, so single
/// sentences used in training receive it too.
pub fn terminate_text(text: &str) -> Result<String, AugmentError> {
    check_joinable_text(text)?;
    Ok(format!("{text}{TEXT_TERMINATOR}"))
}

/// A fully planned pair: parents, pause, joined text, output path.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedPair {
    /// Identifier of the augmented utterance (also its story id in the
    /// emitted manifest).
    pub pair_id: String,
    /// First (left) parent utterance.
    pub first_id: String,
    /// Second (right) parent utterance.
    pub second_id: String,
    /// Shared effective emotion (see [`CandidatePair::emotion`]).
    pub emotion: EmotionLabel,
    /// Inserted silence, seconds.
    pub pause_s: f64,
    /// `text(first) + " " + text(second) + "~"`.
    pub joined_text: String,
    /// Rendered audio path, relative to the augmentation output directory.
    pub audio_path: PathBuf,
}

impl AugmentedPair {
    /// Plans one pair from its parents, validating the pair invariants.
    pub fn new(
        pair_id: impl Into<String>,
        first: &UtteranceRecord,
        second: &UtteranceRecord,
        emotion: EmotionLabel,
        pause_s: f64,
    ) -> Result<Self, AugmentError> {
        if first.id == second.id {
            return Err(AugmentError::SelfPair { id: first.id.clone() });
        }
        if !pause_s.is_finite() || pause_s < 0.0 {
            return Err(AugmentError::BadPause { pause_s });
        }
        let pair_id = pair_id.into();
        let joined_text = join_texts(&first.text, &second.text)?;
        let audio_path = PathBuf::from("wav").join(format!("{pair_id}.wav"));
        Ok(Self {
            pair_id,
            first_id: first.id.clone(),
            second_id: second.id.clone(),
            emotion,
            pause_s,
            joined_text,
            audio_path,
        })
    }
}

/// Samples a pause for every candidate and plans the augmented pairs.
///
/// Pair ids are `pair00000`, `pair00001`, … in candidate order; pauses are
/// drawn in the same order, so the result is deterministic given the
/// generator's state.
pub fn assemble_pairs(
    manifest: &CorpusManifest,
    candidates: &[CandidatePair],
    dist: &PauseDistribution,
    rng: &mut impl Rng,
) -> Result<Vec<AugmentedPair>, AugmentError> {
    let mut pairs = Vec::with_capacity(candidates.len());
    for (index, cand) in candidates.iter().enumerate() {
        let first = manifest
            .get(&cand.first_id)
            .ok_or_else(|| AugmentError::UnknownId { id: cand.first_id.clone() })?;
        let second = manifest
            .get(&cand.second_id)
            .ok_or_else(|| AugmentError::UnknownId { id: cand.second_id.clone() })?;
        let pause_s = sample_pause(dist, rng);
        pairs.push(AugmentedPair::new(
            format!("pair{index:05}"),
            first,
            second,
            cand.emotion,
            pause_s,
        )?);
    }
    Ok(pairs)
}

/// Where [`emit_augmented_manifest`] wrote its outputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AugmentOutput {
    /// The augmented corpus manifest (corpus file format).
    pub manifest_path: PathBuf,
    /// Sidecar metadata file recording the sampled pauses.
    pub sidecar_path: PathBuf,
    /// Number of pairs rendered.
    pub pair_count: usize,
}

/// Sidecar file name written next to the augmented manifest.
pub const SIDECAR_FILE: &str = "augmented_pauses.tsv";
/// Augmented manifest file name.
pub const MANIFEST_FILE: &str = "augmented.tsv";

/// Renders every planned pair and writes the augmented corpus.
///
/// Outputs under `out_dir`: `wav/<pair_id>.wav` per pair, a manifest in the
/// corpus file format (audio paths relative to `out_dir`, text = joined
/// text), and a sidecar `pair_id \t first_id \t second_id \t emotion \t
/// pause_s` recording the sampled pauses. Identical inputs produce
/// byte-identical manifest and sidecar files.
pub fn emit_augmented_manifest(
    manifest: &CorpusManifest,
    pairs: &[AugmentedPair],
    out_dir: &Path,
) -> Result<AugmentOutput, AugmentError> {
    let wav_dir = out_dir.join("wav");
    std::fs::create_dir_all(&wav_dir)
        .map_err(|source| AugmentError::Io { path: wav_dir.clone(), source })?;
    let rate = manifest.sample_rate_hz();

    let mut seen_paths = BTreeSet::new();
    let mut records = Vec::with_capacity(pairs.len());
    let mut sidecar = String::new();
    for pair in pairs {
        if !seen_paths.insert(pair.audio_path.clone()) {
            return Err(AugmentError::PathCollision { path: pair.audio_path.clone() });
        }
        let first = manifest
            .get(&pair.first_id)
            .ok_or_else(|| AugmentError::UnknownId { id: pair.first_id.clone() })?;
        let second = manifest
            .get(&pair.second_id)
            .ok_or_else(|| AugmentError::UnknownId { id: pair.second_id.clone() })?;
        let first_audio = read_wav_expecting(&manifest.resolve_audio(first), rate)?;
        let second_audio = read_wav_expecting(&manifest.resolve_audio(second), rate)?;
        let rendered = render_pair(&first_audio, &second_audio, pair.pause_s, rate)?;
        write_wav(&out_dir.join(&pair.audio_path), &rendered)?;
        records.push(UtteranceRecord {
            id: pair.pair_id.clone(),
            story_id: pair.pair_id.clone(),
            position: 0,
            start_s: 0.0,
            end_s: rendered.duration_s(),
            audio_path: pair.audio_path.clone(),
            text: pair.joined_text.clone(),
        });
        let _ = writeln!(
            sidecar,
            "{}\t{}\t{}\t{}\t{}",
            pair.pair_id, pair.first_id, pair.second_id, pair.emotion, pair.pause_s
        );
    }

    let augmented = CorpusManifest::new(records, rate)?;
    let manifest_path = out_dir.join(MANIFEST_FILE);
    write_manifest(&augmented, &manifest_path)?;
    let sidecar_path = out_dir.join(SIDECAR_FILE);
    std::fs::write(&sidecar_path, sidecar)
        .map_err(|source| AugmentError::Io { path: sidecar_path.clone(), source })?;
    Ok(AugmentOutput { manifest_path, sidecar_path, pair_count: pairs.len() })
}

/// One sidecar line: the provenance and pause of an augmented pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SidecarRecord {
    /// Augmented utterance id.
    pub pair_id: String,
    /// First parent id.
    pub first_id: String,
    /// Second parent id.
    pub second_id: String,
    /// Recorded pair emotion.
    pub emotion: EmotionLabel,
    /// Sampled pause, seconds.
    pub pause_s: f64,
}

/// Reads a sidecar metadata file back.
pub fn load_sidecar(path: &Path) -> Result<Vec<SidecarRecord>, AugmentError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| AugmentError::Io { path: path.to_path_buf(), source })?;
    let mut records = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim_end_matches('\r');
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let bad = |message: String| AugmentError::Io {
            path: path.to_path_buf(),
            source: std::io::Error::new(
                std::io::ErrorKind::InvalidData,
                format!("line {}: {message}", lineno + 1),
            ),
        };
        if fields.len() != 5 {
            return Err(bad(format!("expected 5 fields, found {}", fields.len())));
        }
        let emotion: EmotionLabel =
            fields[3].parse().map_err(|_| bad(format!("unknown emotion {:?}", fields[3])))?;
        let pause_s: f64 =
            fields[4].parse().map_err(|_| bad(format!("invalid pause {:?}", fields[4])))?;
        records.push(SidecarRecord {
            pair_id: fields[0].to_string(),
            first_id: fields[1].to_string(),
            second_id: fields[2].to_string(),
            emotion,
            pause_s,
        });
    }
    Ok(records)
}
