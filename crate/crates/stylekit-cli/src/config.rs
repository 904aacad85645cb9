//! Pipeline configuration: one flat `key = value` file shared by every
//! subcommand, with command-line flags layered on top.
//!
//! The format is deliberately plain — one assignment per line, `#` starts
//! a comment line, keys may appear at most once — so a config diff reads
//! like a changelog. Unknown keys are rejected rather than ignored: a typo
//! should fail loudly, not silently fall back to a default.
//!
//! # Keys
//!
//! Paths (all optional; subcommands state which ones they need):
//!
//! | key | meaning |
//! |-----|---------|
//! | `corpus_manifest` | source corpus manifest (tab-separated) |
//! | `labels` | emotion label file |
//! | `out_dir` | output directory (default `out`) |
//! | `train_manifest` | manifest to train on (default `<out_dir>/augmented.tsv`) |
//! | `sidecar` | pause sidecar for the train manifest (default `<out_dir>/augmented_pauses.tsv`) |
//! | `checkpoint` | checkpoint to evaluate (default `<out_dir>/checkpoint.txt`) |
//! | `resume_checkpoint` | checkpoint to resume training from |
//! | `alignments_dir` | directory of `<utterance>.TextGrid` alignments |
//! | `emotion_endpoint` | `host:port` of the emotion classifier service |
//!
//! Corpus and labeling: `sample_rate_hz` (22050), `cutoff_s` (1.0),
//! `emotion_threshold` (0.7).
//!
//! Pairing: `include_neutral` (true), `max_pairs_per_utterance` (1).
//!
//! Spectrogram front end: `n_fft` (1024), `hop` (256), `fmin_hz` (0),
//! `fmax_hz` (a frequency, or `nyquist`), `mel_floor` (1e-10).
//!
//! Style model: `n_mels` (40), `conv_channels` (comma list, `4,4,8`),
//! `conv_kernel` (3), `conv_stride` (2), `rnn_hidden` (32), `d_query`
//! (32), `n_tokens` (10), `d_token` (32), `n_heads` (4), `d_style` (64),
//! `text_embed` (16), `text_hidden` (32), `tpgst_hidden` (32),
//! `temperature` (0.5), `simclr_scale` (0.1), `conditioning_prob` (0.5),
//! `learning_rate` (0.05).
//!
//! Training and evaluation: `train_steps` (50), `probe_test_fraction`
//! (0.25), `probe_repeats` (50).
//!
//! Randomness: `seed` (0). Every stochastic stage derives its own
//! generator from the master seed and a fixed stage label — pairing uses
//! `"augment/pairing"` (and per-emotion, per-round labels beneath it),
//! pause sampling `"augment/pauses"`, parameter init `"init/<param>"`,
//! training `"train-step"` per step, and the probe `"eval/probe"` with
//! `"probe-repeat"` per repeat — so stages rerun independently without
//! disturbing each other.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use stylekit::style::{MelConfig, StyleConfig};

use crate::error::CliError;

/// Everything the pipeline reads besides its input files.
#[derive(Debug, Clone)]
pub struct PipelineConfig {
    /// Source corpus manifest.
    pub corpus_manifest: Option<PathBuf>,
    /// Emotion label file.
    pub labels: Option<PathBuf>,
    /// Where subcommands write their outputs.
    pub out_dir: PathBuf,
    /// Manifest the style model trains on; defaults to the augmented
    /// manifest under `out_dir`.
    pub train_manifest: Option<PathBuf>,
    /// Pause sidecar matching `train_manifest`.
    pub sidecar: Option<PathBuf>,
    /// Checkpoint to evaluate; defaults to the one training writes.
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint to resume training from.
    pub resume_checkpoint: Option<PathBuf>,
    /// Directory of forced-alignment TextGrids, one per utterance id.
    pub alignments_dir: Option<PathBuf>,
    /// `host:port` of the emotion classifier service.
    pub emotion_endpoint: Option<String>,
    /// Corpus audio sample rate, Hz.
    pub sample_rate_hz: u32,
    /// Pause-fit outlier cutoff, seconds.
    pub cutoff_s: f64,
    /// Confidence below which labels fall back to neutral.
    pub emotion_threshold: f64,
    /// Whether emotion-matched pairing also pairs neutral with neutral.
    pub include_neutral: bool,
    /// Rounds of emotion-matched pairing per utterance.
    pub max_pairs_per_utterance: usize,
    /// FFT size of the spectrogram front end.
    pub n_fft: usize,
    /// Hop between analysis frames, samples.
    pub hop: usize,
    /// Lowest mel band edge, Hz.
    pub fmin_hz: f64,
    /// Highest mel band edge, Hz; `None` means Nyquist.
    pub fmax_hz: Option<f64>,
    /// Energy floor before the log.
    pub mel_floor: f64,
    /// Style-model architecture and training weights.
    pub style: StyleConfig,
    /// Total training step count.
    pub train_steps: u64,
    /// Held-out fraction per probe repeat.
    pub probe_test_fraction: f64,
    /// Number of probe repeats.
    pub probe_repeats: usize,
    /// Master seed every stage derives from.
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            corpus_manifest: None,
            labels: None,
            out_dir: PathBuf::from("out"),
            train_manifest: None,
            sidecar: None,
            checkpoint: None,
            resume_checkpoint: None,
            alignments_dir: None,
            emotion_endpoint: None,
            sample_rate_hz: 22_050,
            cutoff_s: 1.0,
            emotion_threshold: stylekit::emotion::DEFAULT_THRESHOLD,
            include_neutral: true,
            max_pairs_per_utterance: 1,
            n_fft: 1024,
            hop: 256,
            fmin_hz: 0.0,
            fmax_hz: None,
            mel_floor: 1e-10,
            style: StyleConfig::default(),
            train_steps: 50,
            probe_test_fraction: 0.25,
            probe_repeats: 50,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    /// Reads a config file over the defaults.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| CliError::from_io(path, &source))?;
        let mut config = PipelineConfig::default();
        let mut seen = BTreeSet::new();
        for (lineno, raw) in text.lines().enumerate() {
            let lineno = lineno + 1;
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(CliError::Validation(format!(
                    "{}:{lineno}: expected `key = value`, got {line:?}",
                    path.display()
                )));
            };
            let key = key.trim();
            let value = value.trim();
            if !seen.insert(key.to_string()) {
                return Err(CliError::Validation(format!(
                    "{}:{lineno}: key {key:?} appears twice",
                    path.display()
                )));
            }
            config.set(key, value).map_err(|message| {
                CliError::Validation(format!("{}:{lineno}: {message}", path.display()))
            })?;
        }
        Ok(config)
    }

    /// Applies one assignment; the error is the bare message, positioned by
    /// the caller.
    fn set(&mut self, key: &str, value: &str) -> Result<(), String> {
        fn parse<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, String>
        where
            T::Err: std::fmt::Display,
        {
            value.parse().map_err(|e| format!("invalid {key} {value:?}: {e}"))
        }

        match key {
            "corpus_manifest" => self.corpus_manifest = Some(PathBuf::from(value)),
            "labels" => self.labels = Some(PathBuf::from(value)),
            "out_dir" => self.out_dir = PathBuf::from(value),
            "train_manifest" => self.train_manifest = Some(PathBuf::from(value)),
            "sidecar" => self.sidecar = Some(PathBuf::from(value)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(value)),
            "resume_checkpoint" => self.resume_checkpoint = Some(PathBuf::from(value)),
            "alignments_dir" => self.alignments_dir = Some(PathBuf::from(value)),
            "emotion_endpoint" => self.emotion_endpoint = Some(value.to_string()),
            "sample_rate_hz" => self.sample_rate_hz = parse(key, value)?,
            "cutoff_s" => self.cutoff_s = parse(key, value)?,
            "emotion_threshold" => self.emotion_threshold = parse(key, value)?,
            "include_neutral" => self.include_neutral = parse(key, value)?,
            "max_pairs_per_utterance" => self.max_pairs_per_utterance = parse(key, value)?,
            "n_fft" => self.n_fft = parse(key, value)?,
            "hop" => self.hop = parse(key, value)?,
            "fmin_hz" => self.fmin_hz = parse(key, value)?,
            "fmax_hz" => {
                self.fmax_hz =
                    if value == "nyquist" { None } else { Some(parse(key, value)?) };
            }
            "mel_floor" => self.mel_floor = parse(key, value)?,
            "n_mels" => self.style.n_mels = parse(key, value)?,
            "conv_channels" => {
                self.style.conv_channels = value
                    .split(',')
                    .map(|part| parse("conv_channels entry", part.trim()))
                    .collect::<Result<_, _>>()?;
            }
            "conv_kernel" => self.style.conv_kernel = parse(key, value)?,
            "conv_stride" => self.style.conv_stride = parse(key, value)?,
            "rnn_hidden" => self.style.rnn_hidden = parse(key, value)?,
            "d_query" => self.style.d_query = parse(key, value)?,
            "n_tokens" => self.style.n_tokens = parse(key, value)?,
            "d_token" => self.style.d_token = parse(key, value)?,
            "n_heads" => self.style.n_heads = parse(key, value)?,
            "d_style" => self.style.d_style = parse(key, value)?,
            "text_embed" => self.style.text_embed = parse(key, value)?,
            "text_hidden" => self.style.text_hidden = parse(key, value)?,
            "tpgst_hidden" => self.style.tpgst_hidden = parse(key, value)?,
            "temperature" => self.style.temperature = parse(key, value)?,
            "simclr_scale" => self.style.simclr_scale = parse(key, value)?,
            "conditioning_prob" => self.style.conditioning_prob = parse(key, value)?,
            "learning_rate" => self.style.learning_rate = parse(key, value)?,
            "train_steps" => self.train_steps = parse(key, value)?,
            "probe_test_fraction" => self.probe_test_fraction = parse(key, value)?,
            "probe_repeats" => self.probe_repeats = parse(key, value)?,
            "seed" => self.seed = parse(key, value)?,
            _ => return Err(format!("unknown config key {key:?}")),
        }
        Ok(())
    }

    /// The spectrogram front end this config describes. The band count is
    /// the style model's `n_mels`: the two must agree, so there is one key.
    pub fn mel_config(&self) -> MelConfig {
        MelConfig {
            n_fft: self.n_fft,
            hop: self.hop,
            n_mels: self.style.n_mels,
            fmin_hz: self.fmin_hz,
            fmax_hz: self.fmax_hz,
            floor: self.mel_floor,
        }
    }

    /// The manifest training reads, defaulting to the augment output.
    pub fn train_manifest_path(&self) -> PathBuf {
        self.train_manifest
            .clone()
            .unwrap_or_else(|| self.out_dir.join(stylekit::augment::MANIFEST_FILE))
    }

    /// The sidecar matching [`Self::train_manifest_path`].
    pub fn sidecar_path(&self) -> PathBuf {
        self.sidecar
            .clone()
            .unwrap_or_else(|| self.out_dir.join(stylekit::augment::SIDECAR_FILE))
    }

    /// The checkpoint evaluation reads, defaulting to the training output.
    pub fn checkpoint_path(&self) -> PathBuf {
        self.checkpoint.clone().unwrap_or_else(|| self.out_dir.join("checkpoint.txt"))
    }

    /// The path a required input must name, as a missing-input error when
    /// the config never set it.
    pub fn require(path: &Option<PathBuf>, key: &str) -> Result<PathBuf, CliError> {
        path.clone().ok_or_else(|| {
            CliError::Validation(format!("config key {key:?} is required for this command"))
        })
    }
}

/// Checks that a required input exists before any work starts.
pub fn check_exists(path: &Path, role: &str) -> Result<(), CliError> {
    if path.exists() {
        Ok(())
    } else {
        Err(CliError::MissingInput(format!("{role} {} does not exist", path.display())))
    }
}
