//! Mono 16-bit PCM WAV input and output.
//!
//! The pipeline works exclusively with mono 16-bit PCM; anything else in a
//! header is reported as a format error rather than resampled or converted,
//! because silently changing the signal would invalidate downstream duration
//! and pause measurements.

use std::path::{Path, PathBuf};

use thiserror::Error;

/// Errors from reading or writing waveforms.
#[derive(Debug, Error)]
pub enum AudioError {
    /// Underlying I/O failure, annotated with the path involved.
    #[error("{path}: {source}")]
    Io {
        /// File being read or written.
        path: PathBuf,
        /// Underlying error.
        source: std::io::Error,
    },
    /// The file is not mono 16-bit PCM WAV, or is otherwise malformed.
    #[error("{path}: {message}")]
    Format {
        /// Offending file.
        path: PathBuf,
        /// What was wrong with it.
        message: String,
    },
    /// The file's sample rate differs from what the corpus declares.
    #[error("{path}: sample rate {found} Hz, expected {expected} Hz")]
    SampleRateMismatch {
        /// Offending file.
        path: PathBuf,
        /// Rate the corpus declares.
        expected: u32,
        /// Rate found in the header.
        found: u32,
    },
}

/// A mono 16-bit PCM signal.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Waveform {
    /// PCM samples.
    pub samples: Vec<i16>,
    /// Sampling rate in Hz.
    pub sample_rate_hz: u32,
}

impl Waveform {
    /// Duration in seconds.
    pub fn duration_s(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate_hz)
    }

    /// Samples scaled to `[-1, 1)` as `f64`, dividing by 32768.
    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| f64::from(s) / 32768.0).collect()
    }
}

fn io_err(path: &Path, source: std::io::Error) -> AudioError {
    AudioError::Io { path: path.to_path_buf(), source }
}

fn hound_err(path: &Path, err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(source) => io_err(path, source),
        other => AudioError::Format { path: path.to_path_buf(), message: other.to_string() },
    }
}

/// Reads a mono 16-bit PCM WAV file.
pub fn read_wav(path: &Path) -> Result<Waveform, AudioError> {
    let mut reader = hound::WavReader::open(path).map_err(|e| hound_err(path, e))?;
    let spec = reader.spec();
    if spec.channels != 1 {
        return Err(AudioError::Format {
            path: path.to_path_buf(),
            message: format!("expected mono audio, found {} channels", spec.channels),
        });
    }
    if spec.sample_format != hound::SampleFormat::Int || spec.bits_per_sample != 16 {
        return Err(AudioError::Format {
            path: path.to_path_buf(),
            message: format!(
                "expected 16-bit PCM, found {}-bit {:?}",
                spec.bits_per_sample, spec.sample_format
            ),
        });
    }
    let samples = reader
        .samples::<i16>()
        .collect::<Result<Vec<i16>, hound::Error>>()
        .map_err(|e| hound_err(path, e))?;
    Ok(Waveform { samples, sample_rate_hz: spec.sample_rate })
}

/// Reads a WAV file and additionally checks its sample rate.
pub fn read_wav_expecting(path: &Path, sample_rate_hz: u32) -> Result<Waveform, AudioError> {
    let wave = read_wav(path)?;
    if wave.sample_rate_hz != sample_rate_hz {
        return Err(AudioError::SampleRateMismatch {
            path: path.to_path_buf(),
            expected: sample_rate_hz,
            found: wave.sample_rate_hz,
        });
    }
    Ok(wave)
}

/// Writes a mono 16-bit PCM WAV file.
pub fn write_wav(path: &Path, wave: &Waveform) -> Result<(), AudioError> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: wave.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: hound::SampleFormat::Int,
    };
    let mut writer = hound::WavWriter::create(path, spec).map_err(|e| hound_err(path, e))?;
    for &s in &wave.samples {
        writer.write_sample(s).map_err(|e| hound_err(path, e))?;
    }
    writer.finalize().map_err(|e| hound_err(path, e))
}
