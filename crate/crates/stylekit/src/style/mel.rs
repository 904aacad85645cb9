//! Log-mel spectrograms and the masked views used for contrastive training.
//!
//! The feature pipeline is deliberately plain: a Hann-windowed magnitude
//! STFT over fully valid frames (no padding), a triangular mel filterbank
//! on the HTK scale with unit peaks, then a natural log with a fixed floor.
//! Frames are time-major — row `t` of [`MelSpectrogram::data`] holds the
//! `n_mels` band energies of frame `t` — which is the orientation the
//! reference encoder consumes directly.
//!
//! Masking replaces one contiguous span of frames with the log floor (the
//! exact value a silent frame would produce), so a masked region is
//! indistinguishable from true silence rather than being an out-of-band
//! sentinel the encoder could latch onto.

use rand::Rng;
use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::tensor::Tensor;
use super::StyleError;
use crate::audio::Waveform;

/// Duration of the span hidden from each contrastive view, in seconds.
pub const MASK_SPAN_S: f64 = 0.5;

/// Spectrogram extraction settings.
#[derive(Debug, Clone, PartialEq)]
pub struct MelConfig {
    /// FFT size; also the analysis window length (must be even).
    pub n_fft: usize,
    /// Hop between frame starts, in samples.
    pub hop: usize,
    /// Number of mel bands.
    pub n_mels: usize,
    /// Lower edge of the filterbank, Hz.
    pub fmin_hz: f64,
    /// Upper edge of the filterbank, Hz; `None` means the Nyquist frequency.
    pub fmax_hz: Option<f64>,
    /// Floor applied before the log; silent frames come out at `ln(floor)`.
    pub floor: f64,
}

impl Default for MelConfig {
    fn default() -> Self {
        Self {
            n_fft: 1024,
            hop: 256,
            n_mels: 40,
            fmin_hz: 0.0,
            fmax_hz: None,
            floor: 1e-10,
        }
    }
}

impl MelConfig {
    fn validate(&self, sample_rate_hz: u32) -> Result<(), StyleError> {
        let bad = |message: String| Err(StyleError::BadConfig { message });
        if sample_rate_hz == 0 {
            return bad("sample rate must be positive".into());
        }
        if self.n_fft < 2 || self.n_fft % 2 != 0 {
            return bad(format!("n_fft must be even and at least 2, got {}", self.n_fft));
        }
        if self.hop == 0 {
            return bad("hop must be positive".into());
        }
        if self.n_mels == 0 {
            return bad("n_mels must be positive".into());
        }
        if !(self.floor.is_finite() && self.floor > 0.0) {
            return bad(format!("floor must be a positive finite value, got {}", self.floor));
        }
        let nyquist = sample_rate_hz as f64 / 2.0;
        let fmax = self.fmax_hz.unwrap_or(nyquist);
        if !(self.fmin_hz.is_finite() && self.fmin_hz >= 0.0) {
            return bad(format!("fmin must be non-negative, got {}", self.fmin_hz));
        }
        if !(fmax.is_finite() && fmax > self.fmin_hz) {
            return bad(format!("fmax {} must exceed fmin {}", fmax, self.fmin_hz));
        }
        if fmax > nyquist + 1e-9 {
            return bad(format!("fmax {} exceeds Nyquist {} Hz", fmax, nyquist));
        }
        Ok(())
    }
}

/// A log-mel spectrogram with the metadata masking and training need.
#[derive(Debug, Clone, PartialEq)]
pub struct MelSpectrogram {
    data: Tensor,
    hop_s: f64,
    log_floor: f64,
}

impl MelSpectrogram {
    /// Wraps an existing frame matrix (time-major, `[n_frames × n_mels]`).
    ///
    /// This is the entry point for synthetic features; real audio goes
    /// through [`compute_mel`]. `log_floor` should be the value a fully
    /// silent frame would carry, since masking fills with it.
    pub fn from_frames(data: Tensor, hop_s: f64, log_floor: f64) -> Result<Self, StyleError> {
        if data.shape().len() != 2 || data.rows() == 0 || data.cols() == 0 {
            return Err(StyleError::BadConfig {
                message: format!("mel frames must be a non-empty matrix, got {:?}", data.shape()),
            });
        }
        if !data.is_finite() {
            return Err(StyleError::NonFinite { what: "mel frame".into() });
        }
        if !(hop_s.is_finite() && hop_s > 0.0) {
            return Err(StyleError::BadConfig {
                message: format!("hop must be positive, got {hop_s}"),
            });
        }
        if !log_floor.is_finite() {
            return Err(StyleError::NonFinite { what: "log floor".into() });
        }
        Ok(Self { data, hop_s, log_floor })
    }

    /// Frame matrix, `[n_frames × n_mels]`, time-major.
    pub fn data(&self) -> &Tensor {
        &self.data
    }

    /// Number of analysis frames.
    pub fn n_frames(&self) -> usize {
        self.data.rows()
    }

    /// Number of mel bands per frame.
    pub fn n_mels(&self) -> usize {
        self.data.cols()
    }

    /// Time between frame starts, in seconds.
    pub fn hop_s(&self) -> f64 {
        self.hop_s
    }

    /// The value silent (or masked) cells take: `ln(floor)`.
    pub fn log_floor(&self) -> f64 {
        self.log_floor
    }

    /// Band energies of one frame.
    pub fn frame(&self, t: usize) -> &[f64] {
        self.data.row(t)
    }
}

/// What [`mask_view`] did to a spectrogram.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MaskOutcome {
    /// A span of `span` frames starting at `start_frame` was floored.
    Masked { start_frame: usize, span: usize },
    /// The clip was shorter than one mask span; it was copied unchanged.
    TooShort,
}

/// Converts Hz to the HTK mel scale.
pub fn hz_to_mel(hz: f64) -> f64 {
    2595.0 * (1.0 + hz / 700.0).log10()
}

/// Converts HTK mels back to Hz.
pub fn mel_to_hz(mel: f64) -> f64 {
    700.0 * (10f64.powf(mel / 2595.0) - 1.0)
}

/// Computes a log-mel spectrogram from a waveform.
///
/// Frames are fully valid: with `len` samples there are
/// `1 + (len − n_fft) / hop` frames and no padding at either edge. Shorter
/// inputs are an error — there is no spectrum to speak of.
pub fn compute_mel(waveform: &Waveform, cfg: &MelConfig) -> Result<MelSpectrogram, StyleError> {
    compute_mel_samples(&waveform.to_f64(), waveform.sample_rate_hz, cfg)
}

/// [`compute_mel`] over raw `f64` samples in `[-1, 1]`.
pub fn compute_mel_samples(
    samples: &[f64],
    sample_rate_hz: u32,
    cfg: &MelConfig,
) -> Result<MelSpectrogram, StyleError> {
    cfg.validate(sample_rate_hz)?;
    if samples.len() < cfg.n_fft {
        return Err(StyleError::TooShortInput {
            needed: cfg.n_fft,
            got: samples.len(),
        });
    }
    if !samples.iter().all(|s| s.is_finite()) {
        return Err(StyleError::NonFinite {
            what: "waveform sample".into(),
        });
    }

    let n_fft = cfg.n_fft;
    let n_bins = n_fft / 2 + 1;
    let n_frames = 1 + (samples.len() - n_fft) / cfg.hop;

    // Periodic Hann window.
    let window: Vec<f64> = (0..n_fft)
        .map(|i| 0.5 * (1.0 - (2.0 * std::f64::consts::PI * i as f64 / n_fft as f64).cos()))
        .collect();

    let mut planner = FftPlanner::new();
    let fft = planner.plan_fft_forward(n_fft);

    let filters = mel_filterbank(sample_rate_hz, cfg)?;
    let log_floor = cfg.floor.ln();

    let mut data = vec![0.0; n_frames * cfg.n_mels];
    let mut buffer = vec![Complex::new(0.0, 0.0); n_fft];
    let mut magnitude = vec![0.0; n_bins];
    for t in 0..n_frames {
        let start = t * cfg.hop;
        for i in 0..n_fft {
            buffer[i] = Complex::new(samples[start + i] * window[i], 0.0);
        }
        fft.process(&mut buffer);
        for (k, m) in magnitude.iter_mut().enumerate() {
            *m = buffer[k].norm();
        }
        for (m, filter) in filters.iter().enumerate() {
            let energy: f64 = filter
                .iter()
                .zip(&magnitude)
                .map(|(w, mag)| w * mag)
                .sum();
            data[t * cfg.n_mels + m] = energy.max(cfg.floor).ln();
        }
    }

    Ok(MelSpectrogram {
        data: Tensor::new(&[n_frames, cfg.n_mels], data),
        hop_s: cfg.hop as f64 / sample_rate_hz as f64,
        log_floor,
    })
}

/// Triangular filterbank rows (one per band, `n_fft/2 + 1` weights each).
///
/// Band edges are equally spaced on the mel scale between `fmin` and
/// `fmax`; each triangle peaks at 1 with no area normalization.
fn mel_filterbank(sample_rate_hz: u32, cfg: &MelConfig) -> Result<Vec<Vec<f64>>, StyleError> {
    let n_bins = cfg.n_fft / 2 + 1;
    let fmax = cfg.fmax_hz.unwrap_or(sample_rate_hz as f64 / 2.0);
    let mel_lo = hz_to_mel(cfg.fmin_hz);
    let mel_hi = hz_to_mel(fmax);

    let edges: Vec<f64> = (0..cfg.n_mels + 2)
        .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (cfg.n_mels + 1) as f64))
        .collect();
    if edges.windows(2).any(|e| e[1] <= e[0]) {
        return Err(StyleError::BadConfig {
            message: format!(
                "mel band edges collapse between {} and {} Hz with {} bands",
                cfg.fmin_hz, fmax, cfg.n_mels
            ),
        });
    }

    let bin_hz = sample_rate_hz as f64 / cfg.n_fft as f64;
    let mut filters = Vec::with_capacity(cfg.n_mels);
    for m in 1..=cfg.n_mels {
        let (lo, center, hi) = (edges[m - 1], edges[m], edges[m + 1]);
        let mut weights = vec![0.0; n_bins];
        for (k, w) in weights.iter_mut().enumerate() {
            let f = k as f64 * bin_hz;
            let rising = (f - lo) / (center - lo);
            let falling = (hi - f) / (hi - center);
            *w = rising.min(falling).max(0.0);
        }
        filters.push(weights);
    }
    Ok(filters)
}

/// Produces a view with one contiguous span of frames replaced by the log
/// floor, plus where the mask landed.
///
/// The span is `span_s` of audio rounded to whole frames (at least one);
/// its start is drawn uniformly from the valid placements. A clip shorter
/// than one span is returned unmasked with [`MaskOutcome::TooShort`] —
/// hiding most of a very short clip would leave nothing to represent.
///
/// Panics if `span_s` is not a positive finite number.
pub fn mask_view(
    mel: &MelSpectrogram,
    span_s: f64,
    rng: &mut impl Rng,
) -> (MelSpectrogram, MaskOutcome) {
    assert!(
        span_s.is_finite() && span_s > 0.0,
        "mask span must be positive and finite, got {span_s}"
    );
    let span = ((span_s / mel.hop_s).round() as usize).max(1);
    let mut view = mel.clone();
    if mel.n_frames() < span {
        return (view, MaskOutcome::TooShort);
    }
    let start_frame = rng.random_range(0..=(mel.n_frames() - span));
    let n_mels = mel.n_mels();
    let floor = mel.log_floor;
    let cells = &mut view.data.data_mut()[start_frame * n_mels..(start_frame + span) * n_mels];
    cells.fill(floor);
    (view, MaskOutcome::Masked { start_frame, span })
}
