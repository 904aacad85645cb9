//! Subcommand implementations.
//!
//! Each command validates its inputs up front, calls the library, writes
//! its outputs under the configured directory, and prints a short human
//! summary; all machine-readable values go to files, never only to the
//! terminal. Commands never modify their inputs.

pub mod augment;
pub mod eval;
pub mod label;
pub mod stats;
pub mod train_style;

use std::collections::BTreeMap;
use std::path::Path;

use stylekit::audio::read_wav_expecting;
use stylekit::augment::SidecarRecord;
use stylekit::corpus::CorpusManifest;
use stylekit::style::{compute_mel, pair_boundary, MelConfig, MelSpectrogram};

use crate::error::CliError;

/// Creates the output directory if needed.
fn ensure_out_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir)
        .map_err(|source| CliError::Runtime(format!("{}: {source}", dir.display())))
}

/// One utterance loaded for the style model: its spectrogram plus the text
/// with the pair boundary resolved.
struct LoadedUtterance {
    id: String,
    mel: MelSpectrogram,
    text: String,
    boundary: Option<usize>,
}

/// Loads every manifest utterance's audio and resolves pair boundaries.
///
/// An utterance listed in the sidecar is a rendered pair; its boundary is
/// recomputed from the first parent's text, which therefore must be
/// resolvable in the source corpus.
fn load_utterances(
    manifest: &CorpusManifest,
    sidecar: &BTreeMap<String, SidecarRecord>,
    parents: Option<&CorpusManifest>,
    mel_config: &MelConfig,
) -> Result<Vec<LoadedUtterance>, CliError> {
    let mut utterances = Vec::with_capacity(manifest.records().len());
    for record in manifest.records() {
        let wave = read_wav_expecting(
            &manifest.resolve_audio(record),
            manifest.sample_rate_hz(),
        )?;
        let mel = compute_mel(&wave, mel_config)?;
        let boundary = match sidecar.get(&record.id) {
            Some(pair) => {
                let parents = parents.ok_or_else(|| {
                    CliError::Validation(format!(
                        "utterance {} is a rendered pair; corpus_manifest is required \
                         to resolve its sentence boundary",
                        record.id
                    ))
                })?;
                let first = parents.get(&pair.first_id).ok_or_else(|| {
                    CliError::Validation(format!(
                        "pair {} references unknown parent {}",
                        record.id, pair.first_id
                    ))
                })?;
                Some(pair_boundary(&first.text))
            }
            None => None,
        };
        utterances.push(LoadedUtterance {
            id: record.id.clone(),
            mel,
            text: record.text.clone(),
            boundary,
        });
    }
    Ok(utterances)
}

/// Loads the sidecar as a map by pair id, or empty when the file is absent
/// (a plain corpus has no pairs).
fn load_sidecar_map(path: &Path) -> Result<BTreeMap<String, SidecarRecord>, CliError> {
    if !path.exists() {
        return Ok(BTreeMap::new());
    }
    let records = stylekit::augment::load_sidecar(path)?;
    Ok(records.into_iter().map(|r| (r.pair_id.clone(), r)).collect())
}
