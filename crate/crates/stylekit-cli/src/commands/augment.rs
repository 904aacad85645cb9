//! `augment`: build utterance pairs, sample their pauses, and render the
//! concatenated corpus.
//!
//! The pause distribution is fitted from the source corpus itself, so the
//! inserted silences mimic how the speaker actually pauses between
//! sentences. Pair selection runs in one of two modes: `consecutive`
//! rebuilds naturally adjacent sentences, `emotion` matches sentences that
//! share an effective emotion label.

use stylekit::augment::{
    assemble_pairs, build_pairs, emit_augmented_manifest, PairingMode, PairingPolicy,
};
use stylekit::corpus::{extract_pauses, fit_pause_distribution, load_manifest};
use stylekit::emotion::{apply_threshold_all, load_labels};
use stylekit::seed;

use crate::config::{check_exists, PipelineConfig};
use crate::error::CliError;

/// Builds and renders the augmented corpus.
pub fn run(config: &PipelineConfig, mode: PairingMode) -> Result<(), CliError> {
    let manifest_path = PipelineConfig::require(&config.corpus_manifest, "corpus_manifest")?;
    check_exists(&manifest_path, "corpus manifest")?;
    let manifest = load_manifest(&manifest_path, config.sample_rate_hz)?;

    // Consecutive mode pairs by adjacency alone; only emotion matching
    // needs the label file.
    let labels = match mode {
        PairingMode::Consecutive => None,
        PairingMode::EmotionMatched => {
            let labels_path = PipelineConfig::require(&config.labels, "labels")?;
            check_exists(&labels_path, "label file")?;
            let raw = load_labels(&labels_path)?;
            Some(apply_threshold_all(&raw, config.emotion_threshold))
        }
    };

    let extraction = extract_pauses(&manifest);
    let fit = fit_pause_distribution(&extraction.pauses, config.cutoff_s)?;

    let policy = PairingPolicy {
        mode,
        include_neutral: config.include_neutral,
        max_pairs_per_utterance: config.max_pairs_per_utterance,
        seed: seed::derive(config.seed, "augment/pairing"),
    };
    let candidates = build_pairs(&manifest, labels.as_ref(), &policy)?;

    let mut rng = seed::rng(config.seed, "augment/pauses");
    let pairs = assemble_pairs(&manifest, &candidates, &fit, &mut rng)?;

    super::ensure_out_dir(&config.out_dir)?;
    let output = emit_augmented_manifest(&manifest, &pairs, &config.out_dir)?;
    println!(
        "rendered {} pairs with pauses from Normal({:.3}, {:.3}) truncated to [0, {}] s",
        output.pair_count, fit.mean_s, fit.std_s, fit.cutoff_s
    );
    println!("manifest written to {}", output.manifest_path.display());
    println!("sidecar written to {}", output.sidecar_path.display());
    Ok(())
}
