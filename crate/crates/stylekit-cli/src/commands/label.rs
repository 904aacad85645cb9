//! `label`: obtain per-utterance emotion labels and apply the
//! neutral-fallback threshold.
//!
//! Two sources are supported. With `emotion_endpoint` configured, every
//! manifest sentence is sent to the classifier service and labeled fresh.
//! Otherwise an existing label file is read and re-thresholded — which is
//! idempotent, so running the command over its own output is a no-op.

use std::collections::BTreeMap;

use stylekit::corpus::load_manifest;
use stylekit::emotion::client::ClassifierClient;
use stylekit::emotion::{
    apply_threshold_all, label_distribution, load_labels, write_labels, LabelRecord,
};

use crate::config::{check_exists, PipelineConfig};
use crate::error::CliError;

/// Label file this command writes under the output directory.
pub const LABELS_FILE: &str = "labels.tsv";

/// Produces the thresholded label file.
pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let raw = if let Some(endpoint) = &config.emotion_endpoint {
        classify_corpus(config, endpoint)?
    } else {
        let labels_path = PipelineConfig::require(&config.labels, "labels")?;
        check_exists(&labels_path, "label file")?;
        load_labels(&labels_path)?
    };

    let thresholded = apply_threshold_all(&raw, config.emotion_threshold);
    let distribution =
        label_distribution(thresholded.values()).map_err(CliError::from)?;
    println!(
        "labeled {} utterances at threshold {}:",
        thresholded.len(),
        config.emotion_threshold
    );
    for (label, share) in &distribution {
        println!("  {label}: {share:.1}%");
    }

    super::ensure_out_dir(&config.out_dir)?;
    let out_path = config.out_dir.join(LABELS_FILE);
    write_labels(&thresholded, &out_path)?;
    println!("labels written to {}", out_path.display());
    Ok(())
}

/// Labels every manifest sentence through the classifier service.
fn classify_corpus(
    config: &PipelineConfig,
    endpoint: &str,
) -> Result<BTreeMap<String, LabelRecord>, CliError> {
    let manifest_path = PipelineConfig::require(&config.corpus_manifest, "corpus_manifest")?;
    check_exists(&manifest_path, "corpus manifest")?;
    let manifest = load_manifest(&manifest_path, config.sample_rate_hz)?;

    let client = ClassifierClient::new(endpoint);
    let mut labels = BTreeMap::new();
    for record in manifest.records() {
        let (category, score) = client.classify(&record.text)?;
        let label = LabelRecord::new(record.id.clone(), category, score)?;
        labels.insert(record.id.clone(), label);
    }
    Ok(labels)
}
