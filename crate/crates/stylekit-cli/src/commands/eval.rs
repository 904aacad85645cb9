//! `eval`: the objective evaluation battery.
//!
//! Three measurements against a trained checkpoint:
//!
//! 1. Pause realism — inter-sentence pauses measured from forced
//!    alignments of the rendered pairs, compared against the source
//!    corpus's natural pauses with the two-sample K-S test.
//! 2. Text-predicted style — mean L1 distance between each utterance's
//!    text-predicted embeddings and its audio embedding.
//! 3. Emotion content — a linear probe's accuracy predicting emotion
//!    labels from audio embeddings over repeated stratified splits.

use std::collections::BTreeMap;

use stylekit::corpus::{extract_pauses, load_manifest, CorpusManifest};
use stylekit::emotion::{apply_threshold_all, load_labels, EmotionLabel, LabelRecord};
use stylekit::eval::{
    compare_pause_distributions, emotion_probe, measure_intersentence_pause, parse_alignment,
    tpgst_l1, write_report, ReportLine,
};
use stylekit::seed;
use stylekit::style::{load_checkpoint, StyleEmbedding, StyleModel};

use crate::config::{check_exists, PipelineConfig};
use crate::error::CliError;

/// Report file this command writes under the output directory.
pub const REPORT_FILE: &str = "eval_report.tsv";

/// Runs the three metrics and writes the evaluation report.
pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    config.style.validate()?;
    let checkpoint_path = config.checkpoint_path();
    check_exists(&checkpoint_path, "checkpoint")?;
    let (model, _) = load_checkpoint(&config.style, &checkpoint_path)?;

    let corpus_path = PipelineConfig::require(&config.corpus_manifest, "corpus_manifest")?;
    check_exists(&corpus_path, "corpus manifest")?;
    let corpus = load_manifest(&corpus_path, config.sample_rate_hz)?;

    let labels_path = PipelineConfig::require(&config.labels, "labels")?;
    check_exists(&labels_path, "label file")?;
    let labels = apply_threshold_all(&load_labels(&labels_path)?, config.emotion_threshold);

    let manifest_path = config.train_manifest_path();
    check_exists(&manifest_path, "evaluation manifest")?;
    let manifest = load_manifest(&manifest_path, config.sample_rate_hz)?;
    let sidecar = super::load_sidecar_map(&config.sidecar_path())?;

    let mut lines = Vec::new();
    measure_pause_realism(config, &corpus, &sidecar, &mut lines)?;
    measure_tpgst_l1(config, &model, &manifest, &sidecar, &corpus, &mut lines)?;
    measure_probe(config, &model, &corpus, &labels, &mut lines)?;

    super::ensure_out_dir(&config.out_dir)?;
    let report_path = config.out_dir.join(REPORT_FILE);
    write_report(&lines, &report_path)?;
    println!("report written to {}", report_path.display());
    Ok(())
}

/// K-S comparison of aligned pauses in the rendered pairs vs the corpus.
fn measure_pause_realism(
    config: &PipelineConfig,
    corpus: &CorpusManifest,
    sidecar: &BTreeMap<String, stylekit::augment::SidecarRecord>,
    lines: &mut Vec<ReportLine>,
) -> Result<(), CliError> {
    let alignments_dir = PipelineConfig::require(&config.alignments_dir, "alignments_dir")?;
    check_exists(&alignments_dir, "alignments directory")?;
    if sidecar.is_empty() {
        return Err(CliError::Validation(
            "the evaluation manifest has no rendered pairs to measure".into(),
        ));
    }

    // Resolve every alignment up front so one error lists all the gaps.
    let mut missing = Vec::new();
    let mut measured = Vec::new();
    for pair in sidecar.values() {
        let path = alignments_dir.join(format!("{}.TextGrid", pair.pair_id));
        if !path.exists() {
            missing.push(pair.pair_id.clone());
            continue;
        }
        let first = corpus.get(&pair.first_id).ok_or_else(|| {
            CliError::Validation(format!(
                "pair {} references unknown parent {}",
                pair.pair_id, pair.first_id
            ))
        })?;
        let word_count = first.text.split_whitespace().count();
        let intervals = parse_alignment(&path)?;
        measured.push(measure_intersentence_pause(&intervals, word_count)?.pause_s);
    }
    if !missing.is_empty() {
        return Err(CliError::MissingInput(format!(
            "alignment files not found under {} for: {}",
            alignments_dir.display(),
            missing.join(", ")
        )));
    }

    // The reference distribution is the same population the pause model
    // was fitted on: natural pauses at or below the cutoff.
    let truth: Vec<f64> = extract_pauses(corpus)
        .pauses
        .into_iter()
        .filter(|&p| p <= config.cutoff_s)
        .collect();
    let comparison = compare_pause_distributions(&measured, &truth)?;
    println!("{}", comparison.summary);
    lines.extend(comparison.machine_lines);
    Ok(())
}

/// Mean L1 between text-predicted and audio style embeddings.
fn measure_tpgst_l1(
    config: &PipelineConfig,
    model: &StyleModel,
    manifest: &CorpusManifest,
    sidecar: &BTreeMap<String, stylekit::augment::SidecarRecord>,
    corpus: &CorpusManifest,
    lines: &mut Vec<ReportLine>,
) -> Result<(), CliError> {
    let mel_config = config.mel_config();
    let utterances =
        super::load_utterances(manifest, sidecar, Some(corpus), &mel_config)?;
    let mut sum = 0.0;
    let mut count = 0usize;
    for utt in &utterances {
        let target = model.gst_embedding(&utt.mel)?;
        let encoding = model.encode_text(&utt.text, utt.boundary)?;
        for prediction in model.tpgst_predict(&encoding)? {
            sum += tpgst_l1(&prediction, &target)?;
            count += 1;
        }
    }
    if count == 0 {
        return Err(CliError::Validation("no utterances to evaluate".into()));
    }
    let mean = sum / count as f64;
    println!("tpgst l1: {mean} over {count} predictions");
    lines.push(ReportLine::new("tpgst_l1", mean, count, None));
    Ok(())
}

/// Linear-probe accuracy of emotion labels from audio embeddings.
fn measure_probe(
    config: &PipelineConfig,
    model: &StyleModel,
    corpus: &CorpusManifest,
    labels: &BTreeMap<String, LabelRecord>,
    lines: &mut Vec<ReportLine>,
) -> Result<(), CliError> {
    let mel_config = config.mel_config();
    let empty = BTreeMap::new();
    let utterances = super::load_utterances(corpus, &empty, None, &mel_config)?;
    let mut embeddings: Vec<StyleEmbedding> = Vec::with_capacity(utterances.len());
    let mut classes: Vec<EmotionLabel> = Vec::with_capacity(utterances.len());
    for utt in &utterances {
        let label = labels.get(&utt.id).ok_or_else(|| {
            CliError::Validation(format!("no label for utterance {}", utt.id))
        })?;
        embeddings.push(model.gst_embedding(&utt.mel)?);
        classes.push(label.effective_category);
    }

    let probe_seed = seed::derive(config.seed, "eval/probe");
    let result = emotion_probe(
        &embeddings,
        &classes,
        config.probe_test_fraction,
        config.probe_repeats,
        probe_seed,
    )?;
    println!(
        "probe accuracy: {} over {} repeats ({} samples)",
        result.mean_accuracy,
        result.per_run.len(),
        embeddings.len()
    );
    lines.push(ReportLine::new(
        "probe_accuracy",
        result.mean_accuracy,
        embeddings.len(),
        Some(probe_seed),
    ));
    Ok(())
}
