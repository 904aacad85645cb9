//! `train-style`: fit the style extractor on the (augmented) corpus.
//!
//! Every step trains on the full loaded sample set, logs its losses, and
//! the final parameters land in a checkpoint. Randomness is re-derived
//! from `(seed, step)` inside the library, so a run resumed from a
//! checkpoint at step `k` produces bit-for-bit the same steps `k..n` as an
//! uninterrupted run — the loss log lines and the final checkpoint match
//! exactly.

use std::fmt::Write as _;

use stylekit::corpus::load_manifest;
use stylekit::style::{
    load_checkpoint, save_checkpoint, training_step, ConditioningSource, StepReport, StyleModel,
    TrainSample,
};

use crate::config::{check_exists, PipelineConfig};
use crate::error::CliError;

/// Loss log this command writes under the output directory.
pub const LOG_FILE: &str = "train_log.tsv";
/// Checkpoint this command writes under the output directory.
pub const CHECKPOINT_FILE: &str = "checkpoint.txt";

/// Runs the training loop to `train_steps` and writes checkpoint + log.
pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    config.style.validate()?;

    let manifest_path = config.train_manifest_path();
    check_exists(&manifest_path, "training manifest")?;
    let manifest = load_manifest(&manifest_path, config.sample_rate_hz)?;
    let sidecar = super::load_sidecar_map(&config.sidecar_path())?;

    // Rendered pairs need their parents' texts for sentence boundaries.
    let parents = match &config.corpus_manifest {
        Some(path) if !sidecar.is_empty() => {
            check_exists(path, "corpus manifest")?;
            Some(load_manifest(path, config.sample_rate_hz)?)
        }
        _ => None,
    };

    let (mut model, start_step) = match &config.resume_checkpoint {
        Some(path) => {
            check_exists(path, "resume checkpoint")?;
            let (model, step) = load_checkpoint(&config.style, path)?;
            println!("resuming from {} at step {step}", path.display());
            (model, step)
        }
        None => (StyleModel::new(config.style.clone(), config.seed)?, 0),
    };
    if start_step >= config.train_steps {
        return Err(CliError::Validation(format!(
            "checkpoint is already at step {start_step}, train_steps is {}",
            config.train_steps
        )));
    }

    let mel_config = config.mel_config();
    let samples: Vec<TrainSample> =
        super::load_utterances(&manifest, &sidecar, parents.as_ref(), &mel_config)?
            .into_iter()
            .map(|utt| {
                let text = model.encode_text(&utt.text, utt.boundary)?;
                Ok(TrainSample { mel: utt.mel, text })
            })
            .collect::<Result<_, CliError>>()?;
    println!(
        "training on {} samples for steps {start_step}..{}",
        samples.len(),
        config.train_steps
    );

    let mut log = String::from("step\ttotal\tl1\tsimclr\tcond_gst\tcond_tpgst\n");
    let mut last: Option<StepReport> = None;
    for step in start_step..config.train_steps {
        let report = training_step(&mut model, &samples, step, config.seed)?;
        let gst = report
            .conditioning
            .iter()
            .filter(|&&c| c == ConditioningSource::Gst)
            .count();
        let tpgst = report.conditioning.len() - gst;
        let _ = writeln!(
            log,
            "{}\t{}\t{}\t{}\t{gst}\t{tpgst}",
            report.step, report.loss.total, report.loss.l1, report.loss.simclr
        );
        if step == start_step {
            println!("step {step}: total {}", report.loss.total);
        }
        last = Some(report);
    }
    let last = last.expect("at least one step ran");
    println!("step {}: total {}", last.step, last.loss.total);

    super::ensure_out_dir(&config.out_dir)?;
    let log_path = config.out_dir.join(LOG_FILE);
    std::fs::write(&log_path, log)
        .map_err(|source| CliError::from_io(&log_path, &source))?;
    let checkpoint_path = config.out_dir.join(CHECKPOINT_FILE);
    save_checkpoint(&model, config.train_steps, &checkpoint_path)?;
    println!("loss log written to {}", log_path.display());
    println!("checkpoint written to {}", checkpoint_path.display());
    Ok(())
}
