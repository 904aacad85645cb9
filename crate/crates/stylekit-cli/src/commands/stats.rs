//! `stats`: corpus length statistics and the pause fit.

use stylekit::corpus::{
    compute_length_stats, extract_pauses, fit_pause_distribution, load_manifest,
};
use stylekit::eval::{write_report, ReportLine};

use crate::config::{check_exists, PipelineConfig};
use crate::error::CliError;

/// Report file this command writes under the output directory.
pub const REPORT_FILE: &str = "stats_report.tsv";

/// Group sizes the length statistics cover.
const GROUP_SIZES: [usize; 3] = [1, 2, 3];

/// Measures sentence-group lengths for sizes 1–3 and fits the
/// inter-sentence pause distribution, writing one machine line per value.
pub fn run(config: &PipelineConfig) -> Result<(), CliError> {
    let manifest_path = PipelineConfig::require(&config.corpus_manifest, "corpus_manifest")?;
    check_exists(&manifest_path, "corpus manifest")?;
    let manifest = load_manifest(&manifest_path, config.sample_rate_hz)?;

    let mut lines = Vec::new();
    println!("corpus: {} utterances", manifest.records().len());
    for group_size in GROUP_SIZES {
        let stats = compute_length_stats(&manifest, group_size)?;
        println!(
            "groups of {group_size}: {} windows, mean {:.3} s, range [{:.3}, {:.3}] s",
            stats.count, stats.mean_s, stats.min_s, stats.max_s
        );
        lines.push(ReportLine::new(
            format!("group{group_size}_count"),
            stats.count as f64,
            stats.count,
            None,
        ));
        lines.push(ReportLine::new(
            format!("group{group_size}_mean_s"),
            stats.mean_s,
            stats.count,
            None,
        ));
        lines.push(ReportLine::new(
            format!("group{group_size}_min_s"),
            stats.min_s,
            stats.count,
            None,
        ));
        lines.push(ReportLine::new(
            format!("group{group_size}_max_s"),
            stats.max_s,
            stats.count,
            None,
        ));
    }

    let extraction = extract_pauses(&manifest);
    let fit = fit_pause_distribution(&extraction.pauses, config.cutoff_s)?;
    println!(
        "pauses: mean {:.3} s, std {:.3} s over {} samples ({} beyond {} s excluded, \
         {} overlaps clamped)",
        fit.mean_s,
        fit.std_s,
        fit.n_samples,
        fit.n_excluded,
        fit.cutoff_s,
        extraction.clamped_overlaps
    );
    lines.push(ReportLine::new("pause_mean_s", fit.mean_s, fit.n_samples, None));
    lines.push(ReportLine::new("pause_std_s", fit.std_s, fit.n_samples, None));
    lines.push(ReportLine::new("pause_cutoff_s", fit.cutoff_s, fit.n_samples, None));
    lines.push(ReportLine::new(
        "pause_excluded",
        fit.n_excluded as f64,
        extraction.pauses.len(),
        None,
    ));
    lines.push(ReportLine::new(
        "pause_clamped_overlaps",
        extraction.clamped_overlaps as f64,
        extraction.pauses.len(),
        None,
    ));

    super::ensure_out_dir(&config.out_dir)?;
    let report_path = config.out_dir.join(REPORT_FILE);
    write_report(&lines, &report_path)?;
    println!("report written to {}", report_path.display());
    Ok(())
}
