//! Property tests: the library's structural guarantees, checked over
//! generated inputs rather than hand-picked fixtures.
//!
//! Each property corresponds to an algebraic fact the rest of the pipeline
//! leans on — permutation invariances, monotonicities, closed ranges,
//! round-trip identities — so a counterexample here means a downstream
//! stage can silently misbehave.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::OnceLock;

use proptest::prelude::*;

use stylekit::corpus::{
    compute_length_stats, extract_pauses, fit_pause_distribution, CorpusManifest, UtteranceRecord,
};
use stylekit::emotion::{
    apply_threshold, apply_threshold_all, consecutive_match_rate, label_distribution,
    EmotionLabel, LabelRecord,
};
use stylekit::eval::{
    emotion_probe, format_alignment, ks_two_sample, parse_alignment_str, WordInterval,
};
use stylekit::style::{
    mask_view, nt_xent_loss, ContrastiveBatch, EmbeddingSource, MaskOutcome, MelSpectrogram,
    StyleConfig, StyleEmbedding, StyleModel, Tensor, MASK_SPAN_S,
};

// ---------------------------------------------------------------------------
// Generators
// ---------------------------------------------------------------------------

/// Per-record raw material for a valid random manifest: which story the
/// record joins, the gap before it, and its duration.
fn manifest_plan() -> impl Strategy<Value = Vec<(usize, f64, f64)>> {
    prop::collection::vec((0usize..5, 0.01f64..1.0, 0.2f64..3.0), 1..40)
}

/// Builds a valid manifest from a plan; timing accumulates per story so
/// records never overlap within a story.
fn build_manifest(plan: &[(usize, f64, f64)]) -> CorpusManifest {
    let mut cursors = [0.0f64; 5];
    let mut positions = [0u32; 5];
    let records: Vec<UtteranceRecord> = plan
        .iter()
        .enumerate()
        .map(|(i, &(story, gap, duration))| {
            let start = cursors[story] + gap;
            cursors[story] = start + duration;
            let position = positions[story];
            positions[story] += 1;
            UtteranceRecord {
                id: format!("utt-{i:03}"),
                story_id: format!("story-{story}"),
                position,
                start_s: start,
                end_s: start + duration,
                audio_path: format!("audio/utt-{i:03}.wav").into(),
                text: format!("sentence number {i}"),
            }
        })
        .collect();
    CorpusManifest::new(records, 22_050).expect("plan builds a valid manifest")
}

fn any_label() -> impl Strategy<Value = EmotionLabel> {
    prop::sample::select(EmotionLabel::ALL.to_vec())
}

fn label_records(max: usize) -> impl Strategy<Value = Vec<LabelRecord>> {
    prop::collection::vec((any_label(), 0.0f64..=1.0), 1..max).prop_map(|raw| {
        raw.into_iter()
            .enumerate()
            .map(|(i, (category, score))| {
                LabelRecord::new(format!("utt-{i:03}"), category, score).expect("valid record")
            })
            .collect()
    })
}

/// A small shared style model; the probed properties hold for any fixed
/// parameters, so one instance serves every case.
fn shared_model() -> &'static StyleModel {
    static MODEL: OnceLock<StyleModel> = OnceLock::new();
    MODEL.get_or_init(|| {
        let cfg = StyleConfig {
            n_mels: 8,
            conv_channels: vec![2, 2],
            conv_kernel: 3,
            conv_stride: 2,
            rnn_hidden: 5,
            d_query: 4,
            n_tokens: 4,
            d_token: 4,
            n_heads: 2,
            d_style: 8,
            text_embed: 3,
            text_hidden: 4,
            tpgst_hidden: 5,
            ..StyleConfig::default()
        };
        StyleModel::new(cfg, 7).expect("model")
    })
}

// ---------------------------------------------------------------------------
// Corpus statistics
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn pause_count_is_pairs_per_story(plan in manifest_plan()) {
        let manifest = build_manifest(&plan);
        let mut per_story = BTreeMap::new();
        for &(story, _, _) in &plan {
            *per_story.entry(story).or_insert(0usize) += 1;
        }
        let expected: usize = per_story.values().map(|&n| n.saturating_sub(1)).sum();
        prop_assert_eq!(extract_pauses(&manifest).pauses.len(), expected);
    }

    #[test]
    fn pause_fit_is_permutation_invariant(
        pauses in prop::collection::vec(0.0f64..2.0, 2..60),
        seed in any::<u64>(),
    ) {
        let forward = fit_pause_distribution(&pauses, 1.0);
        // Deterministic Fisher-Yates driven by the seed.
        let mut shuffled = pauses.clone();
        let mut state = seed | 1;
        for i in (1..shuffled.len()).rev() {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            shuffled.swap(i, (state >> 33) as usize % (i + 1));
        }
        let backward = fit_pause_distribution(&shuffled, 1.0);
        match (forward, backward) {
            (Ok(a), Ok(b)) => {
                prop_assert_eq!(a.n_samples, b.n_samples);
                prop_assert_eq!(a.n_excluded, b.n_excluded);
                prop_assert!((a.mean_s - b.mean_s).abs() <= 1e-12);
                prop_assert!((a.std_s - b.std_s).abs() <= 1e-12);
            }
            // Too few survivors is a property of the multiset, so both
            // orders must refuse together.
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "orders disagree: {a:?} vs {b:?}"),
        }
    }

    #[test]
    fn window_counts_shrink_as_groups_grow(plan in manifest_plan()) {
        let manifest = build_manifest(&plan);
        let mut previous = None;
        for group_size in 1usize..=3 {
            let count = match compute_length_stats(&manifest, group_size) {
                Ok(stats) => {
                    prop_assert!(stats.count >= 1);
                    prop_assert!(stats.min_s <= stats.mean_s && stats.mean_s <= stats.max_s);
                    stats.count
                }
                // No story long enough: counts as zero windows.
                Err(_) => 0,
            };
            if let Some(prev) = previous {
                prop_assert!(count <= prev, "size {group_size}: {count} > {prev}");
            }
            previous = Some(count);
        }
    }
}

// ---------------------------------------------------------------------------
// Emotion labels
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn thresholding_is_idempotent(records in label_records(40), threshold in 0.0f64..=1.0) {
        for record in &records {
            let once = apply_threshold(record, threshold);
            let twice = apply_threshold(&once, threshold);
            prop_assert_eq!(&once, &twice);
        }
    }

    #[test]
    fn distribution_is_nonnegative_and_sums_to_100(records in label_records(60)) {
        let dist = label_distribution(records.iter()).expect("non-empty");
        let mut total = 0.0;
        for (&label, &pct) in &dist {
            prop_assert!(pct >= 0.0, "{label} has negative share {pct}");
            total += pct;
        }
        prop_assert!((total - 100.0).abs() <= 0.01, "shares sum to {total}");
    }

    #[test]
    fn raising_the_threshold_never_shrinks_neutral(
        records in label_records(50),
        lo in 0.0f64..=1.0,
        hi in 0.0f64..=1.0,
    ) {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let by_id: BTreeMap<String, LabelRecord> =
            records.into_iter().map(|r| (r.utterance_id.clone(), r)).collect();
        let neutral_share = |threshold: f64| {
            let applied = apply_threshold_all(&by_id, threshold);
            label_distribution(applied.values()).expect("non-empty")[&EmotionLabel::Neutral]
        };
        prop_assert!(neutral_share(lo) <= neutral_share(hi) + 1e-12);
    }

    #[test]
    fn match_rate_stays_in_range_and_neutral_only_gives_zero(
        plan in manifest_plan(),
        categories in prop::collection::vec(any_label(), 40),
    ) {
        let manifest = build_manifest(&plan);
        let labelled = |palette: &dyn Fn(usize) -> EmotionLabel| {
            manifest
                .records()
                .iter()
                .enumerate()
                .map(|(i, rec)| {
                    let record =
                        LabelRecord::new(rec.id.clone(), palette(i), 0.9).expect("valid record");
                    (rec.id.clone(), record)
                })
                .collect::<BTreeMap<_, _>>()
        };

        let mixed = labelled(&|i| categories[i % categories.len()]);
        if let Ok(rate) = consecutive_match_rate(&manifest, &mixed) {
            prop_assert!((0.0..=1.0).contains(&rate), "rate {rate} out of range");
        }

        let all_neutral = labelled(&|_| EmotionLabel::Neutral);
        if let Ok(rate) = consecutive_match_rate(&manifest, &all_neutral) {
            prop_assert_eq!(rate, 0.0, "neutral-only corpus must not match");
        }
    }
}

// ---------------------------------------------------------------------------
// Style model
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn attention_weights_form_a_distribution_per_head(
        query in prop::collection::vec(-50.0f64..50.0, 4),
    ) {
        let attention = shared_model().gst_attend(&query).expect("attention");
        for (head, weights) in attention.weights.iter().enumerate() {
            let sum: f64 = weights.iter().sum();
            prop_assert!((sum - 1.0).abs() <= 1e-6, "head {head} sums to {sum}");
            for &w in weights {
                prop_assert!(w >= 0.0, "head {head} has negative weight {w}");
            }
        }
    }

    #[test]
    fn nt_xent_ignores_scale_and_pair_order(
        raw in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 5), 2..5),
        scale in 0.05f64..20.0,
        rotate in 0usize..4,
    ) {
        // Two views per sample; reject the rare all-zero vector.
        let mut views = Vec::new();
        for vector in &raw {
            if vector.iter().all(|v| v.abs() < 1e-6) {
                return Ok(());
            }
            let a = vector.clone();
            let b: Vec<f64> = vector.iter().map(|v| v + 0.25).collect();
            if b.iter().all(|v| v.abs() < 1e-6) {
                return Ok(());
            }
            views.push(StyleEmbedding::new(a, EmbeddingSource::Gst).expect("view"));
            views.push(StyleEmbedding::new(b, EmbeddingSource::Gst).expect("view"));
        }
        let baseline = nt_xent_loss(&ContrastiveBatch::new(&views, 0.5).expect("batch"));

        // Uniform positive rescale of every view.
        let rescaled: Vec<StyleEmbedding> = views
            .iter()
            .map(|e| {
                let v: Vec<f64> = e.vector.iter().map(|x| x * scale).collect();
                StyleEmbedding::new(v, EmbeddingSource::Gst).expect("view")
            })
            .collect();
        let loss = nt_xent_loss(&ContrastiveBatch::new(&rescaled, 0.5).expect("batch"));
        prop_assert!((loss - baseline).abs() <= 1e-9, "rescale moved {baseline} to {loss}");

        // Rotating whole pairs permutes the batch without breaking partners.
        let n_pairs = views.len() / 2;
        let offset = rotate % n_pairs;
        let mut permuted = Vec::with_capacity(views.len());
        for p in 0..n_pairs {
            let source = (p + offset) % n_pairs;
            permuted.push(views[2 * source].clone());
            permuted.push(views[2 * source + 1].clone());
        }
        let loss = nt_xent_loss(&ContrastiveBatch::new(&permuted, 0.5).expect("batch"));
        prop_assert!((loss - baseline).abs() <= 1e-9, "permutation moved {baseline} to {loss}");
    }

    #[test]
    fn masking_touches_one_bounded_run_of_frames(
        frames in 1usize..120,
        hop_ms in 5.0f64..60.0,
        seed in any::<u64>(),
    ) {
        let n_mels = 4;
        let data: Vec<f64> = (0..frames * n_mels).map(|i| 1.0 + (i as f64 * 0.7).sin()).collect();
        let mel = MelSpectrogram::from_frames(
            Tensor::new(&[frames, n_mels], data),
            hop_ms / 1000.0,
            -23.0,
        )
        .expect("valid frames");

        let mut rng = stylekit::seed::rng(seed, "prop-mask");
        let (view, outcome) = mask_view(&mel, MASK_SPAN_S, &mut rng);
        let expected_span =
            ((MASK_SPAN_S / (hop_ms / 1000.0)).round() as usize).max(1);

        let changed: Vec<usize> =
            (0..frames).filter(|&t| view.frame(t) != mel.frame(t)).collect();
        match outcome {
            MaskOutcome::TooShort => {
                prop_assert!(frames < expected_span);
                prop_assert!(changed.is_empty(), "too-short clips must pass through");
            }
            MaskOutcome::Masked { start_frame, span } => {
                prop_assert_eq!(span, expected_span);
                prop_assert!(start_frame + span <= frames);
                prop_assert_eq!(changed.len(), span);
                prop_assert_eq!(changed[0], start_frame);
                prop_assert!(changed.windows(2).all(|w| w[1] == w[0] + 1));
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

proptest! {
    #[test]
    fn ks_is_symmetric(
        a in prop::collection::vec(-5.0f64..5.0, 1..25),
        b in prop::collection::vec(-5.0f64..5.0, 1..25),
    ) {
        let forward = ks_two_sample(&a, &b).expect("forward");
        let backward = ks_two_sample(&b, &a).expect("backward");
        prop_assert_eq!(forward.statistic, backward.statistic);
        prop_assert_eq!(forward.p_value, backward.p_value);
        prop_assert_eq!((forward.n1, forward.n2), (backward.n2, backward.n1));
    }

    #[test]
    fn ks_statistic_survives_increasing_transforms(
        a in prop::collection::vec(-1000i32..1000, 1..25),
        b in prop::collection::vec(-1000i32..1000, 1..25),
        gain in 1i32..5,
        offset in -100i32..100,
    ) {
        // Integer-valued samples keep the affine map exact in floating
        // point, so the transformed order (and tie structure) is identical
        // and the statistics must agree to the bit.
        let lift = |v: &[i32]| -> Vec<f64> { v.iter().map(|&x| x as f64).collect() };
        let transform = |v: &[i32]| -> Vec<f64> {
            v.iter().map(|&x| (gain * x + offset) as f64).collect()
        };
        let plain = ks_two_sample(&lift(&a), &lift(&b)).expect("plain");
        let mapped = ks_two_sample(&transform(&a), &transform(&b)).expect("mapped");
        prop_assert_eq!(plain.statistic, mapped.statistic);
        prop_assert_eq!(plain.p_value, mapped.p_value);
    }

    #[test]
    fn probe_accuracy_stays_in_range(
        coords in prop::collection::vec((-5.0f64..5.0, -5.0f64..5.0), 8..30),
        seed in any::<u64>(),
    ) {
        // Two classes assigned alternately, guaranteeing at least four
        // members each at the minimum batch size of eight.
        let embeddings: Vec<StyleEmbedding> = coords
            .iter()
            .map(|&(x, y)| StyleEmbedding::new(vec![x, y], EmbeddingSource::Gst).expect("point"))
            .collect();
        let labels: Vec<EmotionLabel> = (0..coords.len())
            .map(|i| if i % 2 == 0 { EmotionLabel::Joy } else { EmotionLabel::Fear })
            .collect();
        let result = emotion_probe(&embeddings, &labels, 0.25, 3, seed).expect("probe");
        prop_assert!((0.0..=1.0).contains(&result.mean_accuracy));
        let mean = result.per_run.iter().sum::<f64>() / result.per_run.len() as f64;
        prop_assert!((result.mean_accuracy - mean).abs() <= 1e-12);
        for accuracy in &result.per_run {
            prop_assert!((0.0..=1.0).contains(accuracy));
        }
    }

    #[test]
    fn alignment_round_trips_through_serialization(
        plan in prop::collection::vec((0.01f64..0.8, 0.05f64..1.2, 0usize..4), 1..15),
    ) {
        let vocabulary = ["", "once", "upon", "a \"quoted\" word"];
        let mut cursor = 0.0;
        let intervals: Vec<WordInterval> = plan
            .iter()
            .map(|&(gap, length, word)| {
                let start = cursor + gap;
                cursor = start + length;
                WordInterval {
                    word: vocabulary[word].to_string(),
                    start_s: start,
                    end_s: cursor,
                }
            })
            .collect();
        let text = format_alignment(&intervals);
        let reparsed =
            parse_alignment_str(&text, Path::new("prop.TextGrid")).expect("round trip parses");
        prop_assert_eq!(reparsed, intervals);
    }
}
