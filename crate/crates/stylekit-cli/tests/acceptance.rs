//! The acceptance gate: one test per release criterion, each checking the
//! implementation against an independent oracle (brute-force enumeration,
//! quadrature, dense grids, central finite differences) or an exactness
//! guarantee (byte-identical artifacts, bit-identical samples). Run with
//! `cargo test --test acceptance -- --nocapture` to see one `[PASS]` line
//! per criterion.

mod common;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stylekit::audio::Waveform;
use stylekit::augment::{join_texts, render_pair, sample_pause};
use stylekit::corpus::{
    compute_length_stats, extract_pauses, fit_pause_distribution, CorpusManifest,
    PauseDistribution, UtteranceRecord,
};
use stylekit::emotion::{
    apply_threshold_all, consecutive_match_rate, label_distribution, EmotionLabel, LabelRecord,
};
use stylekit::eval::{emotion_probe, ks_two_sample};
use stylekit::style::{
    batch_gradients, mask_view, nt_xent_loss, pair_boundary, prepare_batch, training_step,
    ContrastiveBatch, EmbeddingSource, MaskOutcome, MelSpectrogram, StyleConfig, StyleEmbedding,
    StyleModel, Tensor, TrainSample, MASK_SPAN_S,
};

use common::{build_corpus, synthesize_alignments};

fn pass(criterion: u32, what: &str) {
    println!("[PASS] C{criterion}: {what}");
}

// ---------------------------------------------------------------------------
// Shared random fixtures
// ---------------------------------------------------------------------------

/// A random but valid manifest: `n` records over `n_stories` stories with
/// sequential timing and random gaps drawn from `gap_range`.
fn random_manifest(
    rng: &mut ChaCha8Rng,
    n: usize,
    n_stories: usize,
    gap_range: std::ops::Range<f64>,
) -> CorpusManifest {
    let words = ["river", "lantern", "walked", "quietly", "home", "evening"];
    let mut records = Vec::with_capacity(n);
    let mut cursors = vec![0.0f64; n_stories];
    let mut positions = vec![0u32; n_stories];
    for i in 0..n {
        let story = rng.random_range(0..n_stories);
        let gap = rng.random_range(gap_range.clone());
        let duration = rng.random_range(0.4..4.0);
        let start = cursors[story] + gap;
        let end = start + duration;
        cursors[story] = end;
        records.push(UtteranceRecord {
            id: format!("utt-{i:03}"),
            story_id: format!("story-{story}"),
            position: positions[story],
            start_s: start,
            end_s: end,
            audio_path: format!("audio/utt-{i:03}.wav").into(),
            text: format!(
                "{} {}",
                words[rng.random_range(0..words.len())],
                words[rng.random_range(0..words.len())]
            ),
        });
        positions[story] += 1;
    }
    CorpusManifest::new(records, 22_050).expect("fixture records are valid")
}

/// A manifest's records grouped by story and ordered by position.
fn stories_sorted(manifest: &CorpusManifest) -> Vec<Vec<UtteranceRecord>> {
    let mut by_story: BTreeMap<String, Vec<UtteranceRecord>> = BTreeMap::new();
    for rec in manifest.records() {
        by_story.entry(rec.story_id.clone()).or_default().push(rec.clone());
    }
    by_story
        .into_values()
        .map(|mut story| {
            story.sort_by_key(|r| r.position);
            story
        })
        .collect()
}

/// Random labels over all seven categories with scores in `[0, 1)`.
fn random_labels(
    rng: &mut ChaCha8Rng,
    manifest: &CorpusManifest,
) -> BTreeMap<String, LabelRecord> {
    let mut labels = BTreeMap::new();
    for rec in manifest.records() {
        let category = EmotionLabel::ALL[rng.random_range(0..EmotionLabel::ALL.len())];
        let score = rng.random_range(0.0..1.0);
        let label = LabelRecord::new(rec.id.clone(), category, score).expect("valid label");
        labels.insert(rec.id.clone(), label);
    }
    labels
}

/// Small style model used by the gradient, attention, and training checks.
fn tiny_style_config() -> StyleConfig {
    StyleConfig {
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
    }
}

/// Deterministic dense spectrogram, `frames × n_mels`, 50 ms hop.
fn synthetic_mel(frames: usize, n_mels: usize, phase: f64) -> MelSpectrogram {
    let data: Vec<f64> = (0..frames * n_mels)
        .map(|i| (0.37 * i as f64 + phase).sin() * 0.8)
        .collect();
    MelSpectrogram::from_frames(Tensor::new(&[frames, n_mels], data), 0.05, (1e-10f64).ln())
        .expect("valid synthetic frames")
}

// ---------------------------------------------------------------------------
// C1 — statistics oracles
// ---------------------------------------------------------------------------

#[test]
fn c01_statistics_match_brute_force_oracles_on_100_fixtures() {
    let started = Instant::now();
    let close = |got: f64, want: f64| (got - want).abs() <= 1e-12;

    for fixture in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + fixture);
        let n = rng.random_range(10..40);
        let n_stories = rng.random_range(2..6);
        let manifest = random_manifest(&mut rng, n, n_stories, 0.05..0.9);
        let stories = stories_sorted(&manifest);

        // Length statistics: enumerate every window by hand.
        for group_size in [1usize, 2, 3] {
            let mut durations = Vec::new();
            for story in &stories {
                if story.len() >= group_size {
                    for lo in 0..=(story.len() - group_size) {
                        durations.push(story[lo + group_size - 1].end_s - story[lo].start_s);
                    }
                }
            }
            match compute_length_stats(&manifest, group_size) {
                Ok(stats) => {
                    let mean = durations.iter().sum::<f64>() / durations.len() as f64;
                    let min = durations.iter().cloned().fold(f64::INFINITY, f64::min);
                    let max = durations.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    assert_eq!(stats.count, durations.len());
                    assert!(close(stats.mean_s, mean), "{} vs {}", stats.mean_s, mean);
                    assert!(close(stats.min_s, min));
                    assert!(close(stats.max_s, max));
                }
                Err(_) => assert!(
                    durations.is_empty(),
                    "stats refused a computable group size {group_size}"
                ),
            }
        }

        // Pause fit: explicit filter then textbook two-pass moments.
        let pauses = extract_pauses(&manifest).pauses;
        let kept: Vec<f64> = pauses.iter().copied().filter(|&p| p <= 1.0).collect();
        assert!(kept.len() >= 2, "fixture too small to fit");
        let mean = kept.iter().sum::<f64>() / kept.len() as f64;
        let var =
            kept.iter().map(|p| (p - mean).powi(2)).sum::<f64>() / (kept.len() - 1) as f64;
        let fit = fit_pause_distribution(&pauses, 1.0).expect("fit");
        assert_eq!((fit.n_samples, fit.n_excluded), (kept.len(), pauses.len() - kept.len()));
        assert!(close(fit.mean_s, mean) && close(fit.std_s, var.sqrt()));

        // Label distribution: a plain tally.
        let labels = apply_threshold_all(&random_labels(&mut rng, &manifest), 0.5);
        let dist = label_distribution(labels.values()).expect("distribution");
        for category in EmotionLabel::ALL {
            let count =
                labels.values().filter(|r| r.effective_category == category).count();
            let expected = 100.0 * count as f64 / labels.len() as f64;
            assert!(close(dist[&category], expected));
        }

        // Consecutive match rate: scan adjacent pairs by hand.
        let (mut pairs, mut matched) = (0usize, 0usize);
        for story in &stories {
            for pair in story.windows(2) {
                pairs += 1;
                let a = labels[&pair[0].id].effective_category;
                let b = labels[&pair[1].id].effective_category;
                if a == b && a != EmotionLabel::Neutral {
                    matched += 1;
                }
            }
        }
        assert!(pairs > 0, "fixture must contain adjacent pairs");
        let rate = consecutive_match_rate(&manifest, &labels).expect("rate");
        assert!(close(rate, matched as f64 / pairs as f64));
    }

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 10.0, "statistics oracles took {elapsed:?}");
    pass(1, "statistics match brute-force oracles on 100 fixtures (≤ 1e-12)");
}

// ---------------------------------------------------------------------------
// C2 — pause-fit exclusion rule
// ---------------------------------------------------------------------------

#[test]
fn c02_pause_fit_excludes_exactly_the_values_over_one_second() {
    for fixture in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(2000 + fixture);
        // Build the sample with a known composition: `n_over` values
        // strictly above the cutoff, `n_under` at or below it.
        let n_over = rng.random_range(0..12);
        let n_under = rng.random_range(2..30);
        let mut pauses = Vec::new();
        for _ in 0..n_over {
            pauses.push(rng.random_range(1.0001..3.0));
        }
        for _ in 0..n_under {
            pauses.push(rng.random_range(0.0..=1.0));
        }
        // Shuffle so exclusion cannot depend on position.
        for i in (1..pauses.len()).rev() {
            pauses.swap(i, rng.random_range(0..=i));
        }

        let fit = fit_pause_distribution(&pauses, 1.0).expect("fit");
        assert_eq!(fit.n_excluded, n_over, "fixture {fixture}: wrong exclusion count");
        assert_eq!(fit.n_samples, n_under, "fixture {fixture}: wrong survivor count");
        assert_eq!(fit.cutoff_s, 1.0);
    }
    pass(2, "pause fit excludes exactly the >1 s values on 50 constructed fixtures");
}

// ---------------------------------------------------------------------------
// C3 — augmentation exactness
// ---------------------------------------------------------------------------

#[test]
fn c03_rendered_pairs_are_exact_to_the_sample_and_character() {
    let words = ["river", "lantern", "walked", "quietly", "home"];
    let mut rng = ChaCha8Rng::seed_from_u64(3000);
    for _ in 0..100 {
        let sr = [8_000u32, 16_000, 22_050, 44_100][rng.random_range(0..4)];
        let wave = |rng: &mut ChaCha8Rng| Waveform {
            samples: (0..rng.random_range(50..3000))
                .map(|_| rng.random_range(i16::MIN..=i16::MAX))
                .collect(),
            sample_rate_hz: sr,
        };
        let first = wave(&mut rng);
        let second = wave(&mut rng);
        let pause = rng.random_range(0.0..1.5);

        let rendered = render_pair(&first, &second, pause, sr).expect("render");
        let silence = (pause * f64::from(sr)).round() as usize;
        assert_eq!(
            rendered.samples.len(),
            first.samples.len() + silence + second.samples.len(),
            "length formula"
        );
        assert_eq!(&rendered.samples[..first.samples.len()], &first.samples[..]);
        assert!(
            rendered.samples[first.samples.len()..first.samples.len() + silence]
                .iter()
                .all(|&s| s == 0),
            "inserted gap must be digital silence"
        );
        assert_eq!(&rendered.samples[first.samples.len() + silence..], &second.samples[..]);

        // Joined text: one space between the sentences, one terminator.
        let text = |rng: &mut ChaCha8Rng| {
            (0..rng.random_range(1..5))
                .map(|_| words[rng.random_range(0..words.len())])
                .collect::<Vec<_>>()
                .join(" ")
        };
        let a = text(&mut rng);
        let b = text(&mut rng);
        assert_eq!(join_texts(&a, &b).expect("join"), format!("{a} {b}~"));
    }
    pass(3, "100 rendered pairs exact: length, parent bits, silence, joined text");
}

// ---------------------------------------------------------------------------
// C4 — truncated pause sampling
// ---------------------------------------------------------------------------

/// Simpson integration with `2·half_steps` panels.
fn simpson(lo: f64, hi: f64, half_steps: usize, f: impl Fn(f64) -> f64) -> f64 {
    let n = 2 * half_steps;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

#[test]
fn c04_pause_draws_follow_the_truncated_normal() {
    // The paper-fitted parameters: Normal(0.509, 0.223) truncated to [0, 1].
    let dist = PauseDistribution::new(0.509, 0.223, 1.0, 100, 0).expect("distribution");

    let density = |x: f64| {
        let z = (x - dist.mean_s) / dist.std_s;
        (-0.5 * z * z).exp()
    };
    let mass = simpson(0.0, 1.0, 50_000, density);
    let mean = simpson(0.0, 1.0, 50_000, |x| x * density(x)) / mass;
    let second = simpson(0.0, 1.0, 50_000, |x| x * x * density(x)) / mass;
    let variance = second - mean * mean;

    let n = 100_000usize;
    let mut rng = ChaCha8Rng::seed_from_u64(4000);
    let mut sum = 0.0;
    for _ in 0..n {
        let p = sample_pause(&dist, &mut rng);
        assert!((0.0..=1.0).contains(&p), "draw {p} outside the window");
        sum += p;
    }
    let sample_mean = sum / n as f64;
    let standard_error = (variance / n as f64).sqrt();
    assert!(
        (sample_mean - mean).abs() <= 3.0 * standard_error,
        "sample mean {sample_mean} vs quadrature mean {mean} (3 SE = {})",
        3.0 * standard_error
    );
    pass(4, "100 000 draws from Normal(0.509, 0.223)·1[0,1] in range, mean within 3 SE");
}

// ---------------------------------------------------------------------------
// C5 — NT-Xent correctness
// ---------------------------------------------------------------------------

fn random_views(rng: &mut ChaCha8Rng, n_views: usize, dim: usize) -> Vec<StyleEmbedding> {
    (0..n_views)
        .map(|_| {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect();
            StyleEmbedding::new(v, EmbeddingSource::Gst).expect("embedding")
        })
        .collect()
}

/// The loss as a literal double loop over cosine similarities.
fn nt_xent_by_hand(views: &[StyleEmbedding], temperature: f64) -> f64 {
    let unit: Vec<Vec<f64>> = views
        .iter()
        .map(|e| {
            let norm = e.vector.iter().map(|v| v * v).sum::<f64>().sqrt();
            e.vector.iter().map(|v| v / norm).collect()
        })
        .collect();
    let sim =
        |i: usize, k: usize| -> f64 { unit[i].iter().zip(&unit[k]).map(|(a, b)| a * b).sum() };
    let mut total = 0.0;
    for i in 0..views.len() {
        let mut denom = 0.0;
        for k in 0..views.len() {
            if k != i {
                denom += (sim(i, k) / temperature).exp();
            }
        }
        total += -((sim(i, i ^ 1) / temperature).exp() / denom).ln();
    }
    total / views.len() as f64
}

#[test]
fn c05_nt_xent_matches_the_double_loop_and_its_closed_forms() {
    let mut rng = ChaCha8Rng::seed_from_u64(5000);

    // Random batches across the size range.
    for _ in 0..30 {
        let n_views = 2 * rng.random_range(2..=8);
        let dim = rng.random_range(2..=16);
        let temperature = rng.random_range(0.1..2.0);
        let views = random_views(&mut rng, n_views, dim);
        let loss = nt_xent_loss(&ContrastiveBatch::new(&views, temperature).expect("batch"));
        let expected = nt_xent_by_hand(&views, temperature);
        assert!(
            (loss - expected).abs() <= 1e-10,
            "loss {loss} vs double loop {expected} ({n_views} views, d={dim})"
        );

        // Uniform positive rescaling leaves every cosine unchanged.
        let scale = rng.random_range(0.05..20.0);
        let scaled: Vec<StyleEmbedding> = views
            .iter()
            .map(|e| {
                StyleEmbedding::new(
                    e.vector.iter().map(|v| v * scale).collect(),
                    EmbeddingSource::Gst,
                )
                .expect("scaled")
            })
            .collect();
        let rescaled =
            nt_xent_loss(&ContrastiveBatch::new(&scaled, temperature).expect("batch"));
        assert!(
            (rescaled - loss).abs() <= 1e-10,
            "scale invariance broke: {rescaled} vs {loss}"
        );
    }

    // All-identical views: every similarity is 1, so the softmax is uniform
    // over the 2N−1 candidates and the loss is exactly ln(2N−1).
    for n_pairs in 2..=8usize {
        let n_views = 2 * n_pairs;
        let one =
            StyleEmbedding::new(vec![0.3, -1.2, 0.8], EmbeddingSource::Gst).expect("view");
        let views = vec![one; n_views];
        let loss = nt_xent_loss(&ContrastiveBatch::new(&views, 0.5).expect("batch"));
        let expected = ((n_views - 1) as f64).ln();
        assert!(
            (loss - expected).abs() <= 1e-10,
            "identical views: {loss} vs ln({}) = {expected}",
            n_views - 1
        );
    }
    pass(5, "NT-Xent matches the double loop (≤ 1e-10), ln(2N−1) on ties, scale-invariant");
}

// ---------------------------------------------------------------------------
// C6 — gradient checks
// ---------------------------------------------------------------------------

/// Applies a recorded mask outcome to a fresh copy of `mel`.
fn apply_recorded_mask(mel: &MelSpectrogram, outcome: &MaskOutcome) -> MelSpectrogram {
    let mut data = mel.data().data().to_vec();
    if let MaskOutcome::Masked { start_frame, span } = *outcome {
        let n_mels = mel.n_mels();
        data[start_frame * n_mels..(start_frame + span) * n_mels].fill(mel.log_floor());
    }
    MelSpectrogram::from_frames(
        Tensor::new(&[mel.n_frames(), mel.n_mels()], data),
        mel.hop_s(),
        mel.log_floor(),
    )
    .expect("masked copy")
}

/// The training loss rebuilt from public calls with the L1 targets frozen —
/// the function whose finite differences equal the analytic gradients,
/// because the real objective stop-gradients its targets.
fn rebuilt_total_loss(
    model: &StyleModel,
    texts: &[(String, Option<usize>)],
    mels: &[MelSpectrogram],
    masks: &[[MaskOutcome; 2]],
    frozen_targets: &[Vec<f64>],
) -> f64 {
    let cfg = model.cfg();
    let mut abs_sum = 0.0;
    let mut entries = 0usize;
    let mut views = Vec::new();
    for (i, (text, boundary)) in texts.iter().enumerate() {
        let encoding = model.encode_text(text, *boundary).expect("text encoding");
        for prediction in model.tpgst_predict(&encoding).expect("predictions") {
            for (p, t) in prediction.vector.iter().zip(&frozen_targets[i]) {
                abs_sum += (p - t).abs();
                entries += 1;
            }
        }
        for outcome in &masks[i] {
            views.push(model.gst_embedding(&apply_recorded_mask(&mels[i], outcome)).expect("view"));
        }
    }
    let l1 = abs_sum / entries as f64;
    let contrastive =
        nt_xent_loss(&ContrastiveBatch::new(&views, cfg.temperature).expect("batch"));
    l1 + cfg.simclr_scale * contrastive
}

fn gradient_texts() -> Vec<(String, Option<usize>)> {
    vec![
        ("the river kept its song~".to_string(), None),
        ("a small wind crossed the field~".to_string(), Some(pair_boundary("a small wind"))),
    ]
}

fn gradient_samples(model: &StyleModel) -> Vec<TrainSample> {
    gradient_texts()
        .into_iter()
        .enumerate()
        .map(|(i, (text, boundary))| TrainSample {
            mel: synthetic_mel(60, 8, 2.5 * i as f64),
            text: model.encode_text(&text, boundary).expect("text encoding"),
        })
        .collect()
}

fn is_audio_path(name: &str) -> bool {
    name.starts_with("conv") || name.starts_with("enc_") || name.starts_with("gst.")
}

#[test]
fn c06_gradients_match_finite_differences_and_the_stop_gradient_holds() {
    let cfg = tiny_style_config();
    let mut model = StyleModel::new(cfg.clone(), 6000).expect("model");
    let texts = gradient_texts();
    let samples = gradient_samples(&model);
    let mels: Vec<MelSpectrogram> = samples.iter().map(|s| s.mel.clone()).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(6001);
    let batch = prepare_batch(&samples, &cfg, &mut rng).expect("batch");
    let masks = batch.mask_outcomes();
    let (loss, gradients) = batch_gradients(&model, &batch).expect("gradients");
    assert!(loss.total.is_finite() && loss.l1 > 0.0);

    let frozen: Vec<Vec<f64>> = mels
        .iter()
        .map(|mel| model.gst_embedding(mel).expect("target").vector)
        .collect();
    let rebuilt =
        |model: &StyleModel| rebuilt_total_loss(model, &texts, &mels, &masks, &frozen);
    assert!((rebuilt(&model) - loss.total).abs() <= 1e-9, "loss reconstruction");

    // Central differences over every entry of every parameter, at the
    // 1e-4 relative / 1e-6 absolute tolerance.
    let eps = 1e-5;
    let names: Vec<String> = model.params().keys().cloned().collect();
    let mut audio_params = 0usize;
    let mut text_params = 0usize;
    for name in &names {
        if is_audio_path(name) {
            audio_params += 1;
        } else {
            text_params += 1;
        }
        let base = model.param(name).expect("param").clone();
        let grad = &gradients[name];
        for idx in 0..base.numel() {
            let mut plus = base.data().to_vec();
            plus[idx] += eps;
            model.set_param(name, Tensor::new(base.shape(), plus)).expect("perturb +");
            let f_plus = rebuilt(&model);
            let mut minus = base.data().to_vec();
            minus[idx] -= eps;
            model.set_param(name, Tensor::new(base.shape(), minus)).expect("perturb -");
            let f_minus = rebuilt(&model);
            model.set_param(name, base.clone()).expect("restore");

            let fd = (f_plus - f_minus) / (2.0 * eps);
            let analytic = grad.data()[idx];
            let tolerance = 1e-6 + 1e-4 * fd.abs().max(analytic.abs());
            assert!(
                (fd - analytic).abs() <= tolerance,
                "{name}[{idx}]: finite difference {fd} vs gradient {analytic}"
            );
        }
    }
    assert!(audio_params > 0 && text_params > 0, "both paths must be swept");

    // Stop-gradient: with the contrastive term switched off, the loss is
    // pure L1 against frozen targets, so nothing on the audio side may
    // receive any gradient — exactly zero, not merely small.
    let cfg_l1 = StyleConfig { simclr_scale: 0.0, ..tiny_style_config() };
    let model_l1 = StyleModel::new(cfg_l1.clone(), 6000).expect("model");
    let samples_l1 = gradient_samples(&model_l1);
    let mut rng = ChaCha8Rng::seed_from_u64(6002);
    let batch_l1 = prepare_batch(&samples_l1, &cfg_l1, &mut rng).expect("batch");
    let (loss_l1, grads_l1) = batch_gradients(&model_l1, &batch_l1).expect("gradients");
    assert!(loss_l1.l1 > 0.0 && loss_l1.simclr == 0.0);
    for (name, grad) in &grads_l1 {
        if is_audio_path(name) {
            assert!(
                grad.data().iter().all(|&g| g == 0.0),
                "{name}: gradient leaked through the stop-gradient"
            );
        }
    }
    let text_motion: f64 = grads_l1
        .iter()
        .filter(|(name, _)| !is_audio_path(name))
        .map(|(_, g)| g.data().iter().map(|v| v.abs()).sum::<f64>())
        .sum();
    assert!(text_motion > 0.0, "the text path must still learn from the L1 term");
    pass(6, "finite differences agree on every parameter; stop-gradient exactly zero");
}

// ---------------------------------------------------------------------------
// C7 — GST attention
// ---------------------------------------------------------------------------

#[test]
fn c07_attention_weights_are_a_distribution_and_match_the_naive_sum() {
    let cfg = tiny_style_config();
    let per_head = cfg.d_style / cfg.n_heads;
    let (n_heads, n_tokens, d_style, d_query) =
        (cfg.n_heads, cfg.n_tokens, cfg.d_style, cfg.d_query);
    let model = StyleModel::new(cfg, 7000).expect("model");

    // The per-token value rows are fixed, so compute them once.
    let tokens = model.param("gst.tokens").expect("tokens");
    let wv = model.param("gst.wv").expect("wv");
    let value_row = |t: usize| -> Vec<f64> {
        (0..d_style)
            .map(|j| (0..tokens.cols()).map(|k| tokens.at2(t, k) * wv.at2(k, j)).sum())
            .collect()
    };
    let values: Vec<Vec<f64>> = (0..n_tokens).map(value_row).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(7001);
    for _ in 0..1000 {
        let query: Vec<f64> = (0..d_query).map(|_| rng.random_range(-3.0..3.0)).collect();
        let attention = model.gst_attend(&query).expect("attention");
        assert_eq!(attention.weights.len(), n_heads);

        let mut expected = vec![0.0f64; d_style];
        for (h, weights) in attention.weights.iter().enumerate() {
            assert_eq!(weights.len(), n_tokens);
            let sum: f64 = weights.iter().sum();
            assert!(weights.iter().all(|&w| w >= 0.0), "negative weight in head {h}");
            assert!((sum - 1.0).abs() <= 1e-6, "head {h} weights sum to {sum}");
            for (t, &w) in weights.iter().enumerate() {
                for j in 0..per_head {
                    expected[h * per_head + j] += w * values[t][h * per_head + j];
                }
            }
        }
        for (got, want) in attention.embedding.vector.iter().zip(&expected) {
            assert!(
                (got - want).abs() <= 1e-10,
                "attention output {got} vs naive sum {want}"
            );
        }
    }
    pass(7, "1000 attentions: weights ≥ 0 summing to 1 ± 1e-6, output ≤ 1e-10 of naive sum");
}

// ---------------------------------------------------------------------------
// C8 — masking
// ---------------------------------------------------------------------------

#[test]
fn c08_masking_alters_exactly_one_span_of_the_expected_width() {
    let mut rng = ChaCha8Rng::seed_from_u64(8000);
    let mut masked_count = 0usize;
    for _ in 0..200 {
        let frames = rng.random_range(1..200);
        let n_mels = rng.random_range(1..12);
        let hop_s = rng.random_range(0.005..0.08);
        let data: Vec<f64> =
            (0..frames * n_mels).map(|_| rng.random_range(-3.0..3.0)).collect();
        let mel = MelSpectrogram::from_frames(
            Tensor::new(&[frames, n_mels], data),
            hop_s,
            (1e-10f64).ln(),
        )
        .expect("fixture mel");

        let expected_span = ((MASK_SPAN_S / hop_s).round() as usize).max(1);
        let (view, outcome) = mask_view(&mel, MASK_SPAN_S, &mut rng);
        match outcome {
            MaskOutcome::TooShort => {
                assert!(frames < expected_span, "masking refused a maskable clip");
                assert_eq!(view.data().data(), mel.data().data(), "passthrough must not edit");
            }
            MaskOutcome::Masked { start_frame, span } => {
                masked_count += 1;
                assert_eq!(span, expected_span, "span must be round(0.5 / hop_s)");
                assert!(start_frame + span <= frames);
                for t in 0..frames {
                    if t >= start_frame && t < start_frame + span {
                        assert!(
                            view.frame(t).iter().all(|&v| v == mel.log_floor()),
                            "masked frame {t} must be floored"
                        );
                    } else {
                        assert_eq!(view.frame(t), mel.frame(t), "frame {t} must be untouched");
                    }
                }
            }
        }
    }
    assert!(masked_count >= 100, "only {masked_count}/200 fixtures were maskable");
    pass(8, "200 masks: exactly round(0.5/hop_s) consecutive frames altered, no others");
}

// ---------------------------------------------------------------------------
// C9 — training smoke test
// ---------------------------------------------------------------------------

/// Sixteen synthetic samples: distinct spectrogram phases, texts cycling
/// through four sentences, every other one a joined pair with a boundary.
fn smoke_samples(model: &StyleModel) -> Vec<TrainSample> {
    let sentences = [
        "the river kept its song",
        "a small wind crossed the field",
        "evening settled over the town",
        "the lantern burned until morning",
    ];
    (0..16)
        .map(|i| {
            let base = sentences[i % sentences.len()];
            let (text, boundary) = if i % 2 == 0 {
                (format!("{base}~"), None)
            } else {
                let other = sentences[(i + 1) % sentences.len()];
                (format!("{base} {other}~"), Some(pair_boundary(base)))
            };
            TrainSample {
                mel: synthetic_mel(60, 8, 1.7 * i as f64),
                text: model.encode_text(&text, boundary).expect("text encoding"),
            }
        })
        .collect()
}

#[test]
fn c09_fifty_training_steps_reduce_the_loss_deterministically() {
    let started = Instant::now();
    let cfg = StyleConfig { simclr_scale: 0.1, ..tiny_style_config() };

    let run = || -> Vec<String> {
        let mut model = StyleModel::new(cfg.clone(), 9000).expect("model");
        let samples = smoke_samples(&model);
        (0..50)
            .map(|step| {
                let report =
                    training_step(&mut model, &samples, step, 9001).expect("training step");
                format!(
                    "{}\t{}\t{}\t{}",
                    report.step, report.loss.total, report.loss.l1, report.loss.simclr
                )
            })
            .collect()
    };

    let log_a = run();
    let first: f64 = log_a[0].split('\t').nth(1).unwrap().parse().unwrap();
    let last: f64 = log_a[49].split('\t').nth(1).unwrap().parse().unwrap();
    assert!(last < first, "loss failed to decrease: {first} → {last}");

    let log_b = run();
    assert_eq!(log_a, log_b, "two seeded runs must log identical losses");

    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 60.0, "smoke training took {elapsed:?}");
    pass(9, "50 steps on 16 samples reduce the loss; two runs log identical losses");
}

// ---------------------------------------------------------------------------
// C10 — K-S implementation
// ---------------------------------------------------------------------------

#[test]
fn c10_ks_statistic_matches_the_grid_oracle_and_its_exact_cases() {
    let mut rng = ChaCha8Rng::seed_from_u64(10_000);

    // Random small samples against a dense-grid supremum.
    for trial in 0..200 {
        let n1 = rng.random_range(1..=20);
        let n2 = rng.random_range(1..=20);
        let quantize = trial % 2 == 0;
        let draw = |rng: &mut ChaCha8Rng| {
            let v = rng.random_range(-1.0..1.0f64);
            if quantize {
                (v * 10.0).round() / 10.0
            } else {
                v
            }
        };
        let a: Vec<f64> = (0..n1).map(|_| draw(&mut rng)).collect();
        let b: Vec<f64> = (0..n2).map(|_| draw(&mut rng)).collect();
        let result = ks_two_sample(&a, &b).expect("ks");

        let ecdf = |sample: &[f64], x: f64| {
            sample.iter().filter(|&&v| v <= x).count() as f64 / sample.len() as f64
        };
        let mut grid: Vec<f64> = a.iter().chain(&b).copied().collect();
        let lo = grid.iter().cloned().fold(f64::INFINITY, f64::min) - 0.1;
        let hi = grid.iter().cloned().fold(f64::NEG_INFINITY, f64::max) + 0.1;
        for i in 0..=2000 {
            grid.push(lo + (hi - lo) * i as f64 / 2000.0);
        }
        let sup =
            grid.iter().map(|&x| (ecdf(&a, x) - ecdf(&b, x)).abs()).fold(0.0f64, f64::max);
        assert!(
            (result.statistic - sup).abs() <= 1e-12,
            "trial {trial}: {} vs grid {sup}",
            result.statistic
        );

        // Symmetry holds exactly, not approximately.
        let swapped = ks_two_sample(&b, &a).expect("ks swapped");
        assert_eq!(result.statistic, swapped.statistic);
        assert_eq!(result.p_value, swapped.p_value);
    }

    // Identical samples: the ECDFs coincide everywhere.
    let sample: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
    assert_eq!(ks_two_sample(&sample, &sample).expect("ks").statistic, 0.0);

    // Disjoint support: one ECDF saturates before the other starts.
    let low: Vec<f64> = (0..25).map(|i| i as f64 * 0.01).collect();
    let high: Vec<f64> = (0..30).map(|i| 10.0 + i as f64 * 0.01).collect();
    assert_eq!(ks_two_sample(&low, &high).expect("ks").statistic, 1.0);

    // Strictly increasing transforms relabel the axis without reordering
    // anything. Integer-valued samples and an integer affine map keep every
    // arithmetic step exact, so the invariance is bit-for-bit.
    for trial in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(10_100 + trial);
        let a: Vec<f64> =
            (0..rng.random_range(2..15)).map(|_| rng.random_range(-40..40) as f64).collect();
        let b: Vec<f64> =
            (0..rng.random_range(2..15)).map(|_| rng.random_range(-40..40) as f64).collect();
        let scale = rng.random_range(1..5) as f64;
        let shift = rng.random_range(-20..20) as f64;
        let ta: Vec<f64> = a.iter().map(|&v| scale * v + shift).collect();
        let tb: Vec<f64> = b.iter().map(|&v| scale * v + shift).collect();
        let plain = ks_two_sample(&a, &b).expect("ks");
        let mapped = ks_two_sample(&ta, &tb).expect("ks mapped");
        assert_eq!(plain.statistic, mapped.statistic);
        assert_eq!(plain.p_value, mapped.p_value);
    }
    pass(10, "K-S matches the grid oracle on 200 samples; exact cases hold bit-for-bit");
}

// ---------------------------------------------------------------------------
// C11 — probe sanity
// ---------------------------------------------------------------------------

fn clustered_embeddings(
    rng: &mut ChaCha8Rng,
    per_class: usize,
    spread: f64,
) -> (Vec<StyleEmbedding>, Vec<EmotionLabel>) {
    let centers = [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)];
    let classes = [EmotionLabel::Joy, EmotionLabel::Anger, EmotionLabel::Sadness];
    let mut embeddings = Vec::new();
    let mut labels = Vec::new();
    for (&(cx, cy), &class) in centers.iter().zip(&classes) {
        for _ in 0..per_class {
            let x = cx + rng.random_range(-spread..spread);
            let y = cy + rng.random_range(-spread..spread);
            embeddings
                .push(StyleEmbedding::new(vec![x, y], EmbeddingSource::Gst).expect("embedding"));
            labels.push(class);
        }
    }
    (embeddings, labels)
}

#[test]
fn c11_probe_separates_clusters_and_sits_at_chance_on_shuffles() {
    // The evaluation protocol: 25 % held out, 50 repeats.
    let mut rng = ChaCha8Rng::seed_from_u64(11_000);
    let (embeddings, labels) = clustered_embeddings(&mut rng, 24, 0.1);
    let result = emotion_probe(&embeddings, &labels, 0.25, 50, 11_001).expect("probe");
    assert!(result.mean_accuracy >= 0.99, "separable clusters scored {}", result.mean_accuracy);

    // Determinism: the same seed reproduces every split's accuracy.
    let again = emotion_probe(&embeddings, &labels, 0.25, 50, 11_001).expect("probe");
    assert_eq!(result.mean_accuracy, again.mean_accuracy);
    assert_eq!(result.per_run, again.per_run);

    // Chance baseline: average over independent label permutations, with
    // the spread measured across permutation means (a single permutation
    // can hold real structure the probe will legitimately find).
    let n_permutations = 12;
    let mut permutation_means = Vec::with_capacity(n_permutations);
    for p in 0..n_permutations {
        let mut shuffled = labels.clone();
        for i in (1..shuffled.len()).rev() {
            shuffled.swap(i, rng.random_range(0..=i));
        }
        let probe =
            emotion_probe(&embeddings, &shuffled, 0.25, 6, 11_100 + p as u64).expect("probe");
        permutation_means.push(probe.mean_accuracy);
    }
    let mean = permutation_means.iter().sum::<f64>() / n_permutations as f64;
    let variance = permutation_means.iter().map(|a| (a - mean).powi(2)).sum::<f64>()
        / (n_permutations - 1) as f64;
    let standard_error = (variance / n_permutations as f64).sqrt();
    let chance = 1.0 / 3.0;
    assert!(
        (mean - chance).abs() <= 3.0 * standard_error,
        "shuffled-label accuracy {mean} vs chance {chance} (3 SE = {})",
        3.0 * standard_error
    );
    pass(11, "probe ≥ 0.99 on separable clusters, at chance on shuffles, deterministic");
}

// ---------------------------------------------------------------------------
// C12 — end-to-end pipeline
// ---------------------------------------------------------------------------

/// Runs one full pipeline into `out`, returning the config path used.
fn full_pipeline(dir: &Path, fixture: &common::Fixture, out: &Path) -> PathBuf {
    let alignments = out.join("alignments");
    let entries = [
        ("corpus_manifest", fixture.manifest_path.display().to_string()),
        ("labels", fixture.labels_path.display().to_string()),
        ("out_dir", out.display().to_string()),
        ("alignments_dir", alignments.display().to_string()),
        ("hop", "512".to_string()),
        ("n_mels", "8".to_string()),
        ("conv_channels", "2, 2".to_string()),
        ("rnn_hidden", "5".to_string()),
        ("d_query", "4".to_string()),
        ("n_tokens", "4".to_string()),
        ("d_token", "4".to_string()),
        ("n_heads", "2".to_string()),
        ("d_style", "8".to_string()),
        ("text_embed", "3".to_string()),
        ("text_hidden", "4".to_string()),
        ("tpgst_hidden", "5".to_string()),
        ("train_steps", "12".to_string()),
        ("probe_repeats", "10".to_string()),
        ("seed", "12".to_string()),
    ];
    let mut text = String::new();
    for (key, value) in &entries {
        text.push_str(&format!("{key} = {value}\n"));
    }
    let config = dir.join(format!(
        "config_{}.txt",
        out.file_name().expect("out dir name").to_string_lossy()
    ));
    std::fs::write(&config, text).expect("write config");

    for command in ["stats", "label", "augment", "train-style"] {
        let output = Command::new(env!("CARGO_BIN_EXE_stylekit"))
            .args([command, "--config", config.to_str().unwrap()])
            .output()
            .expect("binary runs");
        assert!(
            output.status.success(),
            "{command} failed: {}",
            String::from_utf8_lossy(&output.stderr)
        );
    }
    // Forced alignments of the rendered pairs come from an external
    // aligner in production; the fixture synthesizes them from known
    // timings.
    synthesize_alignments(&fixture.manifest_path, &out.join("augmented_pauses.tsv"), &alignments);
    let output = Command::new(env!("CARGO_BIN_EXE_stylekit"))
        .args(["eval", "--config", config.to_str().unwrap()])
        .output()
        .expect("binary runs");
    assert!(
        output.status.success(),
        "eval failed: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    config
}

#[test]
fn c12_the_full_pipeline_runs_green_and_reproduces_its_reports() {
    let started = Instant::now();
    let dir = tempfile::tempdir().expect("tempdir");
    let fixture = build_corpus(&dir.path().join("corpus"));

    let out_a = dir.path().join("run_a");
    full_pipeline(dir.path(), &fixture, &out_a);
    let elapsed = started.elapsed();
    assert!(elapsed.as_secs_f64() < 300.0, "pipeline took {elapsed:?}");

    let out_b = dir.path().join("run_b");
    full_pipeline(dir.path(), &fixture, &out_b);

    for artifact in [
        "stats_report.tsv",
        "labels.tsv",
        "augmented.tsv",
        "augmented_pauses.tsv",
        "train_log.tsv",
        "checkpoint.txt",
        "eval_report.tsv",
    ] {
        let a = std::fs::read(out_a.join(artifact)).expect(artifact);
        let b = std::fs::read(out_b.join(artifact)).expect(artifact);
        assert_eq!(a, b, "{artifact} differs between identically seeded runs");
    }
    pass(12, "stats → label → augment → train-style → eval green; reports byte-identical");
}
