//! Shared synthetic corpus for the pipeline tests.
//!
//! Twenty tone utterances across four stories, with labels balanced so
//! every effective category keeps at least two members after thresholding,
//! one paragraph-sized gap to exercise the pause-fit exclusion, and fully
//! deterministic audio — the fixture builds byte-identically every time.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use stylekit::audio::{write_wav, Waveform};
use stylekit::augment::load_sidecar;
use stylekit::corpus::{load_manifest, write_manifest, CorpusManifest, UtteranceRecord};
use stylekit::emotion::{write_labels, EmotionLabel, LabelRecord};
use stylekit::eval::{write_alignment, WordInterval};

/// Corpus sample rate, Hz.
pub const SAMPLE_RATE: u32 = 22_050;
/// Utterances in the fixture.
pub const N_UTTERANCES: usize = 20;

/// Paths of a built fixture corpus.
pub struct Fixture {
    /// The corpus manifest.
    pub manifest_path: PathBuf,
    /// The raw (un-thresholded) label file.
    pub labels_path: PathBuf,
}

/// Spoken words the fixture sentences draw from.
const WORDS: [&str; 11] = [
    "river", "lantern", "walked", "quietly", "home", "evening", "song", "window", "field",
    "said", "morning",
];

/// The emotion pattern each story's five sentences follow.
const STORY_LABELS: [EmotionLabel; 5] = [
    EmotionLabel::Joy,
    EmotionLabel::Joy,
    EmotionLabel::Sadness,
    EmotionLabel::Sadness,
    EmotionLabel::Anger,
];

/// Sentence duration, seconds; grows slowly with the utterance index.
pub fn duration_s(index: usize) -> f64 {
    0.8 + 0.02 * index as f64
}

/// Gap before sentence `i` of its story (0 for the first sentence). One
/// gap is paragraph-sized so the pause fit has something to exclude.
pub fn gap_s(index: usize, position: usize) -> f64 {
    if position == 0 {
        0.0
    } else if index == 4 {
        1.3
    } else {
        0.12 + 0.07 * (index % 7) as f64
    }
}

/// The deterministic tone for utterance `index`.
pub fn tone_waveform(index: usize) -> Waveform {
    let freq = 220.0 + 20.0 * index as f64;
    let n = (duration_s(index) * SAMPLE_RATE as f64).round() as usize;
    let samples: Vec<i16> = (0..n)
        .map(|i| {
            let t = i as f64 / SAMPLE_RATE as f64;
            (0.25 * (2.0 * std::f64::consts::PI * freq * t).sin() * 32767.0) as i16
        })
        .collect();
    Waveform { samples, sample_rate_hz: SAMPLE_RATE }
}

/// Sentence text for utterance `index`: three to five bank words.
pub fn sentence_text(index: usize) -> String {
    let count = 3 + index % 3;
    let words: Vec<&str> =
        (0..count).map(|j| WORDS[(index * 7 + j * 3) % WORDS.len()]).collect();
    words.join(" ")
}

/// The raw label for utterance `index`. Two utterances score below 0.5 so
/// thresholding produces a neutral class.
pub fn raw_label(index: usize) -> (EmotionLabel, f64) {
    let category = STORY_LABELS[index % STORY_LABELS.len()];
    let score = match index {
        2 | 7 => 0.3,
        _ => 0.9,
    };
    (category, score)
}

/// Builds the corpus under `root`: WAVs, manifest, and raw label file.
pub fn build_corpus(root: &Path) -> Fixture {
    let wav_dir = root.join("wav");
    std::fs::create_dir_all(&wav_dir).expect("create wav dir");

    let mut records = Vec::with_capacity(N_UTTERANCES);
    let mut labels = BTreeMap::new();
    let mut cursor = 0.0f64;
    for index in 0..N_UTTERANCES {
        let story = index / 5;
        let position = index % 5;
        if position == 0 {
            cursor = 0.0;
        }
        let start = cursor + gap_s(index, position);
        let end = start + duration_s(index);
        cursor = end;

        let id = format!("utt-{index:02}");
        let relative = format!("wav/{id}.wav");
        write_wav(&wav_dir.join(format!("{id}.wav")), &tone_waveform(index))
            .expect("write tone");
        records.push(UtteranceRecord {
            id: id.clone(),
            story_id: format!("story-{story}"),
            position: position as u32,
            start_s: start,
            end_s: end,
            audio_path: PathBuf::from(relative),
            text: sentence_text(index),
        });

        let (category, score) = raw_label(index);
        let label = LabelRecord::new(id.clone(), category, score).expect("valid label");
        labels.insert(id, label);
    }

    let manifest =
        CorpusManifest::new(records, SAMPLE_RATE).expect("fixture records are valid");
    let manifest_path = root.join("manifest.tsv");
    write_manifest(&manifest, &manifest_path).expect("write manifest");
    let labels_path = root.join("labels_raw.tsv");
    write_labels(&labels, &labels_path).expect("write labels");

    Fixture { manifest_path, labels_path }
}

/// Synthesizes a forced-alignment TextGrid for every rendered pair.
///
/// Word timings are reconstructed from the parents' known durations and
/// the sidecar's pause: the first sentence's words split its duration
/// evenly, then a silence of exactly the pause, then the second sentence's
/// words. The measured inter-sentence gap therefore equals the sidecar
/// pause to rounding.
pub fn synthesize_alignments(
    corpus_manifest: &Path,
    sidecar_path: &Path,
    out_dir: &Path,
) -> usize {
    let corpus = load_manifest(corpus_manifest, SAMPLE_RATE).expect("corpus loads");
    let sidecar = load_sidecar(sidecar_path).expect("sidecar loads");
    std::fs::create_dir_all(out_dir).expect("create alignments dir");

    for pair in &sidecar {
        let first = corpus.get(&pair.first_id).expect("first parent");
        let second = corpus.get(&pair.second_id).expect("second parent");
        let mut intervals = Vec::new();
        let mut cursor = 0.0f64;
        for (slot, sentence) in [first, second].into_iter().enumerate() {
            let words: Vec<&str> = sentence.text.split_whitespace().collect();
            let step = sentence.duration_s() / words.len() as f64;
            for word in words {
                intervals.push(WordInterval {
                    word: word.to_string(),
                    start_s: cursor,
                    end_s: cursor + step,
                });
                cursor += step;
            }
            if slot == 0 {
                intervals.push(WordInterval {
                    word: String::new(),
                    start_s: cursor,
                    end_s: cursor + pair.pause_s,
                });
                cursor += pair.pause_s;
            }
        }
        write_alignment(&intervals, &out_dir.join(format!("{}.TextGrid", pair.pair_id)))
            .expect("write alignment");
    }
    sidecar.len()
}
