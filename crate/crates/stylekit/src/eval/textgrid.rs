//! TextGrid (long format) word tiers and pause measurement.
//!
//! Forced aligners emit TextGrid files mapping a transcript's words to time
//! intervals; silence shows up as intervals with empty text. Only the tier
//! named `words` is consumed here — phone tiers and any others are ignored.
//!
//! The parser is line-oriented and reads the standard long format:
//!
//! ```text
//! item [1]:
//!     class = "IntervalTier"
//!     name = "words"
//!     xmin = 0
//!     xmax = 2.5
//!     intervals: size = 3
//!     intervals [1]:
//!         xmin = 0
//!         xmax = 0.8
//!         text = "hello"
//! ```

use std::fmt::Write as _;
use std::path::Path;

use super::EvalError;

/// Name of the tier the parser consumes.
pub const WORD_TIER: &str = "words";

/// One interval of the word tier; empty text marks silence.
#[derive(Debug, Clone, PartialEq)]
pub struct WordInterval {
    /// Word text; empty for silence.
    pub word: String,
    /// Interval start, seconds.
    pub start_s: f64,
    /// Interval end, seconds.
    pub end_s: f64,
}

impl WordInterval {
    /// Whether this interval is silence (no word).
    pub fn is_silence(&self) -> bool {
        self.word.trim().is_empty()
    }
}

/// Parses the word tier of a TextGrid file.
pub fn parse_alignment(path: &Path) -> Result<Vec<WordInterval>, EvalError> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })?;
    parse_alignment_str(&text, path)
}

/// Parses TextGrid text; `origin` names the source in errors.
pub fn parse_alignment_str(text: &str, origin: &Path) -> Result<Vec<WordInterval>, EvalError> {
    let parse_err = |line: usize, message: String| EvalError::Parse {
        path: origin.to_path_buf(),
        line,
        message,
    };

    #[derive(Default)]
    struct PartialInterval {
        xmin: Option<f64>,
        xmax: Option<f64>,
        text: Option<String>,
        line: usize,
    }

    let mut in_interval_tier = false;
    let mut in_word_tier = false;
    let mut word_tier_found = false;
    let mut intervals: Vec<WordInterval> = Vec::new();
    let mut current: Option<PartialInterval> = None;

    let finish =
        |current: &mut Option<PartialInterval>, intervals: &mut Vec<WordInterval>| {
            let Some(partial) = current.take() else { return Ok(()) };
            let (Some(xmin), Some(xmax), Some(text)) =
                (partial.xmin, partial.xmax, partial.text)
            else {
                return Err(parse_err(
                    partial.line,
                    "interval is missing xmin, xmax, or text".into(),
                ));
            };
            if !xmin.is_finite() || !xmax.is_finite() || xmax < xmin {
                return Err(parse_err(
                    partial.line,
                    format!("invalid interval bounds [{xmin}, {xmax}]"),
                ));
            }
            if let Some(prev) = intervals.last() {
                if xmin < prev.end_s {
                    return Err(parse_err(
                        partial.line,
                        format!(
                            "interval starting at {xmin} overlaps previous interval ending at {}",
                            prev.end_s
                        ),
                    ));
                }
            }
            intervals.push(WordInterval { word: text, start_s: xmin, end_s: xmax });
            Ok(())
        };

    for (lineno, raw) in text.lines().enumerate() {
        let lineno = lineno + 1;
        let line = raw.trim();
        if line.starts_with("item [") {
            finish(&mut current, &mut intervals)?;
            in_interval_tier = false;
            in_word_tier = false;
            continue;
        }
        if let Some(value) = key_value(line, "class") {
            in_interval_tier = unquote(&value) == "IntervalTier";
            continue;
        }
        if let Some(value) = key_value(line, "name") {
            if in_interval_tier && unquote(&value) == WORD_TIER {
                if word_tier_found {
                    return Err(parse_err(lineno, "duplicate word tier".into()));
                }
                in_word_tier = true;
                word_tier_found = true;
            }
            continue;
        }
        if !in_word_tier {
            continue;
        }
        if line.starts_with("intervals [") {
            finish(&mut current, &mut intervals)?;
            current = Some(PartialInterval { line: lineno, ..Default::default() });
            continue;
        }
        if let Some(partial) = current.as_mut() {
            if let Some(value) = key_value(line, "xmin") {
                partial.xmin = Some(
                    value
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid xmin {value:?}")))?,
                );
            } else if let Some(value) = key_value(line, "xmax") {
                partial.xmax = Some(
                    value
                        .parse()
                        .map_err(|_| parse_err(lineno, format!("invalid xmax {value:?}")))?,
                );
            } else if let Some(value) = key_value(line, "text") {
                partial.text = Some(unquote(&value));
            }
        }
    }
    finish(&mut current, &mut intervals)?;

    if !word_tier_found {
        return Err(EvalError::MissingWordTier { path: origin.to_path_buf() });
    }
    Ok(intervals)
}

fn key_value(line: &str, key: &str) -> Option<String> {
    let rest = line.strip_prefix(key)?.trim_start();
    let value = rest.strip_prefix('=')?;
    Some(value.trim().to_string())
}

fn unquote(value: &str) -> String {
    let inner = value
        .strip_prefix('"')
        .and_then(|v| v.strip_suffix('"'))
        .unwrap_or(value);
    // Praat escapes a literal quote by doubling it.
    inner.replace("\"\"", "\"")
}

fn quote(text: &str) -> String {
    format!("\"{}\"", text.replace('"', "\"\""))
}

/// Serializes intervals as a single-word-tier long-format TextGrid.
///
/// Parsing the output reproduces the intervals exactly: numbers are written
/// in shortest round-trip form and quotes are escaped Praat-style.
pub fn format_alignment(intervals: &[WordInterval]) -> String {
    let xmin = intervals.first().map_or(0.0, |i| i.start_s);
    let xmax = intervals.last().map_or(0.0, |i| i.end_s);
    let mut out = String::new();
    let _ = writeln!(out, "File type = \"ooTextFile\"");
    let _ = writeln!(out, "Object class = \"TextGrid\"");
    let _ = writeln!(out);
    let _ = writeln!(out, "xmin = {xmin}");
    let _ = writeln!(out, "xmax = {xmax}");
    let _ = writeln!(out, "tiers? <exists>");
    let _ = writeln!(out, "size = 1");
    let _ = writeln!(out, "item []:");
    let _ = writeln!(out, "    item [1]:");
    let _ = writeln!(out, "        class = \"IntervalTier\"");
    let _ = writeln!(out, "        name = \"{WORD_TIER}\"");
    let _ = writeln!(out, "        xmin = {xmin}");
    let _ = writeln!(out, "        xmax = {xmax}");
    let _ = writeln!(out, "        intervals: size = {}", intervals.len());
    for (i, interval) in intervals.iter().enumerate() {
        let _ = writeln!(out, "        intervals [{}]:", i + 1);
        let _ = writeln!(out, "            xmin = {}", interval.start_s);
        let _ = writeln!(out, "            xmax = {}", interval.end_s);
        let _ = writeln!(out, "            text = {}", quote(&interval.word));
    }
    out
}

/// Writes intervals as a TextGrid file.
pub fn write_alignment(intervals: &[WordInterval], path: &Path) -> Result<(), EvalError> {
    std::fs::write(path, format_alignment(intervals))
        .map_err(|source| EvalError::Io { path: path.to_path_buf(), source })
}

/// An inter-sentence pause measured from an alignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauseMeasurement {
    /// Gap between the sentences, seconds, clamped to ≥ 0.
    pub pause_s: f64,
    /// Whether a negative raw gap was clamped.
    pub clamped: bool,
}

/// Measures the pause after the first sentence of a two-sentence utterance.
///
/// The sentence boundary is given as the known word count of the first
/// sentence (the test texts are known, so the boundary is not inferred).
/// Counting non-silence words, the pause runs from the end of word `k` to
/// the start of word `k+1`, where `k = first_sentence_word_count`. Aligners
/// may emit marginally overlapping words; a negative gap clamps to 0 with a
/// diagnostic flag.
pub fn measure_intersentence_pause(
    intervals: &[WordInterval],
    first_sentence_word_count: usize,
) -> Result<PauseMeasurement, EvalError> {
    if first_sentence_word_count == 0 {
        return Err(EvalError::InsufficientWords { needed: 1, found: 0 });
    }
    let words: Vec<&WordInterval> =
        intervals.iter().filter(|i| !i.is_silence()).collect();
    if words.len() < first_sentence_word_count + 1 {
        return Err(EvalError::InsufficientWords {
            needed: first_sentence_word_count + 1,
            found: words.len(),
        });
    }
    let gap = words[first_sentence_word_count].start_s
        - words[first_sentence_word_count - 1].end_s;
    if gap < 0.0 {
        Ok(PauseMeasurement { pause_s: 0.0, clamped: true })
    } else {
        Ok(PauseMeasurement { pause_s: gap, clamped: false })
    }
}
