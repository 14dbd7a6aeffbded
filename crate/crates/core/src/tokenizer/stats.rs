//! Per-stage sequence length statistics.
//!
//! Reports the median point count and median token count after each
//! cumulative processing stage: the original x/y/t text, time sampling
//! (t dropped), scale normalization with integer rounding, and the
//! extended token dictionary (one dedicated token per index). The token
//! counter is pluggable so an external subword tokenizer can be injected;
//! the built-in default approximates digit-level number tokenization.

use serde::Serialize;
use thiserror::Error;

use super::{
    tokenize_absolute, tokenize_relative, Emission, TokenSequence, TokenizerConfig, TokenizerMode,
};
use crate::ink::RawInk;
use crate::preprocess::{normalize_scale, quantize_impl, resample_time, PreprocessConfig};

#[derive(Debug, Error, PartialEq)]
pub enum StatsError {
    #[error("empty corpus")]
    EmptyCorpus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StageRow {
    pub stage: String,
    pub median_points: f64,
    pub median_tokens: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SequenceStats {
    pub rows: Vec<StageRow>,
}

impl SequenceStats {
    /// Fixed-column text table.
    pub fn format_table(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "{:<28} {:>12} {:>12}\n",
            "representation", "points", "tokens"
        ));
        for row in &self.rows {
            out.push_str(&format!(
                "{:<28} {:>12.1} {:>12.1}\n",
                row.stage, row.median_points, row.median_tokens
            ));
        }
        out
    }
}

/// Whitespace-splitting counter: one token per word.
pub fn whitespace_token_counter(text: &str) -> usize {
    text.split_whitespace().count()
}

/// Default counter: splits on whitespace, then counts numeric words one
/// token per character (digits, signs, decimal points), the way models
/// with single-digit number tokenization consume them. Non-numeric words
/// count as one token. Plain whitespace splitting cannot see the
/// per-character cost of long decimals, which is where most of the
/// sequence-length reduction comes from.
pub fn default_token_counter(text: &str) -> usize {
    text.split_whitespace()
        .map(|word| {
            let numeric = word
                .chars()
                .all(|c| c.is_ascii_digit() || matches!(c, '-' | '+' | '.'));
            if numeric {
                word.chars().count()
            } else {
                1
            }
        })
        .sum()
}

fn median(mut values: Vec<f64>) -> f64 {
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Text form of an unquantized ink: separator, then per point either
/// "x y t" or "x y" with shortest round-trip decimals.
fn float_text(ink: &RawInk, separator: &str, with_time: bool) -> String {
    let mut words = Vec::new();
    for stroke in &ink.strokes {
        words.push(separator.to_string());
        for p in &stroke.points {
            words.push(p.x.to_string());
            words.push(p.y.to_string());
            if with_time {
                words.push(p.t.to_string());
            }
        }
    }
    words.join(" ")
}

/// Compute the four-stage table over a corpus. Rounding for the
/// scale-normalization row keeps every resampled point (no duplicate
/// collapse) so the point column stays flat after time sampling.
pub fn sequence_stats<F>(
    corpus: &[RawInk],
    pp: &PreprocessConfig,
    tok: &TokenizerConfig,
    token_counter: F,
) -> Result<SequenceStats, StatsError>
where
    F: Fn(&str) -> usize,
{
    if corpus.is_empty() {
        return Err(StatsError::EmptyCorpus);
    }
    let coordinate_mode = match tok.mode {
        TokenizerMode::Relative => TokenizerMode::Relative,
        _ => TokenizerMode::Absolute,
    };
    let text_cfg = TokenizerConfig {
        mode: coordinate_mode,
        emission: Emission::Text,
        stroke_separator: tok.stroke_separator.clone(),
    };

    let mut per_stage_points: [Vec<f64>; 4] = Default::default();
    let mut per_stage_tokens: [Vec<f64>; 4] = Default::default();
    for ink in corpus {
        let original_text = float_text(ink, &tok.stroke_separator, true);
        per_stage_points[0].push(ink.point_count() as f64);
        per_stage_tokens[0].push(token_counter(&original_text) as f64);

        let resampled = resample_time(ink, pp.time_delta_ms);
        let resampled_text = float_text(&resampled, &tok.stroke_separator, false);
        per_stage_points[1].push(resampled.point_count() as f64);
        per_stage_tokens[1].push(token_counter(&resampled_text) as f64);

        let normalized = normalize_scale(&resampled, pp.grid_size);
        let rounded = quantize_impl(&normalized, pp, false);
        let quantized_seq = match coordinate_mode {
            TokenizerMode::Relative => tokenize_relative(&rounded, &text_cfg),
            _ => tokenize_absolute(&rounded, &text_cfg),
        };
        let quantized_text = match &quantized_seq {
            TokenSequence::Text(t) => t.clone(),
            TokenSequence::ExtendedIndex(_) => unreachable!("text emission requested"),
        };
        per_stage_points[2].push(rounded.point_count() as f64);
        per_stage_tokens[2].push(token_counter(&quantized_text) as f64);

        // Extended dictionary: every index is one dedicated token, so the
        // count is the emission length, independent of the text counter.
        let extended_cfg = TokenizerConfig {
            emission: Emission::ExtendedIndex,
            ..text_cfg.clone()
        };
        let extended = match coordinate_mode {
            TokenizerMode::Relative => tokenize_relative(&rounded, &extended_cfg),
            _ => tokenize_absolute(&rounded, &extended_cfg),
        };
        per_stage_points[3].push(rounded.point_count() as f64);
        per_stage_tokens[3].push(extended.token_count() as f64);
    }

    let names = [
        "original x,y,t",
        "+time sampling",
        "+scale normalization",
        "+extended token dictionary",
    ];
    let rows = names
        .iter()
        .enumerate()
        .map(|(i, name)| StageRow {
            stage: (*name).to_string(),
            median_points: median(per_stage_points[i].clone()),
            median_tokens: median(per_stage_tokens[i].clone()),
        })
        .collect();
    Ok(SequenceStats { rows })
}
