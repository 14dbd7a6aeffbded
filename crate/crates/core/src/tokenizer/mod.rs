//! Token-sequence representations of processed ink.
//!
//! Two coordinate codebooks share one uniform integer grid: `absolute`
//! emits each point as its grid position, `relative` emits offsets from
//! the previous point in writing order. Both produce two tokens per
//! point. The `histogram` codebook (see [`histogram`]) is learned from
//! offset statistics in log-polar space and emits one token per point.
//!
//! Sequences come in two interchangeable emissions: plain text
//! (`"<stroke> 2 1 2 2"`) or a flat index list with a separator sentinel
//! for vocabulary-extension experiments.

pub mod histogram;
pub mod stats;

use thiserror::Error;

use crate::ink::{GridPoint, ProcessedInk};
use crate::preprocess::PreprocessConfig;

pub use histogram::{train_histogram_codebook, HistogramCodebook, HistogramParams};
pub use stats::{default_token_counter, sequence_stats, whitespace_token_counter, SequenceStats};

pub const DEFAULT_STROKE_SEPARATOR: &str = "<stroke>";

/// Coordinate codebook choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TokenizerMode {
    Absolute,
    Relative,
    Histogram,
}

/// Output emission: digits-as-text, or dedicated token indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Emission {
    Text,
    ExtendedIndex,
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TokenizerConfig {
    pub mode: TokenizerMode,
    pub emission: Emission,
    pub stroke_separator: String,
}

impl Default for TokenizerConfig {
    fn default() -> Self {
        Self {
            mode: TokenizerMode::Relative,
            emission: Emission::Text,
            stroke_separator: DEFAULT_STROKE_SEPARATOR.to_string(),
        }
    }
}

impl TokenizerConfig {
    pub fn validate(&self) -> Result<(), TokenizeError> {
        if self.stroke_separator.is_empty()
            || self.stroke_separator.chars().any(char::is_whitespace)
        {
            return Err(TokenizeError::InvalidSeparator(
                self.stroke_separator.clone(),
            ));
        }
        Ok(())
    }
}

/// A tokenized ink in one of the two emissions.
#[derive(Debug, Clone, PartialEq)]
pub enum TokenSequence {
    Text(String),
    ExtendedIndex(Vec<u32>),
}

impl TokenSequence {
    pub fn as_text(&self) -> Option<&str> {
        match self {
            TokenSequence::Text(s) => Some(s),
            TokenSequence::ExtendedIndex(_) => None,
        }
    }

    /// Number of tokens: whitespace-separated words for text, list length
    /// for extended indices.
    pub fn token_count(&self) -> usize {
        match self {
            TokenSequence::Text(s) => s.split_whitespace().count(),
            TokenSequence::ExtendedIndex(v) => v.len(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TokenizeError {
    #[error("stroke separator must be non-empty and contain no whitespace, got {0:?}")]
    InvalidSeparator(String),
    #[error("token {position}: {message}")]
    Parse { position: usize, message: String },
    #[error("token {position}: coordinate {value} outside [0, {max}]")]
    OutOfRange {
        position: usize,
        value: i64,
        max: u32,
    },
    #[error("mode {0:?} is not handled by this operation")]
    UnsupportedMode(TokenizerMode),
    #[error("offset stream is empty")]
    EmptyStream,
    #[error("degenerate offset distribution: all offsets are zero")]
    DegenerateOffsets,
    #[error("codebook version {found} is not supported (expected {expected})")]
    CodebookVersion { found: u32, expected: u32 },
    #[error("codebook file is not valid JSON: {0}")]
    CodebookFormat(String),
}

fn parse_err(position: usize, message: impl Into<String>) -> TokenizeError {
    TokenizeError::Parse {
        position,
        message: message.into(),
    }
}

/// One point as its absolute grid coordinates, two tokens per point, each
/// stroke introduced by the separator.
pub fn tokenize_absolute(ink: &ProcessedInk, cfg: &TokenizerConfig) -> TokenSequence {
    let values = coordinate_values(ink, false);
    emit(values, cfg, ink.grid_size, TokenizerMode::Absolute)
}

/// First point of the ink as absolute coordinates, every later point as
/// the integer offset from its predecessor in writing order; offsets
/// chain across stroke boundaries so pen-up layout survives.
pub fn tokenize_relative(ink: &ProcessedInk, cfg: &TokenizerConfig) -> TokenSequence {
    let values = coordinate_values(ink, true);
    emit(values, cfg, ink.grid_size, TokenizerMode::Relative)
}

/// Dispatch on `cfg.mode` for the two coordinate codebooks. Histogram
/// tokenization needs a trained codebook and unnormalized input; see
/// [`histogram::tokenize_histogram`].
pub fn tokenize(ink: &ProcessedInk, cfg: &TokenizerConfig) -> Result<TokenSequence, TokenizeError> {
    cfg.validate()?;
    match cfg.mode {
        TokenizerMode::Absolute => Ok(tokenize_absolute(ink, cfg)),
        TokenizerMode::Relative => Ok(tokenize_relative(ink, cfg)),
        TokenizerMode::Histogram => Err(TokenizeError::UnsupportedMode(cfg.mode)),
    }
}

/// Stream items shared by both emissions.
enum Item {
    Separator,
    Value(i64),
}

fn coordinate_values(ink: &ProcessedInk, relative: bool) -> Vec<Item> {
    let mut out = Vec::new();
    let mut prev: Option<GridPoint> = None;
    for stroke in &ink.strokes {
        out.push(Item::Separator);
        for &p in stroke {
            match (relative, prev) {
                (true, Some(q)) => {
                    out.push(Item::Value(i64::from(p.x) - i64::from(q.x)));
                    out.push(Item::Value(i64::from(p.y) - i64::from(q.y)));
                }
                _ => {
                    out.push(Item::Value(i64::from(p.x)));
                    out.push(Item::Value(i64::from(p.y)));
                }
            }
            prev = Some(p);
        }
    }
    out
}

/// Extended-index mapping. Absolute coordinates already lie in `[0, n]`
/// and map to themselves with separator `n + 1`. Relative values lie in
/// `[-n, n]` and are shifted by `+n`, giving indices `[0, 2n]` with
/// separator `2n + 1`.
fn index_bias(mode: TokenizerMode, n: u32) -> (i64, u32) {
    match mode {
        TokenizerMode::Absolute => (0, n + 1),
        TokenizerMode::Relative => (i64::from(n), 2 * n + 1),
        TokenizerMode::Histogram => (0, 0),
    }
}

fn emit(values: Vec<Item>, cfg: &TokenizerConfig, n: u32, mode: TokenizerMode) -> TokenSequence {
    match cfg.emission {
        Emission::Text => {
            let mut words = Vec::with_capacity(values.len());
            for item in values {
                match item {
                    Item::Separator => words.push(cfg.stroke_separator.clone()),
                    Item::Value(v) => words.push(v.to_string()),
                }
            }
            TokenSequence::Text(words.join(" "))
        }
        Emission::ExtendedIndex => {
            let (bias, sentinel) = index_bias(mode, n);
            let indices = values
                .into_iter()
                .map(|item| match item {
                    Item::Separator => sentinel,
                    Item::Value(v) => (v + bias) as u32,
                })
                .collect();
            TokenSequence::ExtendedIndex(indices)
        }
    }
}

/// Parse a sequence back into the shared item stream, reporting the token
/// position of the first offense.
fn parse_items(
    seq: &TokenSequence,
    cfg: &TokenizerConfig,
    mode: TokenizerMode,
    n: u32,
) -> Result<Vec<Item>, TokenizeError> {
    match seq {
        TokenSequence::Text(text) => {
            let mut items = Vec::new();
            for (pos, word) in text.split_whitespace().enumerate() {
                if word == cfg.stroke_separator {
                    items.push(Item::Separator);
                } else {
                    let v: i64 = word
                        .parse()
                        .map_err(|_| parse_err(pos, format!("invalid integer {word:?}")))?;
                    items.push(Item::Value(v));
                }
            }
            Ok(items)
        }
        TokenSequence::ExtendedIndex(indices) => {
            let (bias, sentinel) = index_bias(mode, n);
            let max_index = match mode {
                TokenizerMode::Absolute => n,
                TokenizerMode::Relative => 2 * n,
                TokenizerMode::Histogram => u32::MAX,
            };
            indices
                .iter()
                .enumerate()
                .map(|(pos, &ix)| {
                    if ix == sentinel {
                        Ok(Item::Separator)
                    } else if ix <= max_index {
                        Ok(Item::Value(i64::from(ix) - bias))
                    } else {
                        Err(parse_err(pos, format!("index {ix} outside vocabulary")))
                    }
                })
                .collect()
        }
    }
}

/// Invert [`tokenize_absolute`] / [`tokenize_relative`]. Absolute mode
/// reconstructs coordinates exactly; relative mode reconstructs by exact
/// cumulative summation (offsets are integer differences, so there is no
/// drift). Reconstruction leaving `[0, grid_size]` is an error.
pub fn detokenize(
    seq: &TokenSequence,
    cfg: &TokenizerConfig,
    pp: &PreprocessConfig,
) -> Result<ProcessedInk, TokenizeError> {
    cfg.validate()?;
    let relative = match cfg.mode {
        TokenizerMode::Absolute => false,
        TokenizerMode::Relative => true,
        TokenizerMode::Histogram => return Err(TokenizeError::UnsupportedMode(cfg.mode)),
    };
    let n = pp.grid_size;
    let items = parse_items(seq, cfg, cfg.mode, n)?;
    if items.is_empty() {
        return Err(parse_err(0, "empty token sequence"));
    }
    if !matches!(items[0], Item::Separator) {
        return Err(parse_err(0, "expected stroke separator first"));
    }

    let mut strokes: Vec<Vec<GridPoint>> = Vec::new();
    let mut current: Vec<GridPoint> = Vec::new();
    let mut pending: Option<i64> = None;
    let mut prev: Option<GridPoint> = None;
    let mut pos = 0usize;
    let check = |pos: usize, v: i64| -> Result<i32, TokenizeError> {
        if v < 0 || v > i64::from(n) {
            Err(TokenizeError::OutOfRange {
                position: pos,
                value: v,
                max: n,
            })
        } else {
            Ok(v as i32)
        }
    };
    for item in &items[0..] {
        match item {
            Item::Separator => {
                if pending.is_some() {
                    return Err(parse_err(pos, "odd coordinate count in stroke"));
                }
                if pos > 0 {
                    if current.is_empty() {
                        return Err(parse_err(pos, "stroke with no points"));
                    }
                    strokes.push(std::mem::take(&mut current));
                }
            }
            Item::Value(v) => {
                if let Some(vx) = pending.take() {
                    let point = match (relative, prev) {
                        (true, Some(q)) => {
                            let x = check(pos, i64::from(q.x) + vx)?;
                            let y = check(pos, i64::from(q.y) + v)?;
                            GridPoint::new(x, y)
                        }
                        _ => GridPoint::new(check(pos, vx)?, check(pos, *v)?),
                    };
                    current.push(point);
                    prev = Some(point);
                } else {
                    pending = Some(*v);
                }
            }
        }
        pos += 1;
    }
    if pending.is_some() {
        return Err(parse_err(pos, "odd coordinate count in stroke"));
    }
    if current.is_empty() {
        return Err(parse_err(pos, "stroke with no points"));
    }
    strokes.push(current);
    Ok(ProcessedInk {
        strokes,
        grid_size: n,
        time_delta_ms: pp.time_delta_ms,
    })
}

/// Convert a coordinate-mode sequence between the two emissions without
/// re-tokenizing; the mapping is bijective for a fixed mode and grid.
pub fn convert_emission(
    seq: &TokenSequence,
    cfg: &TokenizerConfig,
    grid_size: u32,
) -> Result<TokenSequence, TokenizeError> {
    cfg.validate()?;
    if cfg.mode == TokenizerMode::Histogram {
        return Err(TokenizeError::UnsupportedMode(cfg.mode));
    }
    let items = parse_items(seq, cfg, cfg.mode, grid_size)?;
    let low = if cfg.mode == TokenizerMode::Relative {
        -i64::from(grid_size)
    } else {
        0
    };
    for (pos, item) in items.iter().enumerate() {
        if let Item::Value(v) = item {
            if *v < low || *v > i64::from(grid_size) {
                return Err(TokenizeError::OutOfRange {
                    position: pos,
                    value: *v,
                    max: grid_size,
                });
            }
        }
    }
    let target = match seq {
        TokenSequence::Text(_) => Emission::ExtendedIndex,
        TokenSequence::ExtendedIndex(_) => Emission::Text,
    };
    let out_cfg = TokenizerConfig {
        emission: target,
        ..cfg.clone()
    };
    Ok(emit(items, &out_cfg, grid_size, cfg.mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn processed(strokes: Vec<Vec<(i32, i32)>>) -> ProcessedInk {
        ProcessedInk {
            strokes: strokes
                .into_iter()
                .map(|s| s.into_iter().map(|(x, y)| GridPoint::new(x, y)).collect())
                .collect(),
            grid_size: 224,
            time_delta_ms: 20.0,
        }
    }

    fn text_cfg(mode: TokenizerMode) -> TokenizerConfig {
        TokenizerConfig {
            mode,
            ..TokenizerConfig::default()
        }
    }

    #[test]
    fn absolute_single_stroke() {
        let ink = processed(vec![vec![(2, 1), (2, 2)]]);
        let seq = tokenize_absolute(&ink, &text_cfg(TokenizerMode::Absolute));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 2 1 2 2");
    }

    #[test]
    fn absolute_two_strokes() {
        let ink = processed(vec![vec![(2, 1)], vec![(3, 1), (3, 2)]]);
        let seq = tokenize_absolute(&ink, &text_cfg(TokenizerMode::Absolute));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 2 1 <stroke> 3 1 3 2");
    }

    #[test]
    fn absolute_single_point() {
        let ink = processed(vec![vec![(0, 0)]]);
        let seq = tokenize_absolute(&ink, &text_cfg(TokenizerMode::Absolute));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 0 0");
    }

    #[test]
    fn relative_first_point_absolute() {
        let ink = processed(vec![vec![(5, 5), (6, 7)]]);
        let seq = tokenize_relative(&ink, &text_cfg(TokenizerMode::Relative));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 5 5 1 2");
    }

    #[test]
    fn relative_single_point_after_collapse() {
        let ink = processed(vec![vec![(5, 5)]]);
        let seq = tokenize_relative(&ink, &text_cfg(TokenizerMode::Relative));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 5 5");
    }

    #[test]
    fn relative_chains_across_strokes() {
        let ink = processed(vec![vec![(0, 0), (1, 0)], vec![(4, 0)]]);
        let seq = tokenize_relative(&ink, &text_cfg(TokenizerMode::Relative));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 0 0 1 0 <stroke> 3 0");
    }

    #[test]
    fn relative_emits_negative_offsets_as_signed_decimals() {
        let ink = processed(vec![vec![(5, 5), (2, 1)]]);
        let seq = tokenize_relative(&ink, &text_cfg(TokenizerMode::Relative));
        assert_eq!(seq.as_text().unwrap(), "<stroke> 5 5 -3 -4");
    }

    #[test]
    fn detokenize_rejects_odd_coordinate_count() {
        let cfg = text_cfg(TokenizerMode::Absolute);
        let pp = PreprocessConfig::default();
        let seq = TokenSequence::Text("<stroke> 2".to_string());
        let err = detokenize(&seq, &cfg, &pp).unwrap_err();
        assert!(matches!(err, TokenizeError::Parse { message, .. }
            if message.contains("odd coordinate count")));
    }

    #[test]
    fn detokenize_rejects_out_of_range_relative_walk() {
        let cfg = text_cfg(TokenizerMode::Relative);
        let pp = PreprocessConfig::default();
        let seq = TokenSequence::Text("<stroke> 5 5 -6 0".to_string());
        let err = detokenize(&seq, &cfg, &pp).unwrap_err();
        assert!(matches!(err, TokenizeError::OutOfRange { value: -1, .. }));
    }

    #[test]
    fn detokenize_rejects_missing_leading_separator() {
        let cfg = text_cfg(TokenizerMode::Absolute);
        let pp = PreprocessConfig::default();
        let seq = TokenSequence::Text("2 1".to_string());
        assert!(detokenize(&seq, &cfg, &pp).is_err());
    }

    fn random_processed(rng: &mut ChaCha8Rng, n: u32) -> ProcessedInk {
        let stroke_count = rng.random_range(1..=4);
        let strokes = (0..stroke_count)
            .map(|_| {
                let len = rng.random_range(1..=30);
                let mut pts: Vec<GridPoint> = Vec::with_capacity(len);
                for _ in 0..len {
                    let p = GridPoint::new(
                        rng.random_range(0..=n as i32),
                        rng.random_range(0..=n as i32),
                    );
                    if pts.last() != Some(&p) {
                        pts.push(p);
                    }
                }
                if pts.is_empty() {
                    pts.push(GridPoint::new(0, 0));
                }
                pts
            })
            .collect();
        ProcessedInk {
            strokes,
            grid_size: n,
            time_delta_ms: 20.0,
        }
    }

    #[test]
    fn roundtrip_absolute_and_relative_on_random_inks() {
        let pp = PreprocessConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let ink = random_processed(&mut rng, pp.grid_size);
            for mode in [TokenizerMode::Absolute, TokenizerMode::Relative] {
                for emission in [Emission::Text, Emission::ExtendedIndex] {
                    let cfg = TokenizerConfig {
                        mode,
                        emission,
                        ..TokenizerConfig::default()
                    };
                    let seq = tokenize(&ink, &cfg).unwrap();
                    let back = detokenize(&seq, &cfg, &pp).unwrap();
                    assert_eq!(back, ink, "mode {mode:?} emission {emission:?}");
                }
            }
        }
    }

    #[test]
    fn emission_conversion_is_bijective() {
        let pp = PreprocessConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..200 {
            let ink = random_processed(&mut rng, pp.grid_size);
            for mode in [TokenizerMode::Absolute, TokenizerMode::Relative] {
                let cfg = text_cfg(mode);
                let text = tokenize(&ink, &cfg).unwrap();
                let extended = convert_emission(&text, &cfg, pp.grid_size).unwrap();
                assert!(matches!(extended, TokenSequence::ExtendedIndex(_)));
                let back = convert_emission(&extended, &cfg, pp.grid_size).unwrap();
                assert_eq!(back, text);

                let direct = tokenize(
                    &ink,
                    &TokenizerConfig {
                        mode,
                        emission: Emission::ExtendedIndex,
                        ..TokenizerConfig::default()
                    },
                )
                .unwrap();
                assert_eq!(direct, extended);
            }
        }
    }

    #[test]
    fn absolute_and_relative_have_equal_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..100 {
            let ink = random_processed(&mut rng, 224);
            let a = tokenize_absolute(&ink, &text_cfg(TokenizerMode::Absolute));
            let r = tokenize_relative(&ink, &text_cfg(TokenizerMode::Relative));
            assert_eq!(a.token_count(), r.token_count());
            assert_eq!(a.token_count(), 2 * ink.point_count() + ink.strokes.len());
        }
    }

    #[test]
    fn emitted_text_reparses_under_grammar() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let pp = PreprocessConfig::default();
        for _ in 0..100 {
            let ink = random_processed(&mut rng, pp.grid_size);
            let cfg = text_cfg(TokenizerMode::Relative);
            let seq = tokenize(&ink, &cfg).unwrap();
            assert!(detokenize(&seq, &cfg, &pp).is_ok());
        }
    }

    #[test]
    fn separator_with_whitespace_is_rejected() {
        let cfg = TokenizerConfig {
            stroke_separator: "a b".to_string(),
            ..TokenizerConfig::default()
        };
        assert!(matches!(
            cfg.validate(),
            Err(TokenizeError::InvalidSeparator(_))
        ));
    }
}
