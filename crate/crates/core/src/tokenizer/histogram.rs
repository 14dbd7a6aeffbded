//! Learned offset codebook over log-polar coordinates.
//!
//! Each nonzero point-to-point offset maps to (log distance, angle). The
//! angle axis is a fixed uniform partition of `[0, 2π)`; the shared
//! log-distance axis starts as one interval and is repeatedly binary-split
//! wherever a joint (angle x distance) cell still holds at least
//! `cell_fraction` of the training offsets. Frequent short offsets
//! therefore end up in much narrower distance buckets than rare long
//! ones. Inputs are resampled but deliberately *not* scale-normalized;
//! the codebook works in raw device units.
//!
//! One token per point: the joint bucket index of its offset from the
//! previous point. Three reserved ids follow the joint buckets: a
//! dedicated zero-offset bucket (log 0 is undefined), the stroke
//! separator, and a start marker. The ink's first point is emitted as the
//! reserved pair `[start marker, bucket of the offset from the origin]`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::{Emission, TokenSequence, TokenizeError, TokenizerConfig};
use crate::ink::RawInk;

pub const CODEBOOK_VERSION: u32 = 1;

/// Training knobs; the defaults match the reference setup (100 angle
/// buckets, 0.1% stop fraction).
#[derive(Debug, Clone, Copy)]
pub struct HistogramParams {
    pub angle_buckets: u32,
    pub cell_fraction: f64,
    pub max_vocab: u32,
}

impl Default for HistogramParams {
    fn default() -> Self {
        Self {
            angle_buckets: 100,
            cell_fraction: 0.001,
            max_vocab: 16_384,
        }
    }
}

/// Token ids that follow the joint buckets in the vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReservedTokens {
    pub zero_offset: u32,
    pub stroke_separator: u32,
    pub start_marker: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramCodebook {
    pub version: u32,
    pub angle_bucket_count: u32,
    /// Log-distance interval boundaries, strictly increasing; bucket `i`
    /// covers `[edges[i], edges[i+1])`, values outside clamp to the first
    /// or last bucket.
    pub distance_edges: Vec<f64>,
    pub reserved: ReservedTokens,
}

impl HistogramCodebook {
    pub fn new(angle_bucket_count: u32, distance_edges: Vec<f64>) -> Self {
        let base = angle_bucket_count * (distance_edges.len() as u32 - 1);
        Self {
            version: CODEBOOK_VERSION,
            angle_bucket_count,
            distance_edges,
            reserved: ReservedTokens {
                zero_offset: base,
                stroke_separator: base + 1,
                start_marker: base + 2,
            },
        }
    }

    pub fn angle_bucket_width(&self) -> f64 {
        TAU / f64::from(self.angle_bucket_count)
    }

    pub fn distance_bucket_count(&self) -> u32 {
        (self.distance_edges.len() - 1) as u32
    }

    /// Joint buckets plus the three reserved tokens.
    pub fn vocab_size(&self) -> u32 {
        self.angle_bucket_count * self.distance_bucket_count() + 3
    }

    pub fn zero_offset_id(&self) -> u32 {
        self.reserved.zero_offset
    }

    pub fn separator_id(&self) -> u32 {
        self.reserved.stroke_separator
    }

    pub fn start_marker_id(&self) -> u32 {
        self.reserved.start_marker
    }

    fn angle_index(&self, angle: f64) -> u32 {
        let ix = (angle / self.angle_bucket_width()).floor() as i64;
        ix.clamp(0, i64::from(self.angle_bucket_count) - 1) as u32
    }

    /// Half-open intervals: a value equal to an interior edge belongs to
    /// the higher bucket; out-of-range values clamp to the end buckets.
    pub fn distance_index(&self, log_d: f64) -> u32 {
        let buckets = self.distance_bucket_count();
        let upper = self.distance_edges.partition_point(|e| *e <= log_d);
        (upper.saturating_sub(1) as u32).min(buckets - 1)
    }

    /// Token id for one offset.
    pub fn bucket_of(&self, dx: f64, dy: f64) -> u32 {
        if dx == 0.0 && dy == 0.0 {
            return self.zero_offset_id();
        }
        let (log_d, angle) = to_log_polar(dx, dy);
        self.distance_index(log_d) * self.angle_bucket_count + self.angle_index(angle)
    }

    /// Geometric center of a joint bucket, mapped back to a Cartesian
    /// offset. The zero-offset token maps to (0, 0).
    pub fn centroid_of(&self, id: u32) -> Option<(f64, f64)> {
        if id == self.zero_offset_id() {
            return Some((0.0, 0.0));
        }
        if id >= self.zero_offset_id() {
            return None;
        }
        let dist_ix = (id / self.angle_bucket_count) as usize;
        let angle_ix = id % self.angle_bucket_count;
        let log_mid = (self.distance_edges[dist_ix] + self.distance_edges[dist_ix + 1]) / 2.0;
        let angle_mid = (f64::from(angle_ix) + 0.5) * self.angle_bucket_width();
        let d = log_mid.exp();
        Some((d * angle_mid.cos(), d * angle_mid.sin()))
    }

    /// Width of each distance bucket in log space.
    pub fn distance_bucket_widths(&self) -> Vec<f64> {
        self.distance_edges
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("codebook serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, TokenizeError> {
        let cb: HistogramCodebook =
            serde_json::from_str(text).map_err(|e| TokenizeError::CodebookFormat(e.to_string()))?;
        if cb.version != CODEBOOK_VERSION {
            return Err(TokenizeError::CodebookVersion {
                found: cb.version,
                expected: CODEBOOK_VERSION,
            });
        }
        let expected = HistogramCodebook::new(cb.angle_bucket_count, cb.distance_edges.clone());
        if cb.reserved != expected.reserved {
            return Err(TokenizeError::CodebookFormat(
                "reserved token ids do not match the bucket layout".to_string(),
            ));
        }
        Ok(cb)
    }
}

fn to_log_polar(dx: f64, dy: f64) -> (f64, f64) {
    let mut angle = dy.atan2(dx);
    if angle < 0.0 {
        angle += TAU;
    }
    (dx.hypot(dy).ln(), angle)
}

/// Offsets of an ink in writing order, including the cross-stroke jumps;
/// the first point contributes its offset from the origin. This is the
/// stream the trainer and tokenizer share.
pub fn ink_offsets(ink: &RawInk) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut prev: Option<(f64, f64)> = None;
    for stroke in &ink.strokes {
        for p in &stroke.points {
            if let Some((px, py)) = prev {
                out.push((p.x - px, p.y - py));
            }
            prev = Some((p.x, p.y));
        }
    }
    out
}

/// Train the codebook from an offset stream.
///
/// Splitting policy: while any joint cell holds `>= cell_fraction` of the
/// stream and the vocabulary cap allows another distance bucket, halve
/// the distance interval of the worst cell. Intervals narrower than the
/// float resolution are skipped; if nothing splittable remains the
/// trainer stops with the buckets it has.
pub fn train_histogram_codebook(
    offsets: &[(f64, f64)],
    params: &HistogramParams,
) -> Result<HistogramCodebook, TokenizeError> {
    if offsets.is_empty() {
        return Err(TokenizeError::EmptyStream);
    }
    let nonzero: Vec<(f64, f64)> = offsets
        .iter()
        .copied()
        .filter(|&(dx, dy)| dx != 0.0 || dy != 0.0)
        .map(|(dx, dy)| to_log_polar(dx, dy))
        .collect();
    if nonzero.is_empty() {
        return Err(TokenizeError::DegenerateOffsets);
    }

    let total = offsets.len() as f64;
    let threshold = params.cell_fraction * total;
    let angle_buckets = params.angle_buckets;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(log_d, _) in &nonzero {
        lo = lo.min(log_d);
        hi = hi.max(log_d);
    }
    let mut edges = vec![lo, hi.max(lo + f64::MIN_POSITIVE)];

    loop {
        let cb = HistogramCodebook::new(angle_buckets, edges.clone());
        let cells = (cb.distance_bucket_count() * angle_buckets) as usize;
        let mut counts = vec![0u64; cells];
        for &(log_d, angle) in &nonzero {
            let ix = cb.distance_index(log_d) * angle_buckets + cb.angle_index(angle);
            counts[ix as usize] += 1;
        }

        // Worst cell per distance interval, considered worst-first.
        let mut worst: Vec<(u64, usize)> = (0..cb.distance_bucket_count() as usize)
            .map(|d| {
                let row = &counts[d * angle_buckets as usize..(d + 1) * angle_buckets as usize];
                (*row.iter().max().unwrap(), d)
            })
            .collect();
        worst.sort_unstable_by(|a, b| b.cmp(a));

        if (worst[0].0 as f64) < threshold {
            return Ok(cb);
        }
        if cb.vocab_size() + angle_buckets > params.max_vocab {
            return Ok(cb);
        }
        let split = worst
            .iter()
            .find(|&&(count, d)| (count as f64) >= threshold && edges[d + 1] - edges[d] > 1e-12);
        match split {
            Some(&(_, d)) => {
                let mid = (edges[d] + edges[d + 1]) / 2.0;
                edges.insert(d + 1, mid);
            }
            None => return Ok(cb),
        }
    }
}

/// One token per point against a trained codebook. Input must be the
/// resampled, unnormalized ink.
pub fn tokenize_histogram(
    ink: &RawInk,
    codebook: &HistogramCodebook,
    cfg: &TokenizerConfig,
) -> TokenSequence {
    let mut ids: Vec<(bool, u32)> = Vec::new(); // (is_separator, id)
    let mut prev: Option<(f64, f64)> = None;
    for stroke in &ink.strokes {
        ids.push((true, codebook.separator_id()));
        for p in &stroke.points {
            match prev {
                None => {
                    ids.push((false, codebook.start_marker_id()));
                    ids.push((false, codebook.bucket_of(p.x, p.y)));
                }
                Some((px, py)) => ids.push((false, codebook.bucket_of(p.x - px, p.y - py))),
            }
            prev = Some((p.x, p.y));
        }
    }
    match cfg.emission {
        Emission::Text => {
            let words: Vec<String> = ids
                .into_iter()
                .map(|(sep, id)| {
                    if sep {
                        cfg.stroke_separator.clone()
                    } else {
                        id.to_string()
                    }
                })
                .collect();
            TokenSequence::Text(words.join(" "))
        }
        Emission::ExtendedIndex => {
            TokenSequence::ExtendedIndex(ids.into_iter().map(|(_, id)| id).collect())
        }
    }
}

/// Centroid-based reconstruction of a histogram sequence as real-valued
/// polylines. Offsets come back as bucket centers, so this is lossy by
/// construction; it exists to measure reconstruction fidelity.
pub fn reconstruct_histogram(
    seq: &TokenSequence,
    codebook: &HistogramCodebook,
    cfg: &TokenizerConfig,
) -> Result<Vec<Vec<(f64, f64)>>, TokenizeError> {
    let ids: Vec<(bool, u32)> = match seq {
        TokenSequence::Text(text) => text
            .split_whitespace()
            .enumerate()
            .map(|(pos, word)| {
                if word == cfg.stroke_separator {
                    Ok((true, codebook.separator_id()))
                } else {
                    word.parse::<u32>()
                        .map(|id| (false, id))
                        .map_err(|_| TokenizeError::Parse {
                            position: pos,
                            message: format!("invalid token id {word:?}"),
                        })
                }
            })
            .collect::<Result<_, _>>()?,
        TokenSequence::ExtendedIndex(ids) => ids
            .iter()
            .map(|&id| (id == codebook.separator_id(), id))
            .collect(),
    };

    let mut strokes: Vec<Vec<(f64, f64)>> = Vec::new();
    let mut current: Vec<(f64, f64)> = Vec::new();
    let mut cursor = (0.0, 0.0);
    let mut awaiting_start = false;
    for (pos, &(sep, id)) in ids.iter().enumerate() {
        if sep {
            if pos == 0 {
                continue;
            }
            if !current.is_empty() {
                strokes.push(std::mem::take(&mut current));
            }
            continue;
        }
        if id == codebook.start_marker_id() {
            awaiting_start = true;
            continue;
        }
        let (dx, dy) = codebook.centroid_of(id).ok_or(TokenizeError::Parse {
            position: pos,
            message: format!("token id {id} outside vocabulary"),
        })?;
        if awaiting_start {
            cursor = (dx, dy);
            awaiting_start = false;
        } else {
            cursor = (cursor.0 + dx, cursor.1 + dy);
        }
        current.push(cursor);
    }
    if !current.is_empty() {
        strokes.push(current);
    }
    Ok(strokes)
}
