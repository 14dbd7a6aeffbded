//! Time resampling and scale normalization, the stages that make raw
//! captures grid- and tokenizer-ready.

use thiserror::Error;

use crate::ink::{GridPoint, Point, ProcessedInk, RawInk, Stroke};

#[derive(Debug, Error, PartialEq)]
pub enum PreprocessConfigError {
    #[error("time_delta_ms must be positive and finite, got {0}")]
    InvalidTimeDelta(f64),
    #[error("grid_size must be in [2, {MAX_GRID_SIZE}], got {0}")]
    InvalidGridSize(u32),
}

/// Upper bound on the coordinate grid; far beyond any vision encoder
/// resolution and small enough that extended-index ids (up to
/// `2 * grid_size + 1`) never overflow.
pub const MAX_GRID_SIZE: u32 = 1 << 20;

/// Parameters for the resample + normalize + quantize pipeline.
///
/// `time_delta_ms` is the uniform sampling interval; `grid_size` is the
/// upper bound of the integer coordinate range (typically the vision
/// encoder's input resolution).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreprocessConfig {
    pub time_delta_ms: f64,
    pub grid_size: u32,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        Self {
            time_delta_ms: 20.0,
            grid_size: 224,
        }
    }
}

impl PreprocessConfig {
    pub fn new(time_delta_ms: f64, grid_size: u32) -> Result<Self, PreprocessConfigError> {
        if !(time_delta_ms.is_finite() && time_delta_ms > 0.0) {
            return Err(PreprocessConfigError::InvalidTimeDelta(time_delta_ms));
        }
        if !(2..=MAX_GRID_SIZE).contains(&grid_size) {
            return Err(PreprocessConfigError::InvalidGridSize(grid_size));
        }
        Ok(Self {
            time_delta_ms,
            grid_size,
        })
    }
}

/// Resample each stroke onto a uniform time grid starting at the stroke's
/// first timestamp. Coordinates are linearly interpolated between the two
/// surrounding captured points. The stroke's final captured point is
/// always kept, so endpoints never shift even when they fall between grid
/// ticks.
pub fn resample_time(ink: &RawInk, delta_ms: f64) -> RawInk {
    let strokes = ink
        .strokes
        .iter()
        .map(|stroke| Stroke::new(resample_stroke(&stroke.points, delta_ms)))
        .collect();
    RawInk {
        strokes,
        label: ink.label.clone(),
        metadata: ink.metadata.clone(),
    }
}

fn resample_stroke(points: &[Point], delta_ms: f64) -> Vec<Point> {
    if points.len() <= 1 {
        return points.to_vec();
    }
    let t_first = points[0].t;
    let t_last = points[points.len() - 1].t;
    let mut out = Vec::new();
    let mut k = 0u64;
    loop {
        let tau = t_first + (k as f64) * delta_ms;
        if tau >= t_last {
            break;
        }
        out.push(interpolate_at(points, tau));
        k += 1;
    }
    let last = points[points.len() - 1];
    if out.last() != Some(&last) {
        out.push(last);
    }
    out
}

/// Position at time `tau`, linearly interpolated on the segment that
/// contains it. Zero-duration segments yield their first point.
fn interpolate_at(points: &[Point], tau: f64) -> Point {
    debug_assert!(points.len() >= 2);
    for pair in points.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if tau <= b.t {
            if b.t <= a.t {
                return Point::new(a.x, a.y, tau);
            }
            let alpha = (tau - a.t) / (b.t - a.t);
            return Point::new(a.x + alpha * (b.x - a.x), a.y + alpha * (b.y - a.y), tau);
        }
    }
    let last = points[points.len() - 1];
    Point::new(last.x, last.y, tau)
}

/// Scale and shift, preserving aspect ratio, so the ink's bounding box
/// fits `[0, n]` with the larger extent spanning it exactly. Degenerate
/// boxes: a zero-area ink collapses to (0, 0); if only one extent is
/// zero, the other drives the scale.
pub fn normalize_scale(ink: &RawInk, n: u32) -> RawInk {
    let (min_x, min_y, w, h) = bounding_box(ink);
    let span = w.max(h);
    let scale = if span > 0.0 { f64::from(n) / span } else { 0.0 };
    let strokes = ink
        .strokes
        .iter()
        .map(|stroke| {
            Stroke::new(
                stroke
                    .points
                    .iter()
                    .map(|p| Point::new((p.x - min_x) * scale, (p.y - min_y) * scale, p.t))
                    .collect(),
            )
        })
        .collect();
    RawInk {
        strokes,
        label: ink.label.clone(),
        metadata: ink.metadata.clone(),
    }
}

pub(crate) fn bounding_box(ink: &RawInk) -> (f64, f64, f64, f64) {
    let mut min_x = f64::INFINITY;
    let mut min_y = f64::INFINITY;
    let mut max_x = f64::NEG_INFINITY;
    let mut max_y = f64::NEG_INFINITY;
    for p in ink.points() {
        min_x = min_x.min(p.x);
        min_y = min_y.min(p.y);
        max_x = max_x.max(p.x);
        max_y = max_y.max(p.y);
    }
    if !min_x.is_finite() {
        return (0.0, 0.0, 0.0, 0.0);
    }
    (min_x, min_y, max_x - min_x, max_y - min_y)
}

/// Round every coordinate of a scale-normalized ink to the nearest
/// integer (ties away from zero) and collapse consecutive duplicate grid
/// points. A stroke always keeps at least one point.
pub fn quantize(ink: &RawInk, cfg: &PreprocessConfig) -> ProcessedInk {
    quantize_impl(ink, cfg, true)
}

pub(crate) fn quantize_impl(ink: &RawInk, cfg: &PreprocessConfig, collapse: bool) -> ProcessedInk {
    let n = cfg.grid_size as i32;
    let strokes = ink
        .strokes
        .iter()
        .map(|stroke| {
            let mut out: Vec<GridPoint> = Vec::with_capacity(stroke.len());
            for p in &stroke.points {
                let q = GridPoint::new(round_to_grid(p.x, n), round_to_grid(p.y, n));
                if !collapse || out.last() != Some(&q) {
                    out.push(q);
                }
            }
            out
        })
        .collect();
    ProcessedInk {
        strokes,
        grid_size: cfg.grid_size,
        time_delta_ms: cfg.time_delta_ms,
    }
}

/// Round half away from zero, clamped to `[0, n]` to absorb float noise
/// at the box edges.
fn round_to_grid(v: f64, n: i32) -> i32 {
    (v.round() as i32).clamp(0, n)
}

/// Full pipeline from a raw capture to a tokenizer-ready ink.
pub fn preprocess(ink: &RawInk, cfg: &PreprocessConfig) -> ProcessedInk {
    let resampled = resample_time(ink, cfg.time_delta_ms);
    let normalized = normalize_scale(&resampled, cfg.grid_size);
    quantize(&normalized, cfg)
}
