//! Core ink domain types shared by every pipeline stage.
//!
//! Coordinates use a y-down screen convention (origin top-left), matching
//! the raster output. Timestamps are milliseconds relative to the ink's
//! first point; ingestion rebases absolute device clocks.

use std::collections::BTreeMap;
use std::fmt;

/// A single sampled pen position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    /// Screen x coordinate in device units.
    pub x: f64,
    /// Screen y coordinate in device units (y grows downward).
    pub y: f64,
    /// Milliseconds since the ink's first point.
    pub t: f64,
}

impl Point {
    pub fn new(x: f64, y: f64, t: f64) -> Self {
        Self { x, y, t }
    }
}

/// A pen-down trace: the points captured between pen-down and pen-up.
#[derive(Debug, Clone, PartialEq)]
pub struct Stroke {
    pub points: Vec<Point>,
}

impl Stroke {
    pub fn new(points: Vec<Point>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// An ordered sequence of strokes as captured by a device, plus the
/// optional target label and free-form metadata (source dataset, sample
/// id). List order is the authoritative writing order; per-stroke clocks
/// may have been reset by the device, so inter-stroke timestamps are not
/// required to be monotone.
#[derive(Debug, Clone, PartialEq)]
pub struct RawInk {
    pub strokes: Vec<Stroke>,
    pub label: Option<String>,
    pub metadata: BTreeMap<String, String>,
}

impl RawInk {
    pub fn new(strokes: Vec<Stroke>) -> Self {
        Self {
            strokes,
            label: None,
            metadata: BTreeMap::new(),
        }
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = Some(label.into());
        self
    }

    /// Total point count across all strokes.
    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Stroke::len).sum()
    }

    /// Iterate over all points in writing order.
    pub fn points(&self) -> impl Iterator<Item = &Point> {
        self.strokes.iter().flat_map(|s| s.points.iter())
    }
}

/// Integer grid position of a quantized point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridPoint {
    pub x: i32,
    pub y: i32,
}

impl GridPoint {
    pub fn new(x: i32, y: i32) -> Self {
        Self { x, y }
    }
}

/// Resampled, scale-normalized, integer-quantized ink. Coordinates lie in
/// `[0, grid_size]`; per-stroke time spacing is the implicit fixed
/// `time_delta_ms`, so points no longer carry timestamps.
#[derive(Debug, Clone, PartialEq)]
pub struct ProcessedInk {
    pub strokes: Vec<Vec<GridPoint>>,
    pub grid_size: u32,
    pub time_delta_ms: f64,
}

impl ProcessedInk {
    pub fn point_count(&self) -> usize {
        self.strokes.iter().map(Vec::len).sum()
    }
}

/// A broken ink invariant, locating the offending stroke/point.
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// The ink has no strokes.
    EmptyInk,
    /// Stroke `stroke` has no points.
    EmptyStroke { stroke: usize },
    /// A coordinate or timestamp is NaN or infinite.
    NonFiniteValue {
        stroke: usize,
        point: usize,
        field: &'static str,
    },
    /// A timestamp is negative.
    NegativeTime { stroke: usize, point: usize },
    /// Timestamps decrease within a stroke at `point`.
    NonMonotonicTime { stroke: usize, point: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::EmptyInk => write!(f, "empty ink: no strokes"),
            Violation::EmptyStroke { stroke } => {
                write!(f, "stroke {stroke}: empty stroke")
            }
            Violation::NonFiniteValue {
                stroke,
                point,
                field,
            } => write!(f, "stroke {stroke} point {point}: non-finite {field}"),
            Violation::NegativeTime { stroke, point } => {
                write!(f, "stroke {stroke} point {point}: negative timestamp")
            }
            Violation::NonMonotonicTime { stroke, point } => {
                write!(f, "stroke {stroke} point {point}: non-monotonic time")
            }
        }
    }
}

/// Check every ink invariant and return one entry per broken rule. An
/// empty result means the ink is safe for every downstream stage.
///
/// Pure diagnostics: nothing is returned as `Err`, the violations are the
/// value.
pub fn validate(ink: &RawInk) -> Vec<Violation> {
    let mut violations = Vec::new();
    if ink.strokes.is_empty() {
        violations.push(Violation::EmptyInk);
        return violations;
    }
    for (si, stroke) in ink.strokes.iter().enumerate() {
        if stroke.points.is_empty() {
            violations.push(Violation::EmptyStroke { stroke: si });
            continue;
        }
        let mut prev_t = f64::NEG_INFINITY;
        for (pi, p) in stroke.points.iter().enumerate() {
            for (field, v) in [("x", p.x), ("y", p.y), ("t", p.t)] {
                if !v.is_finite() {
                    violations.push(Violation::NonFiniteValue {
                        stroke: si,
                        point: pi,
                        field,
                    });
                }
            }
            if p.t.is_finite() {
                if p.t < 0.0 {
                    violations.push(Violation::NegativeTime {
                        stroke: si,
                        point: pi,
                    });
                }
                if p.t < prev_t {
                    violations.push(Violation::NonMonotonicTime {
                        stroke: si,
                        point: pi,
                    });
                }
                prev_t = p.t;
            }
        }
    }
    violations
}
