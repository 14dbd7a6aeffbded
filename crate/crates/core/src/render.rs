//! Deterministic rasterization of ink into square RGB images.
//!
//! The ink is scale-normalized into a wide strip of aspect `line_count`
//! squares side by side, drawn there, then the strip is cut into
//! `line_count` horizontal segments stacked vertically into one
//! `image_size` x `image_size` image. Splitting into more lines makes the
//! writing larger for wide inks at the cost of cutting strokes at the
//! line boundaries.
//!
//! Color modes on a white background:
//! - `bw`: plain black strokes.
//! - `time`: red channel carries writing order, normalized within the ink
//!   to [0, 1]; green and blue stay 0.
//! - `time_distance`: red as above; green and blue carry |dx| and |dy| of
//!   the forward difference within a stroke, each normalized by its
//!   maximum over the ink. The last point of a stroke reuses its
//!   predecessor's green/blue.
//!
//! Rasterization is integer Bresenham with a square brush and no
//! anti-aliasing; where segments overlap, the later-drawn one wins. Each
//! segment takes the color of its starting point. Output is therefore
//! byte-exact across runs.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ink::RawInk;
use crate::preprocess::bounding_box;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColorMode {
    Bw,
    Time,
    TimeDistance,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderConfig {
    /// Side of the square output in pixels.
    pub image_size: u32,
    pub color_mode: ColorMode,
    /// Number of horizontal lines the ink is wrapped into.
    pub line_count: u32,
    pub stroke_width: u32,
    /// Blank border inside the drawing strip, in pixels.
    pub margin: u32,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            image_size: 224,
            color_mode: ColorMode::TimeDistance,
            line_count: 2,
            stroke_width: 2,
            margin: 2,
        }
    }
}

/// Upper bound on the output side length; keeps the drawing strip
/// (`image_size * line_count` pixels wide) comfortably inside u32.
pub const MAX_IMAGE_SIZE: u32 = 8192;

#[derive(Debug, Error, PartialEq)]
pub enum RenderError {
    #[error("image_size {size} must be a positive multiple of line_count {lines}")]
    SizeNotDivisible { size: u32, lines: u32 },
    #[error("image_size {0} exceeds the maximum of {MAX_IMAGE_SIZE}")]
    ImageTooLarge(u32),
    #[error("stroke_width must be at least 1")]
    ZeroStrokeWidth,
    #[error("margin {margin} leaves no drawable area on a {height}px line")]
    MarginTooLarge { margin: u32, height: u32 },
    #[error("failed to write {path}: {message}")]
    Io { path: PathBuf, message: String },
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), RenderError> {
        if self.image_size > MAX_IMAGE_SIZE {
            return Err(RenderError::ImageTooLarge(self.image_size));
        }
        if self.line_count == 0
            || self.image_size == 0
            || !self.image_size.is_multiple_of(self.line_count)
        {
            return Err(RenderError::SizeNotDivisible {
                size: self.image_size,
                lines: self.line_count,
            });
        }
        if self.stroke_width == 0 {
            return Err(RenderError::ZeroStrokeWidth);
        }
        let line_height = self.image_size / self.line_count;
        if 2 * self.margin >= line_height {
            return Err(RenderError::MarginTooLarge {
                margin: self.margin,
                height: line_height,
            });
        }
        Ok(())
    }
}

/// Square RGB raster plus the configuration that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedImage {
    pub size: u32,
    /// Row-major RGB, `size * size * 3` bytes.
    pub pixels: Vec<u8>,
    pub provenance: RenderConfig,
}

impl RenderedImage {
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = ((y * self.size + x) * 3) as usize;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    /// Lossless 8-bit RGB PNG encoding.
    pub fn to_png(&self) -> Vec<u8> {
        let mut out = Vec::new();
        {
            let mut encoder = png::Encoder::new(&mut out, self.size, self.size);
            encoder.set_color(png::ColorType::Rgb);
            encoder.set_depth(png::BitDepth::Eight);
            let mut writer = encoder.write_header().expect("png header");
            writer
                .write_image_data(&self.pixels)
                .expect("png image data");
        }
        out
    }

    pub fn save_png(&self, path: &Path) -> Result<(), RenderError> {
        let bytes = self.to_png();
        let mut file = fs::File::create(path).map_err(|e| RenderError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.write_all(&bytes).map_err(|e| RenderError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

/// Per-point RGB values under the configured color mode, before any
/// rasterization. Exposed for tests that check channel normalization
/// without fighting overdraw.
pub fn point_colors(ink: &RawInk, mode: ColorMode) -> Vec<Vec<[u8; 3]>> {
    if matches!(mode, ColorMode::Bw) {
        return ink
            .strokes
            .iter()
            .map(|s| vec![[0, 0, 0]; s.points.len()])
            .collect();
    }
    let t0 = ink
        .strokes
        .first()
        .and_then(|s| s.points.first())
        .map_or(0.0, |p| p.t);
    let mut t_span: f64 = 0.0;
    for p in ink.points() {
        t_span = t_span.max(p.t - t0);
    }

    // Forward differences within each stroke; the final point reuses the
    // previous segment's magnitudes.
    let mut dxs: Vec<Vec<f64>> = Vec::with_capacity(ink.strokes.len());
    let mut dys: Vec<Vec<f64>> = Vec::with_capacity(ink.strokes.len());
    let mut max_dx: f64 = 0.0;
    let mut max_dy: f64 = 0.0;
    for stroke in &ink.strokes {
        let pts = &stroke.points;
        let mut dx = vec![0.0; pts.len()];
        let mut dy = vec![0.0; pts.len()];
        for j in 0..pts.len().saturating_sub(1) {
            dx[j] = (pts[j + 1].x - pts[j].x).abs();
            dy[j] = (pts[j + 1].y - pts[j].y).abs();
            max_dx = max_dx.max(dx[j]);
            max_dy = max_dy.max(dy[j]);
        }
        if pts.len() > 1 {
            dx[pts.len() - 1] = dx[pts.len() - 2];
            dy[pts.len() - 1] = dy[pts.len() - 2];
        }
        dxs.push(dx);
        dys.push(dy);
    }
    let dx_den = if max_dx > 0.0 { max_dx } else { 1.0 };
    let dy_den = if max_dy > 0.0 { max_dy } else { 1.0 };

    ink.strokes
        .iter()
        .enumerate()
        .map(|(si, stroke)| {
            stroke
                .points
                .iter()
                .enumerate()
                .map(|(pi, p)| {
                    let r = if t_span > 0.0 {
                        (p.t - t0) / t_span
                    } else {
                        0.0
                    };
                    let (g, b) = match mode {
                        ColorMode::Time => (0.0, 0.0),
                        _ => (dxs[si][pi] / dx_den, dys[si][pi] / dy_den),
                    };
                    [to_channel(r), to_channel(g), to_channel(b)]
                })
                .collect()
        })
        .collect()
}

fn to_channel(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Rasterize a resampled ink. See the module docs for the layout and
/// color rules. A degenerate time span (single instant) renders with red
/// 0 everywhere rather than failing.
pub fn render(ink: &RawInk, cfg: &RenderConfig) -> Result<RenderedImage, RenderError> {
    cfg.validate()?;
    let w = cfg.image_size;
    let lines = cfg.line_count;
    let line_height = w / lines;
    let strip_w = w * lines;
    let strip_h = line_height;
    let margin = cfg.margin;

    let usable_w = f64::from(strip_w - 2 * margin - 1);
    let usable_h = f64::from(strip_h - 2 * margin - 1);
    let (min_x, min_y, box_w, box_h) = bounding_box(ink);
    let scale = match (box_w > 0.0, box_h > 0.0) {
        (true, true) => (usable_w / box_w).min(usable_h / box_h),
        (true, false) => usable_w / box_w,
        (false, true) => usable_h / box_h,
        (false, false) => 0.0,
    };
    let map = |x: f64, y: f64| -> (i64, i64) {
        let px = f64::from(margin) + (x - min_x) * scale;
        let py = f64::from(margin) + (y - min_y) * scale;
        (px.round() as i64, py.round() as i64)
    };

    let colors = point_colors(ink, cfg.color_mode);
    let mut strip = Strip::new(strip_w, strip_h);
    for (si, stroke) in ink.strokes.iter().enumerate() {
        let pts = &stroke.points;
        if pts.len() == 1 {
            let (px, py) = map(pts[0].x, pts[0].y);
            strip.stamp(px, py, cfg.stroke_width, colors[si][0]);
            continue;
        }
        for j in 0..pts.len() - 1 {
            let (x0, y0) = map(pts[j].x, pts[j].y);
            let (x1, y1) = map(pts[j + 1].x, pts[j + 1].y);
            strip.line(x0, y0, x1, y1, cfg.stroke_width, colors[si][j]);
        }
        // Cap the stroke with the final point's own color; segments only
        // carry their start color, so without this the brightest values
        // would never reach the canvas.
        let last = pts.len() - 1;
        let (px, py) = map(pts[last].x, pts[last].y);
        strip.stamp(px, py, cfg.stroke_width, colors[si][last]);
    }

    // Cut the strip into `lines` segments and stack them.
    let mut pixels = vec![255u8; (w * w * 3) as usize];
    for line in 0..lines {
        for y in 0..strip_h {
            for x in 0..w {
                let src = ((y * strip_w + line * w + x) * 3) as usize;
                let dst = (((line * strip_h + y) * w + x) * 3) as usize;
                pixels[dst..dst + 3].copy_from_slice(&strip.pixels[src..src + 3]);
            }
        }
    }
    Ok(RenderedImage {
        size: w,
        pixels,
        provenance: *cfg,
    })
}

struct Strip {
    w: i64,
    h: i64,
    pixels: Vec<u8>,
}

impl Strip {
    fn new(w: u32, h: u32) -> Self {
        Self {
            w: i64::from(w),
            h: i64::from(h),
            pixels: vec![255u8; (w * h * 3) as usize],
        }
    }

    fn set(&mut self, x: i64, y: i64, color: [u8; 3]) {
        if x < 0 || y < 0 || x >= self.w || y >= self.h {
            return;
        }
        let i = ((y * self.w + x) * 3) as usize;
        self.pixels[i..i + 3].copy_from_slice(&color);
    }

    /// Square brush centered on the pixel.
    fn stamp(&mut self, x: i64, y: i64, width: u32, color: [u8; 3]) {
        let wi = i64::from(width);
        let lo = -(wi - 1) / 2;
        let hi = wi / 2;
        for oy in lo..=hi {
            for ox in lo..=hi {
                self.set(x + ox, y + oy, color);
            }
        }
    }

    /// Bresenham line, both endpoints included.
    fn line(&mut self, x0: i64, y0: i64, x1: i64, y1: i64, width: u32, color: [u8; 3]) {
        let dx = (x1 - x0).abs();
        let dy = -(y1 - y0).abs();
        let sx = if x0 < x1 { 1 } else { -1 };
        let sy = if y0 < y1 { 1 } else { -1 };
        let mut err = dx + dy;
        let (mut x, mut y) = (x0, y0);
        loop {
            self.stamp(x, y, width, color);
            if x == x1 && y == y1 {
                break;
            }
            let e2 = 2 * err;
            if e2 >= dy {
                err += dy;
                x += sx;
            }
            if e2 <= dx {
                err += dx;
                y += sy;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub path: String,
}

#[derive(Debug, Clone, Default)]
pub struct BatchResult {
    pub entries: Vec<ManifestEntry>,
    /// (ink id, error message) for inks that failed to render or save.
    pub failures: Vec<(String, String)>,
}

/// Deterministic id for the `index`-th ink of a corpus: the metadata "id"
/// when present, a zero-padded index otherwise.
pub fn ink_id(ink: &RawInk, index: usize) -> String {
    ink.metadata
        .get("id")
        .cloned()
        .unwrap_or_else(|| format!("ink_{index:06}"))
}

/// Render every ink to `<out_dir>/<id>.png` and write a `manifest.jsonl`
/// of `{"id", "path"}` lines in corpus order. Failures are collected per
/// ink and do not abort the batch.
pub fn render_batch(
    corpus: &[RawInk],
    cfg: &RenderConfig,
    out_dir: &Path,
) -> Result<BatchResult, RenderError> {
    cfg.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| RenderError::Io {
        path: out_dir.to_path_buf(),
        message: e.to_string(),
    })?;
    let mut result = BatchResult::default();
    let mut seen: BTreeMap<String, usize> = BTreeMap::new();
    for (i, ink) in corpus.iter().enumerate() {
        let mut id = ink_id(ink, i);
        let dup = seen.entry(id.clone()).or_insert(0);
        if *dup > 0 {
            id = format!("{id}_{dup}");
        }
        *dup += 1;
        let file = format!("{id}.png");
        let path = out_dir.join(&file);
        match render(ink, cfg).and_then(|img| img.save_png(&path)) {
            Ok(()) => result.entries.push(ManifestEntry { id, path: file }),
            Err(e) => result.failures.push((id, e.to_string())),
        }
    }
    let manifest_path = out_dir.join("manifest.jsonl");
    let mut text = String::new();
    for entry in &result.entries {
        text.push_str(&serde_json::to_string(entry).expect("manifest entry serializes"));
        text.push('\n');
    }
    fs::write(&manifest_path, text).map_err(|e| RenderError::Io {
        path: manifest_path,
        message: e.to_string(),
    })?;
    Ok(result)
}
