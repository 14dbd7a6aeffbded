//! inkrep: digital ink (online handwriting) as VLM-ready representations.
//!
//! The pipeline turns raw (x, y, t) stroke captures into two parallel
//! representations: a discretized token sequence (absolute coordinates,
//! relative offsets, or a learned polar-histogram codebook) and a square
//! RGB raster with writing order encoded in the color channels. Around
//! that core sit dataset ingestion (JSONL / InkML), target-label
//! encoding, character-error-rate evaluation, corpus mixing, and a
//! training-record exporter.

pub mod dataset;
pub mod eval;
pub mod ingest;
pub mod ink;
pub mod preprocess;
pub mod render;
pub mod target;
pub mod tokenizer;

pub use ink::{Point, ProcessedInk, RawInk, Stroke};
pub use preprocess::PreprocessConfig;
pub use render::{RenderConfig, RenderedImage};
pub use target::TargetConfig;
pub use tokenizer::{TokenSequence, TokenizerConfig};
