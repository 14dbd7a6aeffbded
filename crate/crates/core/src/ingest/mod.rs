//! Reading and writing ink corpora.
//!
//! The canonical on-disk format is JSON lines, one record per line with
//! the fields `strokes` (list of strokes, each a list of `[x, y, t]`
//! triples), `label`, and `metadata`. Numbers serialize as shortest
//! round-trippable decimals, so write-then-read is bit-exact. A reader
//! for the InkML subset used by public handwriting datasets is in
//! [`inkml`].

pub mod inkml;

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ink::{Point, RawInk, Stroke};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
    #[error("line {line}: invalid JSON: {message}")]
    Json { line: usize, message: String },
    #[error("line {line}: {message}")]
    Schema { line: usize, message: String },
    #[error("{path}: XML error at byte {offset}: {message}")]
    Xml {
        path: PathBuf,
        offset: u64,
        message: String,
    },
    #[error("{path}: trace {trace}: {message}")]
    Trace {
        path: PathBuf,
        trace: usize,
        message: String,
    },
    #[error("{path}: unsupported InkML element <{element}> at byte {offset}")]
    UnsupportedInkml {
        path: PathBuf,
        element: String,
        offset: u64,
    },
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> IngestError {
    IngestError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// One JSONL record. Field names are part of the wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CanonicalRecord {
    pub strokes: Vec<Vec<[f64; 3]>>,
    #[serde(default)]
    pub label: Option<String>,
    #[serde(default)]
    pub metadata: BTreeMap<String, String>,
}

impl CanonicalRecord {
    pub fn from_ink(ink: &RawInk) -> Self {
        Self {
            strokes: ink
                .strokes
                .iter()
                .map(|s| s.points.iter().map(|p| [p.x, p.y, p.t]).collect())
                .collect(),
            label: ink.label.clone(),
            metadata: ink.metadata.clone(),
        }
    }

    /// Convert to a [`RawInk`], rebasing timestamps so the ink's first
    /// point is at t = 0. `line` is used for error positions.
    pub fn into_ink(self, line: usize) -> Result<RawInk, IngestError> {
        if self.strokes.is_empty() {
            return Err(IngestError::Schema {
                line,
                message: "empty ink".to_string(),
            });
        }
        for (i, stroke) in self.strokes.iter().enumerate() {
            if stroke.is_empty() {
                return Err(IngestError::Schema {
                    line,
                    message: format!("stroke {i} is empty"),
                });
            }
        }
        let t0 = self.strokes[0][0][2];
        let strokes = self
            .strokes
            .into_iter()
            .map(|pts| {
                Stroke::new(
                    pts.into_iter()
                        .map(|[x, y, t]| Point::new(x, y, t - t0))
                        .collect(),
                )
            })
            .collect();
        Ok(RawInk {
            strokes,
            label: self.label,
            metadata: self.metadata,
        })
    }
}

/// Streaming JSONL reader; memory use is bounded by the largest record.
pub struct JsonlReader {
    lines: std::io::Lines<BufReader<fs::File>>,
    line_no: usize,
}

impl JsonlReader {
    pub fn open(path: &Path) -> Result<Self, IngestError> {
        let file = fs::File::open(path).map_err(|e| io_err(path, e))?;
        Ok(Self {
            lines: BufReader::new(file).lines(),
            line_no: 0,
        })
    }
}

impl Iterator for JsonlReader {
    type Item = Result<RawInk, IngestError>;

    fn next(&mut self) -> Option<Self::Item> {
        let line = self.lines.next()?;
        self.line_no += 1;
        let line_no = self.line_no;
        Some(
            line.map_err(|e| IngestError::Json {
                line: line_no,
                message: e.to_string(),
            })
            .and_then(|text| {
                let record: CanonicalRecord =
                    serde_json::from_str(&text).map_err(|e| IngestError::Json {
                        line: line_no,
                        message: e.to_string(),
                    })?;
                record.into_ink(line_no)
            }),
        )
    }
}

/// Open a canonical JSONL corpus as a stream of inks in file order.
pub fn read_jsonl(path: &Path) -> Result<JsonlReader, IngestError> {
    JsonlReader::open(path)
}

/// Read a whole corpus into memory, failing on the first bad record.
pub fn read_jsonl_all(path: &Path) -> Result<Vec<RawInk>, IngestError> {
    read_jsonl(path)?.collect()
}

/// Write inks as canonical JSONL; returns the record count.
pub fn write_jsonl<'a, I>(inks: I, path: &Path) -> Result<usize, IngestError>
where
    I: IntoIterator<Item = &'a RawInk>,
{
    let file = fs::File::create(path).map_err(|e| io_err(path, e))?;
    let mut out = BufWriter::new(file);
    let mut count = 0;
    for ink in inks {
        let record = CanonicalRecord::from_ink(ink);
        let json = serde_json::to_string(&record).map_err(|e| IngestError::Io {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        out.write_all(json.as_bytes())
            .map_err(|e| io_err(path, e))?;
        out.write_all(b"\n").map_err(|e| io_err(path, e))?;
        count += 1;
    }
    out.flush().map_err(|e| io_err(path, e))?;
    Ok(count)
}
