//! Corpus mixing and training-record export.
//!
//! Mixing draws each emitted record's source from the configured weights,
//! and walks every source in a seeded shuffled order so no sample repeats
//! before its source has been exhausted once. Export runs the full
//! representation pipeline per ink and writes a JSONL manifest next to
//! the rendered images; everything is deterministic under a fixed seed
//! and config.

use std::fs;
use std::path::{Path, PathBuf};

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eval::EvalPair;
use crate::ingest::{read_jsonl_all, IngestError};
use crate::ink::RawInk;
use crate::preprocess::{preprocess, resample_time, PreprocessConfig};
use crate::render::{render, RenderConfig, RenderError};
use crate::target::{encode_target, TargetConfig};
use crate::tokenizer::{detokenize, tokenize, TokenSequence, TokenizeError, TokenizerConfig};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("source weights must sum to 1, got {0}")]
    WeightSum(f64),
    #[error("source {0:?} has a negative weight")]
    NegativeWeight(String),
    #[error("source {0:?} has positive weight but no samples")]
    EmptySource(String),
    #[error("no sources configured")]
    NoSources,
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Render(#[from] RenderError),
    #[error(transparent)]
    Tokenize(#[from] TokenizeError),
    #[error("{path}: {message}")]
    Io { path: PathBuf, message: String },
}

fn io_err(path: &Path, e: std::io::Error) -> DatasetError {
    DatasetError::Io {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixSource {
    pub name: String,
    pub path: PathBuf,
    pub weight: f64,
}

/// A weighted mixture of corpora plus the seed that fixes the stream.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MixSpec {
    pub sources: Vec<MixSource>,
    #[serde(default)]
    pub seed: u64,
}

impl MixSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.sources.is_empty() {
            return Err(DatasetError::NoSources);
        }
        let mut sum = 0.0;
        for s in &self.sources {
            if s.weight < 0.0 {
                return Err(DatasetError::NegativeWeight(s.name.clone()));
            }
            sum += s.weight;
        }
        if (sum - 1.0).abs() > 1e-9 {
            return Err(DatasetError::WeightSum(sum));
        }
        Ok(())
    }
}

/// Seeded shuffled cycling over one source.
struct SourceCycle {
    inks: Vec<RawInk>,
    order: Vec<usize>,
    cursor: usize,
    rng: ChaCha8Rng,
}

impl SourceCycle {
    fn new(inks: Vec<RawInk>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut order: Vec<usize> = (0..inks.len()).collect();
        order.shuffle(&mut rng);
        Self {
            inks,
            order,
            cursor: 0,
            rng,
        }
    }

    fn next(&mut self) -> RawInk {
        if self.cursor == self.order.len() {
            self.order.shuffle(&mut self.rng);
            self.cursor = 0;
        }
        let ink = self.inks[self.order[self.cursor]].clone();
        self.cursor += 1;
        ink
    }
}

/// Draw `n` records from the mixture. Each record's source is sampled
/// with probability equal to its weight; within a source, samples cycle
/// in seeded shuffled order. The same spec and seed always produce the
/// identical stream.
pub fn mix(spec: &MixSpec, n: usize) -> Result<Vec<(String, RawInk)>, DatasetError> {
    spec.validate()?;
    let mut cycles = Vec::with_capacity(spec.sources.len());
    for (i, source) in spec.sources.iter().enumerate() {
        let inks = read_jsonl_all(&source.path)?;
        if inks.is_empty() && source.weight > 0.0 {
            return Err(DatasetError::EmptySource(source.name.clone()));
        }
        cycles.push(SourceCycle::new(
            inks,
            spec.seed
                .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(i as u64 + 1)),
        ));
    }

    let weights: Vec<f64> = spec.sources.iter().map(|s| s.weight).collect();
    let dist = WeightedIndex::new(&weights).map_err(|_| DatasetError::WeightSum(0.0))?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let source_ix = dist.sample(&mut rng);
        let ink = cycles[source_ix].next();
        out.push((spec.sources[source_ix].name.clone(), ink));
    }
    Ok(out)
}

/// One manifest line of an exported dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub id: String,
    pub source: String,
    pub input_text: String,
    pub image_path: String,
    pub target: String,
    pub over_budget: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExportStats {
    pub records: usize,
    pub failed: usize,
    pub over_budget: usize,
    pub median_token_count: f64,
    pub per_source: std::collections::BTreeMap<String, usize>,
}

#[derive(Debug)]
pub struct ExportResult {
    pub records: Vec<TrainingRecord>,
    pub stats: ExportStats,
    pub failures: Vec<(String, String)>,
}

pub struct ExportConfig {
    pub preprocess: PreprocessConfig,
    pub tokenizer: TokenizerConfig,
    pub render: RenderConfig,
    pub target: TargetConfig,
    /// Records whose text exceeds this many tokens are flagged, not
    /// dropped; trainers decide what to do with them.
    pub token_budget: usize,
}

impl Default for ExportConfig {
    fn default() -> Self {
        Self {
            preprocess: PreprocessConfig::default(),
            tokenizer: TokenizerConfig::default(),
            render: RenderConfig::default(),
            target: TargetConfig::default(),
            token_budget: 1024,
        }
    }
}

/// Export a corpus as training records: per ink, the text token sequence,
/// a rendered PNG under `<out_dir>/images/`, and the encoded target,
/// written in input order to `<out_dir>/manifest.jsonl` with summary
/// numbers in `<out_dir>/stats.json`. Per-record failures are skipped and
/// counted.
pub fn export<F>(
    corpus: &[(String, RawInk)],
    cfg: &ExportConfig,
    token_counter: F,
    out_dir: &Path,
) -> Result<ExportResult, DatasetError>
where
    F: Fn(&str) -> usize,
{
    cfg.render.validate()?;
    cfg.tokenizer.validate()?;
    let images_dir = out_dir.join("images");
    fs::create_dir_all(&images_dir).map_err(|e| io_err(&images_dir, e))?;

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut token_counts = Vec::new();
    let mut per_source = std::collections::BTreeMap::new();
    let mut over_budget_count = 0usize;

    for (index, (source, ink)) in corpus.iter().enumerate() {
        let id = format!("r{index:06}");
        match export_one(ink, cfg, &images_dir, &id) {
            Ok((input_text, image_file)) => {
                let tokens = token_counter(&input_text);
                let over_budget = tokens > cfg.token_budget;
                over_budget_count += usize::from(over_budget);
                token_counts.push(tokens as f64);
                *per_source.entry(source.clone()).or_insert(0) += 1;
                records.push(TrainingRecord {
                    id,
                    source: source.clone(),
                    input_text,
                    image_path: format!("images/{image_file}"),
                    target: ink
                        .label
                        .as_deref()
                        .map(|l| encode_target(l, &cfg.target))
                        .unwrap_or_default(),
                    over_budget,
                });
            }
            Err(e) => failures.push((id, e.to_string())),
        }
    }

    let manifest_path = out_dir.join("manifest.jsonl");
    let mut manifest = String::new();
    for record in &records {
        manifest.push_str(&serde_json::to_string(record).expect("record serializes"));
        manifest.push('\n');
    }
    fs::write(&manifest_path, manifest).map_err(|e| io_err(&manifest_path, e))?;

    let stats = ExportStats {
        records: records.len(),
        failed: failures.len(),
        over_budget: over_budget_count,
        median_token_count: median(token_counts),
        per_source,
    };
    let stats_path = out_dir.join("stats.json");
    fs::write(
        &stats_path,
        serde_json::to_string_pretty(&stats).expect("stats serialize"),
    )
    .map_err(|e| io_err(&stats_path, e))?;

    Ok(ExportResult {
        records,
        stats,
        failures,
    })
}

fn export_one(
    ink: &RawInk,
    cfg: &ExportConfig,
    images_dir: &Path,
    id: &str,
) -> Result<(String, String), DatasetError> {
    let processed = preprocess(ink, &cfg.preprocess);
    let text_cfg = TokenizerConfig {
        emission: crate::tokenizer::Emission::Text,
        ..cfg.tokenizer.clone()
    };
    let seq = tokenize(&processed, &text_cfg)?;
    let input_text = match seq {
        TokenSequence::Text(t) => t,
        TokenSequence::ExtendedIndex(_) => unreachable!("text emission requested"),
    };

    let resampled = resample_time(ink, cfg.preprocess.time_delta_ms);
    let image = render(&resampled, &cfg.render)?;
    let image_file = format!("{id}.png");
    image.save_png(&images_dir.join(&image_file))?;
    Ok((input_text, image_file))
}

fn median(mut values: Vec<f64>) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    }
}

/// Read an evaluation JSONL of {"reference", "hypothesis"} lines.
pub fn read_eval_pairs(path: &Path) -> Result<Vec<EvalPair>, DatasetError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut pairs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let pair: EvalPair = serde_json::from_str(line).map_err(|e| DatasetError::Io {
            path: path.to_path_buf(),
            message: format!("line {}: {e}", i + 1),
        })?;
        pairs.push(pair);
    }
    Ok(pairs)
}

/// Verify that every manifest record's text re-parses under the
/// tokenizer; used by tests and the CLI's self-checks.
pub fn verify_record(
    record: &TrainingRecord,
    tok: &TokenizerConfig,
    pp: &PreprocessConfig,
) -> Result<(), TokenizeError> {
    let text_cfg = TokenizerConfig {
        emission: crate::tokenizer::Emission::Text,
        ..tok.clone()
    };
    detokenize(
        &TokenSequence::Text(record.input_text.clone()),
        &text_cfg,
        pp,
    )
    .map(|_| ())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::write_jsonl;
    use crate::ink::{Point, Stroke};
    use crate::tokenizer::stats::default_token_counter;
    use rand::Rng;

    fn make_ink(seed_x: f64, label: &str) -> RawInk {
        let points = (0..30)
            .map(|i| {
                Point::new(
                    seed_x + f64::from(i) * 7.3,
                    (f64::from(i) * 0.6).sin() * 90.0,
                    f64::from(i) * 10.0,
                )
            })
            .collect();
        RawInk::new(vec![Stroke::new(points)]).with_label(label)
    }

    fn write_source(dir: &Path, name: &str, count: usize) -> PathBuf {
        let path = dir.join(format!("{name}.jsonl"));
        let inks: Vec<RawInk> = (0..count)
            .map(|i| make_ink(i as f64 * 13.0, &format!("{name}_{i}")))
            .collect();
        write_jsonl(inks.iter(), &path).unwrap();
        path
    }

    fn spec(dir: &Path, weights: (f64, f64, f64), seed: u64) -> MixSpec {
        MixSpec {
            sources: vec![
                MixSource {
                    name: "alpha".into(),
                    path: write_source(dir, "alpha", 40),
                    weight: weights.0,
                },
                MixSource {
                    name: "beta".into(),
                    path: write_source(dir, "beta", 25),
                    weight: weights.1,
                },
                MixSource {
                    name: "gamma".into(),
                    path: write_source(dir, "gamma", 25),
                    weight: weights.2,
                },
            ],
            seed,
        }
    }

    #[test]
    fn weights_must_sum_to_one() {
        let dir = tempfile::tempdir().unwrap();
        let bad = spec(dir.path(), (0.8, 0.1, 0.2), 1);
        assert!(matches!(bad.validate(), Err(DatasetError::WeightSum(_))));
    }

    #[test]
    fn proportions_track_weights() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), (0.8, 0.1, 0.1), 42);
        let stream = mix(&s, 10_000).unwrap();
        let count = |name: &str| stream.iter().filter(|(s, _)| s == name).count() as f64;
        assert!(
            (count("alpha") - 8000.0).abs() <= 200.0,
            "{}",
            count("alpha")
        );
        assert!((count("beta") - 1000.0).abs() <= 200.0, "{}", count("beta"));
        assert!(
            (count("gamma") - 1000.0).abs() <= 200.0,
            "{}",
            count("gamma")
        );
    }

    #[test]
    fn identical_seed_means_identical_stream() {
        let dir = tempfile::tempdir().unwrap();
        let s = spec(dir.path(), (0.8, 0.1, 0.1), 7);
        let a = mix(&s, 500).unwrap();
        let b = mix(&s, 500).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn single_source_is_a_seeded_shuffle() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_source(dir.path(), "only", 20);
        let s = MixSpec {
            sources: vec![MixSource {
                name: "only".into(),
                path,
                weight: 1.0,
            }],
            seed: 3,
        };
        let stream = mix(&s, 20).unwrap();
        let mut labels: Vec<String> = stream
            .iter()
            .map(|(_, ink)| ink.label.clone().unwrap())
            .collect();
        let in_order: Vec<String> = (0..20).map(|i| format!("only_{i}")).collect();
        assert_ne!(labels, in_order, "stream should be shuffled");
        labels.sort();
        let mut sorted = in_order.clone();
        sorted.sort();
        assert_eq!(labels, sorted, "each sample appears exactly once");
    }

    #[test]
    fn no_repeats_before_source_exhaustion() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_source(dir.path(), "cycle", 10);
        let s = MixSpec {
            sources: vec![MixSource {
                name: "cycle".into(),
                path,
                weight: 1.0,
            }],
            seed: 5,
        };
        let stream = mix(&s, 25).unwrap();
        for epoch in 0..2 {
            let mut seen: Vec<String> = stream[epoch * 10..(epoch + 1) * 10]
                .iter()
                .map(|(_, ink)| ink.label.clone().unwrap())
                .collect();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), 10, "epoch {epoch} repeated a sample");
        }
    }

    #[test]
    fn empty_source_with_weight_errors() {
        let dir = tempfile::tempdir().unwrap();
        let empty = dir.path().join("none.jsonl");
        fs::write(&empty, "").unwrap();
        let s = MixSpec {
            sources: vec![MixSource {
                name: "none".into(),
                path: empty,
                weight: 1.0,
            }],
            seed: 1,
        };
        assert!(matches!(mix(&s, 5), Err(DatasetError::EmptySource(_))));
    }

    #[test]
    fn export_writes_manifest_images_and_stats() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = vec![("test".to_string(), make_ink(0.0, "hi"))];
        let cfg = ExportConfig::default();
        let result = export(&corpus, &cfg, default_token_counter, dir.path()).unwrap();
        assert_eq!(result.records.len(), 1);
        assert_eq!(result.stats.records, 1);
        assert_eq!(result.stats.failed, 0);
        let record = &result.records[0];
        assert!(dir.path().join(&record.image_path).exists());
        assert_eq!(record.target, "h i");
        assert!(!record.over_budget);
        assert!(dir.path().join("manifest.jsonl").exists());
        assert!(dir.path().join("stats.json").exists());
        verify_record(record, &cfg.tokenizer, &cfg.preprocess).unwrap();
    }

    #[test]
    fn export_is_deterministic() {
        let dir_a = tempfile::tempdir().unwrap();
        let dir_b = tempfile::tempdir().unwrap();
        let corpus: Vec<(String, RawInk)> = (0..5)
            .map(|i| ("d".to_string(), make_ink(f64::from(i) * 31.0, "z")))
            .collect();
        let cfg = ExportConfig::default();
        export(&corpus, &cfg, default_token_counter, dir_a.path()).unwrap();
        export(&corpus, &cfg, default_token_counter, dir_b.path()).unwrap();
        let read = |dir: &Path, rel: &str| fs::read(dir.join(rel)).unwrap();
        assert_eq!(
            read(dir_a.path(), "manifest.jsonl"),
            read(dir_b.path(), "manifest.jsonl")
        );
        for i in 0..5 {
            let rel = format!("images/r{i:06}.png");
            assert_eq!(read(dir_a.path(), &rel), read(dir_b.path(), &rel));
        }
    }

    #[test]
    fn over_budget_records_are_flagged_not_dropped() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = vec![("test".to_string(), make_ink(0.0, "long"))];
        let cfg = ExportConfig {
            token_budget: 3,
            ..ExportConfig::default()
        };
        let result = export(&corpus, &cfg, default_token_counter, dir.path()).unwrap();
        assert_eq!(result.records.len(), 1);
        assert!(result.records[0].over_budget);
        assert_eq!(result.stats.over_budget, 1);
    }

    #[test]
    fn exported_text_reparses_for_random_corpora() {
        let dir = tempfile::tempdir().unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(81);
        let corpus: Vec<(String, RawInk)> = (0..20)
            .map(|_| {
                (
                    "rand".to_string(),
                    make_ink(rng.random_range(0.0..500.0), "x"),
                )
            })
            .collect();
        let cfg = ExportConfig::default();
        let result = export(&corpus, &cfg, default_token_counter, dir.path()).unwrap();
        for record in &result.records {
            verify_record(record, &cfg.tokenizer, &cfg.preprocess).unwrap();
        }
    }
}
