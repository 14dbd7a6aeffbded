//! Command-line pipeline for converting digital ink corpora into
//! token-sequence and image representations, plus evaluation helpers.

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use config::PipelineFile;
use inkrep::dataset::{self, ExportConfig, MixSpec};
use inkrep::eval::corpus_cer;
use inkrep::ingest::inkml::{read_inkml, read_inkml_dir, InkmlOptions};
use inkrep::ingest::{read_jsonl, read_jsonl_all, write_jsonl};
use inkrep::ink::RawInk;
use inkrep::preprocess::resample_time;
use inkrep::render::{render_batch, ColorMode};
use inkrep::tokenizer::histogram::{
    ink_offsets, tokenize_histogram, train_histogram_codebook, HistogramCodebook, HistogramParams,
};
use inkrep::tokenizer::{
    default_token_counter, sequence_stats, tokenize, TokenSequence, TokenizerMode,
};

#[derive(Parser)]
#[command(
    name = "inkrep",
    version,
    about = "Digital ink representation pipeline"
)]
struct Cli {
    /// Pipeline configuration file (TOML).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed overriding the configured one for randomized operations.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Exit 0 even when some records failed.
    #[arg(long, global = true)]
    allow_partial: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum InputFormat {
    Jsonl,
    Inkml,
}

#[derive(Subcommand)]
enum Command {
    /// Parse a dataset into the canonical JSONL format.
    Ingest {
        /// Input file, or a directory of InkML files.
        input: PathBuf,
        #[arg(long, value_enum)]
        format: InputFormat,
        #[arg(long)]
        out: PathBuf,
        /// Annotation `type` carrying the label in InkML input.
        #[arg(long)]
        annotation_channel: Option<String>,
    },
    /// Print per-stage sequence length statistics for a corpus.
    Stats {
        input: PathBuf,
        /// Also write the table as JSON ("-" for stdout).
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// Tokenize a corpus; one JSON line per ink.
    Tokenize {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Trained codebook (required in histogram mode).
        #[arg(long)]
        codebook: Option<PathBuf>,
        #[arg(long, value_parser = parse_mode)]
        mode: Option<TokenizerMode>,
    },
    /// Render a corpus to PNG images plus a manifest.
    Render {
        input: PathBuf,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_parser = parse_color_mode)]
        color_mode: Option<ColorMode>,
        #[arg(long)]
        lines: Option<u32>,
    },
    /// Export training records: token text, rendered image, target.
    Export {
        /// Single-corpus input; alternative to --mix.
        input: Option<PathBuf>,
        /// Mixture specification (TOML with seed and weighted sources).
        #[arg(long)]
        mix: Option<PathBuf>,
        /// Number of records to draw from the mixture.
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        token_budget: Option<usize>,
    },
    /// Score predictions: aggregate and per-sample character error rate.
    Eval {
        /// JSONL of {"reference", "hypothesis"} pairs.
        input: PathBuf,
        /// Write the full report as JSON.
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Train a histogram codebook from a corpus's offsets.
    TrainCodebook {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        angle_buckets: Option<u32>,
        #[arg(long)]
        cell_fraction: Option<f64>,
        #[arg(long)]
        max_vocab: Option<u32>,
    },
}

fn parse_mode(s: &str) -> Result<TokenizerMode, String> {
    match s {
        "absolute" => Ok(TokenizerMode::Absolute),
        "relative" => Ok(TokenizerMode::Relative),
        "histogram" => Ok(TokenizerMode::Histogram),
        _ => Err(format!("unknown mode {s:?} (absolute|relative|histogram)")),
    }
}

fn parse_color_mode(s: &str) -> Result<ColorMode, String> {
    match s {
        "bw" => Ok(ColorMode::Bw),
        "time" => Ok(ColorMode::Time),
        "time_distance" => Ok(ColorMode::TimeDistance),
        _ => Err(format!("unknown color mode {s:?} (bw|time|time_distance)")),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(failures) => {
            if failures == 0 {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

/// Returns the number of record-level failures that should fail the run.
fn run(cli: Cli) -> Result<usize> {
    let file = PipelineFile::load(cli.config.as_ref())?;
    let allow_partial = cli.allow_partial;
    let failures = match cli.command {
        Command::Ingest {
            input,
            format,
            out,
            annotation_channel,
        } => cmd_ingest(&input, format, &out, annotation_channel)?,
        Command::Stats { input, json } => cmd_stats(&file, &input, json.as_deref())?,
        Command::Tokenize {
            input,
            out,
            codebook,
            mode,
        } => cmd_tokenize(&file, &input, &out, codebook.as_deref(), mode)?,
        Command::Render {
            input,
            out,
            color_mode,
            lines,
        } => cmd_render(&file, &input, &out, color_mode, lines)?,
        Command::Export {
            input,
            mix,
            count,
            out,
            token_budget,
        } => cmd_export(
            &file,
            cli.seed,
            input.as_deref(),
            mix.as_deref(),
            count,
            &out,
            token_budget,
        )?,
        Command::Eval { input, report } => cmd_eval(&file, &input, report.as_deref())?,
        Command::TrainCodebook {
            input,
            out,
            angle_buckets,
            cell_fraction,
            max_vocab,
        } => cmd_train_codebook(&file, &input, &out, angle_buckets, cell_fraction, max_vocab)?,
    };
    Ok(if allow_partial { 0 } else { failures })
}

fn cmd_ingest(
    input: &Path,
    format: InputFormat,
    out: &Path,
    annotation_channel: Option<String>,
) -> Result<usize> {
    let mut inks: Vec<RawInk> = Vec::new();
    let mut failures = 0usize;
    match format {
        InputFormat::Jsonl => {
            for record in read_jsonl(input)? {
                match record {
                    Ok(ink) => inks.push(ink),
                    Err(e) => {
                        eprintln!("{}: {e}", input.display());
                        failures += 1;
                    }
                }
            }
        }
        InputFormat::Inkml => {
            let options = InkmlOptions {
                annotation_type: annotation_channel,
            };
            if input.is_dir() {
                for (path, result) in read_inkml_dir(input, &options)? {
                    match result {
                        Ok(ink) => inks.push(ink),
                        Err(e) => {
                            eprintln!("{}: {e}", path.display());
                            failures += 1;
                        }
                    }
                }
            } else {
                match read_inkml(input, &options) {
                    Ok(ink) => inks.push(ink),
                    Err(e) => {
                        eprintln!("{}: {e}", input.display());
                        failures += 1;
                    }
                }
            }
        }
    }
    let count = write_jsonl(inks.iter(), out)?;
    println!(
        "ingested {count} inks to {} ({failures} failed)",
        out.display()
    );
    Ok(failures)
}

fn cmd_stats(file: &PipelineFile, input: &Path, json: Option<&Path>) -> Result<usize> {
    let corpus = read_jsonl_all(input)?;
    let stats = sequence_stats(
        &corpus,
        &file.preprocess()?,
        &file.tokenizer()?,
        default_token_counter,
    )?;
    print!("{}", stats.format_table());
    if let Some(path) = json {
        let body = serde_json::to_string_pretty(&stats)?;
        if path.as_os_str() == "-" {
            println!("{body}");
        } else {
            fs::write(path, body).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(0)
}

fn cmd_tokenize(
    file: &PipelineFile,
    input: &Path,
    out: &Path,
    codebook: Option<&Path>,
    mode: Option<TokenizerMode>,
) -> Result<usize> {
    let pp = file.preprocess()?;
    let mut tok = file.tokenizer()?;
    if let Some(mode) = mode {
        tok.mode = mode;
    }
    let corpus = read_jsonl_all(input)?;

    let codebook = match (tok.mode, codebook) {
        (TokenizerMode::Histogram, Some(path)) => {
            let text =
                fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            Some(HistogramCodebook::from_json(&text)?)
        }
        (TokenizerMode::Histogram, None) => {
            bail!("histogram mode requires --codebook (see train-codebook)")
        }
        _ => None,
    };

    let mut lines = String::new();
    for (i, ink) in corpus.iter().enumerate() {
        let id = inkrep::render::ink_id(ink, i);
        let seq = match &codebook {
            Some(cb) => {
                let resampled = resample_time(ink, pp.time_delta_ms);
                tokenize_histogram(&resampled, cb, &tok)
            }
            None => {
                let processed = inkrep::preprocess::preprocess(ink, &pp);
                tokenize(&processed, &tok)?
            }
        };
        let line = match seq {
            TokenSequence::Text(text) => serde_json::json!({ "id": id, "tokens": text }),
            TokenSequence::ExtendedIndex(ix) => serde_json::json!({ "id": id, "indices": ix }),
        };
        lines.push_str(&line.to_string());
        lines.push('\n');
    }
    fs::write(out, lines).with_context(|| format!("writing {}", out.display()))?;
    println!("tokenized {} inks to {}", corpus.len(), out.display());
    Ok(0)
}

fn cmd_render(
    file: &PipelineFile,
    input: &Path,
    out: &Path,
    color_mode: Option<ColorMode>,
    lines: Option<u32>,
) -> Result<usize> {
    let pp = file.preprocess()?;
    let mut cfg = file.render()?;
    if let Some(mode) = color_mode {
        cfg.color_mode = mode;
    }
    if let Some(lines) = lines {
        cfg.line_count = lines;
    }
    cfg.validate()?;
    let corpus: Vec<RawInk> = read_jsonl_all(input)?
        .iter()
        .map(|ink| resample_time(ink, pp.time_delta_ms))
        .collect();
    let result = render_batch(&corpus, &cfg, out)?;
    for (id, message) in &result.failures {
        eprintln!("{id}: {message}");
    }
    println!(
        "rendered {} images to {} ({} failed)",
        result.entries.len(),
        out.display(),
        result.failures.len()
    );
    Ok(result.failures.len())
}

fn cmd_export(
    file: &PipelineFile,
    seed_flag: Option<u64>,
    input: Option<&Path>,
    mix: Option<&Path>,
    count: Option<usize>,
    out: &Path,
    token_budget: Option<usize>,
) -> Result<usize> {
    let corpus: Vec<(String, RawInk)> = match (input, mix) {
        (Some(path), None) => {
            let name = path
                .file_stem()
                .and_then(|s| s.to_str())
                .unwrap_or("corpus")
                .to_string();
            read_jsonl_all(path)?
                .into_iter()
                .map(|ink| (name.clone(), ink))
                .collect()
        }
        (None, Some(spec_path)) => {
            let text = fs::read_to_string(spec_path)
                .with_context(|| format!("reading {}", spec_path.display()))?;
            let mut spec: MixSpec = toml::from_str(&text)
                .with_context(|| format!("parsing {}", spec_path.display()))?;
            if let Some(seed) = seed_flag {
                spec.seed = seed;
            }
            let n = count.context("--count is required with --mix")?;
            dataset::mix(&spec, n)?
        }
        _ => bail!("provide exactly one of a corpus path or --mix"),
    };

    let cfg = ExportConfig {
        preprocess: file.preprocess()?,
        tokenizer: file.tokenizer()?,
        render: file.render()?,
        target: file.target(),
        token_budget: token_budget.unwrap_or_else(|| file.token_budget()),
    };
    let result = dataset::export(&corpus, &cfg, default_token_counter, out)?;
    for (id, message) in &result.failures {
        eprintln!("{id}: {message}");
    }
    println!(
        "exported {} records to {} ({} failed, {} over budget)",
        result.stats.records,
        out.display(),
        result.stats.failed,
        result.stats.over_budget
    );
    Ok(result.stats.failed)
}

fn cmd_eval(file: &PipelineFile, input: &Path, report: Option<&Path>) -> Result<usize> {
    let pairs = dataset::read_eval_pairs(input)?;
    let target = file.target();
    let result = corpus_cer(&pairs, &target)?;
    println!("aggregate CER: {:.4}", result.aggregate_cer);
    let failures = result.samples.iter().filter(|s| s.error.is_some()).count();
    if let Some(path) = report {
        fs::write(path, serde_json::to_string_pretty(&result)?)
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(failures)
}

fn cmd_train_codebook(
    file: &PipelineFile,
    input: &Path,
    out: &Path,
    angle_buckets: Option<u32>,
    cell_fraction: Option<f64>,
    max_vocab: Option<u32>,
) -> Result<usize> {
    let pp = file.preprocess()?;
    let defaults = HistogramParams::default();
    let params = HistogramParams {
        angle_buckets: angle_buckets.unwrap_or(defaults.angle_buckets),
        cell_fraction: cell_fraction.unwrap_or(defaults.cell_fraction),
        max_vocab: max_vocab.unwrap_or(defaults.max_vocab),
    };
    let mut offsets: Vec<(f64, f64)> = Vec::new();
    for ink in read_jsonl_all(input)? {
        // Codebook training works on resampled but unnormalized inks.
        let resampled = resample_time(&ink, pp.time_delta_ms);
        offsets.extend(ink_offsets(&resampled));
    }
    let codebook = train_histogram_codebook(&offsets, &params)?;
    fs::write(out, codebook.to_json()).with_context(|| format!("writing {}", out.display()))?;
    println!(
        "trained codebook: vocab size {} ({} angle x {} distance buckets + 3 reserved) to {}",
        codebook.vocab_size(),
        codebook.angle_bucket_count,
        codebook.distance_bucket_count(),
        out.display()
    );
    Ok(0)
}
