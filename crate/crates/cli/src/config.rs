//! Declarative pipeline configuration.
//!
//! One TOML document with a section per pipeline stage; every key is
//! optional and falls back to the stage defaults, but unknown keys are
//! rejected so typos fail loudly instead of silently using a default.
//! Command-line flags override file values.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Deserialize;

use inkrep::render::{ColorMode, RenderConfig};
use inkrep::target::{TargetConfig, Vocabulary};
use inkrep::tokenizer::{Emission, TokenizerConfig, TokenizerMode};
use inkrep::PreprocessConfig;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineFile {
    #[serde(default)]
    pub preprocess: PreprocessSection,
    #[serde(default)]
    pub tokenizer: TokenizerSection,
    #[serde(default)]
    pub render: RenderSection,
    #[serde(default)]
    pub target: TargetSection,
    #[serde(default)]
    pub dataset: DatasetSection,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PreprocessSection {
    pub time_delta_ms: Option<f64>,
    pub grid_size: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TokenizerSection {
    pub mode: Option<TokenizerMode>,
    pub emission: Option<Emission>,
    pub stroke_separator: Option<String>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RenderSection {
    pub image_size: Option<u32>,
    pub color_mode: Option<ColorMode>,
    pub line_count: Option<u32>,
    pub stroke_width: Option<u32>,
    pub margin: Option<u32>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSection {
    pub space_separated: Option<bool>,
    pub vocabulary: Option<Vocabulary>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSection {
    pub token_budget: Option<usize>,
}

impl PipelineFile {
    pub fn load(path: Option<&PathBuf>) -> Result<Self> {
        match path {
            None => Ok(Self::default()),
            Some(path) => Self::from_path(path),
        }
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn preprocess(&self) -> Result<PreprocessConfig> {
        let defaults = PreprocessConfig::default();
        PreprocessConfig::new(
            self.preprocess
                .time_delta_ms
                .unwrap_or(defaults.time_delta_ms),
            self.preprocess.grid_size.unwrap_or(defaults.grid_size),
        )
        .context("invalid [preprocess] section")
    }

    pub fn tokenizer(&self) -> Result<TokenizerConfig> {
        let defaults = TokenizerConfig::default();
        let cfg = TokenizerConfig {
            mode: self.tokenizer.mode.unwrap_or(defaults.mode),
            emission: self.tokenizer.emission.unwrap_or(defaults.emission),
            stroke_separator: self
                .tokenizer
                .stroke_separator
                .clone()
                .unwrap_or(defaults.stroke_separator),
        };
        cfg.validate().context("invalid [tokenizer] section")?;
        Ok(cfg)
    }

    pub fn render(&self) -> Result<RenderConfig> {
        let defaults = RenderConfig::default();
        let cfg = RenderConfig {
            image_size: self.render.image_size.unwrap_or(defaults.image_size),
            color_mode: self.render.color_mode.unwrap_or(defaults.color_mode),
            line_count: self.render.line_count.unwrap_or(defaults.line_count),
            stroke_width: self.render.stroke_width.unwrap_or(defaults.stroke_width),
            margin: self.render.margin.unwrap_or(defaults.margin),
        };
        cfg.validate().context("invalid [render] section")?;
        Ok(cfg)
    }

    pub fn target(&self) -> TargetConfig {
        let vocabulary = self.target.vocabulary.unwrap_or(Vocabulary::Character);
        // Math targets keep their syntax unless spacing is forced on.
        let default_spacing = matches!(vocabulary, Vocabulary::Character);
        TargetConfig {
            space_separated: self.target.space_separated.unwrap_or(default_spacing),
            vocabulary,
        }
    }

    pub fn token_budget(&self) -> usize {
        self.dataset.token_budget.unwrap_or(1024)
    }
}
