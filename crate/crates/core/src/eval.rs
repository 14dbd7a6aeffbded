//! Character error rate over token sequences.
//!
//! CER is the unit-cost Levenshtein distance between reference and
//! hypothesis divided by the reference length. Tokens are characters for
//! text targets and vocabulary tokens for math targets. The corpus
//! aggregate is micro-averaged: total edit distance over total reference
//! length.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::target::{decode_target, latex_tokenize, TargetConfig, Vocabulary};

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("reference is empty: CER is undefined")]
    EmptyReference,
    #[error("no valid pairs in the evaluation stream")]
    EmptyCorpus,
}

/// Unit-cost edit distance with two-row dynamic programming.
pub fn levenshtein<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut curr = vec![0usize; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        curr[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let cost = usize::from(x != y);
            curr[j + 1] = (prev[j + 1] + 1).min(curr[j] + 1).min(prev[j] + cost);
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    prev[b.len()]
}

/// Edit distance over reference length; errors on an empty reference.
pub fn cer<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<f64, EvalError> {
    if reference.is_empty() {
        return Err(EvalError::EmptyReference);
    }
    Ok(levenshtein(reference, hypothesis) as f64 / reference.len() as f64)
}

/// Character-level CER of two strings.
pub fn cer_str(reference: &str, hypothesis: &str) -> Result<f64, EvalError> {
    let r: Vec<char> = reference.chars().collect();
    let h: Vec<char> = hypothesis.chars().collect();
    cer(&r, &h)
}

/// One evaluation input: ground-truth label and model output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPair {
    pub reference: String,
    pub hypothesis: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleReport {
    pub index: usize,
    pub distance: Option<usize>,
    pub reference_len: usize,
    pub cer: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorpusCerReport {
    /// Micro-averaged: total distance / total reference length.
    pub aggregate_cer: f64,
    pub total_distance: usize,
    pub total_reference_len: usize,
    pub samples: Vec<SampleReport>,
}

fn tokens_of(text: &str, cfg: &TargetConfig) -> Vec<String> {
    match cfg.vocabulary {
        Vocabulary::Character => text.chars().map(|c| c.to_string()).collect(),
        Vocabulary::Latex => latex_tokenize(text),
    }
}

/// Evaluate a stream of pairs. Hypotheses pass through
/// [`decode_target`] first (a no-op outside space-separated mode), so
/// model output in the spaced training format scores against canonical
/// references. Per-sample failures land in the report without aborting
/// the rest.
pub fn corpus_cer(pairs: &[EvalPair], cfg: &TargetConfig) -> Result<CorpusCerReport, EvalError> {
    let mut samples = Vec::with_capacity(pairs.len());
    let mut total_distance = 0usize;
    let mut total_len = 0usize;
    for (index, pair) in pairs.iter().enumerate() {
        let hypothesis = decode_target(&pair.hypothesis, cfg);
        let r = tokens_of(&pair.reference, cfg);
        let h = tokens_of(&hypothesis, cfg);
        if r.is_empty() {
            samples.push(SampleReport {
                index,
                distance: None,
                reference_len: 0,
                cer: None,
                error: Some(EvalError::EmptyReference.to_string()),
            });
            continue;
        }
        let distance = levenshtein(&r, &h);
        total_distance += distance;
        total_len += r.len();
        samples.push(SampleReport {
            index,
            distance: Some(distance),
            reference_len: r.len(),
            cer: Some(distance as f64 / r.len() as f64),
            error: None,
        });
    }
    if total_len == 0 {
        return Err(EvalError::EmptyCorpus);
    }
    Ok(CorpusCerReport {
        aggregate_cer: total_distance as f64 / total_len as f64,
        total_distance,
        total_reference_len: total_len,
        samples,
    })
}
