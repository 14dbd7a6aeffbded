//! Target-label encoding for recognition training.
//!
//! Text recognition targets are emitted as space-separated characters
//! ("hello" becomes "h e l l o") so each visual glyph maps to one output
//! token; literal spaces inside a label are protected by a sentinel
//! token. Math targets stay verbatim LaTeX, where pretrained syntax
//! knowledge pays off; for evaluation they segment against a fixed
//! vocabulary of commands and characters so multi-character symbols like
//! `\theta` count as a single token.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

/// Sentinel for a literal space in space-separated mode.
pub const SPACE_SENTINEL: &str = "<space>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Vocabulary {
    Character,
    Latex,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetConfig {
    pub space_separated: bool,
    pub vocabulary: Vocabulary,
}

impl TargetConfig {
    /// Text recognition: characters, space-separated.
    pub fn character() -> Self {
        Self {
            space_separated: true,
            vocabulary: Vocabulary::Character,
        }
    }

    /// Math recognition: verbatim LaTeX, no space separation.
    pub fn latex() -> Self {
        Self {
            space_separated: false,
            vocabulary: Vocabulary::Latex,
        }
    }
}

impl Default for TargetConfig {
    fn default() -> Self {
        Self::character()
    }
}

/// Model-facing form of a label. Space-separated mode joins the label's
/// characters with single spaces, mapping literal spaces to
/// [`SPACE_SENTINEL`]; otherwise the label passes through unchanged.
pub fn encode_target(label: &str, cfg: &TargetConfig) -> String {
    if !cfg.space_separated {
        return label.to_string();
    }
    label
        .chars()
        .map(|c| {
            if c == ' ' {
                SPACE_SENTINEL.to_string()
            } else {
                c.to_string()
            }
        })
        .collect::<Vec<_>>()
        .join(" ")
}

/// Inverse of [`encode_target`]: space-separated mode removes the
/// separator spaces and maps the space sentinel back to a literal space.
/// Unknown multi-character chunks pass through untouched, so imperfect
/// model output still decodes best-effort.
pub fn decode_target(model_output: &str, cfg: &TargetConfig) -> String {
    if !cfg.space_separated {
        return model_output.to_string();
    }
    model_output
        .split(' ')
        .filter(|chunk| !chunk.is_empty())
        .map(|chunk| if chunk == SPACE_SENTINEL { " " } else { chunk })
        .collect()
}

const VOCAB_JSON: &str = include_str!("../data/mathwriting_vocab.json");

#[derive(Debug, Deserialize)]
struct VocabFile {
    version: u32,
    tokens: Vec<String>,
}

/// The math-target token vocabulary: LaTeX commands plus single
/// characters, matched greedily longest-first.
#[derive(Debug)]
pub struct LatexVocabulary {
    version: u32,
    /// Sorted by length descending, then lexicographically, so greedy
    /// matching always prefers the longest command.
    tokens: Vec<String>,
}

impl LatexVocabulary {
    fn from_file(file: VocabFile) -> Self {
        let mut tokens = file.tokens;
        tokens.sort_by(|a, b| b.len().cmp(&a.len()).then_with(|| a.cmp(b)));
        Self {
            version: file.version,
            tokens,
        }
    }

    /// The vocabulary shipped with the crate.
    pub fn standard() -> &'static LatexVocabulary {
        static VOCAB: OnceLock<LatexVocabulary> = OnceLock::new();
        VOCAB.get_or_init(|| {
            let file: VocabFile =
                serde_json::from_str(VOCAB_JSON).expect("bundled vocabulary parses");
            LatexVocabulary::from_file(file)
        })
    }

    pub fn version(&self) -> u32 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Tokens in longest-match-first order.
    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn contains(&self, token: &str) -> bool {
        self.tokens.iter().any(|t| t == token)
    }

    /// Greedy longest-match segmentation. Whitespace between tokens is
    /// consumed; any character that starts no vocabulary token becomes a
    /// single-character unknown token. Total: concatenating the result
    /// (ignoring consumed whitespace) reproduces the input.
    pub fn tokenize(&self, label: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut rest = label;
        'outer: while !rest.is_empty() {
            let c = rest.chars().next().unwrap();
            if c.is_whitespace() {
                rest = &rest[c.len_utf8()..];
                continue;
            }
            for token in &self.tokens {
                if rest.starts_with(token.as_str()) {
                    out.push(token.clone());
                    rest = &rest[token.len()..];
                    continue 'outer;
                }
            }
            out.push(c.to_string());
            rest = &rest[c.len_utf8()..];
        }
        out
    }
}

/// Segment a math label against the standard vocabulary.
pub fn latex_tokenize(label: &str) -> Vec<String> {
    LatexVocabulary::standard().tokenize(label)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn encode_spaces_characters() {
        let cfg = TargetConfig::character();
        assert_eq!(encode_target("hello", &cfg), "h e l l o");
    }

    #[test]
    fn latex_mode_is_identity() {
        let cfg = TargetConfig::latex();
        assert_eq!(encode_target("x+y", &cfg), "x+y");
        assert_eq!(decode_target("x+y", &cfg), "x+y");
    }

    #[test]
    fn literal_space_uses_sentinel() {
        let cfg = TargetConfig::character();
        assert_eq!(encode_target("a b", &cfg), "a <space> b");
        assert_eq!(decode_target("a <space> b", &cfg), "a b");
    }

    #[test]
    fn decode_removes_separator_spaces() {
        let cfg = TargetConfig::character();
        assert_eq!(decode_target("h e l l o", &cfg), "hello");
    }

    #[test]
    fn decode_passes_unknown_chunks_through() {
        let cfg = TargetConfig::character();
        assert_eq!(decode_target("he llo", &cfg), "hello");
        assert_eq!(decode_target("a <unk> b", &cfg), "a<unk>b");
    }

    #[test]
    fn roundtrip_on_random_printable_strings() {
        let cfg = TargetConfig::character();
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let alphabet: Vec<char> = ('!'..='~').chain(" àéïopßλ少".chars()).collect();
        for _ in 0..500 {
            let len = rng.random_range(1..=30);
            let s: String = (0..len)
                .map(|_| alphabet[rng.random_range(0..alphabet.len())])
                .collect();
            assert_eq!(
                decode_target(&encode_target(&s, &cfg), &cfg),
                s,
                "input {s:?}"
            );
        }
    }

    #[test]
    fn vocabulary_has_the_full_token_list() {
        let vocab = LatexVocabulary::standard();
        assert_eq!(vocab.version(), 1);
        assert_eq!(vocab.len(), 227);
        let commands = vocab.tokens().iter().filter(|t| t.len() > 1).count();
        let characters = vocab.tokens().iter().filter(|t| t.len() == 1).count();
        assert_eq!(commands, 142);
        assert_eq!(characters, 85);
    }

    #[test]
    fn theta_is_one_token() {
        assert_eq!(latex_tokenize("\\theta x"), vec!["\\theta", "x"]);
    }

    #[test]
    fn frac_segments_greedily() {
        assert_eq!(
            latex_tokenize("\\frac{a}{b}"),
            vec!["\\frac", "{", "a", "}", "{", "b", "}"]
        );
    }

    #[test]
    fn empty_label_gives_no_tokens() {
        assert_eq!(latex_tokenize(""), Vec::<String>::new());
    }

    #[test]
    fn longest_match_wins_over_prefixes() {
        assert_eq!(latex_tokenize("\\leftrightarrow"), vec!["\\leftrightarrow"]);
        assert_eq!(latex_tokenize("\\le x"), vec!["\\le", "x"]);
        assert_eq!(latex_tokenize("\\begin{matrix}"), vec!["\\begin{matrix}"]);
    }

    #[test]
    fn unknown_commands_fall_back_to_characters() {
        let tokens = latex_tokenize("\\qquad");
        assert_eq!(tokens, vec!["\\", "q", "q", "u", "a", "d"]);
    }

    #[test]
    fn segmentation_is_total_and_lossless() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let vocab = LatexVocabulary::standard();
        for _ in 0..200 {
            let len = rng.random_range(0..=40);
            let label: String = (0..len)
                .map(|_| {
                    let c = rng.random_range(0u32..300);
                    char::from_u32(33 + c).unwrap_or('x')
                })
                .collect();
            let tokens = vocab.tokenize(&label);
            let rebuilt: String = tokens.concat();
            let stripped: String = label.chars().filter(|c| !c.is_whitespace()).collect();
            assert_eq!(rebuilt, stripped, "label {label:?}");
        }
    }
}
