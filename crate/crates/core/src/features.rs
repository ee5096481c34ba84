//! Lyrical structure features and z-score standardization.
//!
//! The auxiliary feature vector `F_struct` has a fixed layout:
//! `[rhyme_density, lexical_diversity, pronoun_ratio, popularity]`. The three
//! text features are dictionary-free and fully deterministic; popularity is
//! metadata passed through untouched. Standardization follows the usual
//! StandardScaler convention (per-column mean and population standard
//! deviation, fitted on training rows only).

use ndarray::{Array2, ArrayView2};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Number of auxiliary structure features.
pub const STRUCT_DIM: usize = 4;

/// Column names of `F_struct`, in layout order.
pub const STRUCT_FEATURE_NAMES: [&str; STRUCT_DIM] = [
    "rhyme_density",
    "lexical_diversity",
    "pronoun_ratio",
    "popularity",
];

/// Closed lexicon of English personal pronouns used by [`pronoun_ratio`].
pub const PRONOUN_LEXICON: [&str; 31] = [
    "i",
    "me",
    "my",
    "mine",
    "myself",
    "we",
    "us",
    "our",
    "ours",
    "ourselves",
    "you",
    "your",
    "yours",
    "yourself",
    "yourselves",
    "he",
    "him",
    "his",
    "himself",
    "she",
    "her",
    "hers",
    "herself",
    "it",
    "its",
    "itself",
    "they",
    "them",
    "their",
    "theirs",
    "themselves",
];

/// Vowel set for orthographic rhyme keys ('y' counts as a vowel).
pub const RHYME_VOWELS: [char; 6] = ['a', 'e', 'i', 'o', 'u', 'y'];

/// Columns whose population standard deviation falls below this are treated
/// as constant and get std = 1 so that transforms stay total.
pub const ZERO_VARIANCE_GUARD: f64 = 1e-12;

/// One raw input row: lyrics plus metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct LyricRecord {
    pub id: String,
    /// Raw lyric text; lines separated by '\n' (CRLF is normalized).
    pub text: String,
    pub popularity: f64,
    /// Intrinsic cluster label when known; -1 denotes noise.
    pub cluster_label: Option<i64>,
}

/// The 4-dimensional auxiliary feature vector for one record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StructFeatures {
    pub rhyme_density: f64,
    pub lexical_diversity: f64,
    pub pronoun_ratio: f64,
    pub popularity: f64,
}

impl StructFeatures {
    /// Feature values in the fixed `F_struct` layout order.
    pub fn to_array(self) -> [f64; STRUCT_DIM] {
        [
            self.rhyme_density,
            self.lexical_diversity,
            self.pronoun_ratio,
            self.popularity,
        ]
    }
}

/// Per-column standardization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerParams {
    pub means: Vec<f64>,
    /// Strictly positive; constant columns carry the guard value 1.
    pub stds: Vec<f64>,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ScalerError {
    #[error("cannot fit a scaler on a matrix with no rows")]
    EmptyMatrix,
    #[error("matrix has {found} columns but scaler was fitted on {expected}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Splits text into lowercased tokens.
///
/// Token characters are letters, digits, and intra-word apostrophes; any
/// other character separates tokens. Apostrophes at token edges are stripped
/// and tokens that become empty are dropped.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars().flat_map(char::to_lowercase) {
        if ch.is_alphanumeric() || ch == '\'' {
            current.push(ch);
        } else {
            flush_token(&mut tokens, &mut current);
        }
    }
    flush_token(&mut tokens, &mut current);
    tokens
}

fn flush_token(tokens: &mut Vec<String>, current: &mut String) {
    if !current.is_empty() {
        let trimmed = current.trim_matches('\'');
        if !trimmed.is_empty() {
            tokens.push(trimmed.to_string());
        }
        current.clear();
    }
}

/// Type-token ratio: distinct tokens over total tokens; 0 for empty text.
pub fn lexical_diversity(text: &str) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let unique: std::collections::HashSet<&str> = tokens.iter().map(String::as_str).collect();
    unique.len() as f64 / tokens.len() as f64
}

/// Fraction of tokens that belong to [`PRONOUN_LEXICON`]; 0 for empty text.
pub fn pronoun_ratio(text: &str) -> f64 {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return 0.0;
    }
    let hits = tokens
        .iter()
        .filter(|t| PRONOUN_LEXICON.contains(&t.as_str()))
        .count();
    hits as f64 / tokens.len() as f64
}

/// Orthographic rhyme key of a token: the suffix starting at the last vowel
/// group, extended left by one consonant when that group ends the word.
///
/// Tokens without any vowel yield an empty key and never rhyme. Examples:
/// "night" → "ight", "way" → "way", "too" → "too", "cat" → "at".
pub fn rhyme_key(token: &str) -> String {
    let chars: Vec<char> = token.chars().collect();
    let is_vowel = |c: char| RHYME_VOWELS.contains(&c);
    let Some(last_vowel) = chars.iter().rposition(|&c| is_vowel(c)) else {
        return String::new();
    };
    let mut start = last_vowel;
    while start > 0 && is_vowel(chars[start - 1]) {
        start -= 1;
    }
    // A word-final vowel group alone carries too little signal ("too" vs
    // "you"); pull in the consonant before it when there is one.
    if last_vowel == chars.len() - 1 && start > 0 {
        start -= 1;
    }
    chars[start..].iter().collect()
}

/// Fraction of adjacent token-bearing line pairs whose final tokens rhyme.
///
/// Two tokens rhyme iff their rhyme keys are equal and nonempty. Lines with
/// no tokens (blank or punctuation-only) are skipped entirely. Returns 0
/// when fewer than two token-bearing lines exist.
pub fn rhyme_density(text: &str) -> f64 {
    let normalized = text.replace("\r\n", "\n");
    let keys: Vec<String> = normalized
        .split('\n')
        .filter_map(|line| {
            let tokens = tokenize(line);
            tokens.last().map(|t| rhyme_key(t))
        })
        .collect();
    if keys.len() < 2 {
        return 0.0;
    }
    let rhyming = keys
        .windows(2)
        .filter(|pair| !pair[0].is_empty() && pair[0] == pair[1])
        .count();
    rhyming as f64 / (keys.len() - 1) as f64
}

/// Computes the full `F_struct` vector for one record.
pub fn extract_struct_features(record: &LyricRecord) -> StructFeatures {
    StructFeatures {
        rhyme_density: rhyme_density(&record.text),
        lexical_diversity: lexical_diversity(&record.text),
        pronoun_ratio: pronoun_ratio(&record.text),
        popularity: record.popularity,
    }
}

/// Fits per-column mean and population standard deviation.
///
/// Columns with std below [`ZERO_VARIANCE_GUARD`] get std = 1.
pub fn fit_scaler(matrix: ArrayView2<'_, f64>) -> Result<ScalerParams, ScalerError> {
    let n = matrix.nrows();
    if n == 0 {
        return Err(ScalerError::EmptyMatrix);
    }
    let mut means = Vec::with_capacity(matrix.ncols());
    let mut stds = Vec::with_capacity(matrix.ncols());
    for col in matrix.columns() {
        let mean = col.sum() / n as f64;
        let var = col.iter().map(|&x| (x - mean) * (x - mean)).sum::<f64>() / n as f64;
        let std = var.sqrt();
        means.push(mean);
        stds.push(if std < ZERO_VARIANCE_GUARD { 1.0 } else { std });
    }
    Ok(ScalerParams { means, stds })
}

/// Applies `(x - mean) / std` column-wise.
pub fn transform(
    matrix: ArrayView2<'_, f64>,
    params: &ScalerParams,
) -> Result<Array2<f64>, ScalerError> {
    if matrix.ncols() != params.means.len() {
        return Err(ScalerError::DimensionMismatch {
            expected: params.means.len(),
            found: matrix.ncols(),
        });
    }
    let mut out = matrix.to_owned();
    for (j, mut col) in out.columns_mut().into_iter().enumerate() {
        let (mean, std) = (params.means[j], params.stds[j]);
        col.mapv_inplace(|x| (x - mean) / std);
    }
    Ok(out)
}
