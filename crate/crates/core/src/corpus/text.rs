use std::collections::BTreeSet;
use std::path::Path;

use crate::error::Result;

const ENGLISH_V1: &str = include_str!("../../data/stopwords-en-v1.txt");

/// Symbols kept as one-character tokens; math problem text leans on them.
const MATH_SYMBOLS: &[char] = &[
    '+', '-', '*', '/', '=', '<', '>', '^', '%', '×', '÷', '·', '≤', '≥', '≠', '≈', '√', 'π', '∠', '°', '±',
];

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct StopWords(BTreeSet<String>);

impl StopWords {
    /// The bundled English list (version 1).
    pub fn english() -> Self {
        StopWords::parse(ENGLISH_V1)
    }

    pub fn none() -> Self {
        StopWords::default()
    }

    /// One word per line; `#` starts a comment line. Words are lowercased.
    pub fn parse(text: &str) -> Self {
        StopWords(
            text.lines()
                .map(str::trim)
                .filter(|l| !l.is_empty() && !l.starts_with('#'))
                .map(str::to_lowercase)
                .collect(),
        )
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(StopWords::parse(&std::fs::read_to_string(path)?))
    }

    pub fn from_words<I, S>(words: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        StopWords(words.into_iter().map(|w| w.as_ref().to_lowercase()).collect())
    }

    pub fn contains(&self, word: &str) -> bool {
        self.0.contains(word)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Lowercases and splits on non-alphanumeric characters. Digit runs stay
/// tokens and the math symbols in [`MATH_SYMBOLS`] become tokens of their own.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    for ch in text.chars() {
        if ch.is_alphanumeric() && ch != 'π' {
            current.extend(ch.to_lowercase());
            continue;
        }
        if !current.is_empty() {
            tokens.push(std::mem::take(&mut current));
        }
        if MATH_SYMBOLS.contains(&ch) {
            tokens.push(ch.to_string());
        }
    }
    if !current.is_empty() {
        tokens.push(current);
    }
    tokens
}

pub fn clean_tokens(text: &str, stop_words: &StopWords) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !stop_words.contains(t)).collect()
}
