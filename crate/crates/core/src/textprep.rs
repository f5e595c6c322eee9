//! Text normalization: case folding, punctuation/digit stripping, stopword
//! removal, and n-gram term streams.
//!
//! Tokens are maximal runs of "word" characters. A character is a word
//! character when it is alphabetic, or when it belongs to a class whose
//! stripping is disabled (digits, punctuation). Stripped characters are
//! deleted before tokenization, so `"e-mail"` becomes `"email"` and
//! `"100 packets"` becomes `"packets"`.

use std::collections::BTreeSet;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// The bundled English stopword list (one word per line, `#` comments).
pub const BUNDLED_STOPWORDS: &str = include_str!("../data/stopwords.txt");

#[derive(Debug, Error)]
pub enum TextError {
    #[error("failed to read stopword file {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("invalid stopword {word:?} on line {line}: {reason}")]
    InvalidStopword {
        line: usize,
        word: String,
        reason: &'static str,
    },
    #[error("invalid n-gram range {n_min}..={n_max}")]
    InvalidNgramRange { n_min: usize, n_max: usize },
}

/// A validated set of stopwords.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct StopwordList(BTreeSet<String>);

impl StopwordList {
    /// Parses the line-oriented stopword format.
    pub fn parse(text: &str) -> Result<Self, TextError> {
        let mut words = BTreeSet::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            check_stopword(line).map_err(|reason| TextError::InvalidStopword {
                line: i + 1,
                word: line.to_string(),
                reason,
            })?;
            words.insert(line.to_string());
        }
        Ok(Self(words))
    }

    pub fn from_file(path: impl AsRef<Path>) -> Result<Self, TextError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| TextError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::parse(&text)
    }

    pub fn bundled() -> Self {
        Self::parse(BUNDLED_STOPWORDS).expect("bundled stopword list is valid")
    }

    pub fn empty() -> Self {
        Self(BTreeSet::new())
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

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

fn check_stopword(word: &str) -> Result<(), &'static str> {
    if word.is_empty() {
        return Err("empty");
    }
    if word.chars().any(|c| !c.is_alphabetic()) {
        return Err("contains non-alphabetic characters");
    }
    if word.chars().any(char::is_uppercase) {
        return Err("not lowercase");
    }
    Ok(())
}

impl TryFrom<Vec<String>> for StopwordList {
    type Error = TextError;

    fn try_from(words: Vec<String>) -> Result<Self, Self::Error> {
        let mut set = BTreeSet::new();
        for (i, w) in words.into_iter().enumerate() {
            check_stopword(&w).map_err(|reason| TextError::InvalidStopword {
                line: i + 1,
                word: w.clone(),
                reason,
            })?;
            set.insert(w);
        }
        Ok(Self(set))
    }
}

impl From<StopwordList> for Vec<String> {
    fn from(list: StopwordList) -> Self {
        list.0.into_iter().collect()
    }
}

impl fmt::Debug for StopwordList {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "StopwordList({} words)", self.0.len())
    }
}

/// Switches for [`clean_and_tokenize`]. Everything is on by default.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningOptions {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub strip_digits: bool,
    pub remove_stopwords: bool,
    pub stopwords: StopwordList,
}

impl Default for CleaningOptions {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            strip_digits: true,
            remove_stopwords: true,
            stopwords: StopwordList::bundled(),
        }
    }
}

impl CleaningOptions {
    /// Every stage disabled: tokens are the whitespace-separated runs of the
    /// input.
    pub fn passthrough() -> Self {
        Self {
            lowercase: false,
            strip_punctuation: false,
            strip_digits: false,
            remove_stopwords: false,
            stopwords: StopwordList::empty(),
        }
    }
}

/// An ordered list of non-empty tokens.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TokenizedDocument {
    tokens: Vec<String>,
}

impl TokenizedDocument {
    /// Wraps already-tokenized text. Empty tokens and tokens containing
    /// whitespace are split/dropped so the invariants hold.
    pub fn from_tokens<I, S>(tokens: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let tokens = tokens
            .into_iter()
            .flat_map(|t| {
                t.as_ref()
                    .split_whitespace()
                    .map(str::to_string)
                    .collect::<Vec<_>>()
            })
            .collect();
        Self { tokens }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum CharClass {
    Alpha,
    Digit,
    Space,
    Punct,
}

fn classify(c: char) -> CharClass {
    if c.is_alphabetic() {
        CharClass::Alpha
    } else if c.is_numeric() {
        CharClass::Digit
    } else if c.is_whitespace() {
        CharClass::Space
    } else {
        CharClass::Punct
    }
}

pub fn clean_and_tokenize(text: &str, options: &CleaningOptions) -> TokenizedDocument {
    let mut tokens = Vec::new();
    let mut current = String::new();

    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if current.is_empty() {
            return;
        }
        let token = std::mem::take(current);
        if options.remove_stopwords {
            let folded;
            let key = if options.lowercase {
                token.as_str()
            } else {
                folded = token.to_lowercase();
                folded.as_str()
            };
            if options.stopwords.contains(key) {
                return;
            }
        }
        tokens.push(token);
    };

    for c in text.chars() {
        match classify(c) {
            CharClass::Space => flush(&mut current, &mut tokens),
            CharClass::Digit if options.strip_digits => {}
            CharClass::Punct if options.strip_punctuation => {}
            _ => {
                if options.lowercase {
                    current.extend(c.to_lowercase());
                } else {
                    current.push(c);
                }
            }
        }
    }
    flush(&mut current, &mut tokens);

    TokenizedDocument { tokens }
}

/// Emits every contiguous window of `n_min..=n_max` tokens, joined by a
/// single space. All unigrams come first, then all bigrams, and so on.
pub fn ngrams(doc: &TokenizedDocument, n_min: usize, n_max: usize) -> Result<Vec<String>, TextError> {
    if n_min == 0 || n_min > n_max {
        return Err(TextError::InvalidNgramRange { n_min, n_max });
    }
    let tokens = doc.tokens();
    let total: usize = (n_min..=n_max)
        .map(|n| tokens.len().saturating_sub(n - 1))
        .sum();
    let mut out = Vec::with_capacity(total);
    for n in n_min..=n_max {
        if n > tokens.len() {
            break;
        }
        out.extend(tokens.windows(n).map(|w| w.join(" ")));
    }
    Ok(out)
}
