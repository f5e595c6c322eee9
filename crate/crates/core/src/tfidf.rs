//! Term-frequency / inverse-document-frequency vectorizer.
//!
//! For a term `t` in document `d` the weight is
//!
//! ```text
//! tf(t, d)  = f(t, d) / Σ_t' f(t', d)          (in-vocabulary occurrences only)
//! idf(t)    = ln((1 + N) / (1 + df(t))) + 1    (smooth_idf = true)
//!           = ln(N / df(t))                     (smooth_idf = false)
//! w(t, d)   = tf(t, d) · idf(t)
//! ```
//!
//! followed by optional L2 normalization of each row. Columns are assigned in
//! lexicographic term order so a fitted model is independent of hash order.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;
use crate::textprep::{ngrams, TextError, TokenizedDocument};

#[derive(Debug, Error)]
pub enum TfidfError {
    #[error("cannot fit on an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary is empty after document-frequency filtering (min_df={min_df}, max_df={max_df})")]
    EmptyVocabulary { min_df: usize, max_df: usize },
    #[error("invalid tf-idf config: {0}")]
    InvalidConfig(String),
    #[error("corrupt tf-idf model: {0}")]
    Corrupt(String),
    #[error(transparent)]
    Text(#[from] TextError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfConfig {
    pub min_df: usize,
    /// Upper document-frequency bound as a fraction of the corpus size.
    pub max_df_ratio: f64,
    pub ngram_range: (usize, usize),
    pub smooth_idf: bool,
    pub l2_normalize: bool,
}

impl Default for TfidfConfig {
    fn default() -> Self {
        Self {
            min_df: 2,
            max_df_ratio: 0.98,
            ngram_range: (1, 2),
            smooth_idf: true,
            l2_normalize: true,
        }
    }
}

impl TfidfConfig {
    pub fn validate(&self) -> Result<(), TfidfError> {
        if self.min_df < 1 {
            return Err(TfidfError::InvalidConfig("min_df must be >= 1".into()));
        }
        if !(self.max_df_ratio > 0.0 && self.max_df_ratio <= 1.0) {
            return Err(TfidfError::InvalidConfig(format!(
                "max_df_ratio must be in (0, 1], got {}",
                self.max_df_ratio
            )));
        }
        let (lo, hi) = self.ngram_range;
        if lo < 1 || lo > hi {
            return Err(TfidfError::InvalidConfig(format!("bad ngram_range ({lo}, {hi})")));
        }
        Ok(())
    }

    /// Largest admissible document frequency for a corpus of `n_docs`.
    pub fn max_df_count(&self, n_docs: usize) -> usize {
        let raw = self.max_df_ratio * n_docs as f64;
        // 0.98 * 50 must give 49, not 50 from accumulated rounding error.
        let nearest = raw.round();
        if (raw - nearest).abs() < 1e-9 {
            nearest as usize
        } else {
            raw.ceil() as usize
        }
    }
}

pub fn idf_value(n_docs: usize, df: usize, smooth: bool) -> f64 {
    let n = n_docs as f64;
    let df = df as f64;
    if smooth {
        ((1.0 + n) / (1.0 + df)).ln() + 1.0
    } else {
        (n / df).ln()
    }
}

/// Fitted vocabulary: sorted terms with their document frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    term_index: HashMap<String, usize>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Vocabulary {
    fn new(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Self {
        let term_index = terms.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Self {
            terms,
            term_index,
            doc_freq,
            n_docs,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_index.get(term).copied()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.term_index.contains_key(term)
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, term: &str) -> Option<usize> {
        self.index_of(term).map(|i| self.doc_freq[i])
    }

    pub fn doc_freqs(&self) -> &[usize] {
        &self.doc_freq
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "TfidfModelRepr", into = "TfidfModelRepr")]
pub struct TfidfModel {
    vocabulary: Vocabulary,
    idf: Vec<f64>,
    config: TfidfConfig,
}

impl TfidfModel {
    pub fn fit(corpus: &[TokenizedDocument], config: &TfidfConfig) -> Result<Self, TfidfError> {
        config.validate()?;
        if corpus.is_empty() {
            return Err(TfidfError::EmptyCorpus);
        }
        let (lo, hi) = config.ngram_range;
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for doc in corpus {
            let distinct: BTreeSet<String> = ngrams(doc, lo, hi)?.into_iter().collect();
            for term in distinct {
                *df.entry(term).or_insert(0) += 1;
            }
        }
        let n_docs = corpus.len();
        let max_df = config.max_df_count(n_docs);
        let (terms, doc_freq): (Vec<String>, Vec<usize>) = df
            .into_iter()
            .filter(|&(_, d)| d >= config.min_df && d <= max_df)
            .unzip();
        if terms.is_empty() {
            return Err(TfidfError::EmptyVocabulary {
                min_df: config.min_df,
                max_df,
            });
        }
        let idf = doc_freq
            .iter()
            .map(|&d| idf_value(n_docs, d, config.smooth_idf))
            .collect();
        Ok(Self {
            vocabulary: Vocabulary::new(terms, doc_freq, n_docs),
            idf,
            config: config.clone(),
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn config(&self) -> &TfidfConfig {
        &self.config
    }

    /// Number of output columns.
    pub fn dim(&self) -> usize {
        self.vocabulary.len()
    }

    pub fn idf(&self, term: &str) -> Option<f64> {
        self.vocabulary.index_of(term).map(|i| self.idf[i])
    }

    pub fn idf_values(&self) -> &[f64] {
        &self.idf
    }

    pub fn transform(&self, doc: &TokenizedDocument) -> SparseVector {
        let (lo, hi) = self.config.ngram_range;
        // The range was validated at fit time.
        let terms = ngrams(doc, lo, hi).expect("validated ngram range");
        self.transform_terms(&terms)
    }

    /// Weights an already-expanded term stream.
    pub fn transform_terms<S: AsRef<str>>(&self, terms: &[S]) -> SparseVector {
        let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
        let mut total = 0usize;
        for term in terms {
            if let Some(i) = self.vocabulary.index_of(term.as_ref()) {
                *counts.entry(i).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return SparseVector::zero();
        }
        let total = total as f64;
        let pairs = counts
            .into_iter()
            .map(|(i, c)| (i, c as f64 / total * self.idf[i]))
            .collect();
        let mut v = SparseVector::from_pairs(pairs);
        if self.config.l2_normalize {
            v.normalize();
        }
        v
    }

    pub fn transform_corpus(&self, corpus: &[TokenizedDocument]) -> Vec<SparseVector> {
        corpus.iter().map(|d| self.transform(d)).collect()
    }
}

#[derive(Serialize, Deserialize)]
struct TfidfModelRepr {
    config: TfidfConfig,
    n_docs: usize,
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    idf: Vec<f64>,
}

impl From<TfidfModel> for TfidfModelRepr {
    fn from(m: TfidfModel) -> Self {
        Self {
            config: m.config,
            n_docs: m.vocabulary.n_docs,
            terms: m.vocabulary.terms,
            doc_freq: m.vocabulary.doc_freq,
            idf: m.idf,
        }
    }
}

impl TryFrom<TfidfModelRepr> for TfidfModel {
    type Error = TfidfError;

    fn try_from(r: TfidfModelRepr) -> Result<Self, Self::Error> {
        r.config.validate()?;
        if r.terms.len() != r.doc_freq.len() || r.terms.len() != r.idf.len() {
            return Err(TfidfError::Corrupt("term/df/idf arrays differ in length".into()));
        }
        if r.terms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TfidfError::Corrupt("terms are not strictly sorted".into()));
        }
        if r.doc_freq.iter().any(|&d| d < 1 || d > r.n_docs) {
            return Err(TfidfError::Corrupt("document frequency out of range".into()));
        }
        if r.idf.iter().any(|v| !v.is_finite()) {
            return Err(TfidfError::Corrupt("non-finite idf".into()));
        }
        Ok(Self {
            vocabulary: Vocabulary::new(r.terms, r.doc_freq, r.n_docs),
            idf: r.idf,
            config: r.config,
        })
    }
}
