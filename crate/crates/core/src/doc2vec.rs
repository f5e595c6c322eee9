//! Paragraph vectors trained with negative sampling.
//!
//! Two objectives are supported:
//!
//! * **PV-DBOW** (default): for every token position of document `d`, the
//!   paragraph vector `p_d` alone is trained to score the observed word `w`
//!   above `k` noise words: minimize
//!   `-ln σ(p_d · u_w) - Σ_neg ln σ(-p_d · u_neg)`.
//! * **PV-DM**: the input is the mean of `p_d` and the word vectors of the
//!   surrounding window; it predicts the centre word with the same loss.
//!
//! Noise words are drawn from the unigram distribution raised to the 3/4
//! power. The learning rate decays linearly from `learning_rate` to
//! `min_learning_rate` over all updates. Unseen documents are embedded by
//! [`Doc2VecModel::infer_vector`], which trains a fresh paragraph vector
//! against frozen word and output weights.

use std::collections::{HashMap, HashSet};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::matrix::{axpy, cosine, dot, Matrix};
use crate::textprep::TokenizedDocument;

#[derive(Debug, Error)]
pub enum Doc2VecError {
    #[error("cannot train on an empty corpus")]
    EmptyCorpus,
    #[error("vocabulary is empty (min_word_count = {0})")]
    EmptyVocabulary(u64),
    #[error("duplicate document tag {0:?}")]
    DuplicateTag(String),
    #[error("invalid doc2vec config: {0}")]
    InvalidConfig(String),
    #[error("training diverged: non-finite loss in epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("unknown document tag {0:?}")]
    UnknownTag(String),
    #[error("k must be at least 1")]
    InvalidK,
    #[error("corrupt doc2vec model: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Doc2VecMode {
    PvDbow,
    PvDm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Doc2VecConfig {
    pub dim: usize,
    pub learning_rate: f64,
    pub min_learning_rate: f64,
    pub epochs: usize,
    pub mode: Doc2VecMode,
    /// Context half-width, PV-DM only.
    pub window: usize,
    pub negative_samples: usize,
    pub min_word_count: u64,
    pub seed: u64,
    pub infer_epochs: usize,
}

impl Default for Doc2VecConfig {
    fn default() -> Self {
        Self {
            dim: 300,
            learning_rate: 0.065,
            min_learning_rate: 0.0001,
            epochs: 50,
            mode: Doc2VecMode::PvDbow,
            window: 5,
            negative_samples: 5,
            min_word_count: 1,
            seed: 42,
            infer_epochs: 50,
        }
    }
}

impl Doc2VecConfig {
    pub fn validate(&self) -> Result<(), Doc2VecError> {
        let bad = |m: &str| Err(Doc2VecError::InvalidConfig(m.to_string()));
        if self.dim < 1 {
            return bad("dim must be >= 1");
        }
        if !(self.min_learning_rate > 0.0 && self.min_learning_rate <= self.learning_rate) {
            return bad("need 0 < min_learning_rate <= learning_rate");
        }
        if !self.learning_rate.is_finite() {
            return bad("learning_rate must be finite");
        }
        if self.epochs < 1 {
            return bad("epochs must be >= 1");
        }
        if self.infer_epochs < 1 {
            return bad("infer_epochs must be >= 1");
        }
        if self.negative_samples < 1 {
            return bad("negative_samples must be >= 1");
        }
        if self.mode == Doc2VecMode::PvDm && self.window < 1 {
            return bad("window must be >= 1 for PV-DM");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TaggedDocument {
    pub tag: String,
    pub tokens: TokenizedDocument,
}

impl TaggedDocument {
    pub fn new(tag: impl Into<String>, tokens: TokenizedDocument) -> Self {
        Self {
            tag: tag.into(),
            tokens,
        }
    }
}

/// Words sorted by descending count, ties broken lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WordVocab {
    words: Vec<String>,
    counts: Vec<u64>,
    index: HashMap<String, usize>,
}

impl WordVocab {
    fn from_sorted(words: Vec<String>, counts: Vec<u64>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Self { words, counts, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn index_of(&self, word: &str) -> Option<usize> {
        self.index.get(word).copied()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.index.contains_key(word)
    }

    pub fn count(&self, word: &str) -> Option<u64> {
        self.index_of(word).map(|i| self.counts[i])
    }

    pub fn words(&self) -> &[String] {
        &self.words
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    fn encode(&self, doc: &TokenizedDocument) -> Vec<usize> {
        doc.tokens().iter().filter_map(|t| self.index_of(t)).collect()
    }
}

pub fn build_vocab(docs: &[TaggedDocument], min_word_count: u64) -> Result<WordVocab, Doc2VecError> {
    if docs.is_empty() {
        return Err(Doc2VecError::EmptyCorpus);
    }
    let mut counts: HashMap<&str, u64> = HashMap::new();
    for d in docs {
        for t in d.tokens.tokens() {
            *counts.entry(t.as_str()).or_insert(0) += 1;
        }
    }
    let mut kept: Vec<(&str, u64)> = counts.into_iter().filter(|&(_, c)| c >= min_word_count).collect();
    if kept.is_empty() {
        return Err(Doc2VecError::EmptyVocabulary(min_word_count));
    }
    kept.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
    let (words, counts) = kept.into_iter().map(|(w, c)| (w.to_string(), c)).unzip();
    Ok(WordVocab::from_sorted(words, counts))
}

/// Unigram counts raised to 3/4 and normalized, with a cumulative table for
/// sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseDistribution {
    probs: Vec<f64>,
    cumulative: Vec<f64>,
}

impl NoiseDistribution {
    pub const EXPONENT: f64 = 0.75;

    pub fn from_counts(counts: &[u64]) -> Self {
        let weights: Vec<f64> = counts.iter().map(|&c| (c as f64).powf(Self::EXPONENT)).collect();
        let total: f64 = weights.iter().sum();
        let probs: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let mut acc = 0.0;
        let cumulative = probs
            .iter()
            .map(|p| {
                acc += p;
                acc
            })
            .collect();
        Self { probs, cumulative }
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.probs
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.gen::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        self.cumulative
            .partition_point(|&c| c <= u)
            .min(self.cumulative.len() - 1)
    }
}

/// Warning attached to an inferred vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InferenceWarning {
    /// None of the document's tokens are in the vocabulary; the vector is zero.
    NoKnownWords,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InferredVector {
    pub vector: Vec<f64>,
    pub warning: Option<InferenceWarning>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Doc2VecModelRepr", into = "Doc2VecModelRepr")]
pub struct Doc2VecModel {
    config: Doc2VecConfig,
    vocab: WordVocab,
    noise: NoiseDistribution,
    tags: Vec<String>,
    /// Input word embeddings (used by PV-DM).
    word_vectors: Matrix,
    /// Output weights scored against the hidden vector.
    output_weights: Matrix,
    doc_vectors: Matrix,
    loss_trace: Vec<f64>,
}

fn log_sigmoid_neg(x: f64) -> f64 {
    // -ln σ(x) = ln(1 + e^{-x}), computed without overflow.
    if x >= 0.0 {
        (-x).exp().ln_1p()
    } else {
        -x + x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

fn uniform_init(rng: &mut ChaCha8Rng, dim: usize) -> impl FnMut(usize, usize) -> f64 + '_ {
    let half = 0.5 / dim as f64;
    move |_, _| rng.gen_range(-half..=half)
}

enum Weights<'a> {
    Frozen(&'a Matrix),
    Trainable(&'a mut Matrix),
}

impl Weights<'_> {
    fn get(&self) -> &Matrix {
        match self {
            Weights::Frozen(m) => m,
            Weights::Trainable(m) => m,
        }
    }

    fn get_mut(&mut self) -> Option<&mut Matrix> {
        match self {
            Weights::Frozen(_) => None,
            Weights::Trainable(m) => Some(m),
        }
    }
}

/// One negative-sampling step for hidden vector `hidden`. Writes the
/// hidden-side gradient into `grad` (already scaled by the learning rate),
/// updates trainable output weights, and returns the loss.
fn negative_sampling_step(
    hidden: &[f64],
    grad: &mut [f64],
    output: &mut Weights<'_>,
    target: usize,
    noise: &NoiseDistribution,
    negatives: usize,
    alpha: f64,
    rng: &mut ChaCha8Rng,
) -> f64 {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let mut loss = 0.0;
    for k in 0..=negatives {
        let (word, label) = if k == 0 {
            (target, 1.0)
        } else {
            let w = noise.sample(rng);
            if w == target {
                continue;
            }
            (w, 0.0)
        };
        let score = dot(hidden, output.get().row(word));
        loss += if label == 1.0 {
            log_sigmoid_neg(score)
        } else {
            log_sigmoid_neg(-score)
        };
        let g = (label - sigmoid(score)) * alpha;
        axpy(g, output.get().row(word), grad);
        if let Some(out) = output.get_mut() {
            axpy(g, hidden, out.row_mut(word));
        }
    }
    loss
}

fn context_window(encoded: &[usize], pos: usize, window: usize) -> impl Iterator<Item = usize> + '_ {
    let lo = pos.saturating_sub(window);
    let hi = (pos + window + 1).min(encoded.len());
    (lo..hi).filter(move |&j| j != pos).map(move |j| encoded[j])
}

/// Shared mutable training state for one pass over a document.
struct Trainer<'a> {
    config: &'a Doc2VecConfig,
    noise: &'a NoiseDistribution,
    output: Weights<'a>,
    words: Weights<'a>,
    hidden: Vec<f64>,
    grad: Vec<f64>,
}

impl Trainer<'_> {
    fn step(&mut self, doc_vec: &mut [f64], encoded: &[usize], pos: usize, alpha: f64, rng: &mut ChaCha8Rng) -> f64 {
        let target = encoded[pos];
        match self.config.mode {
            Doc2VecMode::PvDbow => {
                self.hidden.copy_from_slice(doc_vec);
                let loss = negative_sampling_step(
                    &self.hidden,
                    &mut self.grad,
                    &mut self.output,
                    target,
                    self.noise,
                    self.config.negative_samples,
                    alpha,
                    rng,
                );
                axpy(1.0, &self.grad, doc_vec);
                loss
            }
            Doc2VecMode::PvDm => {
                self.hidden.copy_from_slice(doc_vec);
                let mut n = 1usize;
                for w in context_window(encoded, pos, self.config.window) {
                    axpy(1.0, self.words.get().row(w), &mut self.hidden);
                    n += 1;
                }
                let scale = 1.0 / n as f64;
                self.hidden.iter_mut().for_each(|h| *h *= scale);
                let loss = negative_sampling_step(
                    &self.hidden,
                    &mut self.grad,
                    &mut self.output,
                    target,
                    self.noise,
                    self.config.negative_samples,
                    alpha,
                    rng,
                );
                // d(mean)/d(input) = 1/n for each averaged input.
                axpy(scale, &self.grad, doc_vec);
                if let Some(words) = self.words.get_mut() {
                    for w in context_window(encoded, pos, self.config.window) {
                        axpy(scale, &self.grad, words.row_mut(w));
                    }
                }
                loss
            }
        }
    }
}

fn learning_rate(config: &Doc2VecConfig, done: usize, total: usize) -> f64 {
    let progress = if total == 0 { 0.0 } else { done as f64 / total as f64 };
    config.learning_rate - (config.learning_rate - config.min_learning_rate) * progress
}

impl Doc2VecModel {
    pub fn train(docs: &[TaggedDocument], config: &Doc2VecConfig) -> Result<Self, Doc2VecError> {
        config.validate()?;
        let mut seen = HashSet::new();
        for d in docs {
            if !seen.insert(d.tag.as_str()) {
                return Err(Doc2VecError::DuplicateTag(d.tag.clone()));
            }
        }
        let vocab = build_vocab(docs, config.min_word_count)?;
        let noise = NoiseDistribution::from_counts(&vocab.counts);
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let dim = config.dim;

        let mut doc_vectors = Matrix::from_fn(docs.len(), dim, uniform_init(&mut rng, dim));
        let mut word_vectors = Matrix::from_fn(vocab.len(), dim, uniform_init(&mut rng, dim));
        let mut output_weights = Matrix::from_fn(vocab.len(), dim, uniform_init(&mut rng, dim));

        let encoded: Vec<Vec<usize>> = docs.iter().map(|d| vocab.encode(&d.tokens)).collect();
        let tokens_per_epoch: usize = encoded.iter().map(Vec::len).sum();
        let total = tokens_per_epoch * config.epochs;

        let mut trainer = Trainer {
            config,
            noise: &noise,
            output: Weights::Trainable(&mut output_weights),
            words: Weights::Trainable(&mut word_vectors),
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
        };
        let mut order: Vec<usize> = (0..docs.len()).collect();
        let mut loss_trace = Vec::with_capacity(config.epochs);
        let mut done = 0usize;
        for epoch in 0..config.epochs {
            order.shuffle(&mut rng);
            let mut loss_sum = 0.0;
            for &d in &order {
                let doc = &encoded[d];
                for pos in 0..doc.len() {
                    let alpha = learning_rate(config, done, total);
                    loss_sum += trainer.step(doc_vectors.row_mut(d), doc, pos, alpha, &mut rng);
                    done += 1;
                }
            }
            let mean = loss_sum / tokens_per_epoch.max(1) as f64;
            if !mean.is_finite() {
                return Err(Doc2VecError::Divergence { epoch });
            }
            loss_trace.push(mean);
        }
        if !(doc_vectors.is_finite() && word_vectors.is_finite() && output_weights.is_finite()) {
            return Err(Doc2VecError::Divergence {
                epoch: config.epochs - 1,
            });
        }

        Ok(Self {
            config: config.clone(),
            vocab,
            noise,
            tags: docs.iter().map(|d| d.tag.clone()).collect(),
            word_vectors,
            output_weights,
            doc_vectors,
            loss_trace,
        })
    }

    /// Embeds an unseen document. Weights are not modified.
    pub fn infer_vector(&self, doc: &TokenizedDocument, epochs: usize, seed: u64) -> InferredVector {
        let dim = self.config.dim;
        let encoded = self.vocab.encode(doc);
        if encoded.is_empty() {
            return InferredVector {
                vector: vec![0.0; dim],
                warning: Some(InferenceWarning::NoKnownWords),
            };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vector: Vec<f64> = {
            let mut init = uniform_init(&mut rng, dim);
            (0..dim).map(|c| init(0, c)).collect()
        };

        let mut trainer = Trainer {
            config: &self.config,
            noise: &self.noise,
            output: Weights::Frozen(&self.output_weights),
            words: Weights::Frozen(&self.word_vectors),
            hidden: vec![0.0; dim],
            grad: vec![0.0; dim],
        };
        let total = encoded.len() * epochs;
        let mut done = 0;
        for _ in 0..epochs {
            for pos in 0..encoded.len() {
                let alpha = learning_rate(&self.config, done, total);
                trainer.step(&mut vector, &encoded, pos, alpha, &mut rng);
                done += 1;
            }
        }
        InferredVector { vector, warning: None }
    }

    /// Top-`k` training documents by cosine similarity to `tag`, excluding
    /// `tag` itself. Ties keep tag order.
    pub fn most_similar(&self, tag: &str, k: usize) -> Result<Vec<(String, f64)>, Doc2VecError> {
        if k < 1 {
            return Err(Doc2VecError::InvalidK);
        }
        let q = self.tag_index(tag).ok_or_else(|| Doc2VecError::UnknownTag(tag.to_string()))?;
        let query = self.doc_vectors.row(q);
        let mut scored: Vec<(usize, f64)> = (0..self.tags.len())
            .filter(|&i| i != q)
            .map(|i| (i, cosine(query, self.doc_vectors.row(i))))
            .collect();
        scored.sort_by(|a, b| {
            b.1.partial_cmp(&a.1)
                .unwrap_or(std::cmp::Ordering::Equal)
                .then_with(|| self.tags[a.0].cmp(&self.tags[b.0]))
        });
        Ok(scored
            .into_iter()
            .take(k)
            .map(|(i, s)| (self.tags[i].clone(), s))
            .collect())
    }

    /// Nearest training document to an arbitrary vector.
    pub fn nearest_tag(&self, vector: &[f64]) -> Option<&str> {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..self.tags.len() {
            let s = cosine(vector, self.doc_vectors.row(i));
            if best.map_or(true, |(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        best.map(|(i, _)| self.tags[i].as_str())
    }

    pub fn tag_index(&self, tag: &str) -> Option<usize> {
        self.tags.iter().position(|t| t == tag)
    }

    pub fn doc_vector(&self, tag: &str) -> Option<&[f64]> {
        self.tag_index(tag).map(|i| self.doc_vectors.row(i))
    }

    pub fn config(&self) -> &Doc2VecConfig {
        &self.config
    }

    pub fn vocab(&self) -> &WordVocab {
        &self.vocab
    }

    pub fn noise_distribution(&self) -> &NoiseDistribution {
        &self.noise
    }

    pub fn tags(&self) -> &[String] {
        &self.tags
    }

    pub fn doc_vectors(&self) -> &Matrix {
        &self.doc_vectors
    }

    pub fn word_vectors(&self) -> &Matrix {
        &self.word_vectors
    }

    pub fn output_weights(&self) -> &Matrix {
        &self.output_weights
    }

    /// Mean negative-sampling loss per epoch.
    pub fn loss_trace(&self) -> &[f64] {
        &self.loss_trace
    }

    pub fn dim(&self) -> usize {
        self.config.dim
    }
}

#[derive(Serialize, Deserialize)]
struct Doc2VecModelRepr {
    config: Doc2VecConfig,
    words: Vec<String>,
    counts: Vec<u64>,
    tags: Vec<String>,
    word_vectors: Matrix,
    output_weights: Matrix,
    doc_vectors: Matrix,
    #[serde(with = "crate::matrix::f64_block")]
    loss_trace: Vec<f64>,
}

impl From<Doc2VecModel> for Doc2VecModelRepr {
    fn from(m: Doc2VecModel) -> Self {
        Self {
            config: m.config,
            words: m.vocab.words,
            counts: m.vocab.counts,
            tags: m.tags,
            word_vectors: m.word_vectors,
            output_weights: m.output_weights,
            doc_vectors: m.doc_vectors,
            loss_trace: m.loss_trace,
        }
    }
}

impl TryFrom<Doc2VecModelRepr> for Doc2VecModel {
    type Error = Doc2VecError;

    fn try_from(r: Doc2VecModelRepr) -> Result<Self, Self::Error> {
        r.config.validate()?;
        let corrupt = |m: &str| Err(Doc2VecError::Corrupt(m.to_string()));
        if r.words.is_empty() || r.words.len() != r.counts.len() {
            return corrupt("vocabulary words/counts mismatch");
        }
        let dim = r.config.dim;
        if r.word_vectors.rows() != r.words.len()
            || r.output_weights.rows() != r.words.len()
            || r.doc_vectors.rows() != r.tags.len()
            || [&r.word_vectors, &r.output_weights, &r.doc_vectors]
                .iter()
                .any(|m| m.cols() != dim)
        {
            return corrupt("matrix shape does not match vocabulary/dim");
        }
        let noise = NoiseDistribution::from_counts(&r.counts);
        Ok(Self {
            config: r.config,
            vocab: WordVocab::from_sorted(r.words, r.counts),
            noise,
            tags: r.tags,
            word_vectors: r.word_vectors,
            output_weights: r.output_weights,
            doc_vectors: r.doc_vectors,
            loss_trace: r.loss_trace,
        })
    }
}
