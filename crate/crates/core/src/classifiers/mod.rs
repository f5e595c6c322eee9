//! The classifier families with a uniform train/predict contract.
//!
//! Every trainer takes a [`FeatureMatrix`] (sparse or dense rows) and one
//! `u32` class id per row, and returns a [`TrainedClassifier`]. Classes are
//! kept sorted; whenever two classes tie (decision value, probability or
//! vote) the lower class id wins.

use std::borrow::Cow;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseVector;

pub mod forest;
pub mod linear;
pub mod mlp;
pub mod naive_bayes;
mod optim;

pub use forest::{DecisionTree, MaxFeatures, RandomForest, RandomForestConfig, TreeNode};
pub use linear::{LinearModel, LinearSvcConfig, LogisticConfig};
pub use mlp::{Layer, Mlp, MlpConfig};
pub use naive_bayes::{GaussianNb, GaussianNbConfig, MultinomialNb, MultinomialNbConfig};

#[derive(Debug, Error)]
pub enum ClassifierError {
    #[error("need at least two classes to train, got {0}")]
    SingleClass(usize),
    #[error("{rows} feature rows but {labels} labels")]
    LabelMismatch { rows: usize, labels: usize },
    #[error("cannot train on an empty feature matrix")]
    NoSamples,
    #[error("feature dimensionality mismatch: model expects {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("row {row} has {got} features, expected {expected}")]
    RaggedRows { row: usize, expected: usize, got: usize },
    #[error("multinomial naive Bayes needs non-negative features; found {value} at row {row}, column {col}")]
    NegativeFeature { row: usize, col: usize, value: f64 },
    #[error("non-finite feature value at row {row}, column {col}")]
    NonFiniteFeature { row: usize, col: usize },
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("invalid {kind} config: {message}")]
    InvalidConfig { kind: &'static str, message: String },
    #[error("corrupt classifier: {0}")]
    Corrupt(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Rows {
    Sparse(Vec<SparseVector>),
    Dense(Vec<Vec<f64>>),
}

/// Feature rows of one shared dimensionality.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    dim: usize,
    rows: Rows,
}

impl FeatureMatrix {
    pub fn sparse(rows: Vec<SparseVector>, dim: usize) -> Result<Self, ClassifierError> {
        for (i, r) in rows.iter().enumerate() {
            if r.min_dim() > dim {
                return Err(ClassifierError::RaggedRows {
                    row: i,
                    expected: dim,
                    got: r.min_dim(),
                });
            }
            if let Some(j) = r.values().iter().position(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFiniteFeature { row: i, col: r.indices()[j] });
            }
        }
        Ok(Self {
            dim,
            rows: Rows::Sparse(rows),
        })
    }

    /// Dense rows; `dim` is taken from the first row (0 when empty).
    pub fn dense(rows: Vec<Vec<f64>>) -> Result<Self, ClassifierError> {
        let dim = rows.first().map_or(0, Vec::len);
        Self::dense_with_dim(rows, dim)
    }

    pub fn dense_with_dim(rows: Vec<Vec<f64>>, dim: usize) -> Result<Self, ClassifierError> {
        for (i, r) in rows.iter().enumerate() {
            if r.len() != dim {
                return Err(ClassifierError::RaggedRows {
                    row: i,
                    expected: dim,
                    got: r.len(),
                });
            }
            if let Some(j) = r.iter().position(|v| !v.is_finite()) {
                return Err(ClassifierError::NonFiniteFeature { row: i, col: j });
            }
        }
        Ok(Self {
            dim,
            rows: Rows::Dense(rows),
        })
    }

    pub fn n_rows(&self) -> usize {
        match &self.rows {
            Rows::Sparse(r) => r.len(),
            Rows::Dense(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.n_rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.rows, Rows::Sparse(_))
    }

    pub fn dot_row(&self, i: usize, w: &[f64]) -> f64 {
        match &self.rows {
            Rows::Sparse(r) => r[i].dot_dense(w),
            Rows::Dense(r) => crate::matrix::dot(&r[i], w),
        }
    }

    /// `y += alpha * row_i`
    pub fn axpy_row(&self, i: usize, alpha: f64, y: &mut [f64]) {
        match &self.rows {
            Rows::Sparse(r) => {
                for (j, v) in r[i].iter() {
                    y[j] += alpha * v;
                }
            }
            Rows::Dense(r) => crate::matrix::axpy(alpha, &r[i], y),
        }
    }

    pub fn row_dense(&self, i: usize) -> Cow<'_, [f64]> {
        match &self.rows {
            Rows::Sparse(r) => Cow::Owned(r[i].to_dense(self.dim)),
            Rows::Dense(r) => Cow::Borrowed(&r[i]),
        }
    }

    /// Non-zero entries of row `i` as `(column, value)`.
    pub fn row_entries(&self, i: usize) -> Vec<(usize, f64)> {
        match &self.rows {
            Rows::Sparse(r) => r[i].iter().collect(),
            Rows::Dense(r) => r[i].iter().copied().enumerate().filter(|&(_, v)| v != 0.0).collect(),
        }
    }

    pub fn squared_norm(&self, i: usize) -> f64 {
        match &self.rows {
            Rows::Sparse(r) => r[i].values().iter().map(|v| v * v).sum(),
            Rows::Dense(r) => r[i].iter().map(|v| v * v).sum(),
        }
    }

    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        (0..self.n_rows()).map(|i| self.row_dense(i).into_owned()).collect()
    }

    fn check_dim(&self, expected: usize) -> Result<(), ClassifierError> {
        if self.dim != expected {
            return Err(ClassifierError::DimensionMismatch {
                expected,
                got: self.dim,
            });
        }
        Ok(())
    }
}

/// Sorted distinct class ids and each row's position among them.
#[derive(Debug, Clone)]
pub(crate) struct EncodedLabels {
    pub classes: Vec<u32>,
    pub y: Vec<usize>,
}

pub(crate) fn encode_labels(
    features: &FeatureMatrix,
    labels: &[u32],
    min_classes: usize,
) -> Result<EncodedLabels, ClassifierError> {
    if features.n_rows() != labels.len() {
        return Err(ClassifierError::LabelMismatch {
            rows: features.n_rows(),
            labels: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(ClassifierError::NoSamples);
    }
    let mut classes = labels.to_vec();
    classes.sort_unstable();
    classes.dedup();
    if classes.len() < min_classes {
        return Err(ClassifierError::SingleClass(classes.len()));
    }
    let y = labels
        .iter()
        .map(|l| classes.binary_search(l).expect("label is present"))
        .collect();
    Ok(EncodedLabels { classes, y })
}

/// Index of the maximum; the first (lowest-class) index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

pub(crate) fn softmax_in_place(z: &mut [f64]) {
    let max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in z.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in z.iter_mut() {
        *v /= sum;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModelKind {
    #[serde(rename = "linear_svc")]
    LinearSvc,
    #[serde(rename = "logreg")]
    LogisticRegression,
    #[serde(rename = "multinomial_nb")]
    MultinomialNb,
    #[serde(rename = "gaussian_nb")]
    GaussianNb,
    #[serde(rename = "random_forest")]
    RandomForest,
    #[serde(rename = "mlp")]
    Mlp,
}

impl ModelKind {
    pub const ALL: [ModelKind; 6] = [
        ModelKind::LogisticRegression,
        ModelKind::LinearSvc,
        ModelKind::Mlp,
        ModelKind::MultinomialNb,
        ModelKind::GaussianNb,
        ModelKind::RandomForest,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::LinearSvc => "linear_svc",
            ModelKind::LogisticRegression => "logreg",
            ModelKind::MultinomialNb => "multinomial_nb",
            ModelKind::GaussianNb => "gaussian_nb",
            ModelKind::RandomForest => "random_forest",
            ModelKind::Mlp => "mlp",
        }
    }

    /// Human-readable name for reports.
    pub fn display_name(self) -> &'static str {
        match self {
            ModelKind::LinearSvc => "Linear SVC",
            ModelKind::LogisticRegression => "Logistic Regression",
            ModelKind::MultinomialNb => "Multinomial NB",
            ModelKind::GaussianNb => "Gaussian NB",
            ModelKind::RandomForest => "Random Forest",
            ModelKind::Mlp => "Multilayer Perceptron",
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "linear_svc" | "svc" => Ok(ModelKind::LinearSvc),
            "logreg" | "logistic_regression" => Ok(ModelKind::LogisticRegression),
            "multinomial_nb" => Ok(ModelKind::MultinomialNb),
            "gaussian_nb" => Ok(ModelKind::GaussianNb),
            "random_forest" => Ok(ModelKind::RandomForest),
            "mlp" => Ok(ModelKind::Mlp),
            other => Err(format!(
                "unknown model {other:?} (expected linear_svc, logreg, multinomial_nb, gaussian_nb, random_forest or mlp)"
            )),
        }
    }
}

/// Hyperparameters for every family.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub linear_svc: LinearSvcConfig,
    pub logistic_regression: LogisticConfig,
    pub multinomial_nb: MultinomialNbConfig,
    pub gaussian_nb: GaussianNbConfig,
    pub random_forest: RandomForestConfig,
    pub mlp: MlpConfig,
}

impl TrainConfig {
    /// Sets the seed of every seeded trainer.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.random_forest.seed = seed;
        self.mlp.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    LinearSvc(LinearModel),
    LogisticRegression(LinearModel),
    MultinomialNb(MultinomialNb),
    GaussianNb(GaussianNb),
    RandomForest(RandomForest),
    Mlp(Mlp),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedClassifier {
    classes: Vec<u32>,
    n_features: usize,
    params: ModelParams,
}

impl TrainedClassifier {
    pub fn kind(&self) -> ModelKind {
        match self.params {
            ModelParams::LinearSvc(_) => ModelKind::LinearSvc,
            ModelParams::LogisticRegression(_) => ModelKind::LogisticRegression,
            ModelParams::MultinomialNb(_) => ModelKind::MultinomialNb,
            ModelParams::GaussianNb(_) => ModelKind::GaussianNb,
            ModelParams::RandomForest(_) => ModelKind::RandomForest,
            ModelParams::Mlp(_) => ModelKind::Mlp,
        }
    }

    pub fn classes(&self) -> &[u32] {
        &self.classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    /// Per-class scores used for the argmax: decision values, log joint
    /// likelihoods, vote counts or probabilities depending on the family.
    pub fn scores(&self, features: &FeatureMatrix) -> Result<Vec<Vec<f64>>, ClassifierError> {
        features.check_dim(self.n_features)?;
        Ok((0..features.n_rows())
            .map(|i| match &self.params {
                ModelParams::LinearSvc(m) | ModelParams::LogisticRegression(m) => m.decision_row(features, i),
                ModelParams::MultinomialNb(m) => m.joint_log_likelihood_row(features, i),
                ModelParams::GaussianNb(m) => m.joint_log_likelihood(&features.row_dense(i)),
                ModelParams::RandomForest(m) => m.votes(&features.row_dense(i)),
                ModelParams::Mlp(m) => m.forward_proba_row(features, i),
            })
            .collect())
    }

    pub fn predict(&self, features: &FeatureMatrix) -> Result<Vec<u32>, ClassifierError> {
        Ok(self
            .scores(features)?
            .iter()
            .map(|s| self.classes[argmax(s)])
            .collect())
    }

    /// Class probabilities for the probabilistic families (logistic
    /// regression, both naive Bayes variants, MLP); `None` otherwise.
    pub fn predict_proba(&self, features: &FeatureMatrix) -> Result<Option<Vec<Vec<f64>>>, ClassifierError> {
        let probabilistic = matches!(
            self.params,
            ModelParams::LogisticRegression(_)
                | ModelParams::MultinomialNb(_)
                | ModelParams::GaussianNb(_)
                | ModelParams::Mlp(_)
        );
        if !probabilistic {
            features.check_dim(self.n_features)?;
            return Ok(None);
        }
        let mut scores = self.scores(features)?;
        if !matches!(self.params, ModelParams::Mlp(_)) {
            scores.iter_mut().for_each(|s| softmax_in_place(s));
        }
        Ok(Some(scores))
    }
}

pub fn train_linear_svc(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &LinearSvcConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 2)?;
    let model = linear::train_linear_svc(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::LinearSvc(model)))
}

pub fn train_logistic_regression(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &LogisticConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 2)?;
    let model = linear::train_logistic(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::LogisticRegression(model)))
}

pub fn train_multinomial_nb(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &MultinomialNbConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 1)?;
    let model = naive_bayes::train_multinomial(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::MultinomialNb(model)))
}

pub fn train_gaussian_nb(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &GaussianNbConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 1)?;
    let model = naive_bayes::train_gaussian(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::GaussianNb(model)))
}

pub fn train_random_forest(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &RandomForestConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 1)?;
    let model = forest::train_forest(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::RandomForest(model)))
}

pub fn train_mlp(
    features: &FeatureMatrix,
    labels: &[u32],
    config: &MlpConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    let enc = encode_labels(features, labels, 2)?;
    let model = mlp::train(features, &enc, config)?;
    Ok(finish(enc, features, ModelParams::Mlp(model)))
}

/// Dispatches on `kind`.
pub fn train(
    kind: ModelKind,
    features: &FeatureMatrix,
    labels: &[u32],
    config: &TrainConfig,
) -> Result<TrainedClassifier, ClassifierError> {
    match kind {
        ModelKind::LinearSvc => train_linear_svc(features, labels, &config.linear_svc),
        ModelKind::LogisticRegression => train_logistic_regression(features, labels, &config.logistic_regression),
        ModelKind::MultinomialNb => train_multinomial_nb(features, labels, &config.multinomial_nb),
        ModelKind::GaussianNb => train_gaussian_nb(features, labels, &config.gaussian_nb),
        ModelKind::RandomForest => train_random_forest(features, labels, &config.random_forest),
        ModelKind::Mlp => train_mlp(features, labels, &config.mlp),
    }
}

fn finish(enc: EncodedLabels, features: &FeatureMatrix, params: ModelParams) -> TrainedClassifier {
    TrainedClassifier {
        classes: enc.classes,
        n_features: features.dim(),
        params,
    }
}
