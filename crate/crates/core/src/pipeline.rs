//! Text → features → classifier, fitted on a training split only.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::{self, FeatureMatrix, ModelKind, TrainConfig, TrainedClassifier};
use crate::corpus::Dataset;
use crate::doc2vec::{Doc2VecConfig, Doc2VecModel, TaggedDocument};
use crate::matrix::f64_block;
use crate::textprep::{clean_and_tokenize, CleaningOptions, TokenizedDocument};
use crate::tfidf::{TfidfConfig, TfidfModel};
use crate::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeaturizerKind {
    Tfidf,
    Doc2vec,
}

impl FeaturizerKind {
    pub const ALL: [FeaturizerKind; 2] = [FeaturizerKind::Tfidf, FeaturizerKind::Doc2vec];

    pub fn name(self) -> &'static str {
        match self {
            FeaturizerKind::Tfidf => "tfidf",
            FeaturizerKind::Doc2vec => "doc2vec",
        }
    }

    /// The model families compared on this representation. Multinomial NB
    /// needs non-negative features, so Doc2Vec pairs with Gaussian NB.
    pub fn compared_models(self) -> [ModelKind; 5] {
        let nb = match self {
            FeaturizerKind::Tfidf => ModelKind::MultinomialNb,
            FeaturizerKind::Doc2vec => ModelKind::GaussianNb,
        };
        [
            ModelKind::LogisticRegression,
            ModelKind::LinearSvc,
            ModelKind::Mlp,
            nb,
            ModelKind::RandomForest,
        ]
    }
}

impl fmt::Display for FeaturizerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for FeaturizerKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "tfidf" => Ok(FeaturizerKind::Tfidf),
            "doc2vec" => Ok(FeaturizerKind::Doc2vec),
            other => Err(format!("unknown featurizer {other:?} (expected tfidf or doc2vec)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[derive(Default)]
pub struct FeaturizerConfig {
    pub tfidf: TfidfConfig,
    pub doc2vec: Doc2VecConfig,
    /// Standardize Doc2Vec features with train-split statistics.
    pub standardize: bool,
}


/// Per-feature affine map to zero mean and unit variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    #[serde(with = "f64_block")]
    pub mean: Vec<f64>,
    /// Population standard deviation, with 0 replaced by 1.
    #[serde(with = "f64_block")]
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(rows: &[Vec<f64>]) -> Self {
        let dim = rows.first().map_or(0, Vec::len);
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..dim).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let scale = (0..dim)
            .map(|j| {
                let var = rows.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                if var > 0.0 {
                    var.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { mean, scale }
    }

    pub fn apply(&self, row: &mut [f64]) {
        for ((v, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *v = (*v - m) / s;
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Featurizer {
    Tfidf {
        model: TfidfModel,
    },
    Doc2vec {
        model: Doc2VecModel,
        standardizer: Option<Standardizer>,
    },
}

/// Features for a batch of documents; `low_signal[i]` is set when document
/// `i` had no in-vocabulary tokens and mapped to the zero vector.
#[derive(Debug, Clone)]
pub struct Transformed {
    pub features: FeatureMatrix,
    pub low_signal: Vec<bool>,
}

impl Featurizer {
    /// Fits on `docs`; `tags` name the documents for Doc2Vec.
    pub fn fit(
        kind: FeaturizerKind,
        tags: &[String],
        docs: &[TokenizedDocument],
        config: &FeaturizerConfig,
    ) -> Result<Self, Error> {
        match kind {
            FeaturizerKind::Tfidf => Ok(Featurizer::Tfidf {
                model: TfidfModel::fit(docs, &config.tfidf)?,
            }),
            FeaturizerKind::Doc2vec => {
                let tagged: Vec<TaggedDocument> = tags
                    .iter()
                    .zip(docs)
                    .map(|(t, d)| TaggedDocument::new(t.clone(), d.clone()))
                    .collect();
                let model = Doc2VecModel::train(&tagged, &config.doc2vec)?;
                let mut f = Featurizer::Doc2vec {
                    model,
                    standardizer: None,
                };
                if config.standardize {
                    let rows = f.raw_doc2vec_rows(docs).0;
                    if let Featurizer::Doc2vec { standardizer, .. } = &mut f {
                        *standardizer = Some(Standardizer::fit(&rows));
                    }
                }
                Ok(f)
            }
        }
    }

    pub fn kind(&self) -> FeaturizerKind {
        match self {
            Featurizer::Tfidf { .. } => FeaturizerKind::Tfidf,
            Featurizer::Doc2vec { .. } => FeaturizerKind::Doc2vec,
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Featurizer::Tfidf { model } => model.dim(),
            Featurizer::Doc2vec { model, .. } => model.dim(),
        }
    }

    fn raw_doc2vec_rows(&self, docs: &[TokenizedDocument]) -> (Vec<Vec<f64>>, Vec<bool>) {
        let Featurizer::Doc2vec { model, .. } = self else {
            unreachable!("doc2vec featurizer")
        };
        let cfg = model.config();
        docs.iter()
            .map(|d| {
                let inferred = model.infer_vector(d, cfg.infer_epochs, cfg.seed);
                (inferred.vector, inferred.warning.is_some())
            })
            .unzip()
    }

    pub fn transform(&self, docs: &[TokenizedDocument]) -> Result<Transformed, Error> {
        match self {
            Featurizer::Tfidf { model } => {
                let rows = model.transform_corpus(docs);
                let low_signal = rows.iter().map(|r| r.is_zero()).collect();
                Ok(Transformed {
                    features: FeatureMatrix::sparse(rows, model.dim())?,
                    low_signal,
                })
            }
            Featurizer::Doc2vec { model, standardizer } => {
                let (mut rows, low_signal) = self.raw_doc2vec_rows(docs);
                if let Some(s) = standardizer {
                    rows.iter_mut().for_each(|r| s.apply(r));
                }
                Ok(Transformed {
                    features: FeatureMatrix::dense_with_dim(rows, model.dim())?,
                    low_signal,
                })
            }
        }
    }
}

pub fn tokenize_all<S: AsRef<str>>(texts: &[S], cleaning: &CleaningOptions) -> Vec<TokenizedDocument> {
    texts.iter().map(|t| clean_and_tokenize(t.as_ref(), cleaning)).collect()
}

/// Train and test features produced by a featurizer fitted on the training
/// split alone.
#[derive(Debug, Clone)]
pub struct PreparedFeatures {
    pub featurizer: Featurizer,
    pub train: FeatureMatrix,
    pub train_labels: Vec<u32>,
    pub test: FeatureMatrix,
    pub test_labels: Vec<u32>,
}

fn labels_u32(ds: &Dataset) -> Vec<u32> {
    ds.labels().into_iter().map(u32::from).collect()
}

pub fn prepare_features(
    train: &Dataset,
    test: &Dataset,
    kind: FeaturizerKind,
    cleaning: &CleaningOptions,
    config: &FeaturizerConfig,
) -> Result<PreparedFeatures, Error> {
    let train_docs = tokenize_all(&train.documents(), cleaning);
    let tags: Vec<String> = train.records().iter().map(|r| r.id.clone()).collect();
    let featurizer = Featurizer::fit(kind, &tags, &train_docs, config)?;
    let x_train = featurizer.transform(&train_docs)?.features;
    let x_test = featurizer.transform(&tokenize_all(&test.documents(), cleaning))?.features;
    Ok(PreparedFeatures {
        featurizer,
        train: x_train,
        train_labels: labels_u32(train),
        test: x_test,
        test_labels: labels_u32(test),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Prediction {
    pub cluster: u32,
    /// The text had no in-vocabulary tokens.
    pub low_signal: bool,
}

/// Everything needed to classify raw text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Pipeline {
    pub cleaning: CleaningOptions,
    pub featurizer: Featurizer,
    pub classifier: TrainedClassifier,
}

impl Pipeline {
    pub fn fit(
        train: &Dataset,
        kind: FeaturizerKind,
        model: ModelKind,
        cleaning: &CleaningOptions,
        featurizer_config: &FeaturizerConfig,
        train_config: &TrainConfig,
    ) -> Result<Self, Error> {
        let docs = tokenize_all(&train.documents(), cleaning);
        let tags: Vec<String> = train.records().iter().map(|r| r.id.clone()).collect();
        let featurizer = Featurizer::fit(kind, &tags, &docs, featurizer_config)?;
        let x = featurizer.transform(&docs)?.features;
        let classifier = classifiers::train(model, &x, &labels_u32(train), train_config)?;
        Ok(Self {
            cleaning: cleaning.clone(),
            featurizer,
            classifier,
        })
    }

    pub fn predict<S: AsRef<str>>(&self, texts: &[S]) -> Result<Vec<Prediction>, Error> {
        let t = self.featurizer.transform(&tokenize_all(texts, &self.cleaning))?;
        let labels = self.classifier.predict(&t.features)?;
        Ok(labels
            .into_iter()
            .zip(t.low_signal)
            .map(|(cluster, low_signal)| Prediction { cluster, low_signal })
            .collect())
    }

    pub fn predict_dataset(&self, ds: &Dataset) -> Result<Vec<u32>, Error> {
        Ok(self.predict(&ds.documents())?.into_iter().map(|p| p.cluster).collect())
    }
}
