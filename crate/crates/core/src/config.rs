//! Run configuration as flat dotted keys.
//!
//! Every setting has a key such as `tfidf.min_df` or `mlp.hidden_layers`.
//! Layers are merged as defaults ← config file ← individual overrides; a key
//! that is not part of the default configuration is rejected. The seed is
//! a single top-level key and is copied into every seeded component.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

use crate::classifiers::{
    GaussianNbConfig, LinearSvcConfig, LogisticConfig, MlpConfig, ModelKind, MultinomialNbConfig, RandomForestConfig,
    TrainConfig,
};
use crate::corpus::SplitConfig;
use crate::doc2vec::Doc2VecConfig;
use crate::eval::Averaging;
use crate::pipeline::{FeaturizerConfig, FeaturizerKind};
use crate::textprep::{CleaningOptions, StopwordList, TextError};
use crate::tfidf::TfidfConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unknown config key {0:?}")]
    UnknownKey(String),
    #[error("config key {0:?} is derived from the top-level \"seed\" and cannot be set directly")]
    ReservedKey(String),
    #[error("invalid value for {key:?}: {message}")]
    InvalidValue { key: String, message: String },
    #[error("expected key=value, got {0:?}")]
    MalformedOverride(String),
    #[error("config file {path}: {message}")]
    File { path: PathBuf, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Text cleaning switches; the stopword list is loaded from
/// `stopwords_file` when set, otherwise the bundled list is used.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CleaningSettings {
    pub lowercase: bool,
    pub strip_punctuation: bool,
    pub strip_digits: bool,
    pub remove_stopwords: bool,
    pub stopwords_file: Option<PathBuf>,
}

impl Default for CleaningSettings {
    fn default() -> Self {
        Self {
            lowercase: true,
            strip_punctuation: true,
            strip_digits: true,
            remove_stopwords: true,
            stopwords_file: None,
        }
    }
}

impl CleaningSettings {
    pub fn resolve(&self) -> Result<CleaningOptions, TextError> {
        let stopwords = match &self.stopwords_file {
            Some(p) => StopwordList::from_file(p)?,
            None => StopwordList::bundled(),
        };
        Ok(CleaningOptions {
            lowercase: self.lowercase,
            strip_punctuation: self.strip_punctuation,
            strip_digits: self.strip_digits,
            remove_stopwords: self.remove_stopwords,
            stopwords,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub min_count: usize,
    pub train_fraction: f64,
    pub featurizer: FeaturizerKind,
    pub model: ModelKind,
    pub averaging: Averaging,
    pub cleaning: CleaningSettings,
    pub tfidf: TfidfConfig,
    pub doc2vec: Doc2VecConfig,
    pub standardize: bool,
    pub linear_svc: LinearSvcConfig,
    pub logreg: LogisticConfig,
    pub multinomial_nb: MultinomialNbConfig,
    pub gaussian_nb: GaussianNbConfig,
    pub random_forest: RandomForestConfig,
    pub mlp: MlpConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 42,
            min_count: 3,
            train_fraction: 0.7,
            featurizer: FeaturizerKind::Tfidf,
            model: ModelKind::LinearSvc,
            averaging: Averaging::Weighted,
            cleaning: CleaningSettings::default(),
            tfidf: TfidfConfig::default(),
            doc2vec: Doc2VecConfig::default(),
            standardize: false,
            linear_svc: LinearSvcConfig::default(),
            logreg: LogisticConfig::default(),
            multinomial_nb: MultinomialNbConfig::default(),
            gaussian_nb: GaussianNbConfig::default(),
            random_forest: RandomForestConfig::default(),
            mlp: MlpConfig::default(),
        }
        .reseeded()
    }
}

const RESERVED: [&str; 3] = ["doc2vec.seed", "random_forest.seed", "mlp.seed"];

fn flatten_into(prefix: &str, v: &Value, out: &mut BTreeMap<String, Value>) {
    match v {
        Value::Object(map) => {
            for (k, child) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten_into(&key, child, out);
            }
        }
        leaf => {
            out.insert(prefix.to_string(), leaf.clone());
        }
    }
}

fn set_path(tree: &mut Value, key: &str, value: Value) {
    let mut at = tree;
    let mut parts = key.split('.').peekable();
    while let Some(p) = parts.next() {
        let obj = at.as_object_mut().expect("path follows the default layout");
        if parts.peek().is_none() {
            obj.insert(p.to_string(), value);
            return;
        }
        at = obj.get_mut(p).expect("path follows the default layout");
    }
}

impl RunConfig {
    fn reseeded(mut self) -> Self {
        self.doc2vec.seed = self.seed;
        self.random_forest.seed = self.seed;
        self.mlp.seed = self.seed;
        self
    }

    /// All settable keys with their values.
    pub fn to_flat(&self) -> BTreeMap<String, Value> {
        let mut out = BTreeMap::new();
        flatten_into("", &serde_json::to_value(self).expect("config serializes"), &mut out);
        for r in RESERVED {
            out.remove(r);
        }
        out
    }

    pub fn keys() -> Vec<String> {
        Self::default().to_flat().into_keys().collect()
    }

    /// Sets one dotted key. The whole configuration is re-validated.
    pub fn set(&mut self, key: &str, value: Value) -> Result<(), ConfigError> {
        if RESERVED.contains(&key) {
            return Err(ConfigError::ReservedKey(key.to_string()));
        }
        if !self.to_flat().contains_key(key) {
            return Err(ConfigError::UnknownKey(key.to_string()));
        }
        let mut tree = serde_json::to_value(&*self).expect("config serializes");
        set_path(&mut tree, key, value);
        let updated: RunConfig = serde_json::from_value(tree).map_err(|e| ConfigError::InvalidValue {
            key: key.to_string(),
            message: e.to_string(),
        })?;
        *self = updated.reseeded();
        Ok(())
    }

    /// `key=value`, where the value is parsed as JSON and otherwise taken
    /// as a plain string.
    pub fn set_from_str(&mut self, assignment: &str) -> Result<(), ConfigError> {
        let (key, raw) = assignment
            .split_once('=')
            .ok_or_else(|| ConfigError::MalformedOverride(assignment.to_string()))?;
        let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
        self.set(key.trim(), value)
    }

    /// Applies a flat JSON object of `key: value` pairs.
    pub fn merge_object(&mut self, map: &Map<String, Value>) -> Result<(), ConfigError> {
        for (k, v) in map {
            self.set(k, v.clone())?;
        }
        Ok(())
    }

    pub fn merge_file(&mut self, path: &Path) -> Result<(), ConfigError> {
        let file_err = |message: String| ConfigError::File {
            path: path.to_path_buf(),
            message,
        };
        let text = std::fs::read_to_string(path).map_err(|e| file_err(e.to_string()))?;
        let value: Value = serde_json::from_str(&text).map_err(|e| file_err(e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(file_err("expected a JSON object of key/value pairs".into()));
        };
        self.merge_object(&map)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: &dyn std::fmt::Display| ConfigError::Invalid(e.to_string());
        if self.min_count < 1 {
            return Err(ConfigError::Invalid("min_count must be >= 1".into()));
        }
        self.split_config().validate().map_err(|e| invalid(&e))?;
        self.tfidf.validate().map_err(|e| invalid(&e))?;
        self.doc2vec.validate().map_err(|e| invalid(&e))?;
        self.linear_svc.validate().map_err(|e| invalid(&e))?;
        self.logreg.validate().map_err(|e| invalid(&e))?;
        self.multinomial_nb.validate().map_err(|e| invalid(&e))?;
        self.gaussian_nb.validate().map_err(|e| invalid(&e))?;
        self.random_forest.validate().map_err(|e| invalid(&e))?;
        self.mlp.validate().map_err(|e| invalid(&e))?;
        Ok(())
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.train_fraction,
            seed: self.seed,
        }
    }

    pub fn featurizer_config(&self) -> FeaturizerConfig {
        FeaturizerConfig {
            tfidf: self.tfidf.clone(),
            doc2vec: self.doc2vec.clone(),
            standardize: self.standardize,
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            linear_svc: self.linear_svc.clone(),
            logistic_regression: self.logreg.clone(),
            multinomial_nb: self.multinomial_nb.clone(),
            gaussian_nb: self.gaussian_nb.clone(),
            random_forest: self.random_forest.clone(),
            mlp: self.mlp.clone(),
        }
        .with_seed(self.seed)
    }
}
