//! Classify cyber-attack descriptions into layman consequence clusters.
//!
//! The pipeline is: [`corpus`] records → [`textprep`] tokens → [`tfidf`] or
//! [`doc2vec`] features → one of the [`classifiers`] → [`eval`] metrics.
//! [`workflow::train_run`] and [`eval::run_comparison`] run it end to end
//! and [`artifact`] persists a trained pipeline.
//!
//! ```
//! use conseq_core::config::RunConfig;
//! use conseq_core::corpus::Dataset;
//! use conseq_core::workflow::train_run;
//!
//! let outcome = train_run(&Dataset::sample(), &RunConfig::default(), 0).unwrap();
//! let artifact = outcome.artifact;
//! let p = artifact.pipeline.predict(&["A flood of UDP packets slowed the network."]).unwrap();
//! assert!(artifact.pipeline.classifier.classes().contains(&p[0].cluster));
//! ```

use thiserror::Error;

pub mod artifact;
pub mod classifiers;
pub mod config;
pub mod corpus;
pub mod doc2vec;
pub mod eval;
pub mod matrix;
pub mod pipeline;
pub mod sparse;
pub mod textprep;
pub mod tfidf;
pub mod workflow;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Corpus(#[from] corpus::CorpusError),
    #[error(transparent)]
    Text(#[from] textprep::TextError),
    #[error(transparent)]
    Tfidf(#[from] tfidf::TfidfError),
    #[error(transparent)]
    Doc2Vec(#[from] doc2vec::Doc2VecError),
    #[error(transparent)]
    Classifier(#[from] classifiers::ClassifierError),
    #[error(transparent)]
    Eval(#[from] eval::EvalError),
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Artifact(#[from] artifact::ArtifactError),
}
