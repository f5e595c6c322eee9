//! The train command as a library call: filter, split, fit, evaluate and
//! package an artifact.

use crate::artifact::{PipelineArtifact, Provenance};
use crate::config::RunConfig;
use crate::corpus::{filter_rare_classes, stratified_split, Dataset};
use crate::eval::{evaluate, EvaluationReport};
use crate::pipeline::Pipeline;
use crate::Error;

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub artifact: PipelineArtifact,
    pub train_report: EvaluationReport,
    pub test_report: EvaluationReport,
}

/// Trains the configured featurizer and model. `created_at` (seconds since
/// the Unix epoch) is recorded in the provenance as given.
pub fn train_run(dataset: &Dataset, config: &RunConfig, created_at: u64) -> Result<TrainOutcome, Error> {
    config.validate()?;
    let filtered = filter_rare_classes(dataset, config.min_count)?;
    let (train, test) = stratified_split(&filtered, &config.split_config())?;
    let cleaning = config.cleaning.resolve()?;
    let pipeline = Pipeline::fit(
        &train,
        config.featurizer,
        config.model,
        &cleaning,
        &config.featurizer_config(),
        &config.train_config(),
    )?;
    let labels = |ds: &Dataset| -> Vec<u32> { ds.labels().into_iter().map(u32::from).collect() };
    let train_report = evaluate(&labels(&train), &pipeline.predict_dataset(&train)?)?;
    let test_report = evaluate(&labels(&test), &pipeline.predict_dataset(&test)?)?;

    let artifact = PipelineArtifact {
        pipeline,
        taxonomy: dataset.taxonomy().clone(),
        provenance: Provenance {
            dataset_sha256: dataset.canonical_digest(),
            seed: config.seed,
            config: config.to_flat(),
            created_at,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
        },
    };
    artifact.validate()?;
    Ok(TrainOutcome {
        artifact,
        train_report,
        test_report,
    })
}
