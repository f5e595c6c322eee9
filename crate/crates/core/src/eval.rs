//! Classification metrics and the featurizer × model comparison.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::classifiers::{self, ModelKind};
use crate::config::RunConfig;
use crate::corpus::{filter_rare_classes, stratified_split, Dataset};
use crate::pipeline::{prepare_features, FeaturizerKind};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EvalError {
    #[error("{truth} true labels but {predicted} predictions")]
    LengthMismatch { truth: usize, predicted: usize },
    #[error("cannot evaluate an empty prediction set")]
    Empty,
}

/// `counts[i][j]` = number of samples of true class `classes[i]` predicted
/// as `classes[j]`. `classes` is the sorted union of true and predicted ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub classes: Vec<u32>,
    pub counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_labels(truth: &[u32], predicted: &[u32]) -> Result<Self, EvalError> {
        if truth.len() != predicted.len() {
            return Err(EvalError::LengthMismatch {
                truth: truth.len(),
                predicted: predicted.len(),
            });
        }
        if truth.is_empty() {
            return Err(EvalError::Empty);
        }
        let mut classes: Vec<u32> = truth.iter().chain(predicted).copied().collect();
        classes.sort_unstable();
        classes.dedup();
        let k = classes.len();
        let mut counts = vec![vec![0; k]; k];
        let pos = |c: &u32| classes.binary_search(c).expect("class collected above");
        for (t, p) in truth.iter().zip(predicted) {
            counts[pos(t)][pos(p)] += 1;
        }
        Ok(Self { classes, counts })
    }

    pub fn total(&self) -> usize {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> usize {
        (0..self.classes.len()).map(|i| self.counts[i][i]).sum()
    }

    /// Row sum for class index `i`.
    pub fn support(&self, i: usize) -> usize {
        self.counts[i].iter().sum()
    }

    /// Column sum for class index `i`.
    pub fn predicted_count(&self, i: usize) -> usize {
        self.counts.iter().map(|row| row[i]).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Weighted,
    Macro,
}

impl FromStr for Averaging {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "weighted" => Ok(Averaging::Weighted),
            "macro" => Ok(Averaging::Macro),
            other => Err(format!("unknown averaging {other:?} (expected weighted or macro)")),
        }
    }
}

/// A metric that was undefined (zero denominator) and reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "metric", rename_all = "snake_case")]
pub enum MetricWarning {
    /// The class was never predicted.
    Precision { class: u32 },
    /// The class never occurs in the true labels.
    Recall { class: u32 },
}

impl fmt::Display for MetricWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricWarning::Precision { class } => {
                write!(f, "precision of class {class} is undefined (never predicted); reported as 0")
            }
            MetricWarning::Recall { class } => {
                write!(f, "recall of class {class} is undefined (no true samples); reported as 0")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricSummary {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub accuracy: f64,
    pub precision_weighted: f64,
    pub recall_weighted: f64,
    pub f1_weighted: f64,
    pub precision_macro: f64,
    pub recall_macro: f64,
    pub f1_macro: f64,
    pub per_class: BTreeMap<u32, ClassMetrics>,
    pub confusion: ConfusionMatrix,
    pub warnings: Vec<MetricWarning>,
}

fn ratio(num: usize, den: usize) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

pub fn evaluate(truth: &[u32], predicted: &[u32]) -> Result<EvaluationReport, EvalError> {
    let confusion = ConfusionMatrix::from_labels(truth, predicted)?;
    let total = confusion.total();
    let mut per_class = BTreeMap::new();
    let mut warnings = Vec::new();
    for (i, &class) in confusion.classes.iter().enumerate() {
        let tp = confusion.counts[i][i];
        let support = confusion.support(i);
        let precision = ratio(tp, confusion.predicted_count(i)).unwrap_or_else(|| {
            warnings.push(MetricWarning::Precision { class });
            0.0
        });
        let recall = ratio(tp, support).unwrap_or_else(|| {
            warnings.push(MetricWarning::Recall { class });
            0.0
        });
        let f1 = if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
        per_class.insert(
            class,
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
            },
        );
    }

    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class.values().map(|m| f(m) * m.support as f64).sum::<f64>() / total as f64
    };
    let k = per_class.len() as f64;
    let macro_avg = |f: fn(&ClassMetrics) -> f64| per_class.values().map(f).sum::<f64>() / k;

    Ok(EvaluationReport {
        accuracy: confusion.trace() as f64 / total as f64,
        precision_weighted: weighted(|m| m.precision),
        recall_weighted: weighted(|m| m.recall),
        f1_weighted: weighted(|m| m.f1),
        precision_macro: macro_avg(|m| m.precision),
        recall_macro: macro_avg(|m| m.recall),
        f1_macro: macro_avg(|m| m.f1),
        per_class,
        confusion,
        warnings,
    })
}

impl EvaluationReport {
    pub fn summary(&self, averaging: Averaging) -> MetricSummary {
        match averaging {
            Averaging::Weighted => MetricSummary {
                accuracy: self.accuracy,
                precision: self.precision_weighted,
                recall: self.recall_weighted,
                f1: self.f1_weighted,
            },
            Averaging::Macro => MetricSummary {
                accuracy: self.accuracy,
                precision: self.precision_macro,
                recall: self.recall_macro,
                f1: self.f1_macro,
            },
        }
    }

    /// Aligned per-class table followed by the confusion matrix.
    pub fn render_text(&self, averaging: Averaging) -> String {
        let s = self.summary(averaging);
        let avg = match averaging {
            Averaging::Weighted => "weighted",
            Averaging::Macro => "macro",
        };
        let mut out = format!(
            "accuracy {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  ({avg})\n\n",
            s.accuracy, s.precision, s.recall, s.f1
        );
        out.push_str(&format!(
            "{:>7} {:>9} {:>9} {:>9} {:>8}\n",
            "class", "precision", "recall", "f1", "support"
        ));
        for (c, m) in &self.per_class {
            out.push_str(&format!(
                "{:>7} {:>9.4} {:>9.4} {:>9.4} {:>8}\n",
                c, m.precision, m.recall, m.f1, m.support
            ));
        }
        out.push_str("\nconfusion (rows: true, columns: predicted)\n");
        out.push_str(&format!("{:>7}", ""));
        for c in &self.confusion.classes {
            out.push_str(&format!(" {c:>4}"));
        }
        out.push('\n');
        for (c, row) in self.confusion.classes.iter().zip(&self.confusion.counts) {
            out.push_str(&format!("{c:>7}"));
            for n in row {
                out.push_str(&format!(" {n:>4}"));
            }
            out.push('\n');
        }
        for w in &self.warnings {
            out.push_str(&format!("warning: {w}\n"));
        }
        out
    }
}

/// Accuracy of always predicting the most frequent true class (ties to
/// the lower id).
pub fn majority_baseline(truth: &[u32]) -> Option<(u32, f64)> {
    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for &t in truth {
        *hist.entry(t).or_default() += 1;
    }
    let mut best: Option<(u32, usize)> = None;
    for (&c, &n) in &hist {
        if best.map_or(true, |(_, b)| n > b) {
            best = Some((c, n));
        }
    }
    best.map(|(c, n)| (c, n as f64 / truth.len() as f64))
}


/// One (featurizer, model) cell of the comparison.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub featurizer: FeaturizerKind,
    pub model: ModelKind,
    pub weighted: MetricSummary,
    #[serde(rename = "macro")]
    pub macro_avg: MetricSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Baseline {
    pub class: u32,
    pub accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
    /// Majority-class accuracy on the test split.
    pub baseline: Baseline,
    pub n_train: usize,
    pub n_test: usize,
    pub seed: u64,
    pub dataset_sha256: String,
    /// The merged run configuration as flat keys.
    pub config: BTreeMap<String, serde_json::Value>,
}

impl ComparisonTable {
    pub fn row(&self, featurizer: FeaturizerKind, model: ModelKind) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.featurizer == featurizer && r.model == model)
    }

    pub fn best(&self) -> Option<&ComparisonRow> {
        self.rows
            .iter()
            .fold(None, |best: Option<&ComparisonRow>, r| match best {
                Some(b) if b.weighted.accuracy >= r.weighted.accuracy => Some(b),
                _ => Some(r),
            })
    }

    pub fn render_text(&self, averaging: Averaging) -> String {
        let mut out = format!(
            "{:<10} {:<24} {:>8} {:>9} {:>8} {:>8}\n",
            "features", "model", "accuracy", "precision", "recall", "f1"
        );
        for r in &self.rows {
            let s = match averaging {
                Averaging::Weighted => r.weighted,
                Averaging::Macro => r.macro_avg,
            };
            out.push_str(&format!(
                "{:<10} {:<24} {:>8.4} {:>9.4} {:>8.4} {:>8.4}\n",
                r.featurizer.name(),
                r.model.display_name(),
                s.accuracy,
                s.precision,
                s.recall,
                s.f1
            ));
        }
        out.push_str(&format!(
            "\nmajority baseline (class {}): accuracy {:.4}\ntrain {} / test {} records, seed {}\n",
            self.baseline.class, self.baseline.accuracy, self.n_train, self.n_test, self.seed
        ));
        out
    }
}

/// Filters rare classes, splits, fits each featurizer on the training
/// split, and trains and scores every applicable model on the test split.
pub fn run_comparison(dataset: &Dataset, config: &RunConfig) -> Result<ComparisonTable, crate::Error> {
    config.validate()?;
    let filtered = filter_rare_classes(dataset, config.min_count)?;
    let (train, test) = stratified_split(&filtered, &config.split_config())?;
    let cleaning = config.cleaning.resolve()?;
    let train_config = config.train_config();
    let test_labels: Vec<u32> = test.labels().into_iter().map(u32::from).collect();
    let (class, accuracy) = majority_baseline(&test_labels).ok_or(EvalError::Empty)?;

    let mut rows = Vec::new();
    for featurizer in FeaturizerKind::ALL {
        let prepared = prepare_features(&train, &test, featurizer, &cleaning, &config.featurizer_config())?;
        let cells: Vec<Result<ComparisonRow, crate::Error>> = featurizer
            .compared_models()
            .par_iter()
            .map(|&model| {
                let clf = classifiers::train(model, &prepared.train, &prepared.train_labels, &train_config)?;
                let report = evaluate(&prepared.test_labels, &clf.predict(&prepared.test)?)?;
                log::info!("{featurizer} + {model}: accuracy {:.4}", report.accuracy);
                Ok(ComparisonRow {
                    featurizer,
                    model,
                    weighted: report.summary(Averaging::Weighted),
                    macro_avg: report.summary(Averaging::Macro),
                })
            })
            .collect();
        for c in cells {
            rows.push(c?);
        }
    }
    Ok(ComparisonTable {
        rows,
        baseline: Baseline { class, accuracy },
        n_train: train.len(),
        n_test: test.len(),
        seed: config.seed,
        dataset_sha256: dataset.canonical_digest(),
        config: config.to_flat(),
    })
}
