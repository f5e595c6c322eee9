//! Multinomial and Gaussian naive Bayes.

use serde::{Deserialize, Serialize};

use super::{ClassifierError, EncodedLabels, FeatureMatrix};
use crate::matrix::{f64_block, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MultinomialNbConfig {
    /// Additive (Laplace) smoothing.
    pub alpha: f64,
}

impl Default for MultinomialNbConfig {
    fn default() -> Self {
        Self { alpha: 1.0 }
    }
}

impl MultinomialNbConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.alpha > 0.0 && self.alpha.is_finite()) {
            return Err(ClassifierError::InvalidConfig {
                kind: "multinomial_nb",
                message: "alpha must be a positive finite number".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaussianNbConfig {
    pub var_smoothing: f64,
}

impl Default for GaussianNbConfig {
    fn default() -> Self {
        Self { var_smoothing: 1e-9 }
    }
}

impl GaussianNbConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        if !(self.var_smoothing > 0.0 && self.var_smoothing.is_finite()) {
            return Err(ClassifierError::InvalidConfig {
                kind: "gaussian_nb",
                message: "var_smoothing must be a positive finite number".into(),
            });
        }
        Ok(())
    }
}

fn class_log_prior(enc: &EncodedLabels) -> Vec<f64> {
    let mut counts = vec![0usize; enc.classes.len()];
    for &y in &enc.y {
        counts[y] += 1;
    }
    let n = enc.y.len() as f64;
    counts.iter().map(|&c| (c as f64 / n).ln()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultinomialNb {
    /// `ln P(feature | class)`, one row per class.
    pub feature_log_prob: Matrix,
    #[serde(with = "f64_block")]
    pub class_log_prior: Vec<f64>,
}

impl MultinomialNb {
    pub fn joint_log_likelihood_row(&self, features: &FeatureMatrix, i: usize) -> Vec<f64> {
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(k, prior)| prior + features.dot_row(i, self.feature_log_prob.row(k)))
            .collect()
    }
}

pub(crate) fn train_multinomial(
    features: &FeatureMatrix,
    enc: &EncodedLabels,
    config: &MultinomialNbConfig,
) -> Result<MultinomialNb, ClassifierError> {
    config.validate()?;
    let (k, d) = (enc.classes.len(), features.dim());
    let mut counts = Matrix::zeros(k, d);
    for (i, &y) in enc.y.iter().enumerate() {
        for (col, v) in features.row_entries(i) {
            if v < 0.0 {
                return Err(ClassifierError::NegativeFeature { row: i, col, value: v });
            }
            *counts.get_mut(y, col) += v;
        }
    }
    let mut feature_log_prob = Matrix::zeros(k, d);
    for c in 0..k {
        let total: f64 = counts.row(c).iter().sum::<f64>() + config.alpha * d as f64;
        for (dst, &n) in feature_log_prob.row_mut(c).iter_mut().zip(counts.row(c)) {
            *dst = ((n + config.alpha) / total).ln();
        }
    }
    Ok(MultinomialNb {
        feature_log_prob,
        class_log_prior: class_log_prior(enc),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNb {
    pub means: Matrix,
    pub variances: Matrix,
    #[serde(with = "f64_block")]
    pub class_log_prior: Vec<f64>,
}

impl GaussianNb {
    pub fn joint_log_likelihood(&self, x: &[f64]) -> Vec<f64> {
        let ln_2pi = (2.0 * std::f64::consts::PI).ln();
        self.class_log_prior
            .iter()
            .enumerate()
            .map(|(k, prior)| {
                let ll: f64 = x
                    .iter()
                    .zip(self.means.row(k).iter().zip(self.variances.row(k)))
                    .map(|(&xj, (&m, &v))| -0.5 * (ln_2pi + v.ln() + (xj - m) * (xj - m) / v))
                    .sum();
                prior + ll
            })
            .collect()
    }
}

/// Population mean and variance of `values`.
fn moments(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let (mut n, mut sum) = (0.0, 0.0);
    for v in values.clone() {
        n += 1.0;
        sum += v;
    }
    let mean = sum / n;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var)
}

pub(crate) fn train_gaussian(
    features: &FeatureMatrix,
    enc: &EncodedLabels,
    config: &GaussianNbConfig,
) -> Result<GaussianNb, ClassifierError> {
    config.validate()?;
    let rows = features.to_dense_rows();
    let (k, d) = (enc.classes.len(), features.dim());

    let max_var = (0..d)
        .map(|j| moments(rows.iter().map(move |r| r[j])).1)
        .fold(0.0, f64::max);
    let floor = if max_var > 0.0 {
        config.var_smoothing * max_var
    } else {
        config.var_smoothing
    };

    let mut means = Matrix::zeros(k, d);
    let mut variances = Matrix::zeros(k, d);
    for c in 0..k {
        let members: Vec<&Vec<f64>> = rows.iter().zip(&enc.y).filter(|(_, &y)| y == c).map(|(r, _)| r).collect();
        for j in 0..d {
            let (m, v) = moments(members.iter().map(|r| r[j]));
            *means.get_mut(c, j) = m;
            *variances.get_mut(c, j) = v.max(floor);
        }
    }
    Ok(GaussianNb {
        means,
        variances,
        class_log_prior: class_log_prior(enc),
    })
}
