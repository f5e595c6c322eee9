//! One-vs-rest linear SVC and multinomial logistic regression.
//!
//! Both objectives are smooth and convex, so they are minimized with the
//! full-batch accelerated descent in `optim` using a fixed step `1/L`,
//! where `L` bounds the gradient's Lipschitz constant. Intercepts are not
//! penalized.
//!
//! * SVC, per class `k` with targets `t_i = ±1`:
//!   `½‖w‖² + C Σ max(0, 1 - t_i (w·x_i + b))²`
//! * Logistic regression over all classes at once:
//!   `(1/n) Σ -ln softmax(W x_i + b)[y_i] + (λ/2)‖W‖²` with `λ = 1/(C n)`

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::optim::{minimize, DescentOptions};
use super::{softmax_in_place, ClassifierError, EncodedLabels, FeatureMatrix};
use crate::matrix::{f64_block, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearSvcConfig {
    pub c: f64,
    /// Maximum number of full-batch iterations.
    pub epochs: usize,
    /// Fixed step size; `None` uses `1/L`.
    pub learning_rate: Option<f64>,
    pub tol: f64,
}

impl Default for LinearSvcConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 1000,
            learning_rate: None,
            tol: 1e-9,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogisticConfig {
    pub c: f64,
    pub epochs: usize,
    pub learning_rate: Option<f64>,
    pub tol: f64,
}

impl Default for LogisticConfig {
    fn default() -> Self {
        Self {
            c: 1.0,
            epochs: 1000,
            learning_rate: None,
            tol: 1e-9,
        }
    }
}

fn validate(kind: &'static str, c: f64, epochs: usize, lr: Option<f64>, tol: f64) -> Result<(), ClassifierError> {
    let bad = |m: &str| {
        Err(ClassifierError::InvalidConfig {
            kind,
            message: m.to_string(),
        })
    };
    if !(c > 0.0 && c.is_finite()) {
        return bad("c must be a positive finite number");
    }
    if epochs < 1 {
        return bad("epochs must be >= 1");
    }
    if let Some(lr) = lr {
        if !(lr > 0.0 && lr.is_finite()) {
            return bad("learning_rate must be positive");
        }
    }
    if !(tol >= 0.0) {
        return bad("tol must be >= 0");
    }
    Ok(())
}

impl LinearSvcConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        validate("linear_svc", self.c, self.epochs, self.learning_rate, self.tol)
    }
}

impl LogisticConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        validate("logistic_regression", self.c, self.epochs, self.learning_rate, self.tol)
    }
}

/// One weight row and one intercept per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Matrix,
    #[serde(with = "f64_block")]
    pub bias: Vec<f64>,
}

impl LinearModel {
    pub fn zeros(n_classes: usize, dim: usize) -> Self {
        Self {
            weights: Matrix::zeros(n_classes, dim),
            bias: vec![0.0; n_classes],
        }
    }

    pub fn n_classes(&self) -> usize {
        self.bias.len()
    }

    pub fn decision_row(&self, features: &FeatureMatrix, i: usize) -> Vec<f64> {
        (0..self.n_classes())
            .map(|k| features.dot_row(i, self.weights.row(k)) + self.bias[k])
            .collect()
    }

    fn to_flat(&self) -> Vec<f64> {
        let mut v = self.weights.as_slice().to_vec();
        v.extend_from_slice(&self.bias);
        v
    }

    fn from_flat(flat: &[f64], n_classes: usize, dim: usize) -> Self {
        let split = n_classes * dim;
        Self {
            weights: Matrix::from_vec(n_classes, dim, flat[..split].to_vec()),
            bias: flat[split..].to_vec(),
        }
    }
}

/// Sum of squared row norms with the intercept column included.
fn augmented_frobenius(features: &FeatureMatrix) -> f64 {
    (0..features.n_rows()).map(|i| features.squared_norm(i) + 1.0).sum()
}

/// Binary squared-hinge objective and its gradient. `params` is `[w.., b]`.
pub fn svc_objective(features: &FeatureMatrix, targets: &[f64], params: &[f64], c: f64, grad: &mut [f64]) -> f64 {
    let d = features.dim();
    let (w, b) = (&params[..d], params[d]);
    grad[..d].copy_from_slice(w);
    grad[d] = 0.0;
    let mut loss = 0.5 * w.iter().map(|v| v * v).sum::<f64>();
    for (i, &t) in targets.iter().enumerate() {
        let margin = 1.0 - t * (features.dot_row(i, w) + b);
        if margin > 0.0 {
            loss += c * margin * margin;
            let coef = -2.0 * c * t * margin;
            features.axpy_row(i, coef, &mut grad[..d]);
            grad[d] += coef;
        }
    }
    loss
}

pub(crate) fn train_linear_svc(
    features: &FeatureMatrix,
    enc: &EncodedLabels,
    config: &LinearSvcConfig,
) -> Result<LinearModel, ClassifierError> {
    config.validate()?;
    let d = features.dim();
    let step = config
        .learning_rate
        .unwrap_or_else(|| 1.0 / (1.0 + 2.0 * config.c * augmented_frobenius(features)));
    let opts = DescentOptions {
        step,
        max_iter: config.epochs,
        tol: config.tol,
    };
    let per_class: Vec<Vec<f64>> = (0..enc.classes.len())
        .into_par_iter()
        .map(|k| {
            let targets: Vec<f64> = enc.y.iter().map(|&y| if y == k { 1.0 } else { -1.0 }).collect();
            minimize(vec![0.0; d + 1], &opts, |p, g| svc_objective(features, &targets, p, config.c, g))
        })
        .collect::<Result<_, _>>()?;

    let mut model = LinearModel::zeros(enc.classes.len(), d);
    for (k, p) in per_class.iter().enumerate() {
        model.weights.row_mut(k).copy_from_slice(&p[..d]);
        model.bias[k] = p[d];
    }
    Ok(model)
}

/// Mean cross-entropy plus L2 penalty, and its gradient with respect to
/// the weights and intercepts. `y` holds class indices.
pub fn logistic_objective(features: &FeatureMatrix, y: &[usize], model: &LinearModel, c: f64) -> (f64, LinearModel) {
    let n = features.n_rows();
    let k = model.n_classes();
    let lambda = 1.0 / (c * n as f64);
    let mut grad = LinearModel::zeros(k, features.dim());
    let mut loss = 0.0;
    for (i, &yi) in y.iter().enumerate() {
        let mut p = model.decision_row(features, i);
        let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_z = max + p.iter().map(|z| (z - max).exp()).sum::<f64>().ln();
        loss -= p[yi] - log_z;
        softmax_in_place(&mut p);
        p[yi] -= 1.0;
        for (class, &r) in p.iter().enumerate() {
            features.axpy_row(i, r / n as f64, grad.weights.row_mut(class));
            grad.bias[class] += r / n as f64;
        }
    }
    loss /= n as f64;
    loss += 0.5 * lambda * model.weights.as_slice().iter().map(|w| w * w).sum::<f64>();
    for (g, w) in grad.weights.as_mut_slice().iter_mut().zip(model.weights.as_slice()) {
        *g += lambda * w;
    }
    (loss, grad)
}

pub(crate) fn train_logistic(
    features: &FeatureMatrix,
    enc: &EncodedLabels,
    config: &LogisticConfig,
) -> Result<LinearModel, ClassifierError> {
    config.validate()?;
    let (n, d, k) = (features.n_rows(), features.dim(), enc.classes.len());
    let lambda = 1.0 / (config.c * n as f64);
    let step = config
        .learning_rate
        .unwrap_or_else(|| 1.0 / (0.5 * augmented_frobenius(features) / n as f64 + lambda));
    let opts = DescentOptions {
        step,
        max_iter: config.epochs,
        tol: config.tol,
    };
    let flat = minimize(vec![0.0; k * (d + 1)], &opts, |p, g| {
        let model = LinearModel::from_flat(p, k, d);
        let (loss, grad) = logistic_objective(features, &enc.y, &model, config.c);
        g.copy_from_slice(&grad.to_flat());
        loss
    })?;
    Ok(LinearModel::from_flat(&flat, k, d))
}
