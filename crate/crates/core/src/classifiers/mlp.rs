//! Feed-forward network: ReLU hidden layers, softmax output, cross-entropy
//! loss with an L2 penalty, trained by mini-batch Adam.
//!
//! The penalty on a batch of size `m` is `alpha / (2m) * Σ‖W‖²` (weights
//! only). Training stops after `max_iter` epochs or once the epoch loss has
//! failed to improve on the best loss by `tol` for `n_iter_no_change`
//! consecutive epochs.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{softmax_in_place, ClassifierError, EncodedLabels, FeatureMatrix};
use crate::matrix::{dot, f64_block, Matrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpConfig {
    pub hidden_layers: Vec<usize>,
    pub max_iter: usize,
    pub learning_rate: f64,
    /// Capped at the number of samples.
    pub batch_size: usize,
    pub alpha: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub n_iter_no_change: usize,
    pub seed: u64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        Self {
            hidden_layers: vec![100],
            max_iter: 1000,
            learning_rate: 0.001,
            batch_size: 200,
            alpha: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            tol: 1e-6,
            n_iter_no_change: 10,
            seed: 42,
        }
    }
}

impl MlpConfig {
    pub fn validate(&self) -> Result<(), ClassifierError> {
        let bad = |m: &str| {
            Err(ClassifierError::InvalidConfig {
                kind: "mlp",
                message: m.to_string(),
            })
        };
        if self.hidden_layers.iter().any(|&w| w < 1) {
            return bad("hidden layer widths must be >= 1");
        }
        if self.max_iter < 1 || self.batch_size < 1 || self.n_iter_no_change < 1 {
            return bad("max_iter, batch_size and n_iter_no_change must be >= 1");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return bad("alpha must be >= 0");
        }
        if !((0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2)) {
            return bad("beta1 and beta2 must lie in [0, 1)");
        }
        if !(self.epsilon > 0.0) || !(self.tol >= 0.0) {
            return bad("epsilon must be > 0 and tol >= 0");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Layer {
    /// `out × in`
    pub weights: Matrix,
    #[serde(with = "f64_block")]
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Matrix::zeros(self.weights.rows(), self.weights.cols()),
            bias: vec![0.0; self.bias.len()],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    pub layers: Vec<Layer>,
    /// Mean training loss per epoch.
    #[serde(with = "f64_block")]
    pub loss_trace: Vec<f64>,
}

struct Activations {
    /// Post-ReLU output of each hidden layer.
    hidden: Vec<Vec<f64>>,
    proba: Vec<f64>,
}

impl Mlp {
    /// Glorot-uniform initialization of weights and biases.
    pub fn initialize<R: Rng>(n_inputs: usize, hidden: &[usize], n_outputs: usize, rng: &mut R) -> Self {
        let mut sizes = vec![n_inputs];
        sizes.extend_from_slice(hidden);
        sizes.push(n_outputs);
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (fan_in, fan_out) = (w[0], w[1]);
                let bound = (6.0 / (fan_in + fan_out) as f64).sqrt();
                let weights = Matrix::from_fn(fan_out, fan_in, |_, _| rng.gen_range(-bound..bound));
                let bias = (0..fan_out).map(|_| rng.gen_range(-bound..bound)).collect();
                Layer { weights, bias }
            })
            .collect();
        Self {
            layers,
            loss_trace: Vec::new(),
        }
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].weights.cols()
    }

    pub fn n_outputs(&self) -> usize {
        self.layers.last().map_or(0, |l| l.bias.len())
    }

    fn forward(&self, features: &FeatureMatrix, i: usize) -> Activations {
        let mut hidden = Vec::with_capacity(self.layers.len() - 1);
        let first = &self.layers[0];
        let mut a: Vec<f64> = (0..first.bias.len())
            .map(|k| features.dot_row(i, first.weights.row(k)) + first.bias[k])
            .collect();
        for layer in &self.layers[1..] {
            a.iter_mut().for_each(|v| *v = v.max(0.0));
            let next = (0..layer.bias.len())
                .map(|k| dot(layer.weights.row(k), &a) + layer.bias[k])
                .collect();
            hidden.push(std::mem::replace(&mut a, next));
        }
        softmax_in_place(&mut a);
        Activations { hidden, proba: a }
    }

    pub fn forward_proba_row(&self, features: &FeatureMatrix, i: usize) -> Vec<f64> {
        self.forward(features, i).proba
    }

    /// Penalized mean cross-entropy over `rows`, with the gradient in the
    /// same per-layer shape as the network.
    fn batch_loss_grad(&self, features: &FeatureMatrix, rows: &[usize], y: &[usize], alpha: f64) -> (f64, Vec<Layer>) {
        let m = rows.len() as f64;
        let mut grads: Vec<Layer> = self.layers.iter().map(Layer::zeros_like).collect();
        let mut loss = 0.0;
        for &i in rows {
            let act = self.forward(features, i);
            loss -= act.proba[y[i]].max(f64::MIN_POSITIVE).ln();
            let mut delta = act.proba;
            delta[y[i]] -= 1.0;
            for l in (0..self.layers.len()).rev() {
                let g = &mut grads[l];
                for (k, &dk) in delta.iter().enumerate() {
                    g.bias[k] += dk;
                    if dk == 0.0 {
                        continue;
                    }
                    if l == 0 {
                        features.axpy_row(i, dk, g.weights.row_mut(k));
                    } else {
                        crate::matrix::axpy(dk, &act.hidden[l - 1], g.weights.row_mut(k));
                    }
                }
                if l > 0 {
                    let w = &self.layers[l].weights;
                    let prev = &act.hidden[l - 1];
                    delta = (0..w.cols())
                        .map(|j| {
                            if prev[j] > 0.0 {
                                (0..w.rows()).map(|k| w.get(k, j) * delta[k]).sum()
                            } else {
                                0.0
                            }
                        })
                        .collect();
                }
            }
        }
        let mut penalty = 0.0;
        for (g, layer) in grads.iter_mut().zip(&self.layers) {
            for (gw, w) in g.weights.as_mut_slice().iter_mut().zip(layer.weights.as_slice()) {
                *gw = *gw / m + alpha * w / m;
                penalty += w * w;
            }
            g.bias.iter_mut().for_each(|b| *b /= m);
        }
        (loss / m + alpha * penalty / (2.0 * m), grads)
    }

    /// Loss over all rows of `features` and the gradient flattened in the
    /// order of [`Mlp::params`].
    pub fn loss_and_gradient(&self, features: &FeatureMatrix, y: &[usize], alpha: f64) -> (f64, Vec<f64>) {
        let rows: Vec<usize> = (0..features.n_rows()).collect();
        let (loss, grads) = self.batch_loss_grad(features, &rows, y, alpha);
        (loss, flatten(&grads))
    }

    /// All parameters, layer by layer, weights (row-major) before biases.
    pub fn params(&self) -> Vec<f64> {
        flatten(&self.layers)
    }

    pub fn set_params(&mut self, flat: &[f64]) {
        let mut at = 0;
        for layer in &mut self.layers {
            for s in [layer.weights.as_mut_slice(), layer.bias.as_mut_slice()] {
                s.copy_from_slice(&flat[at..at + s.len()]);
                at += s.len();
            }
        }
        assert_eq!(at, flat.len(), "parameter vector has wrong length");
    }
}

fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(l.weights.as_slice());
        out.extend_from_slice(&l.bias);
    }
    out
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    fn step(&mut self, layers: &mut [Layer], grads: &[Layer], cfg: &MlpConfig) {
        self.t += 1;
        let lr = cfg.learning_rate * (1.0 - cfg.beta2.powi(self.t)).sqrt() / (1.0 - cfg.beta1.powi(self.t));
        let mut at = 0;
        for (layer, g) in layers.iter_mut().zip(grads) {
            let params = [layer.weights.as_mut_slice(), layer.bias.as_mut_slice()];
            let grads = [g.weights.as_slice(), g.bias.as_slice()];
            for (p, g) in params.into_iter().zip(grads) {
                for (j, (pj, &gj)) in p.iter_mut().zip(g).enumerate() {
                    let (m, v) = (&mut self.m[at + j], &mut self.v[at + j]);
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * gj;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * gj * gj;
                    *pj -= lr * *m / (v.sqrt() + cfg.epsilon);
                }
                at += g.len();
            }
        }
    }
}

pub(crate) fn train(features: &FeatureMatrix, enc: &EncodedLabels, cfg: &MlpConfig) -> Result<Mlp, ClassifierError> {
    cfg.validate()?;
    let n = features.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut mlp = Mlp::initialize(features.dim(), &cfg.hidden_layers, enc.classes.len(), &mut rng);
    let n_params = mlp.params().len();
    let mut adam = Adam {
        m: vec![0.0; n_params],
        v: vec![0.0; n_params],
        t: 0,
    };
    let batch = cfg.batch_size.min(n);
    let mut order: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    let mut stale = 0;

    for epoch in 0..cfg.max_iter {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for rows in order.chunks(batch) {
            let (loss, grads) = mlp.batch_loss_grad(features, rows, &enc.y, cfg.alpha);
            if !loss.is_finite() {
                return Err(ClassifierError::Divergence { epoch });
            }
            total += loss * rows.len() as f64;
            adam.step(&mut mlp.layers, &grads, cfg);
        }
        let loss = total / n as f64;
        mlp.loss_trace.push(loss);
        log::trace!("mlp epoch {epoch}: loss {loss:.6}");

        if loss > best - cfg.tol {
            stale += 1;
        } else {
            stale = 0;
        }
        best = best.min(loss);
        if stale >= cfg.n_iter_no_change {
            log::debug!("mlp stopped after {} epochs", epoch + 1);
            break;
        }
    }
    Ok(mlp)
}
