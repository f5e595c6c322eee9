//! Full-batch accelerated gradient descent for the smooth convex linear
//! objectives.

use super::ClassifierError;

pub(crate) struct DescentOptions {
    pub step: f64,
    pub max_iter: usize,
    /// Stop once the largest coordinate update falls below this.
    pub tol: f64,
}

/// Minimizes a smooth convex function given as `objective(x, grad) -> f(x)`.
///
/// Nesterov momentum with gradient-based restart: momentum is dropped
/// whenever the step points uphill relative to the previous iterate.
pub(crate) fn minimize(
    mut x: Vec<f64>,
    opts: &DescentOptions,
    mut objective: impl FnMut(&[f64], &mut [f64]) -> f64,
) -> Result<Vec<f64>, ClassifierError> {
    let n = x.len();
    let mut grad = vec![0.0; n];
    let mut y = x.clone();
    let mut x_next = vec![0.0; n];
    let mut t = 1.0_f64;

    for iter in 0..opts.max_iter {
        let f = objective(&y, &mut grad);
        if !f.is_finite() {
            return Err(ClassifierError::Divergence { epoch: iter });
        }
        let mut max_update = 0.0_f64;
        let mut uphill = 0.0;
        for j in 0..n {
            x_next[j] = y[j] - opts.step * grad[j];
            max_update = max_update.max((x_next[j] - x[j]).abs());
            uphill += grad[j] * (x_next[j] - x[j]);
        }
        let t_next = if uphill > 0.0 {
            1.0
        } else {
            0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
        };
        let beta = if uphill > 0.0 { 0.0 } else { (t - 1.0) / t_next };
        for j in 0..n {
            y[j] = x_next[j] + beta * (x_next[j] - x[j]);
        }
        std::mem::swap(&mut x, &mut x_next);
        t = t_next;
        if max_update < opts.tol {
            break;
        }
    }
    Ok(x)
}
