//! Finite-difference check of the loss derivatives used by the solvers.

use super::solver::{dloss, loss};
use super::LossKind;

/// A small dense batch and a parameter point `(weights, bias)`.
#[derive(Debug, Clone)]
pub struct GradientBatch {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub weights: Vec<f64>,
    pub bias: f64,
}

impl GradientBatch {
    fn mean_loss(&self, kind: LossKind, weights: &[f64], bias: f64) -> f64 {
        let n = self.rows.len() as f64;
        self.rows
            .iter()
            .zip(&self.labels)
            .map(|(x, &y)| {
                let z: f64 = x.iter().zip(weights).map(|(a, b)| a * b).sum::<f64>() + bias;
                loss(kind, y, z)
            })
            .sum::<f64>()
            / n
    }
}

/// Gradient of the mean loss; the last entry is the bias component.
pub fn analytic_gradient(kind: LossKind, batch: &GradientBatch) -> Vec<f64> {
    let n = batch.rows.len() as f64;
    let mut g = vec![0.0; batch.weights.len() + 1];
    for (x, &y) in batch.rows.iter().zip(&batch.labels) {
        let z: f64 = x.iter().zip(&batch.weights).map(|(a, b)| a * b).sum::<f64>() + batch.bias;
        let d = dloss(kind, y, z) / n;
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += d * xj;
        }
        *g.last_mut().unwrap() += d;
    }
    g
}

/// Central differences with step `h`.
pub fn numeric_gradient(kind: LossKind, batch: &GradientBatch, h: f64) -> Vec<f64> {
    let d = batch.weights.len();
    (0..=d)
        .map(|j| {
            let (mut wp, mut wm) = (batch.weights.clone(), batch.weights.clone());
            let (mut bp, mut bm) = (batch.bias, batch.bias);
            if j < d {
                wp[j] += h;
                wm[j] -= h;
            } else {
                bp += h;
                bm -= h;
            }
            (batch.mean_loss(kind, &wp, bp) - batch.mean_loss(kind, &wm, bm)) / (2.0 * h)
        })
        .collect()
}

/// Largest relative difference between the analytic and numeric gradients,
/// `|a − n| / max(|a|, |n|, 1e-8)`.
pub fn gradient_check(kind: LossKind, batch: &GradientBatch) -> f64 {
    let a = analytic_gradient(kind, batch);
    let n = numeric_gradient(kind, batch, 1e-5);
    a.iter()
        .zip(&n)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(1e-8))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hinge_with_all_margins_satisfied_is_flat() {
        let batch = GradientBatch {
            rows: vec![vec![1.0, 2.0], vec![-1.0, -2.0]],
            labels: vec![1, 0],
            weights: vec![5.0, 5.0],
            bias: 0.0,
        };
        assert!(analytic_gradient(LossKind::Hinge, &batch).iter().all(|g| *g == 0.0));
        assert_eq!(gradient_check(LossKind::Hinge, &batch), 0.0);
    }

    #[test]
    fn logistic_small_batch() {
        let batch = GradientBatch {
            rows: vec![vec![0.3, -1.2, 2.0], vec![1.5, 0.1, -0.7], vec![-0.4, 0.9, 0.2]],
            labels: vec![1, 0, 1],
            weights: vec![0.2, -0.5, 0.1],
            bias: 0.3,
        };
        assert!(gradient_check(LossKind::Logistic, &batch) < 1e-6);
    }
}
