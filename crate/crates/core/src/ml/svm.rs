use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{check_two_classes, check_xy, Classifier, MlError};
use crate::rng::rng_for;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SvmParams {
    pub lambda: f64,
    pub epochs: usize,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            lambda: 1e-3,
            epochs: 50,
        }
    }
}

/// Linear soft-margin SVM; predicts `High` when `w.x + b > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearSvm {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub lambda: f64,
}

impl LinearSvm {
    pub fn decision(&self, x: &[f64]) -> f64 {
        dot(&self.weights, x) + self.bias
    }

    /// `lambda/2 |w|^2 + mean hinge loss`.
    pub fn objective(&self, x: &[Vec<f64>], y: &[bool]) -> f64 {
        let hinge: f64 = x
            .iter()
            .zip(y)
            .map(|(xi, &yi)| (1.0 - sign(yi) * self.decision(xi)).max(0.0))
            .sum::<f64>()
            / x.len() as f64;
        0.5 * self.lambda * dot(&self.weights, &self.weights) + hinge
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sign(y: bool) -> f64 {
    if y {
        1.0
    } else {
        -1.0
    }
}

/// Stochastic subgradient descent on the regularized hinge loss.
///
/// Weights use step `1 / (lambda t + 1)` followed by projection onto the
/// ball of radius `1/sqrt(lambda)`; the unregularized bias uses step
/// `1/sqrt(t)`. Rows are visited in a seeded random order each epoch.
pub fn fit_svm(x: &[Vec<f64>], y: &[bool], params: SvmParams, seed: u64) -> Result<LinearSvm, MlError> {
    let d = check_xy(x, y)?;
    check_two_classes(y)?;
    let lambda = params.lambda;
    let radius = 1.0 / lambda.sqrt();
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let mut order: Vec<usize> = (0..x.len()).collect();
    let mut rng = rng_for(seed, 0);
    let mut t = 0u64;
    for _ in 0..params.epochs {
        order.shuffle(&mut rng);
        for &i in &order {
            t += 1;
            let eta = 1.0 / (lambda * t as f64 + 1.0);
            let yi = sign(y[i]);
            let margin = yi * (dot(&w, &x[i]) + b);
            let shrink = 1.0 - eta * lambda;
            for wj in w.iter_mut() {
                *wj *= shrink;
            }
            if margin < 1.0 {
                for (wj, xj) in w.iter_mut().zip(&x[i]) {
                    *wj += eta * yi * xj;
                }
                b += yi / (t as f64).sqrt();
            }
            let norm = dot(&w, &w).sqrt();
            if norm > radius {
                for wj in w.iter_mut() {
                    *wj *= radius / norm;
                }
            }
        }
    }
    Ok(LinearSvm {
        weights: w,
        bias: b,
        lambda,
    })
}

impl Classifier for LinearSvm {
    fn predict(&self, x: &[f64]) -> bool {
        self.decision(x) > 0.0
    }
}
