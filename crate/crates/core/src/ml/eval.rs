use serde::{Deserialize, Serialize};

use super::{Classifier, MlError};

/// Fraction of positions where the two label vectors agree.
pub fn accuracy(predicted: &[bool], truth: &[bool]) -> f64 {
    if truth.is_empty() {
        return 0.0;
    }
    let correct = predicted.iter().zip(truth).filter(|(a, b)| a == b).count();
    correct as f64 / truth.len() as f64
}

pub fn evaluate_classifier(
    model: &dyn Classifier,
    x: &[Vec<f64>],
    y: &[bool],
) -> Result<f64, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyTestSet);
    }
    Ok(accuracy(&model.predict_all(x), y))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionScores {
    pub mse: f64,
    /// Fraction of predictions with `|pred - y| <= tolerance * |y|`.
    pub accuracy: f64,
}

pub fn evaluate_regressor(
    predictions: &[f64],
    targets: &[f64],
    tolerance: f64,
) -> Result<RegressionScores, MlError> {
    if targets.is_empty() {
        return Err(MlError::EmptyTestSet);
    }
    if predictions.len() != targets.len() {
        return Err(MlError::Shape(format!(
            "{} predictions for {} targets",
            predictions.len(),
            targets.len()
        )));
    }
    let n = targets.len() as f64;
    let mse = predictions
        .iter()
        .zip(targets)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / n;
    let within = predictions
        .iter()
        .zip(targets)
        .filter(|(p, y)| (*p - *y).abs() <= tolerance * y.abs())
        .count();
    Ok(RegressionScores {
        mse,
        accuracy: within as f64 / n,
    })
}
