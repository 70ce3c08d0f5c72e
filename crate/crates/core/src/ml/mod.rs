//! Latency classifiers and the throughput regressor: feature
//! standardization, splitting, k-fold cross-validation, a CART decision
//! tree, a linear soft-margin SVM and a one-hidden-layer MLP trained with
//! Adam.

mod artifact;
mod cv;
mod eval;
mod mlp;
mod scale;
mod split;
mod svm;
mod tree;

use thiserror::Error;

pub use artifact::{ModelArtifact, ModelParams, ScaledClassifier, SCHEMA_VERSION};
pub use cv::{kfold_cv, kfold_indices, repeated_cv, CvReport, Learner, ModelSpec, RepeatedCv};
pub use eval::{accuracy, evaluate_classifier, evaluate_regressor, RegressionScores};
pub use mlp::{
    fit_mlp_classifier, fit_mlp_regressor, Adam, LossKind, Mlp, MlpClassifier, MlpParams,
    RegressorFit, TraceLine,
};
pub use scale::Standardizer;
pub use split::{train_test_split, SplitSpec};
pub use svm::{fit_svm, LinearSvm, SvmParams};
pub use tree::{fit_decision_tree, gini, DecisionTree, TreeNode, TreeParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MlError {
    #[error("input is empty")]
    EmptyInput,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("invalid k = {k} for {n} rows")]
    InvalidK { k: usize, n: usize },
    #[error("training labels contain a single class")]
    SingleClassData,
    #[error("non-finite regression target at row {0}")]
    NonFiniteTarget(usize),
    #[error("test set is empty")]
    EmptyTestSet,
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("test fraction {0} outside (0, 1)")]
    InvalidFraction(f64),
    #[error("model artifact: {0}")]
    Artifact(String),
}

/// A trained binary classifier; `true` is the `High` class.
pub trait Classifier: Send + Sync {
    fn predict(&self, x: &[f64]) -> bool;

    fn predict_all(&self, xs: &[Vec<f64>]) -> Vec<bool> {
        xs.iter().map(|x| self.predict(x)).collect()
    }
}

pub(crate) fn check_xy<T>(x: &[Vec<f64>], y: &[T]) -> Result<usize, MlError> {
    if x.is_empty() {
        return Err(MlError::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(MlError::Shape(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(MlError::EmptyInput);
    }
    if let Some(i) = x.iter().position(|r| r.len() != d) {
        return Err(MlError::Shape(format!("row {i} has {} features, expected {d}", x[i].len())));
    }
    Ok(d)
}

pub(crate) fn check_two_classes(y: &[bool]) -> Result<(), MlError> {
    let high = y.iter().filter(|&&b| b).count();
    if high == 0 || high == y.len() {
        return Err(MlError::SingleClassData);
    }
    Ok(())
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}
