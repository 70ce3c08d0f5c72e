use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{
    check_xy, fit_decision_tree, fit_mlp_classifier, fit_svm, mean_std, Classifier, MlError,
    MlpParams, Standardizer, SvmParams, TreeParams,
};
use super::eval::accuracy;
use crate::rng::{derive_seed, rng_for};

/// Something that can be trained into a classifier.
pub trait Learner: Sync {
    fn fit(&self, x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<Box<dyn Classifier>, MlError>;
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum ModelSpec {
    Svm(SvmParams),
    DecisionTree(TreeParams),
    Mlp(MlpParams),
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::Svm(_) => "SVM",
            ModelSpec::DecisionTree(_) => "Decision Tree",
            ModelSpec::Mlp(_) => "MLP",
        }
    }

    /// The three classifiers with default hyperparameters.
    pub fn defaults() -> [ModelSpec; 3] {
        [
            ModelSpec::Svm(SvmParams::default()),
            ModelSpec::DecisionTree(TreeParams::default()),
            ModelSpec::Mlp(MlpParams::classifier()),
        ]
    }
}

impl Learner for ModelSpec {
    fn fit(&self, x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<Box<dyn Classifier>, MlError> {
        Ok(match *self {
            ModelSpec::Svm(p) => Box::new(fit_svm(x, y, p, seed)?),
            ModelSpec::DecisionTree(p) => Box::new(fit_decision_tree(x, y, p)?),
            ModelSpec::Mlp(p) => Box::new(fit_mlp_classifier(x, y, p, seed)?),
        })
    }
}

struct Constant(bool);

impl Classifier for Constant {
    fn predict(&self, _x: &[f64]) -> bool {
        self.0
    }
}

/// Test-index sets of `k` shuffled folds. The first `n % k` folds get one
/// extra row.
pub fn kfold_indices(n: usize, k: usize, seed: u64) -> Result<Vec<Vec<usize>>, MlError> {
    if k < 2 || n < k {
        return Err(MlError::InvalidK { k, n });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng_for(seed, 0));
    let (base, extra) = (n / k, n % k);
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for f in 0..k {
        let len = base + usize::from(f < extra);
        folds.push(idx[start..start + len].to_vec());
        start += len;
    }
    Ok(folds)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
    pub num_runs: usize,
}

/// k-fold cross-validation. When `standardize` is set, a scaler is fitted
/// on each training fold and applied to both sides. A training fold that
/// holds a single class yields a constant predictor for that class.
pub fn kfold_cv(
    learner: &dyn Learner,
    x: &[Vec<f64>],
    y: &[bool],
    k: usize,
    seed: u64,
    standardize: bool,
) -> Result<CvReport, MlError> {
    check_xy(x, y)?;
    let folds = kfold_indices(x.len(), k, seed)?;
    let mut in_test = vec![false; x.len()];
    let mut fold_accuracies = Vec::with_capacity(k);
    for (f, test) in folds.iter().enumerate() {
        in_test.iter_mut().for_each(|t| *t = false);
        test.iter().for_each(|&i| in_test[i] = true);
        let train: Vec<usize> = (0..x.len()).filter(|&i| !in_test[i]).collect();
        let mut x_train: Vec<Vec<f64>> = train.iter().map(|&i| x[i].clone()).collect();
        let y_train: Vec<bool> = train.iter().map(|&i| y[i]).collect();
        let mut x_test: Vec<Vec<f64>> = test.iter().map(|&i| x[i].clone()).collect();
        let y_test: Vec<bool> = test.iter().map(|&i| y[i]).collect();
        if standardize {
            let scaler = Standardizer::fit(&x_train)?;
            x_train = scaler.transform(&x_train);
            x_test = scaler.transform(&x_test);
        }
        let model: Box<dyn Classifier> =
            match learner.fit(&x_train, &y_train, derive_seed(seed, f as u64)) {
                Ok(m) => m,
                Err(MlError::SingleClassData) => Box::new(Constant(y_train[0])),
                Err(e) => return Err(e),
            };
        fold_accuracies.push(accuracy(&model.predict_all(&x_test), &y_test));
    }
    let (mean, std) = mean_std(&fold_accuracies);
    Ok(CvReport {
        fold_accuracies,
        mean,
        std,
        num_runs: 1,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatedCv {
    pub runs: Vec<CvReport>,
    /// Mean over runs of the per-run mean accuracy.
    pub mean: f64,
    /// Population std of the per-run means.
    pub std: f64,
}

/// `num_runs` independent k-fold runs, run `r` seeded by
/// `derive_seed(seed, r)`.
pub fn repeated_cv(
    learner: &dyn Learner,
    x: &[Vec<f64>],
    y: &[bool],
    k: usize,
    num_runs: usize,
    seed: u64,
    standardize: bool,
) -> Result<RepeatedCv, MlError> {
    let runs = (0..num_runs.max(1))
        .map(|r| kfold_cv(learner, x, y, k, derive_seed(seed, r as u64), standardize))
        .collect::<Result<Vec<_>, _>>()?;
    let means: Vec<f64> = runs.iter().map(|r| r.mean).collect();
    let (mean, std) = mean_std(&means);
    Ok(RepeatedCv { runs, mean, std })
}
