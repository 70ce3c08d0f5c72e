//! Classifier cross-validation, throughput regression and the text report.

use std::fmt::Write as _;
use std::path::Path;

use fairbbr_core::measurement::{import_csv, Dataset, Provenance, DEFAULT_LATENCY_THRESHOLD};
use fairbbr_core::ml::{
    evaluate_regressor, fit_decision_tree, fit_mlp_classifier, fit_mlp_regressor, fit_svm,
    repeated_cv, train_test_split, ModelArtifact, ModelParams, ModelSpec, MlpParams,
    RegressionScores, RepeatedCv, SplitSpec, Standardizer, TraceLine, SCHEMA_VERSION,
};
use fairbbr_core::rng::derive_seed;
use rayon::prelude::*;
use serde_json::json;

use crate::error::{csv_error, CliError};

pub const CLASSIFIER_FEATURES: [&str; 2] = ["block_size", "throughput"];
pub const REGRESSOR_FEATURES: [&str; 2] = ["send_rate", "block_size"];

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainOptions {
    pub folds: usize,
    pub runs: usize,
    pub seed: u64,
    pub threshold: f64,
    /// Relative error within which a throughput prediction counts as
    /// correct.
    pub tolerance: f64,
    pub test_fraction: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            folds: 5,
            runs: 10,
            seed: 0,
            threshold: DEFAULT_LATENCY_THRESHOLD,
            tolerance: 0.10,
            test_fraction: 0.25,
        }
    }
}

pub struct TrainOutcome {
    /// One entry per classifier, in report order.
    pub cv: Vec<(ModelSpec, RepeatedCv)>,
    /// Accuracy of always predicting the more frequent class.
    pub majority: f64,
    pub trace: Vec<TraceLine>,
    pub validation: RegressionScores,
    /// File stem and artifact for every trained model.
    pub artifacts: Vec<(&'static str, ModelArtifact)>,
}

impl TrainOutcome {
    pub fn report(&self) -> String {
        let mut s = String::new();
        for (spec, cv) in &self.cv {
            let _ = writeln!(s, "Mean {} Accuracy: {}", spec.name(), cv.mean);
        }
        for line in &self.trace {
            let _ = writeln!(s, "{line}");
        }
        let _ = writeln!(s, "Accuracy on Validation Set: {}", self.validation.accuracy);
        s
    }
}

/// Reads metric rows and labels every window that delivered something.
pub fn load_dataset(path: &Path, strict: bool, threshold: f64) -> Result<Dataset, CliError> {
    let report = import_csv(path, strict).map_err(|e| csv_error(path, e))?;
    if report.skipped > 0 {
        log::warn!("{}: skipped {} malformed rows", path.display(), report.skipped);
    }
    Dataset::from_metrics(&report.rows, threshold, Provenance::Imported).map_err(|e| csv_error(path, e))
}

fn artifact_stem(spec: &ModelSpec) -> &'static str {
    match spec {
        ModelSpec::Svm(_) => "svm",
        ModelSpec::DecisionTree(_) => "decision_tree",
        ModelSpec::Mlp(_) => "mlp",
    }
}

fn fit_artifact(spec: &ModelSpec, x: &[Vec<f64>], y: &[bool], seed: u64) -> Result<ModelArtifact, CliError> {
    let scaler = Standardizer::fit(x)?;
    let xs = scaler.transform(x);
    let model = match *spec {
        ModelSpec::Svm(p) => ModelParams::Svm {
            svm: fit_svm(&xs, y, p, seed)?,
        },
        ModelSpec::DecisionTree(p) => ModelParams::DecisionTree {
            tree: fit_decision_tree(&xs, y, p)?,
        },
        ModelSpec::Mlp(p) => ModelParams::MlpClassifier {
            mlp: fit_mlp_classifier(&xs, y, p, seed)?.mlp,
        },
    };
    Ok(ModelArtifact {
        schema_version: SCHEMA_VERSION,
        features: CLASSIFIER_FEATURES.iter().map(|s| s.to_string()).collect(),
        hyperparameters: serde_json::to_value(spec).map_err(|e| CliError::Internal(e.to_string()))?,
        scaler,
        model,
        trace: Vec::new(),
    })
}

/// Cross-validates the three classifiers, fits them on all rows, and
/// trains the throughput regressor on a held-out split.
pub fn train(dataset: &Dataset, opts: TrainOptions) -> Result<TrainOutcome, CliError> {
    let (low, high) = dataset.class_counts();
    if low == 0 || high == 0 {
        return Err(CliError::Degenerate(format!(
            "single class: {low} Low and {high} High rows after labeling"
        )));
    }
    if dataset.len() < opts.folds.max(2) {
        return Err(CliError::Degenerate(format!(
            "{} rows is too few for {}-fold cross-validation",
            dataset.len(),
            opts.folds
        )));
    }
    let x = dataset.features();
    let y = dataset.labels();
    let majority = low.max(high) as f64 / dataset.len() as f64;

    let specs = ModelSpec::defaults();
    let fitted = specs
        .par_iter()
        .enumerate()
        .map(|(i, spec)| -> Result<_, CliError> {
            let cv = repeated_cv(spec, &x, &y, opts.folds, opts.runs, opts.seed, true)?;
            log::info!("{} cross-validation mean {} std {}", spec.name(), cv.mean, cv.std);
            let artifact = fit_artifact(spec, &x, &y, derive_seed(opts.seed, 1000 + i as u64))?;
            Ok((*spec, cv, artifact))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let rx = dataset.regression_features();
    let ry = dataset.throughputs();
    let (train_idx, test_idx) = train_test_split(
        dataset.len(),
        SplitSpec {
            test_fraction: opts.test_fraction,
            seed: opts.seed,
        },
    )?;
    let pick_x = |idx: &[usize]| idx.iter().map(|&i| rx[i].clone()).collect::<Vec<_>>();
    let pick_y = |idx: &[usize]| idx.iter().map(|&i| ry[i]).collect::<Vec<_>>();
    let (x_train, y_train) = (pick_x(&train_idx), pick_y(&train_idx));
    let (x_test, y_test) = (pick_x(&test_idx), pick_y(&test_idx));
    let scaler = Standardizer::fit(&x_train)?;
    let target_scaler = Standardizer::fit_column(&y_train)?;
    let y_train_z: Vec<f64> = y_train
        .iter()
        .map(|&v| target_scaler.transform_row(&[v])[0])
        .collect();
    let params = MlpParams::regressor();
    let fit = fit_mlp_regressor(&scaler.transform(&x_train), &y_train_z, params, opts.seed)?;
    let regressor = ModelArtifact {
        schema_version: SCHEMA_VERSION,
        features: REGRESSOR_FEATURES.iter().map(|s| s.to_string()).collect(),
        hyperparameters: json!({
            "hidden": params.hidden,
            "lr": params.lr,
            "epochs": params.epochs,
            "test_fraction": opts.test_fraction,
            "tolerance": opts.tolerance,
        }),
        scaler,
        model: ModelParams::MlpRegressor {
            mlp: fit.mlp,
            target_scaler,
        },
        trace: fit.trace.clone(),
    };
    let predictions = x_test
        .iter()
        .map(|row| regressor.regress(row))
        .collect::<Result<Vec<_>, _>>()?;
    let validation = evaluate_regressor(&predictions, &y_test, opts.tolerance)?;

    let mut artifacts = Vec::new();
    let mut cv = Vec::new();
    for (spec, report, artifact) in fitted {
        artifacts.push((artifact_stem(&spec), artifact));
        cv.push((spec, report));
    }
    artifacts.push(("regressor", regressor));
    Ok(TrainOutcome {
        cv,
        majority,
        trace: fit.trace,
        validation,
        artifacts,
    })
}
