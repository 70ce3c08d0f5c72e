use serde::{Deserialize, Serialize};

use super::{
    Classifier, DecisionTree, LinearSvm, Mlp, MlError, MlpClassifier, Standardizer, TraceLine,
};
use crate::fairness::LatencyPredictor;
use crate::measurement::LatencyClass;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelParams {
    Svm { svm: LinearSvm },
    DecisionTree { tree: DecisionTree },
    MlpClassifier { mlp: Mlp },
    MlpRegressor { mlp: Mlp, target_scaler: Standardizer },
}

/// A trained model with everything needed to apply it to raw features.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelArtifact {
    pub schema_version: u32,
    /// Names of the raw input features, in order.
    pub features: Vec<String>,
    pub hyperparameters: serde_json::Value,
    pub scaler: Standardizer,
    pub model: ModelParams,
    #[serde(default)]
    pub trace: Vec<TraceLine>,
}

impl ModelArtifact {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("artifact serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, MlError> {
        let artifact: Self =
            serde_json::from_str(text).map_err(|e| MlError::Artifact(e.to_string()))?;
        if artifact.schema_version != SCHEMA_VERSION {
            return Err(MlError::Artifact(format!(
                "unsupported schema version {}",
                artifact.schema_version
            )));
        }
        Ok(artifact)
    }

    /// The model as a classifier over raw features; fails for regressors.
    pub fn classifier(&self) -> Result<ScaledClassifier, MlError> {
        let model: Box<dyn Classifier> = match &self.model {
            ModelParams::Svm { svm } => Box::new(svm.clone()),
            ModelParams::DecisionTree { tree } => Box::new(tree.clone()),
            ModelParams::MlpClassifier { mlp } => Box::new(MlpClassifier { mlp: mlp.clone() }),
            ModelParams::MlpRegressor { .. } => {
                return Err(MlError::Artifact("regressor is not a classifier".into()))
            }
        };
        Ok(ScaledClassifier {
            scaler: self.scaler.clone(),
            model,
        })
    }

    /// Predicts on raw features with a regressor artifact.
    pub fn regress(&self, x: &[f64]) -> Result<f64, MlError> {
        match &self.model {
            ModelParams::MlpRegressor { mlp, target_scaler } => {
                Ok(target_scaler.inverse_scalar(mlp.forward(&self.scaler.transform_row(x))))
            }
            _ => Err(MlError::Artifact("not a regressor".into())),
        }
    }
}

/// A classifier applied after its training-time standardization. As a
/// latency predictor its features are `(block_size, throughput)`.
pub struct ScaledClassifier {
    pub scaler: Standardizer,
    pub model: Box<dyn Classifier>,
}

impl ScaledClassifier {
    pub fn new(scaler: Standardizer, model: Box<dyn Classifier>) -> Self {
        Self { scaler, model }
    }
}

impl Classifier for ScaledClassifier {
    fn predict(&self, x: &[f64]) -> bool {
        self.model.predict(&self.scaler.transform_row(x))
    }
}

impl LatencyPredictor for ScaledClassifier {
    fn predict(&self, block_size: f64, throughput: f64) -> LatencyClass {
        LatencyClass::from_high(Classifier::predict(self, &[block_size, throughput]))
    }
}
