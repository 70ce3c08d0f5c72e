//! Runs one scenario under every algorithm and compares fairness.

use fairbbr_core::experiment::{mean_throughput_bps, run_scenario, RunOutput};
use fairbbr_core::fairness::{group_shared_bottlenecks, jain_index, LatencyPredictor};
use fairbbr_core::measurement::{Dataset, LatencyClass, Provenance, DEFAULT_LATENCY_THRESHOLD};
use fairbbr_core::ml::{fit_decision_tree, ModelArtifact, ScaledClassifier, Standardizer, TreeParams};
use fairbbr_core::scenario::{Algorithm, ScenarioConfig};

use crate::error::CliError;

pub const REPORT_HEADER: [&str; 5] = ["run_id", "algorithm", "flow_id", "throughput_bps", "jain_index"];

#[derive(Clone, Debug, PartialEq)]
pub struct FairnessRow {
    pub run_id: u64,
    pub algorithm: Algorithm,
    pub flow_id: u32,
    pub throughput_bps: f64,
    pub jain_index: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FairnessReport {
    pub rows: Vec<FairnessRow>,
    /// Jain index per algorithm, in run order.
    pub jain: Vec<(Algorithm, f64)>,
}

impl FairnessReport {
    pub fn jain_of(&self, algorithm: Algorithm) -> Option<f64> {
        self.jain.iter().find(|(a, _)| *a == algorithm).map(|(_, j)| *j)
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let err = |e: csv::Error| CliError::Internal(e.to_string());
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(REPORT_HEADER).map_err(err)?;
        for r in &self.rows {
            w.write_record([
                r.run_id.to_string(),
                r.algorithm.to_string(),
                r.flow_id.to_string(),
                r.throughput_bps.to_string(),
                r.jain_index.to_string(),
            ])
            .map_err(err)?;
        }
        w.into_inner().map_err(|e| CliError::Internal(e.to_string()))
    }
}

/// Where the coupled_ml run gets its latency predictor.
pub enum PredictorSource {
    /// A trained classifier artifact.
    Artifact(Box<ModelArtifact>),
    /// A decision tree fitted on the windows of the coupled run.
    Bootstrap,
}

struct ConstantClass(LatencyClass);

impl LatencyPredictor for ConstantClass {
    fn predict(&self, _block_size: f64, _throughput: f64) -> LatencyClass {
        self.0
    }
}

/// Fits a tree on the labeled windows of `run`. A run whose windows are
/// all one class yields a predictor that always answers that class.
pub fn bootstrap_predictor(run: &RunOutput) -> Result<Box<dyn LatencyPredictor>, CliError> {
    let data = Dataset::from_metrics(&run.rows, DEFAULT_LATENCY_THRESHOLD, Provenance::Simulator)
        .map_err(|e| CliError::Internal(e.to_string()))?;
    let (low, high) = data.class_counts();
    if low == 0 || high == 0 {
        let class = LatencyClass::from_high(high > 0);
        log::info!("bootstrap data holds only {class} windows; using a constant predictor");
        return Ok(Box::new(ConstantClass(class)));
    }
    let x = data.features();
    let scaler = Standardizer::fit(&x)?;
    let tree = fit_decision_tree(&scaler.transform(&x), &data.labels(), TreeParams::default())?;
    Ok(Box::new(ScaledClassifier::new(scaler, Box::new(tree))))
}

/// Fails unless at least two subflows of one connection share a
/// bottleneck.
pub fn require_shared_bottleneck(cfg: &ScenarioConfig) -> Result<(), CliError> {
    let grouping = group_shared_bottlenecks(&cfg.build_links(), &cfg.build_flows()?)?;
    if grouping.sets.is_empty() {
        return Err(CliError::Invalid(
            "no shared bottleneck: fairness needs two or more subflows of one connection on the same bottleneck".into(),
        ));
    }
    Ok(())
}

/// Runs bbr, coupled and coupled_ml with the config's seed and scores
/// throughput shares over the final third of the run.
pub fn compare(cfg: &ScenarioConfig, source: PredictorSource) -> Result<FairnessReport, CliError> {
    cfg.validate()?;
    require_shared_bottleneck(cfg)?;
    let tail_from = cfg.duration_s * 2.0 / 3.0;
    let mut rows = Vec::new();
    let mut jain = Vec::new();
    let mut coupled_run = None;
    let mut source = Some(source);
    for algorithm in Algorithm::ALL {
        let mut run_cfg = cfg.clone();
        run_cfg.algorithm = algorithm;
        let predictor = match algorithm {
            Algorithm::CoupledMl => Some(match source.take().expect("used once") {
                PredictorSource::Artifact(a) => Box::new(a.classifier()?) as Box<dyn LatencyPredictor>,
                PredictorSource::Bootstrap => {
                    bootstrap_predictor(coupled_run.as_ref().expect("coupled runs first"))?
                }
            }),
            _ => None,
        };
        let out = run_scenario(&run_cfg, predictor)?;
        let shares = mean_throughput_bps(&out.rows, &out.flows, tail_from);
        let values: Vec<f64> = shares.iter().map(|(_, v)| *v).collect();
        let j = jain_index(&values).unwrap_or(0.0);
        log::info!("{algorithm}: jain {j}");
        jain.push((algorithm, j));
        rows.extend(shares.into_iter().map(|(flow_id, throughput_bps)| FairnessRow {
            run_id: cfg.seed,
            algorithm,
            flow_id,
            throughput_bps,
            jain_index: j,
        }));
        if algorithm == Algorithm::Coupled {
            coupled_run = Some(out);
        }
    }
    Ok(FairnessReport { rows, jain })
}
