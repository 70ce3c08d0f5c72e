//! Builds the controller a scenario asks for and runs the scenario.

use thiserror::Error;

use crate::bbr::{BbrConfig, BbrController};
use crate::fairness::{
    group_shared_bottlenecks, CoupledConfig, CoupledController, FairnessError, LatencyPredictor,
};
use crate::measurement::MetricsRow;
use crate::scenario::{Algorithm, ConfigError, FlowSpec, ScenarioConfig};
use crate::simcore::{CongestionController, RunStats, SimError, SimTime, Simulation};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Fairness(#[from] FairnessError),
    #[error("algorithm coupled_ml needs a latency predictor")]
    MissingPredictor,
}

pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub stats: RunStats,
    pub flows: Vec<FlowSpec>,
}

pub fn build_controller(
    config: &ScenarioConfig,
    predictor: Option<Box<dyn LatencyPredictor>>,
) -> Result<Box<dyn CongestionController>, ExperimentError> {
    let links = config.build_links();
    let flows = config.build_flows()?;
    let bbr = BbrController::new(
        flows
            .iter()
            .map(|f| BbrConfig::for_packet_size(f.message_bytes))
            .collect(),
        config.seed,
    );
    if config.algorithm == Algorithm::Bbr {
        return Ok(Box::new(bbr));
    }
    let grouping = group_shared_bottlenecks(&links, &flows)?;
    let coupled = CoupledController::new(
        bbr,
        &grouping,
        flows.iter().map(|f| f.id).collect(),
        CoupledConfig {
            alpha_mode: config.alpha_mode,
            rtt_prime: config.rtt_prime,
            window_rtts: config.window_rtts,
        },
    );
    match (config.algorithm, predictor) {
        (Algorithm::CoupledMl, Some(p)) => Ok(Box::new(coupled.with_predictor(p))),
        (Algorithm::CoupledMl, None) => Err(ExperimentError::MissingPredictor),
        _ => Ok(Box::new(coupled)),
    }
}

/// Runs the scenario for its configured duration.
pub fn run_scenario(
    config: &ScenarioConfig,
    predictor: Option<Box<dyn LatencyPredictor>>,
) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let controller = build_controller(config, predictor)?;
    let mut sim = Simulation::new(config, controller)?;
    let stats = sim.run(SimTime::ZERO + config.duration())?;
    Ok(RunOutput {
        rows: sim.into_rows(),
        stats,
        flows: config.build_flows()?,
    })
}

/// Mean throughput of each flow in bits/s over windows starting at or after
/// `from_s`, in flow order.
pub fn mean_throughput_bps(rows: &[MetricsRow], flows: &[FlowSpec], from_s: f64) -> Vec<(u32, f64)> {
    flows
        .iter()
        .map(|f| {
            let (sum, count) = rows
                .iter()
                .filter(|r| r.flow_id == f.id && r.window_start >= from_s)
                .fold((0.0, 0usize), |(s, c), r| (s + r.throughput, c + 1));
            let msgs = if count == 0 { 0.0 } else { sum / count as f64 };
            (f.id, msgs * f64::from(f.message_bytes) * 8.0)
        })
        .collect()
}
