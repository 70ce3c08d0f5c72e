//! Single-path BBR: windowed bandwidth/RTT filters, the Startup / Drain /
//! ProbeBW / ProbeRTT state machine, and pacing-rate / cwnd computation.

mod filter;
mod state;

use thiserror::Error;

pub use filter::{BtlBwFilter, Extremum, RtPropFilter, TimedMaxFilter, WindowedFilter};
pub use state::{
    BbrConfig, BbrFlowState, BbrMode, BASELINE_GAIN_VECTOR, CYCLE_LEN, DRAIN_GAIN, STARTUP_GAIN,
};

use crate::measurement::MetricsRow;
use crate::rng::rng_for;
use crate::simcore::{AckSample, CongestionController, SimTime};
use rand::Rng;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BbrError {
    #[error("invalid ack sample: rtt must be positive and delivery rate finite and non-negative")]
    InvalidSample,
}

/// Seed stream reserved for choosing each flow's ProbeBW entry phase.
const PHASE_STREAM: u64 = 0x0062_6272;

/// Baseline controller: every flow runs independent single-path BBR.
#[derive(Clone, Debug)]
pub struct BbrController {
    flows: Vec<BbrFlowState>,
}

impl BbrController {
    /// One state per flow; entry phases are drawn from `{0, 2, ..., 7}`
    /// using a stream derived from `seed` and the flow index.
    pub fn new(configs: Vec<BbrConfig>, seed: u64) -> Self {
        let flows = configs
            .into_iter()
            .enumerate()
            .map(|(i, cfg)| {
                let mut rng = rng_for(seed ^ PHASE_STREAM, i as u64);
                let mut phase = rng.gen_range(0..CYCLE_LEN - 1);
                if phase >= 1 {
                    phase += 1;
                }
                BbrFlowState::new(cfg, phase)
            })
            .collect();
        Self { flows }
    }

    pub fn state(&self, flow: usize) -> &BbrFlowState {
        &self.flows[flow]
    }

    pub fn state_mut(&mut self, flow: usize) -> &mut BbrFlowState {
        &mut self.flows[flow]
    }

    pub fn len(&self) -> usize {
        self.flows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.flows.is_empty()
    }
}

impl CongestionController for BbrController {
    fn on_send(&mut self, flow: usize, _now: SimTime, inflight: u64) {
        self.flows[flow].on_send(inflight);
    }

    fn on_ack(&mut self, flow: usize, sample: &AckSample) {
        // the engine only produces positive RTTs and finite rates
        if let Err(e) = self.flows[flow].on_ack(sample) {
            log::warn!("flow {flow}: dropped ack sample: {e}");
        }
    }

    fn on_loss(&mut self, flow: usize, _now: SimTime, inflight: u64) {
        self.flows[flow].on_loss(inflight);
    }

    fn pacing_rate(&self, flow: usize) -> f64 {
        self.flows[flow].pacing_rate()
    }

    fn cwnd(&self, flow: usize) -> u64 {
        self.flows[flow].cwnd()
    }

    fn on_window_close(&mut self, _now: SimTime, _rows: &[MetricsRow]) {}

    fn bbr_state(&self, flow: usize) -> Option<&BbrFlowState> {
        Some(&self.flows[flow])
    }
}
