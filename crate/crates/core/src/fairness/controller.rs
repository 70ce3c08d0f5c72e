use std::collections::BTreeMap;
use std::time::Duration;

use super::{
    compute_alpha, compute_bdp, coupled_pacing_rate, gain_vector, ml_advise_alpha, AlphaMode,
    Grouping, RttPrime, SharedBottleneckSet, SubflowFairState, ALPHA_MAX,
};
use crate::bbr::{BbrController, BbrFlowState, BbrMode};
use crate::measurement::{LatencyClass, MetricsRow};
use crate::simcore::{AckSample, CongestionController, SimTime};

/// Classifies a subflow's latency from its recent window.
pub trait LatencyPredictor: Send {
    fn predict(&self, block_size: f64, throughput: f64) -> LatencyClass;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CoupledConfig {
    pub alpha_mode: AlphaMode,
    pub rtt_prime: RttPrime,
    /// `W` expressed in multiples of RTT'.
    pub window_rtts: f64,
}

impl Default for CoupledConfig {
    fn default() -> Self {
        Self {
            alpha_mode: AlphaMode::AsPrinted,
            rtt_prime: RttPrime::Max,
            window_rtts: 10.0,
        }
    }
}

struct Advisor {
    predictor: Box<dyn LatencyPredictor>,
    /// Per-flow factor applied on top of the formula alpha until the next
    /// window close.
    multipliers: Vec<f64>,
}

/// BBR with the coupled gain vector and inflight-gated pacing applied to
/// every shared-bottleneck set of two or more subflows.
pub struct CoupledController {
    bbr: BbrController,
    sets: Vec<SharedBottleneckSet>,
    membership: Vec<Option<usize>>,
    fair: Vec<Option<SubflowFairState>>,
    flow_ids: Vec<u32>,
    config: CoupledConfig,
    advisor: Option<Advisor>,
}

impl CoupledController {
    /// `flow_ids[i]` is the id that flow index `i` reports in metrics rows.
    pub fn new(
        bbr: BbrController,
        grouping: &Grouping,
        flow_ids: Vec<u32>,
        config: CoupledConfig,
    ) -> Self {
        let n = bbr.len();
        let mut membership = vec![None; n];
        let mut fair = vec![None; n];
        for (s, set) in grouping.sets.iter().enumerate() {
            for &m in &set.members {
                membership[m] = Some(s);
                if set.n() >= 2 {
                    fair[m] = Some(SubflowFairState::new(set.initial_alpha()));
                }
            }
        }
        let mut controller = Self {
            bbr,
            sets: grouping.sets.clone(),
            membership,
            fair,
            flow_ids,
            config,
            advisor: None,
        };
        for s in 0..controller.sets.len() {
            controller.apply_set_alpha(s);
        }
        controller
    }

    /// Enables the ML-advised alpha loop, run at every window close.
    pub fn with_predictor(mut self, predictor: Box<dyn LatencyPredictor>) -> Self {
        self.advisor = Some(Advisor {
            predictor,
            multipliers: vec![1.0; self.bbr.len()],
        });
        self
    }

    pub fn sets(&self) -> &[SharedBottleneckSet] {
        &self.sets
    }

    pub fn bbr(&self) -> &BbrController {
        &self.bbr
    }

    pub fn fair_state(&self, flow: usize) -> Option<&SubflowFairState> {
        self.fair[flow].as_ref()
    }

    fn coupled_set(&self, flow: usize) -> Option<usize> {
        self.membership[flow].filter(|&s| self.sets[s].n() >= 2)
    }

    fn rtt_prime(&self, state: &BbrFlowState) -> Option<Duration> {
        match self.config.rtt_prime {
            RttPrime::Max => state.rtt_max_estimate(),
            RttPrime::Min => state.rtprop_estimate(),
        }
    }

    /// Refreshes W, the max delivery rate and the BDP of one subflow.
    fn refresh_flow(&mut self, flow: usize) {
        let rtt = self.rtt_prime(self.bbr.state(flow));
        let state = self.bbr.state_mut(flow);
        if let Some(rtt) = rtt {
            state
                .max_delivery_window
                .set_window(rtt.mul_f64(self.config.window_rtts));
        }
        let max_rate = state.max_delivery_window.estimate().unwrap_or(0.0);
        let bits = state.config.packet_bits;
        let gain = state.pacing_gain;
        let inflight = state.inflight;
        let Some(fair) = self.fair[flow].as_mut() else {
            return;
        };
        fair.max_rate = max_rate;
        fair.rtt_prime = rtt;
        if let Some(rtt) = rtt {
            fair.bdp = compute_bdp(max_rate, rtt, bits).unwrap_or(0);
        }
        fair.paced_rate = coupled_pacing_rate(gain, max_rate, inflight, fair.bdp);
    }

    /// Recomputes the formula alpha of a set from the members' BtlBW and
    /// pushes the resulting gain vectors into their BBR states.
    fn apply_set_alpha(&mut self, set: usize) {
        let members = self.sets[set].members.clone();
        if members.len() < 2 {
            return;
        }
        let btlbw: BTreeMap<usize, f64> = members
            .iter()
            .filter_map(|&m| self.bbr.state(m).btlbw_estimate().map(|bw| (m, bw)))
            .collect();
        // keep the 1/n initialization until every member has an estimate
        let base = compute_alpha(&self.sets[set], &btlbw, self.config.alpha_mode).ok();
        for &m in &members {
            let fair = self.fair[m].as_mut().expect("set member has fair state");
            if let Some(base) = &base {
                fair.base_alpha = base[&m];
            }
            let multiplier = self
                .advisor
                .as_ref()
                .map_or(1.0, |a| a.multipliers[m]);
            let alpha = (fair.base_alpha * multiplier).clamp(f64::MIN_POSITIVE, ALPHA_MAX);
            fair.alpha = alpha;
            fair.gain_vector = gain_vector(alpha).expect("alpha clamped into (0, 1]");
            let gains = fair.gain_vector;
            self.bbr.state_mut(m).set_gain_vector(gains);
        }
    }

    fn advise(&mut self, rows: &[MetricsRow]) {
        let Some(advisor) = self.advisor.as_ref() else {
            return;
        };
        let mut updates = Vec::new();
        for set in self.sets.iter().filter(|s| s.n() >= 2) {
            let mut thr = BTreeMap::new();
            let mut predictions = BTreeMap::new();
            for &m in &set.members {
                let id = self.flow_ids[m];
                let Some(row) = rows.iter().find(|r| r.flow_id == id) else {
                    continue;
                };
                thr.insert(m, row.throughput);
                predictions.insert(
                    m,
                    advisor
                        .predictor
                        .predict(row.block_size as f64, row.throughput),
                );
            }
            let total: f64 = thr.values().sum();
            if thr.len() != set.n() || total <= 0.0 {
                continue;
            }
            let shares: BTreeMap<usize, f64> = thr.iter().map(|(&m, &t)| (m, t / total)).collect();
            // advice perturbs the formula alpha for one interval; it does not
            // compound across intervals
            let alphas: BTreeMap<usize, f64> = set
                .members
                .iter()
                .map(|&m| (m, self.fair[m].as_ref().map_or(1.0, |f| f.base_alpha)))
                .collect();
            match ml_advise_alpha(&alphas, &predictions, &shares) {
                Ok(advised) => {
                    for (m, alpha) in advised {
                        let base = self.fair[m].as_ref().map_or(1.0, |f| f.base_alpha);
                        updates.push((m, alpha / base));
                    }
                }
                Err(e) => log::warn!("set {}: ml advice skipped: {e}", set.set_id),
            }
        }
        if let Some(advisor) = self.advisor.as_mut() {
            for (m, multiplier) in updates {
                advisor.multipliers[m] = multiplier;
            }
        }
        for s in 0..self.sets.len() {
            self.apply_set_alpha(s);
        }
    }
}

impl CongestionController for CoupledController {
    fn on_flow_start(&mut self, flow: usize, now: SimTime) {
        self.bbr.on_flow_start(flow, now);
    }

    fn on_send(&mut self, flow: usize, now: SimTime, inflight: u64) {
        self.bbr.on_send(flow, now, inflight);
    }

    fn on_ack(&mut self, flow: usize, sample: &AckSample) {
        self.bbr.on_ack(flow, sample);
        if let Some(set) = self.coupled_set(flow) {
            self.refresh_flow(flow);
            self.apply_set_alpha(set);
        }
    }

    fn on_loss(&mut self, flow: usize, now: SimTime, inflight: u64) {
        self.bbr.on_loss(flow, now, inflight);
    }

    fn pacing_rate(&self, flow: usize) -> f64 {
        let state = self.bbr.state(flow);
        match (&self.fair[flow], self.coupled_set(flow)) {
            // without a delivery-rate sample in the window fall back to BBR
            (Some(fair), Some(_)) if state.mode == BbrMode::ProbeBw && fair.max_rate > 0.0 => {
                coupled_pacing_rate(state.pacing_gain, fair.max_rate, state.inflight, fair.bdp)
            }
            _ => self.bbr.pacing_rate(flow),
        }
    }

    fn cwnd(&self, flow: usize) -> u64 {
        self.bbr.cwnd(flow)
    }

    fn on_window_close(&mut self, now: SimTime, rows: &[MetricsRow]) {
        self.bbr.on_window_close(now, rows);
        self.advise(rows);
    }

    fn bbr_state(&self, flow: usize) -> Option<&BbrFlowState> {
        Some(self.bbr.state(flow))
    }
}
