//! Coupled congestion control for subflows that share a bottleneck.
//!
//! Subflows of one connection whose paths share the same lowest-capacity link
//! form a shared-bottleneck set. Inside a set every subflow computes a coupling
//! weight alpha from the members' bottleneck-bandwidth estimates, replaces the
//! unit gains of ProbeBW phases 2..8 with alpha, and paces at
//! `gain * max delivery rate` only while its inflight is within its BDP.
//! Subflows outside any set run plain BBR.

mod controller;

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use controller::{CoupledConfig, CoupledController, LatencyPredictor};

use crate::bbr::CYCLE_LEN;
use crate::measurement::LatencyClass;
use crate::scenario::FlowSpec;
use crate::simcore::Link;

pub const ALPHA_MIN: f64 = 0.05;
pub const ALPHA_MAX: f64 = 1.0;
pub const ML_INCREASE: f64 = 1.1;
pub const ML_DECREASE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FairnessError {
    #[error("shared-bottleneck set is empty")]
    EmptySet,
    #[error("subflow {0} has no positive bandwidth estimate")]
    NonPositiveBandwidth(usize),
    #[error("rtt must be positive")]
    InvalidRtt,
    #[error("alpha {0} outside (0, 1]")]
    AlphaOutOfRange(f64),
    #[error("throughput list is empty")]
    EmptyInput,
    #[error("all throughputs are zero")]
    AllZero,
    #[error("negative or non-finite throughput {0}")]
    InvalidThroughput(f64),
    #[error("no latency prediction for subflow {0}")]
    MissingPrediction(usize),
    #[error("subflow {0} has no route through the topology")]
    Unroutable(u32),
}

/// How alpha is derived from the members' BtlBW estimates.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaMode {
    /// `max_r BtlBW_r / sum_r BtlBW_r`, the same value for every member.
    #[default]
    AsPrinted,
    /// `BtlBW_r / sum BtlBW`, so the members' alphas sum to one.
    PerSubflow,
}

/// Which RTT goes into the BDP used for the inflight gate.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RttPrime {
    /// Largest recent RTT sample.
    #[default]
    Max,
    /// RTprop, the windowed minimum.
    Min,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SharedBottleneckSet {
    pub set_id: usize,
    /// Flow indices, ascending.
    pub members: Vec<usize>,
    pub bottleneck_link: usize,
}

impl SharedBottleneckSet {
    pub fn n(&self) -> usize {
        self.members.len()
    }

    pub fn initial_alpha(&self) -> f64 {
        1.0 / self.n() as f64
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Grouping {
    pub sets: Vec<SharedBottleneckSet>,
    /// Flows that behave as single-path BBR.
    pub independent: Vec<usize>,
}

/// Groups subflows of the same connection by their bottleneck link, using
/// the known topology. Only groups of two or more form sets.
pub fn group_shared_bottlenecks(
    links: &[Link],
    flows: &[FlowSpec],
) -> Result<Grouping, FairnessError> {
    let mut groups: BTreeMap<(u32, usize), Vec<usize>> = BTreeMap::new();
    for (i, flow) in flows.iter().enumerate() {
        if flow.path.iter().any(|&l| l >= links.len()) {
            return Err(FairnessError::Unroutable(flow.id));
        }
        let bottleneck = flow
            .bottleneck(links)
            .ok_or(FairnessError::Unroutable(flow.id))?;
        groups.entry((flow.connection, bottleneck)).or_default().push(i);
    }
    let mut grouping = Grouping::default();
    for ((_, link), members) in groups {
        if members.len() >= 2 {
            grouping.sets.push(SharedBottleneckSet {
                set_id: grouping.sets.len(),
                members,
                bottleneck_link: link,
            });
        } else {
            grouping.independent.extend(members);
        }
    }
    grouping.independent.sort_unstable();
    Ok(grouping)
}

pub fn compute_alpha(
    set: &SharedBottleneckSet,
    btlbw: &BTreeMap<usize, f64>,
    mode: AlphaMode,
) -> Result<BTreeMap<usize, f64>, FairnessError> {
    if set.members.is_empty() {
        return Err(FairnessError::EmptySet);
    }
    let mut values = Vec::with_capacity(set.n());
    for &m in &set.members {
        match btlbw.get(&m) {
            Some(&bw) if bw > 0.0 && bw.is_finite() => values.push((m, bw)),
            _ => return Err(FairnessError::NonPositiveBandwidth(m)),
        }
    }
    let sum: f64 = values.iter().map(|&(_, bw)| bw).sum();
    let max = values.iter().map(|&(_, bw)| bw).fold(0.0, f64::max);
    Ok(values
        .into_iter()
        .map(|(m, bw)| {
            let alpha = match mode {
                AlphaMode::AsPrinted => max / sum,
                AlphaMode::PerSubflow => bw / sum,
            };
            (m, alpha)
        })
        .collect())
}

/// `ceil(max_rate * rtt / packet_bits)` packets.
pub fn compute_bdp(max_rate: f64, rtt: Duration, packet_bits: f64) -> Result<u64, FairnessError> {
    if rtt.is_zero() {
        return Err(FairnessError::InvalidRtt);
    }
    let packets = max_rate.max(0.0) * rtt.as_secs_f64() / packet_bits;
    // absorb rounding noise so exact products are not bumped up by one
    Ok((packets - 1e-9).ceil().max(0.0) as u64)
}

/// `gain * max_rate` while `inflight <= bdp`, otherwise zero (paused until
/// inflight drains back to the BDP).
pub fn coupled_pacing_rate(gain: f64, max_rate: f64, inflight: u64, bdp: u64) -> f64 {
    if inflight <= bdp {
        gain * max_rate
    } else {
        0.0
    }
}

pub fn gain_vector(alpha: f64) -> Result<[f64; CYCLE_LEN], FairnessError> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(FairnessError::AlphaOutOfRange(alpha));
    }
    let mut g = [alpha; CYCLE_LEN];
    g[0] = 1.25;
    g[1] = 0.75;
    Ok(g)
}

/// `(sum x)^2 / (n * sum x^2)`.
pub fn jain_index(throughputs: &[f64]) -> Result<f64, FairnessError> {
    if throughputs.is_empty() {
        return Err(FairnessError::EmptyInput);
    }
    if let Some(&bad) = throughputs.iter().find(|x| !(x.is_finite() && **x >= 0.0)) {
        return Err(FairnessError::InvalidThroughput(bad));
    }
    let sum: f64 = throughputs.iter().sum();
    let sum_sq: f64 = throughputs.iter().map(|x| x * x).sum();
    if sum_sq == 0.0 {
        return Err(FairnessError::AllZero);
    }
    let jain = sum * sum / (throughputs.len() as f64 * sum_sq);
    Ok(jain.min(1.0))
}

/// One control step of the ML-advised adjustment.
///
/// A member predicted `High` that gets less than its fair share `1/n` has
/// its alpha raised by 10%; a member predicted `Low` that gets more than its
/// fair share has it lowered by 10%. Results stay within
/// `[ALPHA_MIN, ALPHA_MAX]`.
pub fn ml_advise_alpha(
    alphas: &BTreeMap<usize, f64>,
    predictions: &BTreeMap<usize, LatencyClass>,
    shares: &BTreeMap<usize, f64>,
) -> Result<BTreeMap<usize, f64>, FairnessError> {
    if alphas.is_empty() {
        return Err(FairnessError::EmptySet);
    }
    let fair = 1.0 / alphas.len() as f64;
    alphas
        .iter()
        .map(|(&r, &alpha)| {
            let class = predictions
                .get(&r)
                .ok_or(FairnessError::MissingPrediction(r))?;
            let share = shares.get(&r).copied().unwrap_or(fair);
            let next = match class {
                LatencyClass::High if share < fair => (alpha * ML_INCREASE).min(ALPHA_MAX),
                LatencyClass::Low if share > fair => (alpha * ML_DECREASE).max(ALPHA_MIN),
                _ => alpha,
            };
            Ok((r, next))
        })
        .collect()
}

/// Coupling state of one subflow in a shared-bottleneck set.
#[derive(Clone, Debug, PartialEq)]
pub struct SubflowFairState {
    pub alpha: f64,
    /// Alpha from the formula alone, before any ML adjustment.
    pub base_alpha: f64,
    pub bdp: u64,
    /// RTT' used for the BDP.
    pub rtt_prime: Option<Duration>,
    /// Max delivery rate over `[T - W, T]`, bits/s.
    pub max_rate: f64,
    pub gain_vector: [f64; CYCLE_LEN],
    pub paced_rate: f64,
}

impl SubflowFairState {
    pub fn new(initial_alpha: f64) -> Self {
        Self {
            alpha: initial_alpha,
            base_alpha: initial_alpha,
            bdp: 0,
            rtt_prime: None,
            max_rate: 0.0,
            gain_vector: gain_vector(initial_alpha).unwrap_or(crate::bbr::BASELINE_GAIN_VECTOR),
            paced_rate: 0.0,
        }
    }
}

#[cfg(test)]
mod tests;
