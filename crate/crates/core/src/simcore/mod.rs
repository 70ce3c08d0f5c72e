//! Deterministic discrete-event core: clock, event queue, drop-tail links and
//! the packet-level engine that moves flows' packets through them.

mod engine;
mod link;
mod packet;
mod scheduler;
pub mod time;

use std::time::Duration;

use thiserror::Error;

pub use engine::{
    Departure, EventKind, FlowStats, LinkEvent, RunStats, Simulation, Timer, TraceEntry,
};
pub use link::{Admission, Link, LinkQueue};
pub use packet::Packet;
pub use scheduler::{EventHandle, Scheduler};
pub use time::SimTime;

use crate::bbr::{BbrFlowState, BbrMode};
use crate::measurement::MetricsRow;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("cannot schedule at {at}, current time is {now}")]
    SchedulingInPast { at: SimTime, now: SimTime },
    #[error("configuration error: {0}")]
    Config(String),
}

/// What the sender learns from one acknowledgement.
#[derive(Clone, Debug, PartialEq)]
pub struct AckSample {
    pub now: SimTime,
    pub rtt: Duration,
    /// Delivery rate in bits/s, absent when the sampling interval was too
    /// short to be meaningful.
    pub delivery_rate: Option<f64>,
    /// Packets delivered by the flow, including this one.
    pub delivered: u64,
    /// Value of `delivered` when the acknowledged packet was sent.
    pub prior_delivered: u64,
    /// The packet was sent while the application had nothing else queued.
    pub is_app_limited: bool,
    /// Packets in flight after processing this ack.
    pub inflight: u64,
}

/// Per-flow rate and window control, driven by the engine.
pub trait CongestionController: Send {
    fn on_flow_start(&mut self, _flow: usize, _now: SimTime) {}
    fn on_send(&mut self, flow: usize, now: SimTime, inflight: u64);
    fn on_ack(&mut self, flow: usize, sample: &AckSample);
    fn on_loss(&mut self, flow: usize, now: SimTime, inflight: u64);
    /// Bits per second. Zero pauses the flow until the next ack.
    fn pacing_rate(&self, flow: usize) -> f64;
    /// Packets.
    fn cwnd(&self, flow: usize) -> u64;
    /// Called once per measurement window with the rows it produced.
    fn on_window_close(&mut self, now: SimTime, rows: &[MetricsRow]);
    fn mode(&self, flow: usize) -> Option<BbrMode> {
        self.bbr_state(flow).map(|s| s.mode)
    }
    /// The flow's BBR state, for controllers built on BBR.
    fn bbr_state(&self, _flow: usize) -> Option<&BbrFlowState> {
        None
    }
}
