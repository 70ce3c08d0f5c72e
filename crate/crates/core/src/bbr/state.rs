use std::time::Duration;

use serde::{Deserialize, Serialize};

use super::filter::{BtlBwFilter, Extremum, RtPropFilter, TimedMaxFilter, WindowedFilter};
use super::BbrError;
use crate::simcore::{AckSample, SimTime};

/// Startup pacing gain, 2/ln 2.
pub const STARTUP_GAIN: f64 = 2.0 / std::f64::consts::LN_2;
/// Drain pacing gain, ln 2 / 2.
pub const DRAIN_GAIN: f64 = std::f64::consts::LN_2 / 2.0;
pub const BASELINE_GAIN_VECTOR: [f64; 8] = [1.25, 0.75, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
pub const CYCLE_LEN: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BbrMode {
    Startup,
    Drain,
    ProbeBw,
    ProbeRtt,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BbrConfig {
    pub startup_gain: f64,
    pub drain_gain: f64,
    pub cwnd_gain: f64,
    pub btlbw_window_rounds: u64,
    pub rtprop_window: Duration,
    pub probe_rtt_duration: Duration,
    /// cwnd floor in packets, also the ProbeRTT cwnd.
    pub min_cwnd: u64,
    /// Pacing rate used before the first bandwidth sample, bits/s.
    pub initial_pacing_rate: f64,
    pub packet_bits: f64,
    /// Growth factor below which a round counts towards a full pipe.
    pub full_bw_growth: f64,
    pub full_bw_rounds: u32,
    /// Rounds of history for the maximum-RTT estimate.
    pub rtt_max_window_rounds: u64,
}

impl Default for BbrConfig {
    fn default() -> Self {
        Self {
            startup_gain: STARTUP_GAIN,
            drain_gain: DRAIN_GAIN,
            cwnd_gain: 2.0,
            btlbw_window_rounds: 10,
            rtprop_window: Duration::from_secs(10),
            probe_rtt_duration: Duration::from_millis(200),
            min_cwnd: 4,
            initial_pacing_rate: 1e6,
            packet_bits: 1250.0 * 8.0,
            full_bw_growth: 1.25,
            full_bw_rounds: 3,
            rtt_max_window_rounds: 10,
        }
    }
}

impl BbrConfig {
    pub fn for_packet_size(bytes: u32) -> Self {
        Self {
            packet_bits: f64::from(bytes) * 8.0,
            ..Self::default()
        }
    }
}

/// Congestion state of one BBR flow.
#[derive(Clone, Debug)]
pub struct BbrFlowState {
    pub config: BbrConfig,
    pub mode: BbrMode,
    pub btlbw: BtlBwFilter,
    pub rtprop: RtPropFilter,
    /// Maximum RTT sample over the last `rtt_max_window_rounds` rounds.
    pub rtt_max: WindowedFilter,
    /// Maximum delivery rate over the trailing time window `[T - W, T]`.
    pub max_delivery_window: TimedMaxFilter,
    pub cycle_phase: usize,
    pub cycle_stamp: SimTime,
    pub gain_vector: [f64; CYCLE_LEN],
    pub pacing_gain: f64,
    pub cwnd_gain: f64,
    pub inflight: u64,
    pub round_count: u64,
    pub round_start: bool,
    next_round_delivered: u64,
    pub filled_pipe: bool,
    full_bw: f64,
    full_bw_count: u32,
    /// Set once the flow has gone through Drain into ProbeBW.
    drained: bool,
    /// Last time a sample matched or beat the RTprop estimate.
    pub rtprop_stamp: SimTime,
    probe_rtt_done_stamp: Option<SimTime>,
    probe_rtt_round_done: bool,
    /// Phase ProbeBW starts in when entered from Drain.
    probe_bw_entry_phase: usize,
}

impl BbrFlowState {
    /// `probe_bw_entry_phase` is taken modulo 8; phase 1 (the draining
    /// phase) is never used as an entry point and maps to phase 2.
    pub fn new(config: BbrConfig, probe_bw_entry_phase: usize) -> Self {
        let mut entry = probe_bw_entry_phase % CYCLE_LEN;
        if entry == 1 {
            entry = 2;
        }
        Self {
            mode: BbrMode::Startup,
            btlbw: BtlBwFilter::new(config.btlbw_window_rounds),
            rtprop: RtPropFilter::new(config.rtprop_window),
            rtt_max: WindowedFilter::new(Extremum::Max, config.rtt_max_window_rounds),
            max_delivery_window: TimedMaxFilter::new(Duration::from_secs(1)),
            cycle_phase: 0,
            cycle_stamp: SimTime::ZERO,
            gain_vector: BASELINE_GAIN_VECTOR,
            pacing_gain: config.startup_gain,
            cwnd_gain: config.cwnd_gain,
            inflight: 0,
            round_count: 0,
            round_start: false,
            next_round_delivered: 0,
            filled_pipe: false,
            full_bw: 0.0,
            full_bw_count: 0,
            drained: false,
            rtprop_stamp: SimTime::ZERO,
            probe_rtt_done_stamp: None,
            probe_rtt_round_done: false,
            probe_bw_entry_phase: entry,
            config,
        }
    }

    pub fn btlbw_estimate(&self) -> Option<f64> {
        self.btlbw.estimate()
    }

    pub fn rtprop_estimate(&self) -> Option<Duration> {
        self.rtprop.estimate()
    }

    pub fn rtt_max_estimate(&self) -> Option<Duration> {
        self.rtt_max
            .estimate()
            .map(|n| Duration::from_nanos(n as u64))
    }

    /// Bandwidth-delay product in packets, 0 without both estimates.
    pub fn bdp_packets(&self) -> f64 {
        match (self.btlbw.estimate(), self.rtprop.estimate()) {
            (Some(bw), Some(rtt)) => bw * rtt.as_nanos() as f64 / 1e9 / self.config.packet_bits,
            _ => 0.0,
        }
    }

    /// Bits per second: `pacing_gain * BtlBW`, or the configured initial
    /// rate before any bandwidth sample.
    pub fn pacing_rate(&self) -> f64 {
        match self.btlbw.estimate() {
            Some(bw) => self.pacing_gain * bw,
            None => self.config.initial_pacing_rate,
        }
    }

    /// Congestion window in packets.
    pub fn cwnd(&self) -> u64 {
        if self.mode == BbrMode::ProbeRtt {
            return self.config.min_cwnd;
        }
        let target = (self.cwnd_gain * self.bdp_packets()).ceil() as u64;
        target.max(self.config.min_cwnd)
    }

    pub fn on_send(&mut self, inflight: u64) {
        self.inflight = inflight;
    }

    pub fn on_loss(&mut self, inflight: u64) {
        self.inflight = inflight;
    }

    pub fn on_ack(&mut self, sample: &AckSample) -> Result<(), BbrError> {
        if sample.rtt.is_zero() {
            return Err(BbrError::InvalidSample);
        }
        if let Some(rate) = sample.delivery_rate {
            if !rate.is_finite() || rate < 0.0 {
                return Err(BbrError::InvalidSample);
            }
        }
        self.inflight = sample.inflight;
        let now = sample.now;

        self.round_start = false;
        if sample.prior_delivered >= self.next_round_delivered {
            self.next_round_delivered = sample.delivered;
            self.round_count += 1;
            self.round_start = true;
        }

        self.btlbw.advance(self.round_count);
        if let Some(rate) = sample.delivery_rate {
            let current = self.btlbw.estimate().unwrap_or(0.0);
            if !sample.is_app_limited || rate >= current {
                self.btlbw.update(self.round_count, rate);
            }
            self.max_delivery_window.update(now, rate);
        }

        self.rtt_max
            .update(self.round_count, sample.rtt.as_nanos() as f64);
        let new_min = self.rtprop.estimate().is_none_or(|m| sample.rtt < m);
        self.rtprop.update(now, sample.rtt);
        if new_min {
            self.rtprop_stamp = now;
        }

        self.check_full_pipe(sample);
        match self.mode {
            BbrMode::Startup if self.filled_pipe => self.enter_drain(),
            _ => {}
        }
        if self.mode == BbrMode::Drain && (self.inflight as f64) <= self.bdp_packets() {
            self.drained = true;
            self.enter_probe_bw(now, self.probe_bw_entry_phase);
        }
        self.advance_cycle(now);
        self.update_probe_rtt(sample);
        Ok(())
    }

    fn check_full_pipe(&mut self, sample: &AckSample) {
        if self.filled_pipe || !self.round_start || sample.is_app_limited {
            return;
        }
        let bw = self.btlbw.estimate().unwrap_or(0.0);
        if bw >= self.full_bw * self.config.full_bw_growth {
            self.full_bw = bw;
            self.full_bw_count = 0;
            return;
        }
        self.full_bw_count += 1;
        if self.full_bw_count >= self.config.full_bw_rounds {
            self.filled_pipe = true;
        }
    }

    fn enter_startup(&mut self) {
        self.mode = BbrMode::Startup;
        self.pacing_gain = self.config.startup_gain;
        self.cwnd_gain = self.config.cwnd_gain;
    }

    fn enter_drain(&mut self) {
        self.mode = BbrMode::Drain;
        self.pacing_gain = self.config.drain_gain;
        self.cwnd_gain = self.config.cwnd_gain;
    }

    pub fn enter_probe_bw(&mut self, now: SimTime, phase: usize) {
        self.mode = BbrMode::ProbeBw;
        self.cwnd_gain = self.config.cwnd_gain;
        self.cycle_phase = phase % CYCLE_LEN;
        self.cycle_stamp = now;
        self.pacing_gain = self.gain_vector[self.cycle_phase];
    }

    /// Moves to the next ProbeBW phase once a full RTprop has elapsed in the
    /// current one.
    pub fn advance_cycle(&mut self, now: SimTime) {
        if self.mode != BbrMode::ProbeBw {
            return;
        }
        let Some(rtprop) = self.rtprop.estimate() else {
            return;
        };
        if now.saturating_since(self.cycle_stamp) > rtprop {
            self.cycle_phase = (self.cycle_phase + 1) % CYCLE_LEN;
            self.cycle_stamp = now;
        }
        self.pacing_gain = self.gain_vector[self.cycle_phase];
    }

    /// Replaces the ProbeBW gain vector and refreshes the current gain.
    pub fn set_gain_vector(&mut self, gains: [f64; CYCLE_LEN]) {
        self.gain_vector = gains;
        if self.mode == BbrMode::ProbeBw {
            self.pacing_gain = self.gain_vector[self.cycle_phase];
        }
    }

    fn update_probe_rtt(&mut self, sample: &AckSample) {
        let now = sample.now;
        if self.mode != BbrMode::ProbeRtt
            && now.saturating_since(self.rtprop_stamp) > self.config.rtprop_window
        {
            self.mode = BbrMode::ProbeRtt;
            self.pacing_gain = 1.0;
            self.cwnd_gain = 1.0;
            self.probe_rtt_done_stamp = None;
            self.probe_rtt_round_done = false;
        }
        if self.mode != BbrMode::ProbeRtt {
            return;
        }
        match self.probe_rtt_done_stamp {
            None if self.inflight <= self.config.min_cwnd => {
                self.probe_rtt_done_stamp = Some(now + self.config.probe_rtt_duration);
                self.probe_rtt_round_done = false;
                self.next_round_delivered = sample.delivered;
            }
            None => {}
            Some(done) => {
                if self.round_start {
                    self.probe_rtt_round_done = true;
                }
                if self.probe_rtt_round_done && now >= done {
                    self.rtprop_stamp = now;
                    self.probe_rtt_done_stamp = None;
                    if self.drained {
                        self.enter_probe_bw(now, self.probe_bw_entry_phase);
                    } else {
                        self.enter_startup();
                    }
                }
            }
        }
    }
}
