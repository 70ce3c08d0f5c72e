//! Sliding-window extremum filters used for the bandwidth and RTT estimates.

use std::collections::VecDeque;
use std::time::Duration;

use crate::simcore::SimTime;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Extremum {
    Max,
    Min,
}

/// Exact windowed max or min over samples whose keys never decrease.
///
/// A sample with key `k` is inside the window while `latest_key - k < window`.
/// The deque holds a monotone sequence of candidates, so `estimate` is O(1)
/// and `update` is amortized O(1).
#[derive(Clone, Debug)]
pub struct WindowedFilter {
    kind: Extremum,
    window: u64,
    latest_key: u64,
    samples: VecDeque<(u64, f64)>,
}

impl WindowedFilter {
    pub fn new(kind: Extremum, window: u64) -> Self {
        Self {
            kind,
            window: window.max(1),
            latest_key: 0,
            samples: VecDeque::new(),
        }
    }

    pub fn window(&self) -> u64 {
        self.window
    }

    pub fn set_window(&mut self, window: u64) {
        self.window = window.max(1);
        self.expire();
    }

    fn dominates(&self, newer: f64, older: f64) -> bool {
        match self.kind {
            Extremum::Max => newer >= older,
            Extremum::Min => newer <= older,
        }
    }

    pub fn update(&mut self, key: u64, value: f64) {
        debug_assert!(key >= self.latest_key || self.samples.is_empty());
        self.latest_key = self.latest_key.max(key);
        while let Some(&(_, back)) = self.samples.back() {
            if self.dominates(value, back) {
                self.samples.pop_back();
            } else {
                break;
            }
        }
        self.samples.push_back((key, value));
        self.expire();
    }

    /// Advances the window without adding a sample.
    pub fn advance(&mut self, key: u64) {
        self.latest_key = self.latest_key.max(key);
        self.expire();
    }

    fn expire(&mut self) {
        while let Some(&(k, _)) = self.samples.front() {
            if self.latest_key - k >= self.window {
                self.samples.pop_front();
            } else {
                break;
            }
        }
    }

    pub fn estimate(&self) -> Option<f64> {
        self.samples.front().map(|&(_, v)| v)
    }

    pub fn reset(&mut self) {
        self.samples.clear();
    }
}

/// Windowed maximum of delivery rate (bits/s), keyed by packet-timed round.
#[derive(Clone, Debug)]
pub struct BtlBwFilter(WindowedFilter);

impl BtlBwFilter {
    pub fn new(window_rounds: u64) -> Self {
        Self(WindowedFilter::new(Extremum::Max, window_rounds))
    }

    pub fn update(&mut self, round: u64, rate_bps: f64) {
        self.0.update(round, rate_bps);
    }

    pub fn advance(&mut self, round: u64) {
        self.0.advance(round);
    }

    pub fn estimate(&self) -> Option<f64> {
        self.0.estimate()
    }
}

/// Windowed minimum RTT over a trailing time window.
#[derive(Clone, Debug)]
pub struct RtPropFilter(WindowedFilter);

impl RtPropFilter {
    pub fn new(window: Duration) -> Self {
        Self(WindowedFilter::new(Extremum::Min, duration_nanos(window)))
    }

    pub fn update(&mut self, now: SimTime, rtt: Duration) {
        self.0.update(now.as_nanos(), duration_nanos(rtt) as f64);
    }

    pub fn estimate(&self) -> Option<Duration> {
        self.0.estimate().map(|n| Duration::from_nanos(n as u64))
    }
}

/// Windowed maximum of delivery rate over a trailing time window.
#[derive(Clone, Debug)]
pub struct TimedMaxFilter(WindowedFilter);

impl TimedMaxFilter {
    pub fn new(window: Duration) -> Self {
        Self(WindowedFilter::new(Extremum::Max, duration_nanos(window)))
    }

    pub fn window(&self) -> Duration {
        Duration::from_nanos(self.0.window())
    }

    pub fn set_window(&mut self, window: Duration) {
        self.0.set_window(duration_nanos(window));
    }

    pub fn update(&mut self, now: SimTime, value: f64) {
        self.0.update(now.as_nanos(), value);
    }

    pub fn estimate(&self) -> Option<f64> {
        self.0.estimate()
    }
}

fn duration_nanos(d: Duration) -> u64 {
    u64::try_from(d.as_nanos()).unwrap_or(u64::MAX)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn brute_force(kind: Extremum, window: u64, latest: u64, log: &[(u64, f64)]) -> Option<f64> {
        let live = log.iter().filter(|s| latest - s.0 < window).map(|s| s.1);
        match kind {
            Extremum::Max => live.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.max(v)))),
            Extremum::Min => live.fold(None, |acc: Option<f64>, v| Some(acc.map_or(v, |a| a.min(v)))),
        }
    }

    #[test]
    fn btlbw_is_windowed_max() {
        let mut f = BtlBwFilter::new(10);
        for (round, mbps) in [(0, 5.0), (1, 7.0), (2, 6.0)] {
            f.update(round, mbps * 1e6);
        }
        assert_eq!(f.estimate(), Some(7e6));
    }

    #[test]
    fn rtprop_is_windowed_min() {
        let mut f = RtPropFilter::new(Duration::from_secs(10));
        for (i, ms) in [50, 40, 45].into_iter().enumerate() {
            f.update(SimTime::from_millis(i as u64 * 100), Duration::from_millis(ms));
        }
        assert_eq!(f.estimate(), Some(Duration::from_millis(40)));
    }

    #[test]
    fn old_max_ages_out() {
        let mut f = BtlBwFilter::new(10);
        let log = [(0u64, 5e6), (1, 7e6), (5, 6e6)];
        for &(r, v) in &log {
            f.update(r, v);
        }
        assert_eq!(f.estimate(), Some(7e6));
        // round 11: round 1 is now 10 rounds old and leaves the window
        f.advance(11);
        let oracle = brute_force(Extremum::Max, 10, 11, &log);
        assert_eq!(oracle, Some(6e6));
        assert_eq!(f.estimate(), Some(6e6));
    }

    #[test]
    fn random_logs_match_brute_force() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for trial in 0..10_000 {
            let kind = if trial % 2 == 0 { Extremum::Max } else { Extremum::Min };
            let window = rng.gen_range(1..20);
            let mut f = WindowedFilter::new(kind, window);
            let mut log = Vec::new();
            let mut key = 0u64;
            for _ in 0..rng.gen_range(1..40) {
                key += rng.gen_range(0..4);
                let v = f64::from(rng.gen_range(0..50u32));
                f.update(key, v);
                log.push((key, v));
                assert_eq!(f.estimate(), brute_force(kind, window, key, &log));
            }
        }
    }

    proptest! {
        #[test]
        fn shrinking_window_matches_brute_force(
            steps in proptest::collection::vec((0u64..5, 0.0f64..1e6), 1..60),
            window in 1u64..30,
            shrink_to in 1u64..30,
        ) {
            let mut f = WindowedFilter::new(Extremum::Max, window);
            let mut log = Vec::new();
            let mut key = 0;
            for (dk, v) in steps {
                key += dk;
                f.update(key, v);
                log.push((key, v));
            }
            f.set_window(shrink_to.min(window));
            prop_assert_eq!(f.estimate(), brute_force(Extremum::Max, shrink_to.min(window), key, &log));
        }
    }
}
