//! Windowed metric collection, latency-class labeling, dataset construction
//! and CSV import/export.

mod csv_io;

use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{export_csv, import_csv, read_csv, write_csv, ImportReport, CSV_HEADER};

use crate::simcore::SimTime;

pub const DEFAULT_LATENCY_THRESHOLD: f64 = 1.0;
pub const DEFAULT_WINDOW: Duration = Duration::from_secs(1);

#[derive(Debug, Error)]
pub enum MeasurementError {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing required column {0:?}")]
    MissingColumn(String),
    #[error("line {line}, column {column:?}: cannot parse {text:?}")]
    Parse {
        line: u64,
        column: String,
        text: String,
    },
    #[error("negative latency {0}")]
    NegativeLatency(f64),
}

/// One measurement window for one flow.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    /// Seconds since the start of the run.
    pub window_start: f64,
    pub flow_id: u32,
    /// Messages offered by the application per second.
    pub send_rate: f64,
    /// Buffer capacity of the flow's bottleneck, in packets.
    pub block_size: u64,
    /// Messages delivered per second.
    pub throughput: f64,
    /// Mean delivery latency in seconds, absent when nothing was delivered.
    pub avg_latency: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum LatencyClass {
    Low,
    High,
}

impl LatencyClass {
    pub fn is_high(self) -> bool {
        self == LatencyClass::High
    }

    pub fn from_high(high: bool) -> Self {
        if high {
            LatencyClass::High
        } else {
            LatencyClass::Low
        }
    }
}

impl fmt::Display for LatencyClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LatencyClass::Low => f.write_str("Low"),
            LatencyClass::High => f.write_str("High"),
        }
    }
}

/// `Low` iff `avg_latency <= threshold`.
pub fn label_latency(avg_latency: f64, threshold: f64) -> Result<LatencyClass, MeasurementError> {
    if avg_latency < 0.0 || avg_latency.is_nan() {
        return Err(MeasurementError::NegativeLatency(avg_latency));
    }
    Ok(if avg_latency <= threshold {
        LatencyClass::Low
    } else {
        LatencyClass::High
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Simulator,
    Imported,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetRow {
    pub send_rate: f64,
    pub block_size: f64,
    pub throughput: f64,
    pub avg_latency: f64,
    pub class: LatencyClass,
}

/// Labeled rows ready for the ML pipeline. Classifier features are
/// `(block_size, throughput)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub rows: Vec<DatasetRow>,
    pub provenance: Provenance,
}

impl Dataset {
    /// Labels every window that delivered something; empty windows are
    /// dropped.
    pub fn from_metrics(
        rows: &[MetricsRow],
        threshold: f64,
        provenance: Provenance,
    ) -> Result<Self, MeasurementError> {
        let mut out = Vec::with_capacity(rows.len());
        for row in rows {
            let Some(latency) = row.avg_latency else {
                continue;
            };
            if row.throughput <= 0.0 {
                continue;
            }
            out.push(DatasetRow {
                send_rate: row.send_rate,
                block_size: row.block_size as f64,
                throughput: row.throughput,
                avg_latency: latency,
                class: label_latency(latency, threshold)?,
            });
        }
        Ok(Dataset {
            rows: out,
            provenance,
        })
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.block_size, r.throughput])
            .collect()
    }

    /// `true` for `High`.
    pub fn labels(&self) -> Vec<bool> {
        self.rows.iter().map(|r| r.class.is_high()).collect()
    }

    /// Inputs for the throughput regressor: `(send_rate, block_size)`.
    pub fn regression_features(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| vec![r.send_rate, r.block_size])
            .collect()
    }

    pub fn throughputs(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.throughput).collect()
    }

    /// `(low, high)` counts.
    pub fn class_counts(&self) -> (usize, usize) {
        let high = self.rows.iter().filter(|r| r.class.is_high()).count();
        (self.rows.len() - high, high)
    }
}

#[derive(Clone, Debug)]
pub struct RecordedFlow {
    pub id: u32,
    pub block_size: u64,
    pub start: SimTime,
    pub stop: Option<SimTime>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RecordEvent {
    /// The application offered a message.
    Sent,
    /// A message reached the receiver for the first time.
    Delivered { latency: f64 },
}

#[derive(Clone, Debug, Default)]
struct WindowCounters {
    offered: u64,
    delivered: u64,
    latency_sum: f64,
}

/// Accumulates per-flow counters into fixed windows and emits one
/// [`MetricsRow`] per active flow when a window closes.
#[derive(Clone, Debug)]
pub struct Recorder {
    window: Duration,
    window_start: SimTime,
    flows: Vec<RecordedFlow>,
    current: Vec<WindowCounters>,
    rows: Vec<MetricsRow>,
}

impl Recorder {
    pub fn new(flows: Vec<RecordedFlow>, window: Duration) -> Self {
        let current = vec![WindowCounters::default(); flows.len()];
        Self {
            window,
            window_start: SimTime::ZERO,
            flows,
            current,
            rows: Vec::new(),
        }
    }

    pub fn window(&self) -> Duration {
        self.window
    }

    pub fn record(&mut self, flow: usize, event: RecordEvent) {
        let c = &mut self.current[flow];
        match event {
            RecordEvent::Sent => c.offered += 1,
            RecordEvent::Delivered { latency } => {
                c.delivered += 1;
                c.latency_sum += latency;
            }
        }
    }

    /// Closes the window ending at `now` and returns the rows it produced.
    pub fn close_window(&mut self, now: SimTime) -> &[MetricsRow] {
        let start = self.window_start;
        let span = (now - start).as_secs_f64();
        let first_new = self.rows.len();
        if span > 0.0 {
            for (flow, counters) in self.flows.iter().zip(self.current.iter_mut()) {
                let active = flow.start < now && flow.stop.is_none_or(|stop| start < stop);
                let c = std::mem::take(counters);
                if !active {
                    continue;
                }
                self.rows.push(MetricsRow {
                    window_start: start.as_secs_f64(),
                    flow_id: flow.id,
                    send_rate: c.offered as f64 / span,
                    block_size: flow.block_size,
                    throughput: c.delivered as f64 / span,
                    avg_latency: (c.delivered > 0).then(|| c.latency_sum / c.delivered as f64),
                });
            }
        }
        self.window_start = now;
        &self.rows[first_new..]
    }

    pub fn rows(&self) -> &[MetricsRow] {
        &self.rows
    }

    pub fn into_rows(self) -> Vec<MetricsRow> {
        self.rows
    }
}
