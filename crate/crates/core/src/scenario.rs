//! Scenario configuration: topology, flows and controller options, loaded
//! from a strict JSON document.

use std::collections::HashMap;
use std::fmt;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fairness::{AlphaMode, RttPrime};
use crate::simcore::{time::secs, Link};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    #[default]
    Bbr,
    Coupled,
    CoupledMl,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Bbr, Algorithm::Coupled, Algorithm::CoupledMl];

    pub fn as_str(self) -> &'static str {
        match self {
            Algorithm::Bbr => "bbr",
            Algorithm::Coupled => "coupled",
            Algorithm::CoupledMl => "coupled_ml",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinkConfig {
    pub id: String,
    pub rate_bps: f64,
    pub delay_ms: f64,
    pub buffer_pkts: i64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowConfig {
    pub id: u32,
    /// Multipath connection this subflow belongs to.
    #[serde(default)]
    pub connection: u32,
    /// Link ids from sender to receiver. Acks return over the same links
    /// without queueing.
    pub path: Vec<String>,
    #[serde(default)]
    pub start_s: f64,
    #[serde(default)]
    pub stop_s: Option<f64>,
    #[serde(default = "default_message_bytes")]
    pub message_bytes: u32,
    /// Offered load in messages per second (Poisson arrivals). Absent means
    /// a bulk sender that always has data.
    #[serde(default)]
    pub send_rate_msgs: Option<f64>,
}

fn default_message_bytes() -> u32 {
    1250
}

fn default_window_rtts() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub seed: u64,
    pub duration_s: f64,
    #[serde(default)]
    pub algorithm: Algorithm,
    #[serde(default)]
    pub alpha_mode: AlphaMode,
    #[serde(default)]
    pub rtt_prime: RttPrime,
    /// W, the max-delivery-rate window, as a multiple of RTT'.
    #[serde(default = "default_window_rtts")]
    pub window_rtts: f64,
    pub links: Vec<LinkConfig>,
    pub flows: Vec<FlowConfig>,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("config parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{field}: {reason}")]
    Invalid { field: String, reason: String },
}

impl ConfigError {
    fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ConfigError::Invalid {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Resolved flow description used by the simulator.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowSpec {
    pub id: u32,
    pub connection: u32,
    pub path: Vec<usize>,
    pub start: Duration,
    pub stop: Option<Duration>,
    pub message_bytes: u32,
    pub send_rate: Option<f64>,
}

impl FlowSpec {
    /// One-way propagation delay along the path.
    pub fn path_delay(&self, links: &[Link]) -> Duration {
        self.path.iter().map(|&l| links[l].prop_delay).sum()
    }

    /// Index of the lowest-rate link on the path (first one on ties).
    pub fn bottleneck(&self, links: &[Link]) -> Option<usize> {
        self.path.iter().copied().reduce(|best, l| {
            if links[l].rate < links[best].rate {
                l
            } else {
                best
            }
        })
    }
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(self.duration_s.is_finite() && self.duration_s > 0.0) {
            return Err(ConfigError::invalid("duration_s", "must be a positive number"));
        }
        if !(self.window_rtts.is_finite() && self.window_rtts > 0.0) {
            return Err(ConfigError::invalid("window_rtts", "must be a positive number"));
        }
        let mut ids = HashMap::new();
        for (i, link) in self.links.iter().enumerate() {
            let field = |name: &str| format!("links[{i}].{name}");
            if link.id.is_empty() {
                return Err(ConfigError::invalid(field("id"), "must not be empty"));
            }
            if ids.insert(link.id.as_str(), i).is_some() {
                return Err(ConfigError::invalid(field("id"), format!("duplicate link id {:?}", link.id)));
            }
            if !(link.rate_bps.is_finite() && link.rate_bps > 0.0) {
                return Err(ConfigError::invalid(field("rate_bps"), "must be > 0"));
            }
            if !(link.delay_ms.is_finite() && link.delay_ms >= 0.0) {
                return Err(ConfigError::invalid(field("delay_ms"), "must be >= 0"));
            }
            if link.buffer_pkts < 1 {
                return Err(ConfigError::invalid(field("buffer_pkts"), "must be >= 1"));
            }
        }
        let mut flow_ids = HashMap::new();
        for (i, flow) in self.flows.iter().enumerate() {
            let field = |name: &str| format!("flows[{i}].{name}");
            if flow_ids.insert(flow.id, i).is_some() {
                return Err(ConfigError::invalid(field("id"), format!("duplicate flow id {}", flow.id)));
            }
            if flow.path.is_empty() {
                return Err(ConfigError::invalid(field("path"), "must name at least one link"));
            }
            for (j, l) in flow.path.iter().enumerate() {
                if !ids.contains_key(l.as_str()) {
                    return Err(ConfigError::invalid(
                        format!("flows[{i}].path[{j}]"),
                        format!("unknown link {l:?}"),
                    ));
                }
            }
            if !(flow.start_s.is_finite() && flow.start_s >= 0.0) {
                return Err(ConfigError::invalid(field("start_s"), "must be >= 0"));
            }
            if let Some(stop) = flow.stop_s {
                if !(stop.is_finite() && stop > flow.start_s) {
                    return Err(ConfigError::invalid(field("stop_s"), "must be greater than start_s"));
                }
            }
            if flow.message_bytes == 0 {
                return Err(ConfigError::invalid(field("message_bytes"), "must be > 0"));
            }
            if let Some(rate) = flow.send_rate_msgs {
                if !(rate.is_finite() && rate > 0.0) {
                    return Err(ConfigError::invalid(field("send_rate_msgs"), "must be > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn duration(&self) -> Duration {
        secs(self.duration_s)
    }

    pub fn build_links(&self) -> Vec<Link> {
        self.links
            .iter()
            .map(|l| Link {
                rate: l.rate_bps,
                prop_delay: secs(l.delay_ms / 1000.0),
                buffer_capacity: l.buffer_pkts.max(1) as usize,
            })
            .collect()
    }

    /// Resolves flow paths to link indices.
    pub fn build_flows(&self) -> Result<Vec<FlowSpec>, ConfigError> {
        let index: HashMap<&str, usize> = self
            .links
            .iter()
            .enumerate()
            .map(|(i, l)| (l.id.as_str(), i))
            .collect();
        self.flows
            .iter()
            .enumerate()
            .map(|(i, f)| {
                let path = f
                    .path
                    .iter()
                    .enumerate()
                    .map(|(j, l)| {
                        index.get(l.as_str()).copied().ok_or_else(|| {
                            ConfigError::invalid(format!("flows[{i}].path[{j}]"), format!("unknown link {l:?}"))
                        })
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok(FlowSpec {
                    id: f.id,
                    connection: f.connection,
                    path,
                    start: secs(f.start_s),
                    stop: f.stop_s.map(secs),
                    message_bytes: f.message_bytes,
                    send_rate: f.send_rate_msgs,
                })
            })
            .collect()
    }

    /// Default single-flow sweep scenario: an access link feeding a
    /// 1.1 Mbit/s bottleneck (110 messages/s of 1250 bytes), 100 ms base RTT.
    /// The capacity sits between two grid rates so no sweep cell is loaded
    /// at exactly 100%.
    pub fn default_sweep() -> Self {
        ScenarioConfig {
            seed: 1,
            duration_s: 60.0,
            algorithm: Algorithm::Bbr,
            alpha_mode: AlphaMode::default(),
            rtt_prime: RttPrime::default(),
            window_rtts: default_window_rtts(),
            links: vec![
                LinkConfig {
                    id: "access".into(),
                    rate_bps: 10e6,
                    delay_ms: 10.0,
                    buffer_pkts: 1000,
                },
                LinkConfig {
                    id: "bottleneck".into(),
                    rate_bps: 1.1e6,
                    delay_ms: 40.0,
                    buffer_pkts: 50,
                },
            ],
            flows: vec![FlowConfig {
                id: 0,
                connection: 0,
                path: vec!["access".into(), "bottleneck".into()],
                start_s: 0.0,
                stop_s: None,
                message_bytes: 1250,
                send_rate_msgs: Some(100.0),
            }],
        }
    }

    /// Two identical bulk subflows of one connection sharing a bottleneck.
    pub fn default_fairness() -> Self {
        ScenarioConfig {
            seed: 1,
            duration_s: 60.0,
            algorithm: Algorithm::Coupled,
            alpha_mode: AlphaMode::default(),
            rtt_prime: RttPrime::default(),
            window_rtts: default_window_rtts(),
            links: vec![
                LinkConfig {
                    id: "access_a".into(),
                    rate_bps: 10e6,
                    delay_ms: 10.0,
                    buffer_pkts: 1000,
                },
                LinkConfig {
                    id: "access_b".into(),
                    rate_bps: 10e6,
                    delay_ms: 10.0,
                    buffer_pkts: 1000,
                },
                LinkConfig {
                    id: "bottleneck".into(),
                    rate_bps: 1.6e6,
                    delay_ms: 40.0,
                    buffer_pkts: 50,
                },
            ],
            flows: vec![
                FlowConfig {
                    id: 0,
                    connection: 0,
                    path: vec!["access_a".into(), "bottleneck".into()],
                    start_s: 0.0,
                    stop_s: None,
                    message_bytes: 1250,
                    send_rate_msgs: None,
                },
                FlowConfig {
                    id: 1,
                    connection: 0,
                    path: vec!["access_b".into(), "bottleneck".into()],
                    start_s: 0.0,
                    stop_s: None,
                    message_bytes: 1250,
                    send_rate_msgs: None,
                },
            ],
        }
    }
}
