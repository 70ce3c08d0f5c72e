//! Packet-level simulation of BBR and a coupled, fairness-aware BBR variant
//! for subflows sharing a bottleneck, with measurement export and the
//! latency classifiers trained on the resulting data.

pub mod bbr;
pub mod experiment;
pub mod fairness;
pub mod measurement;
pub mod ml;
pub mod rng;
pub mod scenario;
pub mod simcore;
