//! Detection of random query string DoS attacks on a CDN through push gossip
//! among edge servers.
//!
//! When an origin server receives a forwarded request whose query string it
//! does not expect, it serves the resource and tells the edge server the query
//! string was invalid. Edge servers gossip these alerts to each other and each
//! one suspects an attack once the distinct alerts it has seen in the last `Δ`
//! steps, divided by the number of edge servers, exceeds a threshold.
//!
//! The crate contains the protocol pieces ([`protocol`], [`detection`]), a
//! traffic model ([`traffic`]), a deterministic time-stepped simulator
//! ([`engine`]) and a sweep harness writing CSV ([`harness`]).

pub mod detection;
pub mod engine;
pub mod harness;
pub mod model;
pub mod protocol;
pub mod traffic;

pub use detection::DetectionEvent;
pub use engine::{run, Simulation, StepReport};
pub use model::{Alert, ConfigError, EdgeServerId, OriginServerId, RunMetrics, SimConfig, Step};
pub use protocol::{AlertLedger, EdgeServer, GossipMessage, PeerView};
