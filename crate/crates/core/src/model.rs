//! Domain types shared by the protocol, traffic generators, engine and harness.

use std::fmt;

use thiserror::Error;

/// Index of a simulated time step.
pub type Step = u32;

/// Identifier of an edge server, an index in `[0, S)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EdgeServerId(pub u32);

impl EdgeServerId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EdgeServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "es_{}", self.0)
    }
}

/// Identifier of an origin server.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct OriginServerId(pub u32);

impl fmt::Display for OriginServerId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "os_{}", self.0)
    }
}

/// Report from an origin server that `reporter` forwarded a request with an
/// invalid query string at `step`.
///
/// `sequence` is a per-reporter counter, so several erroneous requests hitting
/// the same edge in one step remain distinct alerts. Equality, hashing and
/// ordering all use the four fields.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Alert {
    pub origin: OriginServerId,
    pub reporter: EdgeServerId,
    pub step: Step,
    pub sequence: u32,
}

impl Alert {
    pub fn new(origin: OriginServerId, reporter: EdgeServerId, step: Step, sequence: u32) -> Self {
        Self {
            origin,
            reporter,
            step,
            sequence,
        }
    }
}

/// Full parameterization of a single simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Number of edge servers `S`.
    pub edge_count: u32,
    /// Run length `T` in steps.
    pub duration: Step,
    /// Moving window `Δ` in steps.
    pub window: Step,
    /// Per-peer push probability `v`.
    pub gossip_prob: f64,
    /// Suspicion threshold `θ`; the metric must strictly exceed it.
    pub threshold: f64,
    /// Per-edge, per-step probability of an attack request.
    pub p_attack: f64,
    /// Per-edge, per-step probability of an honest erroneous request.
    pub p_honest: f64,
    pub attack_start: Step,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            edge_count: 75,
            duration: 200,
            window: 10,
            gossip_prob: 0.5,
            threshold: 0.5,
            p_attack: 0.5,
            p_honest: 0.01,
            attack_start: 0,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("edge_count must be ≥ 1")]
    NoEdges,
    #[error("duration must be ≥ 1")]
    NoDuration,
    #[error("window must be ≥ 1")]
    NoWindow,
    #[error("window exceeds duration ({window} > {duration})")]
    WindowExceedsDuration { window: Step, duration: Step },
    #[error("{name} must be a probability in [0, 1], got {value}")]
    Probability { name: &'static str, value: f64 },
    #[error("threshold must be > 0, got {0}")]
    Threshold(f64),
}

impl SimConfig {
    /// Returns the config unchanged when every field is in range.
    pub fn validate(self) -> Result<Self, ConfigError> {
        if self.edge_count == 0 {
            return Err(ConfigError::NoEdges);
        }
        if self.duration == 0 {
            return Err(ConfigError::NoDuration);
        }
        if self.window == 0 {
            return Err(ConfigError::NoWindow);
        }
        if self.window > self.duration {
            return Err(ConfigError::WindowExceedsDuration {
                window: self.window,
                duration: self.duration,
            });
        }
        for (name, value) in [
            ("gossip_prob", self.gossip_prob),
            ("p_attack", self.p_attack),
            ("p_honest", self.p_honest),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(ConfigError::Probability { name, value });
            }
        }
        if self.threshold <= 0.0 || !self.threshold.is_finite() {
            return Err(ConfigError::Threshold(self.threshold));
        }
        Ok(self)
    }

    pub fn edges(&self) -> impl Iterator<Item = EdgeServerId> {
        (0..self.edge_count).map(EdgeServerId)
    }
}

/// Outcome of one run.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RunMetrics {
    pub detected: bool,
    /// Steps between `attack_start` and the first detection event.
    pub detection_step: Option<Step>,
    pub first_detector: Option<EdgeServerId>,
    pub gossip_messages_sent: u64,
    pub alerts_generated: u64,
    /// Detection in a run without attack traffic, or before the attack began.
    pub false_positive: bool,
}
