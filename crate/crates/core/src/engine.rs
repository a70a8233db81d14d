//! Deterministic time-stepped executor.
//!
//! Each step runs these phases in order:
//!
//! 1. deliver the gossip messages sent during the previous step;
//! 2. generate attack, then honest, erroneous requests;
//! 3. the origin replies with alerts, recorded at the reporting edges;
//! 4. every edge, ascending id, picks an origin and gossips about it;
//!    the messages are delivered at the start of the next step;
//! 5. every edge evaluates its detector;
//! 6. the step counter advances.
//!
//! All randomness comes from one seeded stream consumed in exactly this order,
//! so a run is a pure function of its configuration.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::detection::{self, DetectionEvent};
use crate::model::{ConfigError, EdgeServerId, RunMetrics, SimConfig, Step};
use crate::protocol::{self, EdgeServer, GossipMessage};
use crate::traffic::{self, RandomTraffic, SequenceCounters, TrafficSource};

/// What happened during one step.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StepReport {
    pub step: Step,
    pub messages_delivered: usize,
    pub alerts_generated: usize,
    pub messages_sent: usize,
    pub detections: Vec<DetectionEvent>,
}

pub struct Simulation<T: TrafficSource = RandomTraffic> {
    config: SimConfig,
    step: Step,
    edges: Vec<EdgeServer>,
    in_flight: Vec<(EdgeServerId, Arc<GossipMessage>)>,
    rng: ChaCha8Rng,
    traffic: T,
    counters: SequenceCounters,
    gossip_messages_sent: u64,
    alerts_generated: u64,
    first_detection: Option<DetectionEvent>,
}

impl Simulation<RandomTraffic> {
    pub fn new(config: SimConfig) -> Result<Self, ConfigError> {
        Self::with_traffic(config, RandomTraffic::default())
    }
}

impl<T: TrafficSource> Simulation<T> {
    pub fn with_traffic(config: SimConfig, traffic: T) -> Result<Self, ConfigError> {
        let config = config.validate()?;
        let edges = config.edges().map(|e| EdgeServer::new(e, config.edge_count)).collect();
        Ok(Self {
            rng: ChaCha8Rng::seed_from_u64(config.seed),
            counters: SequenceCounters::new(config.edge_count),
            step: 0,
            edges,
            in_flight: Vec::new(),
            traffic,
            gossip_messages_sent: 0,
            alerts_generated: 0,
            first_detection: None,
            config,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    /// Index of the next step to execute.
    pub fn current_step(&self) -> Step {
        self.step
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.duration
    }

    pub fn edges(&self) -> &[EdgeServer] {
        &self.edges
    }

    pub fn edge(&self, id: EdgeServerId) -> &EdgeServer {
        &self.edges[id.index()]
    }

    /// Messages sent during the last executed step, awaiting delivery.
    pub fn in_flight(&self) -> &[(EdgeServerId, Arc<GossipMessage>)] {
        &self.in_flight
    }

    pub fn first_detection(&self) -> Option<&DetectionEvent> {
        self.first_detection.as_ref()
    }

    /// Executes one step.
    ///
    /// # Panics
    ///
    /// If the run has already reached its duration.
    pub fn step(&mut self) -> StepReport {
        assert!(
            !self.is_finished(),
            "step {} past duration {}",
            self.step,
            self.config.duration
        );
        let now = self.step;
        let cfg = &self.config;

        let delivered = std::mem::take(&mut self.in_flight);
        let mut inbox: Vec<Vec<&GossipMessage>> = vec![Vec::new(); self.edges.len()];
        for (recipient, msg) in &delivered {
            inbox[recipient.index()].push(msg);
        }
        for (edge, msgs) in self.edges.iter_mut().zip(inbox) {
            edge.ledger.merge_messages(msgs);
        }

        let requests = self.traffic.requests(now, cfg, &mut self.rng);
        for req in &requests {
            let alert = traffic::origin_reply(req, &mut self.counters);
            let edge = &mut self.edges[req.target_edge.index()];
            edge.ledger.record_alert(alert);
            edge.pending = Some(alert);
        }

        let v = protocol::choose_probability(cfg);
        let mut outgoing = Vec::new();
        for edge in &mut self.edges {
            edge.ledger.prune(now, cfg.window);
            let pending = edge.pending.take();
            let origin =
                protocol::choose_trigger_origin(&edge.ledger, pending.as_ref(), now, cfg.window, &mut self.rng);
            if let Some(origin) = origin {
                outgoing.extend(protocol::gossip_round(edge, origin, now, cfg.window, v, &mut self.rng));
            }
        }

        let mut detections = Vec::new();
        for edge in &self.edges {
            for origin in edge.ledger.active_origins(now, cfg.window) {
                if let Some(ev) =
                    detection::evaluate(&edge.ledger, origin, now, cfg.window, cfg.edge_count, cfg.threshold)
                {
                    detections.push(ev);
                }
            }
        }
        if self.first_detection.is_none() {
            // edges are scanned in ascending id, so the first event has the lowest id
            self.first_detection = detections.first().copied();
        }

        self.gossip_messages_sent += outgoing.len() as u64;
        self.alerts_generated += requests.len() as u64;
        let report = StepReport {
            step: now,
            messages_delivered: delivered.len(),
            alerts_generated: requests.len(),
            messages_sent: outgoing.len(),
            detections,
        };
        self.in_flight = outgoing;
        self.step += 1;
        report
    }

    /// Steps until the configured duration is reached.
    pub fn run_to_end(&mut self) {
        while !self.is_finished() {
            self.step();
        }
    }

    /// Metrics accumulated so far.
    pub fn metrics(&self) -> RunMetrics {
        let first = self.first_detection.as_ref();
        RunMetrics {
            detected: first.is_some(),
            detection_step: first.map(|ev| ev.step.saturating_sub(self.config.attack_start)),
            first_detector: first.map(|ev| ev.detector),
            gossip_messages_sent: self.gossip_messages_sent,
            alerts_generated: self.alerts_generated,
            false_positive: first.is_some_and(|ev| self.config.p_attack == 0.0 || ev.step < self.config.attack_start),
        }
    }
}

/// Runs `config` for its full duration.
pub fn run(config: &SimConfig) -> Result<RunMetrics, ConfigError> {
    let mut sim = Simulation::new(config.clone())?;
    sim.run_to_end();
    Ok(sim.metrics())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Alert, OriginServerId};
    use crate::traffic::{RequestKind, ScriptedTraffic};

    const OS: OriginServerId = OriginServerId(0);

    fn quiet(edge_count: u32) -> SimConfig {
        SimConfig {
            edge_count,
            p_attack: 0.0,
            p_honest: 0.0,
            ..SimConfig::default()
        }
    }

    #[test]
    fn quiescent_system_does_nothing() {
        let mut sim = Simulation::new(quiet(10)).unwrap();
        for _ in 0..200 {
            let r = sim.step();
            assert_eq!(r.messages_sent, 0);
            assert_eq!(r.alerts_generated, 0);
            assert!(r.detections.is_empty());
        }
        assert!(sim.is_finished());
        assert_eq!(sim.metrics(), RunMetrics::default());
    }

    #[test]
    fn gossip_arrives_one_step_later() {
        let cfg = SimConfig {
            edge_count: 2,
            gossip_prob: 1.0,
            threshold: 5.0,
            ..quiet(2)
        };
        let mut script = ScriptedTraffic::new();
        script.inject(4, EdgeServerId(0), OS, RequestKind::Honest);
        let mut sim = Simulation::with_traffic(cfg, script).unwrap();
        let alert = Alert::new(OS, EdgeServerId(0), 4, 0);
        for _ in 0..=4 {
            sim.step();
        }
        assert!(sim.edge(EdgeServerId(0)).ledger.contains(&alert));
        assert!(!sim.edge(EdgeServerId(1)).ledger.contains(&alert));
        assert_eq!(sim.in_flight().len(), 1);
        let r = sim.step();
        assert_eq!(r.messages_delivered, 1);
        assert!(sim.edge(EdgeServerId(1)).ledger.contains(&alert));
    }

    #[test]
    fn same_seed_same_trajectory() {
        let cfg = SimConfig {
            edge_count: 20,
            p_attack: 0.3,
            seed: 9,
            ..SimConfig::default()
        };
        let mut a = Simulation::new(cfg.clone()).unwrap();
        let mut b = Simulation::new(cfg).unwrap();
        while !a.is_finished() {
            assert_eq!(a.step(), b.step());
            for (x, y) in a.edges().iter().zip(b.edges()) {
                assert_eq!(x.ledger, y.ledger);
            }
        }
        assert_eq!(a.metrics(), b.metrics());
    }

    #[test]
    #[should_panic(expected = "past duration")]
    fn stepping_past_duration_panics() {
        let mut sim = Simulation::new(SimConfig {
            duration: 3,
            window: 3,
            ..quiet(2)
        })
        .unwrap();
        for _ in 0..4 {
            sim.step();
        }
    }

    #[test]
    fn run_rejects_invalid_config() {
        assert_eq!(run(&quiet(0)), Err(ConfigError::NoEdges));
    }

    #[test]
    fn strong_attack_on_small_cdn_is_detected_quickly() {
        for seed in 1..=15 {
            let cfg = SimConfig {
                edge_count: 10,
                threshold: 0.25,
                p_attack: 1.0,
                seed,
                ..SimConfig::default()
            };
            let m = run(&cfg).unwrap();
            assert!(m.detected);
            assert!(m.detection_step.unwrap() <= 2, "{m:?}");
            assert!(!m.false_positive);
        }
    }

    #[test]
    fn detection_step_is_relative_to_attack_start() {
        let cfg = SimConfig {
            edge_count: 10,
            p_attack: 1.0,
            p_honest: 0.0,
            attack_start: 50,
            ..SimConfig::default()
        };
        let mut sim = Simulation::new(cfg).unwrap();
        sim.run_to_end();
        let first = *sim.first_detection().unwrap();
        assert!(first.step >= 50);
        assert_eq!(sim.metrics().detection_step, Some(first.step - 50));
    }

    #[test]
    fn alerts_generated_counts_all_requests() {
        let cfg = SimConfig {
            edge_count: 10,
            p_attack: 1.0,
            p_honest: 1.0,
            duration: 20,
            ..SimConfig::default()
        };
        let m = run(&cfg).unwrap();
        assert_eq!(m.alerts_generated, 400);
    }
}
