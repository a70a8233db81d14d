//! Erroneous query-string traffic and the origin server's reply-with-alert.

use std::collections::BTreeMap;

use rand::Rng;

use crate::model::{Alert, EdgeServerId, OriginServerId, SimConfig, Step};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RequestKind {
    Attack,
    Honest,
}

/// A request reaching an edge server with a query string the origin does not expect.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ErroneousRequest {
    pub target_edge: EdgeServerId,
    pub origin: OriginServerId,
    pub step: Step,
    pub kind: RequestKind,
}

fn bernoulli_per_edge<R: Rng + ?Sized>(
    step: Step,
    edge_count: u32,
    origin: OriginServerId,
    p: f64,
    kind: RequestKind,
    rng: &mut R,
) -> Vec<ErroneousRequest> {
    (0..edge_count)
        .map(EdgeServerId)
        .filter(|_| rng.gen::<f64>() < p)
        .map(|target_edge| ErroneousRequest {
            target_edge,
            origin,
            step,
            kind,
        })
        .collect()
}

/// Attacker traffic for `step`: each edge is hit independently with
/// probability `p_attack`, one draw per edge in ascending order. Nothing is
/// drawn before `attack_start`.
pub fn generate_attack<R: Rng + ?Sized>(
    step: Step,
    edge_count: u32,
    origin: OriginServerId,
    p_attack: f64,
    attack_start: Step,
    rng: &mut R,
) -> Vec<ErroneousRequest> {
    if step < attack_start {
        return Vec::new();
    }
    bernoulli_per_edge(step, edge_count, origin, p_attack, RequestKind::Attack, rng)
}

/// Non-malicious erroneous requests for `step`, one draw per edge.
pub fn generate_honest<R: Rng + ?Sized>(
    step: Step,
    edge_count: u32,
    origin: OriginServerId,
    p_honest: f64,
    rng: &mut R,
) -> Vec<ErroneousRequest> {
    bernoulli_per_edge(step, edge_count, origin, p_honest, RequestKind::Honest, rng)
}

/// Next alert sequence number of every reporter.
#[derive(Debug, Clone, Default)]
pub struct SequenceCounters(Vec<u32>);

impl SequenceCounters {
    pub fn new(edge_count: u32) -> Self {
        Self(vec![0; edge_count as usize])
    }

    fn next(&mut self, edge: EdgeServerId) -> u32 {
        let idx = edge.index();
        if idx >= self.0.len() {
            self.0.resize(idx + 1, 0);
        }
        let seq = self.0[idx];
        self.0[idx] += 1;
        seq
    }
}

/// The origin serves the resource as usual and tells the edge the query string
/// was invalid. The request kind is not carried over.
pub fn origin_reply(request: &ErroneousRequest, counters: &mut SequenceCounters) -> Alert {
    Alert::new(
        request.origin,
        request.target_edge,
        request.step,
        counters.next(request.target_edge),
    )
}

/// Source of the erroneous requests injected at each step.
pub trait TrafficSource {
    fn requests(&mut self, step: Step, config: &SimConfig, rng: &mut dyn rand::RngCore) -> Vec<ErroneousRequest>;
}

/// Attack then honest Bernoulli traffic towards a single origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct RandomTraffic {
    pub origin: OriginServerId,
}

impl TrafficSource for RandomTraffic {
    fn requests(&mut self, step: Step, config: &SimConfig, rng: &mut dyn rand::RngCore) -> Vec<ErroneousRequest> {
        let mut out = generate_attack(
            step,
            config.edge_count,
            self.origin,
            config.p_attack,
            config.attack_start,
            rng,
        );
        out.extend(generate_honest(
            step,
            config.edge_count,
            self.origin,
            config.p_honest,
            rng,
        ));
        out
    }
}

/// Fixed per-step injections, for tests and hand-built scenarios. Consumes no
/// randomness.
#[derive(Debug, Clone, Default)]
pub struct ScriptedTraffic {
    script: BTreeMap<Step, Vec<ErroneousRequest>>,
}

impl ScriptedTraffic {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn inject(
        &mut self,
        step: Step,
        target_edge: EdgeServerId,
        origin: OriginServerId,
        kind: RequestKind,
    ) -> &mut Self {
        self.script.entry(step).or_default().push(ErroneousRequest {
            target_edge,
            origin,
            step,
            kind,
        });
        self
    }

    pub fn at(&self, step: Step) -> &[ErroneousRequest] {
        self.script.get(&step).map_or(&[], Vec::as_slice)
    }
}

impl TrafficSource for ScriptedTraffic {
    fn requests(&mut self, step: Step, _config: &SimConfig, _rng: &mut dyn rand::RngCore) -> Vec<ErroneousRequest> {
        self.at(step).to_vec()
    }
}
