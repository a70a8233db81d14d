//! Push gossip among edge servers.
//!
//! Every edge server keeps an [`AlertLedger`]: the distinct alerts it knows of,
//! per origin, restricted to the moving window `(now − Δ, now]`. Once per step
//! it picks an origin to control and pushes its current window for that origin
//! to every peer independently with probability `v`.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::Rng;

use crate::model::{Alert, EdgeServerId, OriginServerId, SimConfig, Step};

/// Lowest step still inside the window `(now − Δ, now]`.
fn window_floor(now: Step, window: Step) -> Step {
    (now + 1).saturating_sub(window)
}

fn in_window(step: Step, now: Step, window: Step) -> bool {
    step >= window_floor(now, window) && step <= now
}

/// `(reporter, sequence)` packed so that integer order equals tuple order.
type Entry64 = u64;

fn pack(reporter: EdgeServerId, sequence: u32) -> Entry64 {
    (u64::from(reporter.0) << 32) | u64::from(sequence)
}

fn unpack(entry: Entry64) -> (EdgeServerId, u32) {
    (EdgeServerId((entry >> 32) as u32), entry as u32)
}

/// Sorted, immutable once shared.
type Bucket = Arc<[Entry64]>;

/// Distinct alerts for one origin, bucketed by step.
///
/// Buckets are shared between ledgers and messages. Once an alert has spread,
/// most received buckets are the very allocation already held, or equal to it,
/// so merging is usually a pointer or memory comparison.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AlertWindow {
    /// Ascending by step, no empty buckets.
    buckets: Vec<(Step, Bucket)>,
    len: usize,
}

impl AlertWindow {
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    fn position(&self, step: Step) -> Result<usize, usize> {
        self.buckets.binary_search_by_key(&step, |(s, _)| *s)
    }

    fn bucket(&self, step: Step) -> Option<&Bucket> {
        self.position(step).ok().map(|i| &self.buckets[i].1)
    }

    /// Buckets inside `(now − Δ, now]`; empty when `Δ = 0`.
    fn window_slice(&self, now: Step, window: Step) -> &[(Step, Bucket)] {
        let floor = window_floor(now, window);
        if floor > now {
            return &[];
        }
        let lo = self.buckets.partition_point(|(s, _)| *s < floor);
        let hi = self.buckets.partition_point(|(s, _)| *s <= now);
        &self.buckets[lo..hi]
    }

    fn insert(&mut self, reporter: EdgeServerId, step: Step, sequence: u32) -> bool {
        let key = pack(reporter, sequence);
        let idx = match self.position(step) {
            Ok(i) => i,
            Err(i) => {
                self.buckets.insert(i, (step, Arc::from(Vec::new())));
                i
            }
        };
        let bucket = &mut self.buckets[idx].1;
        match bucket.binary_search(&key) {
            Ok(_) => false,
            Err(pos) => {
                let mut v = bucket.to_vec();
                v.insert(pos, key);
                *bucket = v.into();
                self.len += 1;
                true
            }
        }
    }

    fn contains(&self, reporter: EdgeServerId, step: Step, sequence: u32) -> bool {
        self.bucket(step)
            .is_some_and(|b| b.binary_search(&pack(reporter, sequence)).is_ok())
    }

    /// Set union with every window in `others`; returns the number of alerts
    /// that were new.
    fn merge_all(&mut self, others: &[&AlertWindow]) -> usize {
        let steps = others.iter().flat_map(|w| w.buckets.iter().map(|(s, _)| *s));
        let (Some(lo), Some(hi)) = (steps.clone().min(), steps.max()) else {
            return 0;
        };
        // every window is sorted by step: sweep one cursor per window
        let mut cursors = vec![0usize; others.len()];
        let mut theirs: Vec<&Bucket> = Vec::with_capacity(others.len());
        let mut added = 0;
        SCRATCH.with_borrow_mut(|scratch| {
            for step in lo..=hi {
                theirs.clear();
                for (w, cur) in others.iter().zip(cursors.iter_mut()) {
                    if let Some((s, b)) = w.buckets.get(*cur) {
                        if *s == step {
                            theirs.push(b);
                            *cur += 1;
                        }
                    }
                }
                if theirs.is_empty() {
                    continue;
                }
                match self.position(step) {
                    Ok(i) => {
                        let slot = &mut self.buckets[i].1;
                        let before = slot.len();
                        scratch.merge_into(slot, &theirs);
                        added += slot.len() - before;
                    }
                    Err(i) => {
                        let mut slot = Arc::clone(theirs[0]);
                        scratch.merge_into(&mut slot, &theirs[1..]);
                        added += slot.len();
                        self.buckets.insert(i, (step, slot));
                    }
                }
            }
        });
        self.len += added;
        added
    }

    fn prune(&mut self, now: Step, window: Step) -> usize {
        let before = self.len;
        self.buckets.retain(|(step, _)| in_window(*step, now, window));
        self.len = self.buckets.iter().map(|(_, b)| b.len()).sum();
        before - self.len
    }

    /// The alerts with steps in `(now − Δ, now]`, sharing bucket storage.
    fn snapshot(&self, now: Step, window: Step) -> AlertWindow {
        let buckets = self.window_slice(now, window).to_vec();
        let len = buckets.iter().map(|(_, b)| b.len()).sum();
        AlertWindow { buckets, len }
    }

    fn count_in(&self, now: Step, window: Step) -> usize {
        self.window_slice(now, window).iter().map(|(_, b)| b.len()).sum()
    }

    fn alerts(&self, origin: OriginServerId) -> impl Iterator<Item = Alert> + '_ {
        self.buckets.iter().flat_map(move |(step, bucket)| {
            let step = *step;
            bucket.iter().map(move |&e| {
                let (reporter, sequence) = unpack(e);
                Alert::new(origin, reporter, step, sequence)
            })
        })
    }
}

/// Whether sorted `small` is a subset of sorted `large`.
fn is_subset(small: &[Entry64], large: &[Entry64]) -> bool {
    if small.len() > large.len() {
        return false;
    }
    let mut i = 0;
    for &x in small {
        while i < large.len() && large[i] < x {
            i += 1;
        }
        if i == large.len() || large[i] != x {
            return false;
        }
        i += 1;
    }
    true
}

fn union_into(a: &[Entry64], b: &[Entry64], out: &mut Vec<Entry64>) {
    out.clear();
    out.reserve(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        let (x, y) = (a[i], b[j]);
        out.push(x.min(y));
        i += usize::from(x <= y);
        j += usize::from(y <= x);
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
}

const SMALL_UNION: usize = 64;

thread_local! {
    static SCRATCH: std::cell::RefCell<MergeScratch> = std::cell::RefCell::default();
}

#[derive(Default)]
struct MergeScratch {
    current: Vec<Entry64>,
    spare: Vec<Entry64>,
}

impl MergeScratch {
    /// Unions the sorted `theirs` buckets into `mine`.
    ///
    /// Adopts a received allocation whenever `mine` is a subset of it, and
    /// between equal buckets keeps the lower address, so buckets that have
    /// spread everywhere converge on one allocation. Otherwise accumulates in
    /// scratch space and allocates once at the end.
    fn merge_into(&mut self, mine: &mut Bucket, theirs: &[&Bucket]) {
        let total: usize = theirs.iter().map(|t| t.len()).sum();
        if theirs.len() > 2 && total <= SMALL_UNION {
            // many tiny buckets (the newest step): one sort beats repeated unions
            self.current.clear();
            self.current.extend_from_slice(mine);
            for t in theirs {
                self.current.extend_from_slice(t);
            }
            self.current.sort_unstable();
            self.current.dedup();
            if self.current.len() > mine.len() {
                *mine = Arc::from(&self.current[..]);
            }
            return;
        }
        let mut diverged = false;
        for &t in theirs {
            if diverged {
                if is_subset(t, &self.current) {
                    continue;
                }
                union_into(&self.current, t, &mut self.spare);
                std::mem::swap(&mut self.current, &mut self.spare);
                continue;
            }
            if Arc::ptr_eq(mine, t) {
                continue;
            }
            if mine.len() == t.len() && **mine == **t {
                if Arc::as_ptr(t).cast::<Entry64>() < Arc::as_ptr(mine).cast::<Entry64>() {
                    *mine = Arc::clone(t);
                }
                continue;
            }
            if mine.len() < t.len() && is_subset(mine, t) {
                *mine = Arc::clone(t);
                continue;
            }
            if is_subset(t, mine) {
                continue;
            }
            union_into(mine, t, &mut self.current);
            diverged = true;
        }
        if diverged {
            *mine = Arc::from(&self.current[..]);
        }
    }
}

/// Push message carrying the sender's window of alerts for one origin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GossipMessage {
    pub sender: EdgeServerId,
    pub origin: OriginServerId,
    alerts: AlertWindow,
}

impl GossipMessage {
    pub fn new(sender: EdgeServerId, origin: OriginServerId) -> Self {
        Self {
            sender,
            origin,
            alerts: AlertWindow::default(),
        }
    }

    /// Builds a message from arbitrary alerts. Alerts for other origins are
    /// dropped and duplicates collapse.
    pub fn from_alerts<I>(sender: EdgeServerId, origin: OriginServerId, alerts: I) -> Self
    where
        I: IntoIterator<Item = Alert>,
    {
        let mut msg = Self::new(sender, origin);
        for a in alerts.into_iter().filter(|a| a.origin == origin) {
            msg.alerts.insert(a.reporter, a.step, a.sequence);
        }
        msg
    }

    pub fn len(&self) -> usize {
        self.alerts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alerts.is_empty()
    }

    /// Alerts in ascending `(step, reporter, sequence)` order.
    pub fn alerts(&self) -> impl Iterator<Item = Alert> + '_ {
        self.alerts.alerts(self.origin)
    }
}

/// Per-edge deduplicating alert store.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AlertLedger {
    owner: EdgeServerId,
    windows: BTreeMap<OriginServerId, AlertWindow>,
}

impl AlertLedger {
    pub fn new(owner: EdgeServerId) -> Self {
        Self {
            owner,
            windows: BTreeMap::new(),
        }
    }

    pub fn owner(&self) -> EdgeServerId {
        self.owner
    }

    /// Inserts `alert`; returns `false` if it was already present.
    pub fn record_alert(&mut self, alert: Alert) -> bool {
        self.windows
            .entry(alert.origin)
            .or_default()
            .insert(alert.reporter, alert.step, alert.sequence)
    }

    /// Merges a received message; returns how many alerts were new.
    pub fn merge_message(&mut self, msg: &GossipMessage) -> usize {
        self.merge_messages(std::iter::once(msg))
    }

    /// Merges a batch of received messages; returns how many alerts were new.
    pub fn merge_messages<'a, I>(&mut self, msgs: I) -> usize
    where
        I: IntoIterator<Item = &'a GossipMessage>,
    {
        let mut by_origin: BTreeMap<OriginServerId, Vec<&AlertWindow>> = BTreeMap::new();
        for msg in msgs.into_iter().filter(|m| !m.is_empty()) {
            by_origin.entry(msg.origin).or_default().push(&msg.alerts);
        }
        by_origin
            .into_iter()
            .map(|(origin, windows)| self.windows.entry(origin).or_default().merge_all(&windows))
            .sum()
    }

    /// Drops every alert outside `(now − Δ, now]`; returns how many were removed.
    pub fn prune(&mut self, now: Step, window: Step) -> usize {
        let removed = self.windows.values_mut().map(|w| w.prune(now, window)).sum();
        self.windows.retain(|_, w| !w.is_empty());
        removed
    }

    pub fn contains(&self, alert: &Alert) -> bool {
        self.windows
            .get(&alert.origin)
            .is_some_and(|w| w.contains(alert.reporter, alert.step, alert.sequence))
    }

    pub fn len(&self) -> usize {
        self.windows.values().map(AlertWindow::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stored alert count for `origin`, regardless of window.
    pub fn count(&self, origin: OriginServerId) -> usize {
        self.windows.get(&origin).map_or(0, AlertWindow::len)
    }

    /// Alert count for `origin` with steps in `(now − Δ, now]`.
    pub fn count_in_window(&self, origin: OriginServerId, now: Step, window: Step) -> usize {
        self.windows.get(&origin).map_or(0, |w| w.count_in(now, window))
    }

    /// Origins with at least one alert in `(now − Δ, now]`, ascending.
    pub fn active_origins(&self, now: Step, window: Step) -> Vec<OriginServerId> {
        self.windows
            .iter()
            .filter(|(_, w)| w.count_in(now, window) > 0)
            .map(|(&o, _)| o)
            .collect()
    }

    /// All stored alerts in `(origin, step, reporter, sequence)` order.
    pub fn alerts(&self) -> impl Iterator<Item = Alert> + '_ {
        self.windows.iter().flat_map(|(&o, w)| w.alerts(o))
    }

    pub fn alerts_at(&self, origin: OriginServerId, step: Step) -> Vec<Alert> {
        self.windows
            .get(&origin)
            .and_then(|w| w.bucket(step))
            .map(|b| {
                b.iter()
                    .map(|&e| {
                        let (r, s) = unpack(e);
                        Alert::new(origin, r, step, s)
                    })
                    .collect()
            })
            .unwrap_or_default()
    }

    /// Collects the alerts towards `origin` during the window ending at `now`.
    pub fn build_message(&self, origin: OriginServerId, now: Step, window: Step) -> GossipMessage {
        GossipMessage {
            sender: self.owner,
            origin,
            alerts: self
                .windows
                .get(&origin)
                .map(|w| w.snapshot(now, window))
                .unwrap_or_default(),
        }
    }
}

/// Full CDN membership as seen from one edge server.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PeerView {
    owner: EdgeServerId,
    edge_count: u32,
}

impl PeerView {
    pub fn new(owner: EdgeServerId, edge_count: u32) -> Self {
        assert!(owner.0 < edge_count, "{owner} outside a CDN of {edge_count} edges");
        Self { owner, edge_count }
    }

    pub fn owner(&self) -> EdgeServerId {
        self.owner
    }

    /// Every edge except the owner, ascending.
    pub fn peers(&self) -> impl Iterator<Item = EdgeServerId> + '_ {
        (0..self.edge_count).map(EdgeServerId).filter(move |&e| e != self.owner)
    }

    pub fn peer_count(&self) -> usize {
        self.edge_count as usize - 1
    }
}

/// The gossip probability is constant for the whole run.
pub fn choose_probability(config: &SimConfig) -> f64 {
    config.gossip_prob
}

/// Includes each peer independently with probability `v`.
///
/// Exactly one uniform draw is taken per peer, in ascending id order, even when
/// `v` is 0 or 1, so the random stream advances identically for any `v`.
pub fn select_recipients<R: Rng + ?Sized>(view: &PeerView, v: f64, rng: &mut R) -> Vec<EdgeServerId> {
    view.peers().filter(|_| rng.gen::<f64>() < v).collect()
}

/// Protocol state of one edge server.
#[derive(Debug, Clone)]
pub struct EdgeServer {
    pub ledger: AlertLedger,
    pub view: PeerView,
    /// Latest alert received from an origin during the current step.
    pub pending: Option<Alert>,
}

impl EdgeServer {
    pub fn new(id: EdgeServerId, edge_count: u32) -> Self {
        Self {
            ledger: AlertLedger::new(id),
            view: PeerView::new(id, edge_count),
            pending: None,
        }
    }

    pub fn id(&self) -> EdgeServerId {
        self.view.owner()
    }
}

/// Picks the origin to gossip about: the source of a fresh alert if there is
/// one, otherwise a uniformly random origin with in-window alerts.
pub fn choose_trigger_origin<R: Rng + ?Sized>(
    ledger: &AlertLedger,
    pending: Option<&Alert>,
    now: Step,
    window: Step,
    rng: &mut R,
) -> Option<OriginServerId> {
    if let Some(alert) = pending {
        return Some(alert.origin);
    }
    let candidates = ledger.active_origins(now, window);
    if candidates.is_empty() {
        return None;
    }
    Some(candidates[rng.gen_range(0..candidates.len())])
}

/// One run of the gossip procedure for `origin`.
///
/// Prunes the ledger, snapshots its window for `origin` and pairs that message
/// with every selected peer. Recipients are always drawn; a message with no
/// alerts is then suppressed.
pub fn gossip_round<R: Rng + ?Sized>(
    edge: &mut EdgeServer,
    origin: OriginServerId,
    now: Step,
    window: Step,
    v: f64,
    rng: &mut R,
) -> Vec<(EdgeServerId, Arc<GossipMessage>)> {
    edge.ledger.prune(now, window);
    let msg = edge.ledger.build_message(origin, now, window);
    let recipients = select_recipients(&edge.view, v, rng);
    if msg.is_empty() {
        return Vec::new();
    }
    let msg = Arc::new(msg);
    recipients.into_iter().map(|r| (r, Arc::clone(&msg))).collect()
}
