use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{LogKind, SimTime};
use crate::bits::BitString;
use crate::geo::GeoPosition;
use crate::network::{
    check_invariants, LinkKey, Mode, NetError, Network, NetworkConfig, NodeId, NodeSpec, ParamValue,
    RoutingTable,
};
use crate::qkd::EveConfig;

#[derive(Debug, Clone, PartialEq)]
pub enum EventKind {
    /// Organize a batch of nodes deployed at the same instant.
    Deploy { nodes: Vec<NodeSpec> },
    Join { node: NodeSpec },
    Move { id: NodeId, position: GeoPosition },
    Qkd { a: NodeId, b: NodeId, pulses: u64 },
    Send { src: NodeId, dst: NodeId, message: BitString },
    EveToggle { a: NodeId, b: NodeId, eve: EveConfig },
    ParamSet { name: String, value: ParamValue },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            EventKind::Deploy { .. } => "deploy",
            EventKind::Join { .. } => "join",
            EventKind::Move { .. } => "move",
            EventKind::Qkd { .. } => "qkd",
            EventKind::Send { .. } => "send",
            EventKind::EveToggle { .. } => "eve",
            EventKind::ParamSet { .. } => "param",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioEvent {
    pub at: SimTime,
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(at: SimTime, kind: EventKind) -> Self {
        Self { at, kind }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ScheduleError {
    #[error("event at {at} is before the current time {now}")]
    InThePast { at: SimTime, now: SimTime },
}

/// An event that did not complete.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFailure {
    pub at: SimTime,
    pub event: &'static str,
    pub error: NetError,
}

/// Routing state at a requested instant, as seen by every node.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSnapshot {
    pub time: SimTime,
    /// The table of the lowest-id node; empty before any deployment.
    pub table: RoutingTable,
    pub active_links: BTreeSet<LinkKey>,
    /// All deployed nodes hold the same links and version.
    pub consistent: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RunSummary {
    pub events: u64,
    pub active_links: u64,
    pub sessions: u64,
    pub deliveries: u64,
    pub delivered: u64,
    pub failures: u64,
    pub invariant_violations: u64,
}

/// Event queue plus the network it drives.
///
/// Events run in `(time, schedule order)` order and each one runs to
/// completion before the next starts.
#[derive(Debug, Clone)]
pub struct Simulator {
    net: Network,
    queue: BTreeMap<(SimTime, u64), ScenarioEvent>,
    next_seq: u64,
    processed: u64,
    failures: Vec<EventFailure>,
    snapshot_times: BTreeSet<SimTime>,
    snapshots: Vec<TableSnapshot>,
}

impl Simulator {
    pub fn new(mode: Mode, seed: u64, config: NetworkConfig) -> Self {
        Self {
            net: Network::new(mode, seed, config),
            queue: BTreeMap::new(),
            next_seq: 0,
            processed: 0,
            failures: Vec::new(),
            snapshot_times: BTreeSet::new(),
            snapshots: Vec::new(),
        }
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    /// Direct access for drivers that bypass the queue.
    pub fn network_mut(&mut self) -> &mut Network {
        &mut self.net
    }

    pub fn now(&self) -> SimTime {
        self.net.now()
    }

    pub fn pending(&self) -> usize {
        self.queue.len()
    }

    pub fn last_event_time(&self) -> Option<SimTime> {
        self.queue.keys().next_back().map(|(t, _)| *t)
    }

    pub fn failures(&self) -> &[EventFailure] {
        &self.failures
    }

    pub fn snapshots(&self) -> &[TableSnapshot] {
        &self.snapshots
    }

    pub fn schedule(&mut self, ev: ScenarioEvent) -> Result<(), ScheduleError> {
        if ev.at < self.now() {
            return Err(ScheduleError::InThePast { at: ev.at, now: self.now() });
        }
        self.queue.insert((ev.at, self.next_seq), ev);
        self.next_seq += 1;
        Ok(())
    }

    /// Request a routing snapshot after all events at or before `t`.
    pub fn snapshot_at(&mut self, t: SimTime) {
        if t >= self.now() || self.processed == 0 {
            self.snapshot_times.insert(t);
        }
    }

    pub fn run_until(&mut self, t_end: SimTime) -> RunSummary {
        loop {
            let next = match self.queue.first_key_value() {
                Some((&(t, seq), _)) if t <= t_end => (t, seq),
                _ => break,
            };
            self.take_snapshots_before(next.0);
            let ev = self.queue.remove(&next).expect("key just observed");
            self.net.set_time(ev.at);
            self.dispatch(ev);
            self.processed += 1;
        }
        self.take_snapshots_through(t_end);
        if t_end > self.net.now() && self.queue.is_empty() {
            self.net.set_time(t_end);
        }
        self.summary()
    }

    /// Run every queued event.
    pub fn run_to_end(&mut self) -> RunSummary {
        let end = self.last_event_time().unwrap_or(self.now()).max(self.now());
        let end = self.snapshot_times.iter().next_back().copied().map_or(end, |s| s.max(end));
        self.run_until(end)
    }

    pub fn summary(&self) -> RunSummary {
        let deliveries = self.net.deliveries();
        RunSummary {
            events: self.processed,
            active_links: self.net.active_links().len() as u64,
            sessions: self.net.sessions().len() as u64,
            deliveries: deliveries.len() as u64,
            delivered: deliveries.iter().filter(|d| d.delivered).count() as u64,
            failures: self.failures.len() as u64,
            invariant_violations: self
                .failures
                .iter()
                .filter(|f| f.error.is_invariant_violation())
                .count() as u64,
        }
    }

    /// Structural problems in the current state; empty when healthy.
    pub fn check_invariants(&self) -> Vec<String> {
        check_invariants(&self.net)
    }

    fn take_snapshots_before(&mut self, t: SimTime) {
        while let Some(&s) = self.snapshot_times.first() {
            if s >= t {
                break;
            }
            self.snapshot_times.pop_first();
            self.snapshots.push(self.snapshot(s));
        }
    }

    fn take_snapshots_through(&mut self, t: SimTime) {
        while let Some(&s) = self.snapshot_times.first() {
            if s > t {
                break;
            }
            self.snapshot_times.pop_first();
            self.snapshots.push(self.snapshot(s));
        }
    }

    fn snapshot(&self, time: SimTime) -> TableSnapshot {
        let tables = self.net.tables();
        let table = tables
            .values()
            .next()
            .cloned()
            .unwrap_or_else(|| RoutingTable::new(NodeId::new("-")));
        let consistent = tables
            .values()
            .all(|t| t.same_links(&table) && t.version() == table.version());
        TableSnapshot {
            time,
            table,
            active_links: self.net.active_links(),
            consistent,
        }
    }

    fn dispatch(&mut self, ev: ScenarioEvent) {
        let name = ev.kind.name();
        let net = &mut self.net;
        let result = match ev.kind {
            EventKind::Deploy { nodes } => net.organize_network(nodes),
            EventKind::Join { node } => net.join_network(node),
            EventKind::Move { id, position } => net.move_node(&id, position),
            EventKind::Qkd { a, b, pulses } => net.generate_direct_key(&a, &b, pulses).map(|_| ()),
            EventKind::Send { src, dst, message } => net.send_message(&src, &dst, &message).map(|_| ()),
            EventKind::EveToggle { a, b, eve } => net.set_eve(&a, &b, eve),
            EventKind::ParamSet { name, value } => {
                if let Err(e) = net.set_param(&name, value) {
                    log::warn!("param {name}: {e}");
                    let now = net.now();
                    net.log_error(now, &format!("event=param name={name} error={e}"));
                }
                Ok(())
            }
        };
        if let Err(error) = result {
            log::debug!("{name} at {} failed: {error}", ev.at);
            // Sends log their own failure record.
            if name != "send" {
                self.net
                    .log_error(ev.at, &format!("event={name} error={error}"));
            }
            self.failures.push(EventFailure {
                at: ev.at,
                event: name,
                error,
            });
        }
    }
}

impl Network {
    pub(crate) fn log_error(&mut self, at: SimTime, details: &str) {
        let details = details.replace('\t', " ");
        // Keep key=value tokens intact; free text in values uses underscores.
        let cleaned: Vec<String> = details
            .split(' ')
            .fold(Vec::<String>::new(), |mut acc, tok| {
                if tok.contains('=') || acc.is_empty() {
                    acc.push(tok.to_string());
                } else {
                    let last = acc.last_mut().unwrap();
                    last.push('_');
                    last.push_str(tok);
                }
                acc
            });
        self.push_log(at, LogKind::Error, "-", cleaned.join(" "));
    }
}
