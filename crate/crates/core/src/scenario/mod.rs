//! Line-oriented scenario files.
//!
//! ```text
//! # comments run to end of line
//! mode p2p|cs
//! seed <u64>
//! param <name> <value>
//! node <id> peer|server|client <lat_deg> <lon_deg> <alt_m> [deploy=<t_s>]
//! at <t_s> join <id>
//! at <t_s> move <id> <lat> <lon> <alt>
//! at <t_s> qkd <idA> <idB> pulses=<n>
//! at <t_s> send <src> <dst> hex:<hexstring>
//! at <t_s> eve <idA> <idB> intercept_resend on|off
//! ```
//!
//! A node without `deploy=` is deployed at t = 0 unless a `join` event
//! brings it in later.

mod parse;
mod report;
mod run;

use std::fmt;

use crate::bits::BitString;
use crate::geo::GeoPosition;
use crate::network::{Mode, NodeId, NodeRole, NodeSpec, ParamValue};
use crate::qkd::EveConfig;
use crate::sim::{EventKind, ScenarioEvent, SimTime};

pub use parse::{parse_scenario, parse_scenario_bytes, ErrorKind, ScenarioError};
pub use report::{KeyRow, LinkRow, Report};
pub use run::{run_scenario, write_outputs, RunFlags, RunOutcome, EXIT_INVARIANT, EXIT_OK, EXIT_PARSE, EXIT_STRICT};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeDecl {
    pub id: NodeId,
    pub role: NodeRole,
    pub position: GeoPosition,
    pub deploy: Option<SimTime>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Join { id: NodeId },
    Move { id: NodeId, position: GeoPosition },
    Qkd { a: NodeId, b: NodeId, pulses: u64 },
    Send { src: NodeId, dst: NodeId, message: BitString },
    Eve { a: NodeId, b: NodeId, on: bool },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimedAction {
    pub at: SimTime,
    pub action: Action,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub mode: Mode,
    pub seed: u64,
    /// Applied in file order before anything else happens.
    pub params: Vec<(String, ParamValue)>,
    pub nodes: Vec<NodeDecl>,
    pub events: Vec<TimedAction>,
}

impl Scenario {
    pub fn new(mode: Mode, seed: u64) -> Self {
        Self {
            mode,
            seed,
            params: Vec::new(),
            nodes: Vec::new(),
            events: Vec::new(),
        }
    }

    fn joined(&self, id: &NodeId) -> bool {
        self.events
            .iter()
            .any(|e| matches!(&e.action, Action::Join { id: j } if j == id))
    }

    fn spec(&self, id: &NodeId) -> Option<NodeSpec> {
        self.nodes
            .iter()
            .find(|n| &n.id == id)
            .map(|n| NodeSpec::new(n.id.clone(), n.role, n.position))
    }

    /// Time of the last thing that happens in the file.
    pub fn end_time(&self) -> SimTime {
        let deploys = self.nodes.iter().filter_map(|n| n.deploy);
        let events = self.events.iter().map(|e| e.at);
        deploys.chain(events).max().unwrap_or(SimTime::ZERO)
    }

    /// Engine events in scheduling order: parameters, deployment batches
    /// by time, then timed actions in file order.
    pub fn to_events(&self) -> Vec<ScenarioEvent> {
        let mut out: Vec<ScenarioEvent> = self
            .params
            .iter()
            .map(|(name, value)| {
                ScenarioEvent::new(SimTime::ZERO, EventKind::ParamSet { name: name.clone(), value: *value })
            })
            .collect();

        let mut batches: Vec<(SimTime, Vec<NodeSpec>)> = Vec::new();
        for n in &self.nodes {
            let at = match n.deploy {
                Some(t) => t,
                None if self.joined(&n.id) => continue,
                None => SimTime::ZERO,
            };
            let spec = NodeSpec::new(n.id.clone(), n.role, n.position);
            match batches.iter_mut().find(|(t, _)| *t == at) {
                Some((_, b)) => b.push(spec),
                None => batches.push((at, vec![spec])),
            }
        }
        batches.sort_by_key(|(t, _)| *t);
        out.extend(
            batches
                .into_iter()
                .map(|(at, nodes)| ScenarioEvent::new(at, EventKind::Deploy { nodes })),
        );

        for e in &self.events {
            let kind = match &e.action {
                Action::Join { id } => match self.spec(id) {
                    Some(node) => EventKind::Join { node },
                    None => continue,
                },
                Action::Move { id, position } => EventKind::Move {
                    id: id.clone(),
                    position: *position,
                },
                Action::Qkd { a, b, pulses } => EventKind::Qkd {
                    a: a.clone(),
                    b: b.clone(),
                    pulses: *pulses,
                },
                Action::Send { src, dst, message } => EventKind::Send {
                    src: src.clone(),
                    dst: dst.clone(),
                    message: message.clone(),
                },
                Action::Eve { a, b, on } => EventKind::EveToggle {
                    a: a.clone(),
                    b: b.clone(),
                    eve: if *on { EveConfig::InterceptResend } else { EveConfig::None },
                },
            };
            out.push(ScenarioEvent::new(e.at, kind));
        }
        out
    }
}

fn pos(p: &GeoPosition) -> String {
    format!("{} {} {}", p.latitude_deg(), p.longitude_deg(), p.altitude_m())
}

/// Canonical text form; parsing it gives back an equal scenario.
impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "mode {}", self.mode)?;
        writeln!(f, "seed {}", self.seed)?;
        for (name, value) in &self.params {
            writeln!(f, "param {name} {value}")?;
        }
        for n in &self.nodes {
            write!(f, "node {} {} {}", n.id, n.role, pos(&n.position))?;
            if let Some(t) = n.deploy {
                write!(f, " deploy={}", t.seconds())?;
            }
            writeln!(f)?;
        }
        for e in &self.events {
            write!(f, "at {} ", e.at.seconds())?;
            match &e.action {
                Action::Join { id } => writeln!(f, "join {id}")?,
                Action::Move { id, position } => writeln!(f, "move {id} {}", pos(position))?,
                Action::Qkd { a, b, pulses } => writeln!(f, "qkd {a} {b} pulses={pulses}")?,
                Action::Send { src, dst, message } => {
                    writeln!(f, "send {src} {dst} hex:{}", message.to_hex())?
                }
                Action::Eve { a, b, on } => {
                    writeln!(f, "eve {a} {b} intercept_resend {}", if *on { "on" } else { "off" })?
                }
            }
        }
        Ok(())
    }
}
