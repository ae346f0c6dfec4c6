//! Offline checks over a finished run: the one-time-pad audit replays the
//! event log, and the invariant check compares live state against a brute
//! force feasibility graph.

use std::collections::{BTreeMap, BTreeSet};

use thiserror::Error;

use super::{LinkKey, Mode, Network, NodeId, NodeState};
use crate::geo::{link_feasible, LinkFeasibilityParams};
use crate::sim::{EventLog, LogKind, LogRecord};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AuditError {
    #[error("record {seq}: {reason}")]
    Malformed { seq: u64, reason: String },
    #[error("record {seq}: append for {holder}/{peer} at {offset}, expected {expected}")]
    NonContiguousAppend {
        seq: u64,
        holder: String,
        peer: String,
        offset: u64,
        expected: u64,
    },
    #[error("record {seq}: {holder}/{peer} consumed at {offset}, next unused bit is {expected}")]
    Overlap {
        seq: u64,
        holder: String,
        peer: String,
        offset: u64,
        expected: u64,
    },
    #[error("record {seq}: {holder}/{peer} consumed past generated key ({end} > {generated})")]
    Overdraw {
        seq: u64,
        holder: String,
        peer: String,
        end: u64,
        generated: u64,
    },
    #[error("record {seq}: key consumed by send {send}, which did not deliver")]
    OrphanConsume { seq: u64, send: String },
    #[error("{a} and {b} disagree on their shared key ({a_bits} vs {b_bits} bits)")]
    Asymmetric {
        a: String,
        b: String,
        a_bits: u64,
        b_bits: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PairUsage {
    pub generated: u64,
    pub consumed: u64,
    pub consume_events: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OtpAudit {
    /// Usage per `(holder, peer)`.
    pub usage: BTreeMap<(String, String), PairUsage>,
    pub sends_with_key: BTreeSet<u64>,
}

impl OtpAudit {
    pub fn total_consumed(&self) -> u64 {
        self.usage.values().map(|u| u.consumed).sum()
    }
}

fn num(rec: &LogRecord, key: &str) -> Result<u64, AuditError> {
    rec.field(key)
        .and_then(|v| v.parse().ok())
        .ok_or_else(|| AuditError::Malformed {
            seq: rec.seq,
            reason: format!("missing numeric field {key}"),
        })
}

fn text<'a>(rec: &'a LogRecord, key: &str) -> Result<&'a str, AuditError> {
    rec.field(key).ok_or_else(|| AuditError::Malformed {
        seq: rec.seq,
        reason: format!("missing field {key}"),
    })
}

/// Replay key appends and consumes from the log and check that no key bit
/// is handed out twice, none is used before it exists, and only sends that
/// delivered consumed any.
pub fn audit_otp(log: &EventLog) -> Result<OtpAudit, AuditError> {
    let delivered: BTreeSet<&str> = log
        .of_kind(LogKind::Deliver)
        .filter_map(|r| r.field("send"))
        .collect();
    let mut audit = OtpAudit::default();
    for rec in log.records() {
        match rec.kind {
            LogKind::KeyAppend => {
                let peer = text(rec, "peer")?.to_string();
                let offset = num(rec, "offset")?;
                let len = num(rec, "len")?;
                let u = audit.usage.entry((rec.origin.clone(), peer.clone())).or_default();
                if offset != u.generated {
                    return Err(AuditError::NonContiguousAppend {
                        seq: rec.seq,
                        holder: rec.origin.clone(),
                        peer,
                        offset,
                        expected: u.generated,
                    });
                }
                u.generated += len;
            }
            LogKind::KeyConsume => {
                let peer = text(rec, "peer")?.to_string();
                let offset = num(rec, "offset")?;
                let len = num(rec, "len")?;
                let send = text(rec, "send")?;
                let u = audit.usage.entry((rec.origin.clone(), peer.clone())).or_default();
                if offset != u.consumed {
                    return Err(AuditError::Overlap {
                        seq: rec.seq,
                        holder: rec.origin.clone(),
                        peer,
                        offset,
                        expected: u.consumed,
                    });
                }
                if offset + len > u.generated {
                    return Err(AuditError::Overdraw {
                        seq: rec.seq,
                        holder: rec.origin.clone(),
                        peer,
                        end: offset + len,
                        generated: u.generated,
                    });
                }
                u.consumed += len;
                u.consume_events += 1;
                if send != "-" {
                    if !delivered.contains(send) {
                        return Err(AuditError::OrphanConsume {
                            seq: rec.seq,
                            send: send.to_string(),
                        });
                    }
                    if let Ok(id) = send.parse() {
                        audit.sends_with_key.insert(id);
                    }
                }
            }
            _ => {}
        }
    }
    for ((holder, peer), u) in &audit.usage {
        let mirror = audit
            .usage
            .get(&(peer.clone(), holder.clone()))
            .copied()
            .unwrap_or_default();
        if mirror.generated != u.generated {
            return Err(AuditError::Asymmetric {
                a: holder.clone(),
                b: peer.clone(),
                a_bits: u.generated,
                b_bits: mirror.generated,
            });
        }
    }
    Ok(audit)
}

/// Every link that should exist, by checking every allowed pair directly.
pub fn feasibility_graph(
    nodes: &BTreeMap<NodeId, NodeState>,
    mode: Mode,
    params: &LinkFeasibilityParams,
) -> BTreeSet<LinkKey> {
    let list: Vec<(&NodeId, &NodeState)> = nodes.iter().collect();
    let mut out = BTreeSet::new();
    for (i, (a, sa)) in list.iter().enumerate() {
        for (b, sb) in &list[i + 1..] {
            if mode.link_allowed(sa.role, sb.role) && link_feasible(&sa.position, &sb.position, params) {
                out.insert(LinkKey::of(a, b).expect("distinct ids"));
            }
        }
    }
    out
}

/// Structural invariants of a live network. Returns one message per
/// violation; empty means healthy.
pub fn check_invariants(net: &Network) -> Vec<String> {
    let mut problems = Vec::new();
    let active = net.active_links();
    let expected = feasibility_graph(net.nodes(), net.mode(), &net.config().feasibility);
    if active != expected {
        let missing: Vec<String> = expected.difference(&active).map(|k| k.to_string()).collect();
        let extra: Vec<String> = active.difference(&expected).map(|k| k.to_string()).collect();
        problems.push(format!(
            "active links differ from feasibility graph: missing [{}] extra [{}]",
            missing.join(","),
            extra.join(",")
        ));
    }
    let mut versions = BTreeSet::new();
    for (id, table) in net.tables() {
        versions.insert(table.version());
        if table.link_set() != active {
            problems.push(format!("routing table of {id} differs from the active link set"));
        }
    }
    if versions.len() > 1 {
        problems.push(format!("routing table versions disagree: {versions:?}"));
    }
    if net.mode() == Mode::ClientServer {
        for key in &active {
            let both_clients = [key.lo(), key.hi()]
                .iter()
                .all(|id| net.node(id).is_some_and(|s| s.role == super::NodeRole::Client));
            if both_clients {
                problems.push(format!("client-client link {key}"));
            }
        }
    }
    for buf in net.key_buffers() {
        let peer = buf.pair().other(buf.holder()).expect("holder is an endpoint");
        match net.key_buffer(peer, buf.holder()) {
            Some(other) if other.total_bits() == buf.total_bits() && other.consumed_offset() == buf.consumed_offset() => {}
            _ => problems.push(format!("key buffers of {} are not mirrored", buf.pair())),
        }
    }
    if let Err(e) = audit_otp(net.log()) {
        problems.push(format!("one-time-pad audit: {e}"));
    }
    problems
}
