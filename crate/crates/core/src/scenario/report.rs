use std::fmt::Write as _;

use crate::network::{DeliveryRecord, LinkKey, Mode, Network, NodeId, SessionEntry};
use crate::numfmt::sig6;
use crate::sim::{EventFailure, RunSummary, SimTime, Simulator, TableSnapshot};

#[derive(Debug, Clone, PartialEq)]
pub struct LinkRow {
    pub pair: LinkKey,
    pub state: &'static str,
    pub distance_km: f64,
    pub loss_db: f64,
    pub sessions: u64,
    pub aborted_sessions: u64,
    pub qber_history: Vec<f64>,
    pub generated_bits: u64,
    pub consumed_bits: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KeyRow {
    pub holder: NodeId,
    pub peer: NodeId,
    pub generated: u64,
    pub consumed: u64,
    pub available: u64,
}

/// Everything a run produced, in a stable order.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub mode: Mode,
    pub seed: u64,
    pub until: SimTime,
    pub params: String,
    pub summary: RunSummary,
    pub links: Vec<LinkRow>,
    pub sessions: Vec<SessionEntry>,
    pub deliveries: Vec<DeliveryRecord>,
    pub snapshots: Vec<TableSnapshot>,
    pub keys: Vec<KeyRow>,
    pub failures: Vec<EventFailure>,
    /// Invariant violations found after the run.
    pub problems: Vec<String>,
    pub exit_code: i32,
}

impl Report {
    pub fn from_simulator(sim: &Simulator, until: SimTime, problems: Vec<String>, exit_code: i32) -> Self {
        let net: &Network = sim.network();
        let links = net
            .links()
            .values()
            .map(|l| {
                let st = net.stats().get(&l.endpoints).cloned().unwrap_or_default();
                LinkRow {
                    pair: l.endpoints.clone(),
                    state: l.state.name(),
                    distance_km: l.distance_km,
                    loss_db: l.loss_db,
                    sessions: st.sessions,
                    aborted_sessions: st.aborted_sessions,
                    qber_history: st.qber_history,
                    generated_bits: st.generated_bits,
                    consumed_bits: st.consumed_bits,
                }
            })
            .collect();
        let keys = net
            .key_buffers()
            .map(|b| KeyRow {
                holder: b.holder().clone(),
                peer: b.pair().other(b.holder()).expect("holder is an endpoint").clone(),
                generated: b.total_bits(),
                consumed: b.consumed_offset(),
                available: b.available(),
            })
            .collect();
        Self {
            mode: net.mode(),
            seed: net.seed(),
            until,
            params: net.config().summary(),
            summary: sim.summary(),
            links,
            sessions: net.sessions().to_vec(),
            deliveries: net.deliveries().to_vec(),
            snapshots: sim.snapshots().to_vec(),
            keys,
            failures: sim.failures().to_vec(),
            problems,
            exit_code,
        }
    }

    /// Fixed-width table for people.
    pub fn render_text(&self) -> String {
        let mut o = String::new();
        let s = &self.summary;
        let _ = writeln!(o, "SOQN run report");
        let _ = writeln!(o, "mode {}  seed {}  until {}  exit {}", self.mode, self.seed, self.until, self.exit_code);
        let _ = writeln!(o, "params {}", self.params);
        let _ = writeln!(o);
        let _ = writeln!(o, "summary");
        let _ = writeln!(o, "  {:<20}{:>10}", "events", s.events);
        let _ = writeln!(o, "  {:<20}{:>10}", "active links", s.active_links);
        let _ = writeln!(o, "  {:<20}{:>10}", "qkd sessions", s.sessions);
        let _ = writeln!(o, "  {:<20}{:>10}", "sends", s.deliveries);
        let _ = writeln!(o, "  {:<20}{:>10}", "delivered", s.delivered);
        let _ = writeln!(o, "  {:<20}{:>10}", "failed events", s.failures);
        let _ = writeln!(
            o,
            "  {:<20}{:>10}",
            "invariants",
            if self.problems.is_empty() && s.invariant_violations == 0 { "ok" } else { "VIOLATED" }
        );

        let _ = writeln!(o);
        let _ = writeln!(o, "links");
        let _ = writeln!(
            o,
            "  {:<20} {:<10} {:>10} {:>10} {:>5} {:>5} {:>10} {:>10}  {}",
            "pair", "state", "dist_km", "loss_db", "sess", "abrt", "gen_bits", "used_bits", "qber"
        );
        for l in &self.links {
            let q: Vec<String> = l.qber_history.iter().map(|v| sig6(*v)).collect();
            let _ = writeln!(
                o,
                "  {:<20} {:<10} {:>10} {:>10} {:>5} {:>5} {:>10} {:>10}  {}",
                l.pair.to_string(),
                l.state,
                sig6(l.distance_km),
                sig6(l.loss_db),
                l.sessions,
                l.aborted_sessions,
                l.generated_bits,
                l.consumed_bits,
                if q.is_empty() { "-".to_string() } else { q.join(",") }
            );
        }

        let _ = writeln!(o);
        let _ = writeln!(o, "sessions");
        let _ = writeln!(
            o,
            "  {:>10} {:<20} {:<9} {:<17} {:>9} {:>8} {:>8} {:>10} {:>7}  {}",
            "time", "pair", "protocol", "eve", "pulses", "clicks", "sifted", "qber", "final", "outcome"
        );
        for e in &self.sessions {
            let r = &e.record;
            let _ = writeln!(
                o,
                "  {:>10} {:<20} {:<9} {:<17} {:>9} {:>8} {:>8} {:>10} {:>7}  {}",
                e.time.to_string(),
                e.pair.to_string(),
                r.protocol.name(),
                e.eve.name(),
                r.n_pulses,
                r.detections,
                r.sifted_len,
                sig6(r.qber),
                r.final_key.len(),
                if r.aborted { r.abort_reason.name() } else { "ok" }
            );
        }

        let _ = writeln!(o);
        let _ = writeln!(o, "deliveries");
        let _ = writeln!(
            o,
            "  {:>5} {:>10} {:<12} {:<12} {:>6} {:<10}  {}",
            "id", "time", "src", "dst", "bits", "outcome", "path / error"
        );
        for d in &self.deliveries {
            let detail = if d.delivered {
                format!("{} (verified)", path_str(&d.path))
            } else {
                d.error.clone().unwrap_or_default()
            };
            let _ = writeln!(
                o,
                "  {:>5} {:>10} {:<12} {:<12} {:>6} {:<10}  {}",
                d.id,
                d.time.to_string(),
                d.src.as_str(),
                d.dst.as_str(),
                d.message_bits,
                if d.delivered { "delivered" } else { "failed" },
                detail
            );
        }

        let _ = writeln!(o);
        let _ = writeln!(o, "routing snapshots");
        for snap in &self.snapshots {
            let _ = writeln!(
                o,
                "  t={} version={} links={} consistent={}",
                snap.time,
                snap.table.version(),
                snap.table.len(),
                if snap.consistent { "yes" } else { "NO" }
            );
            for (k, d) in snap.table.links() {
                let _ = writeln!(o, "    {:<20} {:>10} km", k.to_string(), sig6(d));
            }
        }

        let _ = writeln!(o);
        let _ = writeln!(o, "key buffers");
        let _ = writeln!(o, "  {:<12} {:<12} {:>10} {:>10} {:>10}", "holder", "peer", "generated", "consumed", "available");
        for k in &self.keys {
            let _ = writeln!(
                o,
                "  {:<12} {:<12} {:>10} {:>10} {:>10}",
                k.holder.as_str(),
                k.peer.as_str(),
                k.generated,
                k.consumed,
                k.available
            );
        }

        if !self.failures.is_empty() {
            let _ = writeln!(o);
            let _ = writeln!(o, "failed events");
            for f in &self.failures {
                let _ = writeln!(o, "  {:>10} {:<6} {}", f.at.to_string(), f.event, f.error);
            }
        }
        if !self.problems.is_empty() {
            let _ = writeln!(o);
            let _ = writeln!(o, "invariant violations");
            for p in &self.problems {
                let _ = writeln!(o, "  {p}");
            }
        }
        o
    }

    /// One tab-separated record per line; first field is the record type.
    pub fn render_tsv(&self) -> String {
        let mut o = String::new();
        let s = &self.summary;
        let _ = writeln!(
            o,
            "run\tmode={}\tseed={}\tuntil={}\texit={}",
            self.mode, self.seed, self.until, self.exit_code
        );
        let _ = writeln!(
            o,
            "summary\tevents={}\tactive_links={}\tsessions={}\tsends={}\tdelivered={}\tfailures={}\tinvariant_violations={}",
            s.events,
            s.active_links,
            s.sessions,
            s.deliveries,
            s.delivered,
            s.failures,
            s.invariant_violations + self.problems.len() as u64
        );
        for l in &self.links {
            let q: Vec<String> = l.qber_history.iter().map(|v| sig6(*v)).collect();
            let _ = writeln!(
                o,
                "link\tpair={}\tstate={}\tdistance_km={}\tloss_db={}\tsessions={}\taborted={}\tgenerated={}\tconsumed={}\tqber_history={}",
                l.pair,
                l.state,
                sig6(l.distance_km),
                sig6(l.loss_db),
                l.sessions,
                l.aborted_sessions,
                l.generated_bits,
                l.consumed_bits,
                if q.is_empty() { "-".to_string() } else { q.join(",") }
            );
        }
        for e in &self.sessions {
            let r = &e.record;
            let _ = writeln!(
                o,
                "session\ttime={}\tpair={}\tlabel={}\tprotocol={}\teve={}\tpulses={}\tdetections={}\tsifted={}\tsample={}\tqber={}\tleak={}\tfinal={}\taborted={}\treason={}\tdigest={}",
                e.time,
                e.pair,
                e.label,
                r.protocol.name(),
                e.eve.name(),
                r.n_pulses,
                r.detections,
                r.sifted_len,
                r.qber_sample_len,
                sig6(r.qber),
                r.reconciliation_leak_bits,
                r.final_key.len(),
                r.aborted,
                r.abort_reason,
                r.transcript_digest
            );
        }
        for d in &self.deliveries {
            let consumed: Vec<String> = d.consumed.iter().map(|(k, n)| format!("{k}:{n}")).collect();
            let _ = writeln!(
                o,
                "delivery\tid={}\ttime={}\tsrc={}\tdst={}\tpath={}\tbits={}\toutcome={}\tbroadcasts={}\tconsumed={}\terror={}",
                d.id,
                d.time,
                d.src,
                d.dst,
                if d.path.is_empty() { "-".to_string() } else { path_str(&d.path) },
                d.message_bits,
                if d.delivered { "delivered" } else { "failed" },
                d.broadcasts,
                if consumed.is_empty() { "-".to_string() } else { consumed.join(",") },
                d.error.as_deref().unwrap_or("-")
            );
        }
        for snap in &self.snapshots {
            let links: Vec<String> = snap.table.links().map(|(k, _)| k.to_string()).collect();
            let _ = writeln!(
                o,
                "snapshot\ttime={}\tversion={}\tconsistent={}\tlinks={}",
                snap.time,
                snap.table.version(),
                snap.consistent,
                if links.is_empty() { "-".to_string() } else { links.join(",") }
            );
        }
        for k in &self.keys {
            let _ = writeln!(
                o,
                "key\tholder={}\tpeer={}\tgenerated={}\tconsumed={}\tavailable={}",
                k.holder, k.peer, k.generated, k.consumed, k.available
            );
        }
        for f in &self.failures {
            let _ = writeln!(o, "failure\ttime={}\tevent={}\terror={}", f.at, f.event, f.error);
        }
        for p in &self.problems {
            let _ = writeln!(o, "problem\t{p}");
        }
        o
    }
}

fn path_str(path: &[NodeId]) -> String {
    path.iter().map(NodeId::as_str).collect::<Vec<_>>().join(">")
}
