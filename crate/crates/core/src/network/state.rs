use std::collections::{BTreeMap, BTreeSet};

use super::{
    decrypt, decrypt_relay, encrypt, find_path_with, relay_xor_blocks, KeyBlock, KeyBuffer,
    LinkKey, LinkState, Mode, NetError, NetworkConfig, NodeId, NodeRole, OpticalLink, PadLedger,
    ParamError, ParamValue, RelayTicket, RouteError, RoutingTable,
};
use crate::bits::BitString;
use crate::channel::path_loss_db;
use crate::geo::{geodesic_distance_with_radius, line_of_sight, GeoPosition};
use crate::numfmt::sig6;
use crate::qkd::{run_bb84_session, run_plugplay_session, EveConfig, SessionRecord};
use crate::sim::{BroadcastBus, EventLog, LogKind, RandomStream, SimTime};

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub role: NodeRole,
    pub position: GeoPosition,
}

impl NodeSpec {
    pub fn new(id: impl Into<NodeId>, role: NodeRole, position: GeoPosition) -> Self {
        Self {
            id: id.into(),
            role,
            position,
        }
    }
}

impl From<String> for NodeId {
    fn from(s: String) -> Self {
        NodeId::new(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeState {
    pub role: NodeRole,
    pub position: GeoPosition,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionEntry {
    pub time: SimTime,
    /// Random-stream label; unique per session.
    pub label: String,
    pub pair: LinkKey,
    pub eve: EveConfig,
    pub record: SessionRecord,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LinkStats {
    pub distance_km: f64,
    pub loss_db: f64,
    pub sessions: u64,
    pub aborted_sessions: u64,
    pub qber_history: Vec<f64>,
    pub generated_bits: u64,
    pub consumed_bits: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeliveryRecord {
    pub id: u64,
    pub time: SimTime,
    pub src: NodeId,
    pub dst: NodeId,
    /// Empty when no route was found.
    pub path: Vec<NodeId>,
    pub message_bits: usize,
    pub ciphertext: Option<BitString>,
    /// Relay XOR broadcasts used by this delivery.
    pub broadcasts: usize,
    /// Bits consumed per hop (each end consumes the same amount).
    pub consumed: Vec<(LinkKey, u64)>,
    pub delivered: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaySetup {
    pub ticket: RelayTicket,
    /// `K1`, held by the source.
    pub sender_key: KeyBlock,
    /// Last hop key, held by the destination.
    pub receiver_key: KeyBlock,
}

/// The whole simulated network: node states, links, every node's routing
/// table and key pools, plus the event log.
///
/// All mutation goes through `&mut self`; the simulation engine is the only
/// writer.
#[derive(Debug, Clone)]
pub struct Network {
    mode: Mode,
    seed: u64,
    config: NetworkConfig,
    now: SimTime,
    nodes: BTreeMap<NodeId, NodeState>,
    deployed: BTreeSet<NodeId>,
    links: BTreeMap<LinkKey, OpticalLink>,
    tables: BTreeMap<NodeId, RoutingTable>,
    keys: BTreeMap<(NodeId, LinkKey), KeyBuffer>,
    eve: BTreeMap<LinkKey, EveConfig>,
    session_counters: BTreeMap<LinkKey, u64>,
    sessions: Vec<SessionEntry>,
    deliveries: Vec<DeliveryRecord>,
    stats: BTreeMap<LinkKey, LinkStats>,
    ledger: PadLedger,
    bus: BroadcastBus,
    log: EventLog,
}

impl Network {
    pub fn new(mode: Mode, seed: u64, config: NetworkConfig) -> Self {
        Self {
            mode,
            seed,
            config,
            now: SimTime::ZERO,
            nodes: BTreeMap::new(),
            deployed: BTreeSet::new(),
            links: BTreeMap::new(),
            tables: BTreeMap::new(),
            keys: BTreeMap::new(),
            eve: BTreeMap::new(),
            session_counters: BTreeMap::new(),
            sessions: Vec::new(),
            deliveries: Vec::new(),
            stats: BTreeMap::new(),
            ledger: PadLedger::new(),
            bus: BroadcastBus::new(),
            log: EventLog::new(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Advance the clock. Earlier times are ignored.
    pub fn set_time(&mut self, t: SimTime) {
        self.now = self.now.max(t);
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, NodeState> {
        &self.nodes
    }

    pub fn node(&self, id: &NodeId) -> Option<&NodeState> {
        self.nodes.get(id)
    }

    pub fn links(&self) -> &BTreeMap<LinkKey, OpticalLink> {
        &self.links
    }

    pub fn link(&self, a: &NodeId, b: &NodeId) -> Option<&OpticalLink> {
        LinkKey::of(a, b).and_then(|k| self.links.get(&k))
    }

    pub fn active_links(&self) -> BTreeSet<LinkKey> {
        self.links
            .values()
            .filter(|l| l.is_active())
            .map(|l| l.endpoints.clone())
            .collect()
    }

    pub fn tables(&self) -> &BTreeMap<NodeId, RoutingTable> {
        &self.tables
    }

    pub fn table(&self, id: &NodeId) -> Option<&RoutingTable> {
        self.tables.get(id)
    }

    pub fn key_buffer(&self, holder: &NodeId, peer: &NodeId) -> Option<&KeyBuffer> {
        let pair = LinkKey::of(holder, peer)?;
        self.keys.get(&(holder.clone(), pair))
    }

    pub fn key_buffers(&self) -> impl Iterator<Item = &KeyBuffer> {
        self.keys.values()
    }

    pub fn sessions(&self) -> &[SessionEntry] {
        &self.sessions
    }

    pub fn deliveries(&self) -> &[DeliveryRecord] {
        &self.deliveries
    }

    pub fn stats(&self) -> &BTreeMap<LinkKey, LinkStats> {
        &self.stats
    }

    pub fn log(&self) -> &EventLog {
        &self.log
    }

    pub(crate) fn push_log(&mut self, at: SimTime, kind: LogKind, origin: &str, details: String) {
        self.log.push(at, kind, origin, details);
    }

    pub fn ledger(&self) -> &PadLedger {
        &self.ledger
    }

    pub fn ledger_mut(&mut self) -> &mut PadLedger {
        &mut self.ledger
    }

    pub fn eve_on(&self, a: &NodeId, b: &NodeId) -> EveConfig {
        LinkKey::of(a, b)
            .and_then(|k| self.eve.get(&k).copied())
            .unwrap_or(EveConfig::None)
    }

    pub fn set_param(&mut self, name: &str, value: ParamValue) -> Result<(), ParamError> {
        self.config.set(name, value)?;
        self.log
            .push(self.now, LogKind::Param, "-", format!("name={name} value={value}"));
        Ok(())
    }

    pub fn set_eve(&mut self, a: &NodeId, b: &NodeId, eve: EveConfig) -> Result<(), NetError> {
        let pair = LinkKey::of(a, b).ok_or_else(|| NetError::SameNode(a.clone()))?;
        let detail = match eve {
            EveConfig::TrojanProbe { probe_intensity } => {
                format!("pair={pair} mode=trojan_probe probe_intensity={}", sig6(probe_intensity))
            }
            other => format!("pair={pair} mode={}", other.name()),
        };
        self.log.push(self.now, LogKind::Eve, "-", detail);
        if eve == EveConfig::None {
            self.eve.remove(&pair);
        } else {
            self.eve.insert(pair, eve);
        }
        Ok(())
    }

    /// Lowest-id server, which picks relay paths in client/server mode.
    pub fn coordinator(&self) -> Option<&NodeId> {
        self.nodes
            .iter()
            .find(|(_, s)| s.role == NodeRole::Server)
            .map(|(id, _)| id)
    }

    // ---------------------------------------------------------------
    // Organization

    /// Deploy a batch of nodes. In client/server mode the servers form the
    /// backbone first and clients join afterwards.
    pub fn organize_network(&mut self, specs: Vec<NodeSpec>) -> Result<(), NetError> {
        self.validate_new(&specs)?;
        match self.mode {
            Mode::PeerToPeer => self.round(specs),
            Mode::ClientServer => {
                let (servers, clients): (Vec<_>, Vec<_>) =
                    specs.into_iter().partition(|s| s.role == NodeRole::Server);
                if !servers.is_empty() {
                    self.round(servers)?;
                }
                if !clients.is_empty() {
                    self.round(clients)?;
                }
                Ok(())
            }
        }
    }

    pub fn join_network(&mut self, spec: NodeSpec) -> Result<(), NetError> {
        self.validate_new(std::slice::from_ref(&spec))?;
        self.round(vec![spec])
    }

    /// Tear down every link of `id`, then rejoin from `position`.
    pub fn move_node(&mut self, id: &NodeId, position: GeoPosition) -> Result<(), NetError> {
        if !self.nodes.contains_key(id) {
            return Err(NetError::UnknownNode(id.clone()));
        }
        let incident: Vec<LinkKey> = self
            .links
            .values()
            .filter(|l| l.is_active() && l.endpoints.contains(id))
            .map(|l| l.endpoints.clone())
            .collect();
        for key in &incident {
            if let Some(link) = self.links.get_mut(key) {
                link.state = LinkState::TornDown;
            }
            self.log.push(self.now, LogKind::LinkDown, id, format!("pair={key} reason=move"));
        }
        let list = join_keys(&incident);
        let receivers = self.bus.broadcast(
            self.now,
            id,
            &format!("move teardown={list}"),
            &self.deployed,
            &mut self.log,
        )?;
        for holder in receivers.iter().chain(std::iter::once(id)) {
            if let Some(t) = self.tables.get_mut(holder) {
                for key in &incident {
                    t.remove(key);
                }
            }
        }
        let state = self.nodes.get_mut(id).expect("checked above");
        state.position = position;
        let spec = NodeSpec {
            id: id.clone(),
            role: state.role,
            position,
        };
        self.acquire_round(vec![spec])
    }

    fn validate_new(&self, specs: &[NodeSpec]) -> Result<(), NetError> {
        let mut seen = BTreeSet::new();
        for s in specs {
            if !self.mode.allows(s.role) {
                return Err(NetError::RoleConflict {
                    id: s.id.clone(),
                    role: s.role,
                    mode: self.mode,
                });
            }
            if self.nodes.contains_key(&s.id) || !seen.insert(&s.id) {
                return Err(NetError::DuplicateNode(s.id.clone()));
            }
        }
        Ok(())
    }

    /// Deploy fresh nodes and run one acquisition round for them.
    fn round(&mut self, specs: Vec<NodeSpec>) -> Result<(), NetError> {
        let had_nodes = !self.nodes.is_empty();
        let sync_source = if had_nodes {
            self.coordinator().or_else(|| self.nodes.keys().next()).cloned()
        } else {
            None
        };
        for s in &specs {
            let p = &s.position;
            self.log.push(
                self.now,
                LogKind::Deploy,
                &s.id,
                format!(
                    "role={} lat={} lon={} alt={}",
                    s.role,
                    sig6(p.latitude_deg()),
                    sig6(p.longitude_deg()),
                    sig6(p.altitude_m())
                ),
            );
            self.nodes.insert(
                s.id.clone(),
                NodeState {
                    role: s.role,
                    position: s.position,
                },
            );
            self.deployed.insert(s.id.clone());
            self.tables.insert(s.id.clone(), RoutingTable::new(s.id.clone()));
        }
        // Newcomers learn the current link set from an existing node.
        if let Some(src) = sync_source {
            let source_table = self.tables[&src].clone();
            self.bus.broadcast(
                self.now,
                &src,
                &format!("table_sync version={} links={}", source_table.version(), source_table.len()),
                &self.deployed,
                &mut self.log,
            )?;
            for s in &specs {
                self.tables
                    .get_mut(&s.id)
                    .expect("just inserted")
                    .sync_from(&source_table);
            }
        }
        self.acquire_round(specs)
    }

    /// Location announcements, link acquisition, result broadcast and
    /// table commit for the given (already deployed) nodes.
    fn acquire_round(&mut self, specs: Vec<NodeSpec>) -> Result<(), NetError> {
        for s in &specs {
            self.announce_location(&s.id)?;
        }
        // A joining client triggers location announcements from all servers.
        if self.mode == Mode::ClientServer && specs.iter().any(|s| s.role == NodeRole::Client) {
            let fresh: BTreeSet<&NodeId> = specs.iter().map(|s| &s.id).collect();
            let servers: Vec<NodeId> = self
                .nodes
                .iter()
                .filter(|(id, st)| st.role == NodeRole::Server && !fresh.contains(id))
                .map(|(id, _)| id.clone())
                .collect();
            for id in servers {
                self.announce_location(&id)?;
            }
        }

        let mut attempted = BTreeSet::new();
        let mut established: BTreeMap<NodeId, Vec<LinkKey>> = BTreeMap::new();
        for s in &specs {
            let others: Vec<NodeId> = self.nodes.keys().filter(|id| **id != s.id).cloned().collect();
            for other in others {
                let other_role = self.nodes[&other].role;
                if !self.mode.link_allowed(s.role, other_role) {
                    continue;
                }
                let key = LinkKey::of(&s.id, &other).expect("distinct ids");
                if !attempted.insert(key.clone()) {
                    continue;
                }
                if self.acquire(&s.id, &other)? {
                    established.entry(s.id.clone()).or_default().push(key);
                }
            }
        }

        for s in &specs {
            let mine = established.remove(&s.id).unwrap_or_default();
            let payload = format!(
                "links {}",
                if mine.is_empty() { "none".to_string() } else { join_keys(&mine) }
            );
            let receivers = self.bus.broadcast(self.now, &s.id, &payload, &self.deployed, &mut self.log)?;
            let updates: Vec<(LinkKey, f64)> = mine
                .iter()
                .map(|k| (k.clone(), self.links[k].distance_km))
                .collect();
            for holder in receivers.iter().chain(std::iter::once(&s.id)) {
                let table = self.tables.get_mut(holder).expect("deployed nodes have tables");
                for (k, d) in &updates {
                    table.insert(k.clone(), *d);
                }
            }
        }

        for table in self.tables.values_mut() {
            table.bump_version();
        }
        let (version, count) = self
            .tables
            .values()
            .next()
            .map(|t| (t.version(), t.len()))
            .unwrap_or((0, 0));
        self.log.push(
            self.now,
            LogKind::Tables,
            "-",
            format!("version={version} links={count} nodes={}", self.tables.len()),
        );

        if self.config.precharge_bits > 0 {
            let fresh: Vec<LinkKey> = attempted
                .into_iter()
                .filter(|k| self.links.get(k).is_some_and(|l| l.is_active()))
                .collect();
            for key in fresh {
                let need = self.config.precharge_bits;
                if let Err(e) = self.ensure_key(key.lo(), key.hi(), need) {
                    self.log
                        .push(self.now, LogKind::Error, "-", format!("precharge pair={key} error={}", quote(&e.to_string())));
                }
            }
        }
        Ok(())
    }

    fn announce_location(&mut self, id: &NodeId) -> Result<(), NetError> {
        let st = &self.nodes[id];
        let payload = format!(
            "location role={} lat={} lon={} alt={}",
            st.role,
            sig6(st.position.latitude_deg()),
            sig6(st.position.longitude_deg()),
            sig6(st.position.altitude_m())
        );
        self.bus.broadcast(self.now, id, &payload, &self.deployed, &mut self.log)?;
        Ok(())
    }

    /// ATP stand-in: location exchange is done, so check feasibility and
    /// account the coarse and fine acquisition stages.
    fn acquire(&mut self, a: &NodeId, b: &NodeId) -> Result<bool, NetError> {
        let key = LinkKey::of(a, b).expect("distinct ids");
        let pa = self.nodes[a].position;
        let pb = self.nodes[b].position;
        let params = self.config.feasibility;
        self.log.push(self.now, LogKind::LinkAcquiring, a, format!("peer={b}"));

        let distance = geodesic_distance_with_radius(&pa, &pb, params.earth_radius_km);
        let reason = if distance > params.max_range_km {
            Some("range")
        } else if params.require_los && !line_of_sight(&pa, &pb, &params) {
            Some("los")
        } else {
            None
        };
        if let Some(reason) = reason {
            self.log.push(
                self.now,
                LogKind::LinkRejected,
                a,
                format!("peer={b} distance_km={} reason={reason}", sig6(distance)),
            );
            return Ok(false);
        }

        let loss = path_loss_db(distance, &self.config.channel);
        let acquired_at = self
            .now
            .after(self.config.acquisition_coarse_s + self.config.acquisition_fine_s);
        self.links.insert(
            key.clone(),
            OpticalLink {
                endpoints: key.clone(),
                distance_km: distance,
                loss_db: loss,
                acquired_at,
                state: LinkState::Active,
            },
        );
        let st = self.stats.entry(key).or_default();
        st.distance_km = distance;
        st.loss_db = loss;
        self.log.push(
            self.now,
            LogKind::LinkActive,
            a,
            format!(
                "peer={b} distance_km={} loss_db={} acquired_at={}",
                sig6(distance),
                sig6(loss),
                acquired_at
            ),
        );
        Ok(true)
    }

    // ---------------------------------------------------------------
    // Key generation

    /// Run one QKD session on the active link `a-b` and, on success, append
    /// the final key to both ends' buffers.
    pub fn generate_direct_key(
        &mut self,
        a: &NodeId,
        b: &NodeId,
        n_pulses: u64,
    ) -> Result<SessionRecord, NetError> {
        let key = LinkKey::of(a, b).ok_or_else(|| NetError::SameNode(a.clone()))?;
        let link = match self.links.get(&key) {
            Some(l) if l.is_active() => l.clone(),
            _ => return Err(NetError::LinkInactive(a.clone(), b.clone())),
        };
        let counter = self.session_counters.entry(key.clone()).or_insert(0);
        let label = format!("qkd/{key}/{counter}");
        *counter += 1;

        let eve = self.eve.get(&key).copied().unwrap_or(EveConfig::None);
        let mut rng = RandomStream::new(self.seed, label.clone());
        let cfg = &self.config;
        let record = match self.mode {
            Mode::PeerToPeer => run_bb84_session(&link, n_pulses, &eve, &cfg.channel, &cfg.qkd, &mut rng)?,
            Mode::ClientServer => {
                run_plugplay_session(&link, n_pulses, &eve, &cfg.channel, &cfg.qkd, &mut rng)?
            }
        };

        let measuring = self.measuring_party(&key);
        self.log.push(
            self.now,
            LogKind::Session,
            measuring,
            format!(
                "pair={key} label={label} protocol={} eve={} pulses={} detections={} sifted={} sample={} qber={} leak={} final={} aborted={} reason={} digest={}",
                record.protocol.name(),
                eve.name(),
                record.n_pulses,
                record.detections,
                record.sifted_len,
                record.qber_sample_len,
                sig6(record.qber),
                record.reconciliation_leak_bits,
                record.final_key.len(),
                record.aborted,
                record.abort_reason,
                record.transcript_digest,
            ),
        );
        let stats = self.stats.entry(key.clone()).or_default();
        stats.sessions += 1;
        if record.qber_sample_len > 0 {
            stats.qber_history.push(record.qber);
        }
        if record.aborted {
            stats.aborted_sessions += 1;
        } else {
            stats.generated_bits += record.final_key.len() as u64;
            for holder in [key.lo().clone(), key.hi().clone()] {
                let peer = key.other(&holder).expect("endpoint").clone();
                let buf = self
                    .keys
                    .entry((holder.clone(), key.clone()))
                    .or_insert_with(|| KeyBuffer::new(holder.clone(), key.clone()));
                let offset = buf.append(&record.final_key);
                self.log.push(
                    self.now,
                    LogKind::KeyAppend,
                    &holder,
                    format!("peer={peer} offset={offset} len={} label={label}", record.final_key.len()),
                );
            }
        }
        self.sessions.push(SessionEntry {
            time: self.now,
            label,
            pair: key.clone(),
            eve,
            record: record.clone(),
        });
        if record.aborted {
            return Err(NetError::QkdAborted(key.lo().clone(), key.hi().clone(), record.abort_reason));
        }
        Ok(record)
    }

    /// The node that measures photons on this link.
    fn measuring_party(&self, key: &LinkKey) -> NodeId {
        match self.mode {
            Mode::PeerToPeer => key.hi().clone(),
            Mode::ClientServer => {
                let lo_is_server = self.nodes.get(key.lo()).is_some_and(|s| s.role == NodeRole::Server);
                if lo_is_server {
                    key.lo().clone()
                } else {
                    key.hi().clone()
                }
            }
        }
    }

    pub fn available_key(&self, a: &NodeId, b: &NodeId) -> u64 {
        self.key_buffer(a, b).map(KeyBuffer::available).unwrap_or(0)
    }

    /// Run sessions on `a-b` until at least `needed` unconsumed bits are
    /// buffered. Returns the number of sessions run.
    pub fn ensure_key(&mut self, a: &NodeId, b: &NodeId, needed: u64) -> Result<u32, NetError> {
        let mut attempts = 0;
        while self.available_key(a, b) < needed {
            if attempts >= self.config.max_session_attempts {
                return Err(NetError::KeyStarvation {
                    a: a.clone(),
                    b: b.clone(),
                    available: self.available_key(a, b),
                    needed,
                    attempts,
                });
            }
            attempts += 1;
            self.generate_direct_key(a, b, self.config.session_pulses)?;
        }
        Ok(attempts)
    }

    fn consume(&mut self, holder: &NodeId, peer: &NodeId, n: u64, send: Option<u64>, usage: &str) -> Result<KeyBlock, NetError> {
        let pair = LinkKey::of(holder, peer).ok_or_else(|| NetError::SameNode(holder.clone()))?;
        let buf = self
            .keys
            .entry((holder.clone(), pair.clone()))
            .or_insert_with(|| KeyBuffer::new(holder.clone(), pair.clone()));
        let block = buf.consume(n)?;
        let send = send.map(|s| s.to_string()).unwrap_or_else(|| "-".into());
        self.log.push(
            self.now,
            LogKind::KeyConsume,
            holder,
            format!("peer={peer} offset={} len={n} send={send} use={usage}", block.offset),
        );
        Ok(block)
    }

    fn note_consumed(&mut self, pair: &LinkKey, n: u64) {
        self.stats.entry(pair.clone()).or_default().consumed_bits += n;
    }

    // ---------------------------------------------------------------
    // Relaying and messaging

    /// Path chosen for `src -> dst` from the routing table of the deciding
    /// node: the source in P2P mode, the coordinating server in C/S mode.
    pub fn route(&self, src: &NodeId, dst: &NodeId) -> Result<Vec<NodeId>, NetError> {
        for id in [src, dst] {
            if !self.nodes.contains_key(id) {
                return Err(NetError::UnknownNode(id.clone()));
            }
        }
        let decider = match self.mode {
            Mode::PeerToPeer => src,
            Mode::ClientServer => self.coordinator().unwrap_or(src),
        };
        let table = &self.tables[decider];
        let mode = self.mode;
        find_path_with(table, src, dst, |n| {
            self.nodes.get(n).is_some_and(|s| mode.can_relay(s.role))
        })
        .map_err(|e| match e {
            RouteError::SameNode(n) => NetError::SameNode(n),
            RouteError::NoRoute(a, b) => NetError::NoRoute(a, b),
        })
    }

    /// Consume one block per hop along `path` and publish the relay XORs.
    pub fn relay_key_setup(&mut self, path: &[NodeId], block_len: u64) -> Result<RelaySetup, NetError> {
        self.relay_setup(path, block_len, None)
    }

    fn ensure_path_keys(&mut self, path: &[NodeId], block_len: u64) -> Result<(), NetError> {
        for hop in path.windows(2) {
            let active = self.link(&hop[0], &hop[1]).is_some_and(|l| l.is_active());
            let buffered = self.available_key(&hop[0], &hop[1]) >= block_len;
            if !active && !buffered {
                return Err(NetError::LinkInactive(hop[0].clone(), hop[1].clone()));
            }
            self.ensure_key(&hop[0], &hop[1], block_len)?;
        }
        Ok(())
    }

    fn relay_setup(&mut self, path: &[NodeId], block_len: u64, send: Option<u64>) -> Result<RelaySetup, NetError> {
        if path.len() < 3 {
            return Err(NetError::PathTooShort(path.len()));
        }
        for id in path {
            if !self.nodes.contains_key(id) {
                return Err(NetError::UnknownNode(id.clone()));
            }
        }
        // Generate everything first so a starving hop consumes nothing.
        self.ensure_path_keys(path, block_len)?;

        let mut forward = Vec::with_capacity(path.len() - 1);
        let mut backward = Vec::with_capacity(path.len() - 1);
        for hop in path.windows(2) {
            let pair = LinkKey::of(&hop[0], &hop[1]).expect("path hops are distinct");
            let usage_a = if hop[0] == path[0] { "encrypt" } else { "relay" };
            let usage_b = if &hop[1] == path.last().unwrap() { "decrypt" } else { "relay" };
            forward.push(self.consume(&hop[0], &hop[1], block_len, send, usage_a)?);
            backward.push(self.consume(&hop[1], &hop[0], block_len, send, usage_b)?);
            self.note_consumed(&pair, block_len);
        }
        let hop_keys: Vec<BitString> = forward.iter().map(|b| b.bits.clone()).collect();
        let xors = relay_xor_blocks(&hop_keys)?;

        let route = path.iter().map(NodeId::as_str).collect::<Vec<_>>().join(">");
        let mut broadcasts = Vec::with_capacity(xors.len());
        for (j, block) in xors.into_iter().enumerate() {
            let relay = &path[j + 1];
            // The relay XORs the key it shares with its predecessor and the
            // key it shares with its successor, then forgets both.
            self.ledger.mark_used(&backward[j])?;
            self.ledger.mark_used(&forward[j + 1])?;
            self.bus.broadcast(
                self.now,
                relay,
                &format!("relay_xor path={route} len={block_len} block={}", block.to_hex()),
                &self.deployed,
                &mut self.log,
            )?;
            broadcasts.push((relay.clone(), block));
        }
        Ok(RelaySetup {
            ticket: RelayTicket {
                path: path.to_vec(),
                broadcasts,
                block_len: block_len as usize,
            },
            sender_key: forward.swap_remove(0),
            receiver_key: backward.pop().expect("at least two hops"),
        })
    }

    /// Route, generate keys as needed, encrypt, relay and decrypt one
    /// message. A failed send consumes no key material.
    pub fn send_message(&mut self, src: &NodeId, dst: &NodeId, message: &BitString) -> Result<DeliveryRecord, NetError> {
        let id = self.deliveries.len() as u64;
        let mut rec = DeliveryRecord {
            id,
            time: self.now,
            src: src.clone(),
            dst: dst.clone(),
            path: Vec::new(),
            message_bits: message.len(),
            ciphertext: None,
            broadcasts: 0,
            consumed: Vec::new(),
            delivered: false,
            error: None,
        };
        let outcome = self.try_send(&mut rec, message);
        let path = rec.path.iter().map(NodeId::as_str).collect::<Vec<_>>().join(">");
        match &outcome {
            Ok(()) => {
                rec.delivered = true;
                self.log.push(
                    self.now,
                    LogKind::Deliver,
                    dst,
                    format!(
                        "send={id} src={src} path={path} bits={} broadcasts={} verified=true",
                        message.len(),
                        rec.broadcasts
                    ),
                );
            }
            Err(e) => {
                rec.error = Some(e.to_string());
                self.log.push(
                    self.now,
                    LogKind::SendFailed,
                    src,
                    format!(
                        "send={id} dst={dst} path={} bits={} error={}",
                        if path.is_empty() { "-" } else { &path },
                        message.len(),
                        quote(&e.to_string())
                    ),
                );
            }
        }
        self.deliveries.push(rec.clone());
        outcome.map(|_| rec)
    }

    fn try_send(&mut self, rec: &mut DeliveryRecord, message: &BitString) -> Result<(), NetError> {
        let path = self.route(&rec.src, &rec.dst)?;
        rec.path = path.clone();
        let n = message.len() as u64;
        let delivered = if path.len() == 2 {
            self.ensure_path_keys(&path, n)?;
            let pair = LinkKey::of(&path[0], &path[1]).expect("distinct");
            let ks = self.consume(&path[0], &path[1], n, Some(rec.id), "encrypt")?;
            let kr = self.consume(&path[1], &path[0], n, Some(rec.id), "decrypt")?;
            self.note_consumed(&pair, n);
            rec.consumed.push((pair, n));
            let c = encrypt(message, &ks, &mut self.ledger)?;
            let m = decrypt(&c, &kr, &mut self.ledger)?;
            rec.ciphertext = Some(c);
            m
        } else {
            let setup = self.relay_setup(&path, n, Some(rec.id))?;
            for hop in path.windows(2) {
                rec.consumed.push((LinkKey::of(&hop[0], &hop[1]).expect("distinct"), n));
            }
            rec.broadcasts = setup.ticket.broadcasts.len();
            let c = encrypt(message, &setup.sender_key, &mut self.ledger)?;
            self.ledger.mark_used(&setup.receiver_key)?;
            let m = decrypt_relay(&c, &setup.receiver_key.bits, &setup.ticket)?;
            rec.ciphertext = Some(c);
            m
        };
        if &delivered != message {
            return Err(NetError::PlaintextMismatch(rec.id));
        }
        Ok(())
    }
}

fn join_keys(keys: &[LinkKey]) -> String {
    if keys.is_empty() {
        return "-".into();
    }
    keys.iter().map(LinkKey::to_string).collect::<Vec<_>>().join(",")
}

/// Log-safe rendering of free text: no tabs, no spaces.
pub(crate) fn quote(s: &str) -> String {
    s.replace(['\t', ' '], "_")
}
