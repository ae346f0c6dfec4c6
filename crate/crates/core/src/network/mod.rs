//! Self-organizing network: node roles, optical links, routing tables,
//! pairwise key buffers, trusted-relay key distribution and one-time-pad
//! message transfer.
//!
//! Two organization modes exist. In P2P mode every pair of peers may hold a
//! link. In client/server mode only server-server and server-client links
//! are acquired, and clients never relay; two clients always talk through
//! one or more servers.

mod audit;
mod config;
mod keys;
mod link;
mod otp;
mod routing;
mod state;

use std::fmt;

use thiserror::Error;

use crate::geo::GeoError;
use crate::qkd::{AbortReason, QkdError};
use crate::sim::BusError;

pub use audit::{audit_otp, check_invariants, feasibility_graph, AuditError, OtpAudit, PairUsage};
pub use config::{NetworkConfig, ParamError, ParamValue, PARAM_NAMES};
pub use keys::{KeyBlock, KeyBuffer, KeyError, PadLedger};
pub use link::{LinkKey, LinkState, OpticalLink};
pub use otp::{decrypt, decrypt_relay, encrypt, relay_xor_blocks, xor_bits, OtpError, RelayTicket};
pub use routing::{find_path, find_path_with, RouteError, RoutingTable};
pub use state::{
    DeliveryRecord, LinkStats, Network, NodeSpec, NodeState, RelaySetup, SessionEntry,
};

/// Opaque node identifier. Ordering is lexicographic on the token.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(String);

impl NodeId {
    pub fn new(id: impl Into<String>) -> Self {
        Self(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for NodeId {
    fn from(s: &str) -> Self {
        Self::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum NodeRole {
    Peer,
    Server,
    Client,
}

impl NodeRole {
    pub fn name(self) -> &'static str {
        match self {
            NodeRole::Peer => "peer",
            NodeRole::Server => "server",
            NodeRole::Client => "client",
        }
    }
}

impl fmt::Display for NodeRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    PeerToPeer,
    ClientServer,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::PeerToPeer => "p2p",
            Mode::ClientServer => "cs",
        }
    }

    pub fn allows(self, role: NodeRole) -> bool {
        match self {
            Mode::PeerToPeer => role == NodeRole::Peer,
            Mode::ClientServer => role != NodeRole::Peer,
        }
    }

    /// Whether a link between these roles may ever be acquired.
    pub fn link_allowed(self, a: NodeRole, b: NodeRole) -> bool {
        match self {
            Mode::PeerToPeer => a == NodeRole::Peer && b == NodeRole::Peer,
            Mode::ClientServer => {
                !(a == NodeRole::Client && b == NodeRole::Client)
                    && a != NodeRole::Peer
                    && b != NodeRole::Peer
            }
        }
    }

    /// Whether a node of this role may sit in the interior of a path.
    pub fn can_relay(self, role: NodeRole) -> bool {
        match self {
            Mode::PeerToPeer => true,
            Mode::ClientServer => role == NodeRole::Server,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("node {0} already deployed")]
    DuplicateNode(NodeId),
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("role {role} not allowed in {mode} mode (node {id})")]
    RoleConflict { id: NodeId, role: NodeRole, mode: Mode },
    #[error("source and destination are both {0}")]
    SameNode(NodeId),
    #[error("no active link between {0} and {1}")]
    LinkInactive(NodeId, NodeId),
    #[error("no route from {0} to {1}")]
    NoRoute(NodeId, NodeId),
    #[error("relay path must have at least 3 nodes, got {0}")]
    PathTooShort(usize),
    #[error("key starvation on hop {a}-{b}: {available} of {needed} bits after {attempts} sessions")]
    KeyStarvation {
        a: NodeId,
        b: NodeId,
        available: u64,
        needed: u64,
        attempts: u32,
    },
    #[error("QKD session on hop {0}-{1} aborted: {2}")]
    QkdAborted(NodeId, NodeId, AbortReason),
    #[error("delivered plaintext does not match for send {0}")]
    PlaintextMismatch(u64),
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Qkd(#[from] QkdError),
    #[error(transparent)]
    Key(#[from] KeyError),
    #[error(transparent)]
    Otp(#[from] OtpError),
    #[error(transparent)]
    Bus(#[from] BusError),
}

impl NetError {
    /// Errors that indicate a broken internal invariant rather than an
    /// operational failure such as a missing route.
    pub fn is_invariant_violation(&self) -> bool {
        matches!(
            self,
            NetError::PlaintextMismatch(_)
                | NetError::Qkd(QkdError::KeyMismatch)
                | NetError::Key(_)
                | NetError::Otp(_)
        )
    }
}
