//! Simulator for self-organizing free-space QKD networks.
//!
//! Nodes at geographic positions acquire optical links when they are in
//! range and in line of sight, keep identical routing tables, generate
//! pairwise keys with BB84 or plug-&-play sessions, and move one-time-pad
//! encrypted messages over multi-hop trusted-relay paths.
//!
//! The main entry points are [`network::Network`] for direct control,
//! [`sim::Simulator`] for timed event playback and [`scenario`] for the
//! text scenario format used by the `soqn` binary.

pub mod bits;
pub mod channel;
pub mod geo;
pub mod network;
pub mod numfmt;
pub mod qkd;
pub mod scenario;
pub mod sim;

pub use bits::BitString;
pub use geo::GeoPosition;
pub use network::{Mode, Network, NetworkConfig, NodeId, NodeRole, NodeSpec};
pub use sim::{SimTime, Simulator};
