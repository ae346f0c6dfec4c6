//! Ideal classical broadcast channel.
//!
//! Every deployed node receives each broadcast at the tick it was emitted.
//! Delivery is synchronous, so two broadcasts from one origin arrive
//! everywhere in emission order.

use std::collections::BTreeSet;

use thiserror::Error;

use super::{EventLog, LogKind, SimTime};
use crate::network::NodeId;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BusError {
    #[error("broadcast origin {0} is not deployed")]
    UndeployedOrigin(NodeId),
}

#[derive(Debug, Clone, Default)]
pub struct BroadcastBus {
    emitted: u64,
}

impl BroadcastBus {
    pub fn new() -> Self {
        Self::default()
    }

    /// Number of broadcasts emitted so far.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    /// Logs the broadcast and one receive record per other deployed node,
    /// returning the receivers in id order.
    pub fn broadcast(
        &mut self,
        now: SimTime,
        origin: &NodeId,
        payload: &str,
        deployed: &BTreeSet<NodeId>,
        log: &mut EventLog,
    ) -> Result<Vec<NodeId>, BusError> {
        if !deployed.contains(origin) {
            return Err(BusError::UndeployedOrigin(origin.clone()));
        }
        let msg = self.emitted;
        self.emitted += 1;
        log.push(now, LogKind::Broadcast, origin, format!("msg={msg} {payload}"));
        let receivers: Vec<NodeId> = deployed.iter().filter(|n| *n != origin).cloned().collect();
        for r in &receivers {
            log.push(now, LogKind::Receive, r, format!("msg={msg} from={origin}"));
        }
        Ok(receivers)
    }
}
