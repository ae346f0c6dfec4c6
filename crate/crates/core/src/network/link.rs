use std::fmt;

use super::NodeId;
use crate::sim::SimTime;

/// Unordered node pair, stored with the smaller id first.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct LinkKey {
    lo: NodeId,
    hi: NodeId,
}

impl LinkKey {
    /// `None` when both ends are the same node.
    pub fn new(a: NodeId, b: NodeId) -> Option<Self> {
        match a.cmp(&b) {
            std::cmp::Ordering::Less => Some(Self { lo: a, hi: b }),
            std::cmp::Ordering::Greater => Some(Self { lo: b, hi: a }),
            std::cmp::Ordering::Equal => None,
        }
    }

    pub fn of(a: &NodeId, b: &NodeId) -> Option<Self> {
        Self::new(a.clone(), b.clone())
    }

    pub fn lo(&self) -> &NodeId {
        &self.lo
    }

    pub fn hi(&self) -> &NodeId {
        &self.hi
    }

    pub fn contains(&self, id: &NodeId) -> bool {
        &self.lo == id || &self.hi == id
    }

    /// The endpoint that is not `id`.
    pub fn other(&self, id: &NodeId) -> Option<&NodeId> {
        if &self.lo == id {
            Some(&self.hi)
        } else if &self.hi == id {
            Some(&self.lo)
        } else {
            None
        }
    }
}

impl fmt::Display for LinkKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}-{}", self.lo, self.hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LinkState {
    Acquiring,
    Active,
    TornDown,
}

impl LinkState {
    pub fn name(self) -> &'static str {
        match self {
            LinkState::Acquiring => "acquiring",
            LinkState::Active => "active",
            LinkState::TornDown => "torn_down",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OpticalLink {
    pub endpoints: LinkKey,
    pub distance_km: f64,
    pub loss_db: f64,
    pub acquired_at: SimTime,
    pub state: LinkState,
}

impl OpticalLink {
    /// An already acquired link. Panics if `a == b`.
    pub fn active(a: NodeId, b: NodeId, distance_km: f64, loss_db: f64, acquired_at: SimTime) -> Self {
        Self {
            endpoints: LinkKey::new(a, b).expect("link endpoints must differ"),
            distance_km,
            loss_db,
            acquired_at,
            state: LinkState::Active,
        }
    }

    pub fn is_active(&self) -> bool {
        self.state == LinkState::Active
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn key_is_unordered() {
        let ab = LinkKey::new("a".into(), "b".into()).unwrap();
        let ba = LinkKey::new("b".into(), "a".into()).unwrap();
        assert_eq!(ab, ba);
        assert_eq!(ab.to_string(), "a-b");
        assert_eq!(ab.other(&"a".into()), Some(&NodeId::new("b")));
        assert!(LinkKey::new("a".into(), "a".into()).is_none());
    }
}
