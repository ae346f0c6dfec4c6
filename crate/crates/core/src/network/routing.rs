//! Per-node routing tables and deterministic path selection.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap};

use thiserror::Error;

use super::{LinkKey, NodeId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RouteError {
    #[error("source and destination are both {0}")]
    SameNode(NodeId),
    #[error("no route from {0} to {1}")]
    NoRoute(NodeId, NodeId),
}

/// One node's view of every valid optical link, keyed by unordered pair,
/// with the link distance in km used for tie-breaking.
#[derive(Debug, Clone, PartialEq)]
pub struct RoutingTable {
    owner: NodeId,
    links: BTreeMap<LinkKey, f64>,
    version: u64,
}

impl RoutingTable {
    pub fn new(owner: NodeId) -> Self {
        Self {
            owner,
            links: BTreeMap::new(),
            version: 0,
        }
    }

    pub fn owner(&self) -> &NodeId {
        &self.owner
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn len(&self) -> usize {
        self.links.len()
    }

    pub fn is_empty(&self) -> bool {
        self.links.is_empty()
    }

    pub fn insert(&mut self, key: LinkKey, distance_km: f64) {
        self.links.insert(key, distance_km);
    }

    pub fn remove(&mut self, key: &LinkKey) -> bool {
        self.links.remove(key).is_some()
    }

    pub fn contains(&self, a: &NodeId, b: &NodeId) -> bool {
        LinkKey::of(a, b).is_some_and(|k| self.links.contains_key(&k))
    }

    pub fn links(&self) -> impl Iterator<Item = (&LinkKey, f64)> {
        self.links.iter().map(|(k, d)| (k, *d))
    }

    pub fn link_set(&self) -> BTreeSet<LinkKey> {
        self.links.keys().cloned().collect()
    }

    /// Replace contents with another table's links and version.
    pub fn sync_from(&mut self, other: &RoutingTable) {
        self.links = other.links.clone();
        self.version = other.version;
    }

    pub fn bump_version(&mut self) {
        self.version += 1;
    }

    /// Same link set and distances, ignoring owner and version.
    pub fn same_links(&self, other: &RoutingTable) -> bool {
        self.links == other.links
    }

    fn adjacency(&self) -> BTreeMap<&NodeId, Vec<(&NodeId, f64)>> {
        let mut adj: BTreeMap<&NodeId, Vec<(&NodeId, f64)>> = BTreeMap::new();
        for (k, &d) in &self.links {
            adj.entry(k.lo()).or_default().push((k.hi(), d));
            adj.entry(k.hi()).or_default().push((k.lo(), d));
        }
        adj
    }
}

/// Shortest path over every link in the table.
pub fn find_path(table: &RoutingTable, src: &NodeId, dst: &NodeId) -> Result<Vec<NodeId>, RouteError> {
    find_path_with(table, src, dst, |_| true)
}

/// Minimum hop count, then minimum total distance, then the
/// lexicographically smallest node sequence. Only nodes accepted by
/// `can_relay` may appear strictly inside the path.
pub fn find_path_with(
    table: &RoutingTable,
    src: &NodeId,
    dst: &NodeId,
    can_relay: impl Fn(&NodeId) -> bool,
) -> Result<Vec<NodeId>, RouteError> {
    if src == dst {
        return Err(RouteError::SameNode(src.clone()));
    }
    if table.contains(src, dst) {
        return Ok(vec![src.clone(), dst.clone()]);
    }
    let adj = table.adjacency();
    let mut best: BTreeMap<&NodeId, Label> = BTreeMap::new();
    let mut heap = BinaryHeap::new();
    let start = Label {
        hops: 0,
        dist: 0.0,
        path: vec![src.clone()],
    };
    best.insert(src, start.clone());
    heap.push(Reverse(start));

    while let Some(Reverse(label)) = heap.pop() {
        let here = label.path.last().unwrap();
        if here == dst {
            return Ok(label.path);
        }
        if best.get(here).is_some_and(|b| b < &label) {
            continue;
        }
        if here != src && !can_relay(here) {
            continue;
        }
        for &(next, d) in adj.get(here).map(Vec::as_slice).unwrap_or(&[]) {
            if label.path.contains(next) {
                continue;
            }
            let mut path = label.path.clone();
            path.push(next.clone());
            let cand = Label {
                hops: label.hops + 1,
                dist: label.dist + d,
                path,
            };
            if best.get(next).is_none_or(|b| cand < *b) {
                best.insert(next, cand.clone());
                heap.push(Reverse(cand));
            }
        }
    }
    Err(RouteError::NoRoute(src.clone(), dst.clone()))
}

#[derive(Debug, Clone)]
struct Label {
    hops: usize,
    dist: f64,
    path: Vec<NodeId>,
}

impl PartialEq for Label {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Label {}

impl PartialOrd for Label {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Label {
    fn cmp(&self, other: &Self) -> Ordering {
        self.hops
            .cmp(&other.hops)
            .then(self.dist.total_cmp(&other.dist))
            .then_with(|| self.path.cmp(&other.path))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(links: &[(&str, &str, f64)]) -> RoutingTable {
        let mut t = RoutingTable::new("x".into());
        for &(a, b, d) in links {
            t.insert(LinkKey::new(a.into(), b.into()).unwrap(), d);
        }
        t
    }

    fn ids(p: &[&str]) -> Vec<NodeId> {
        p.iter().map(|&s| s.into()).collect()
    }

    #[test]
    fn direct_link_wins() {
        let t = table(&[("a", "b", 100.0), ("a", "r", 1.0), ("r", "b", 1.0)]);
        assert_eq!(find_path(&t, &"a".into(), &"b".into()).unwrap(), ids(&["a", "b"]));
    }

    #[test]
    fn single_relay() {
        let t = table(&[("a", "r", 10.0), ("r", "b", 10.0)]);
        assert_eq!(find_path(&t, &"a".into(), &"b".into()).unwrap(), ids(&["a", "r", "b"]));
    }

    #[test]
    fn disconnected() {
        let t = table(&[("a", "r", 10.0), ("b", "c", 10.0)]);
        assert_eq!(
            find_path(&t, &"a".into(), &"b".into()),
            Err(RouteError::NoRoute("a".into(), "b".into()))
        );
    }

    #[test]
    fn fewer_hops_beat_shorter_distance() {
        let t = table(&[
            ("a", "r", 50.0),
            ("r", "b", 50.0),
            ("a", "x", 1.0),
            ("x", "y", 1.0),
            ("y", "b", 1.0),
        ]);
        assert_eq!(find_path(&t, &"a".into(), &"b".into()).unwrap(), ids(&["a", "r", "b"]));
    }

    #[test]
    fn distance_then_lexicographic_tiebreak() {
        let t = table(&[("a", "q", 5.0), ("q", "b", 5.0), ("a", "p", 6.0), ("p", "b", 5.0)]);
        assert_eq!(find_path(&t, &"a".into(), &"b".into()).unwrap(), ids(&["a", "q", "b"]));
        let t = table(&[("a", "q", 5.0), ("q", "b", 5.0), ("a", "p", 5.0), ("p", "b", 5.0)]);
        assert_eq!(find_path(&t, &"a".into(), &"b".into()).unwrap(), ids(&["a", "p", "b"]));
    }

    #[test]
    fn relay_filter_excludes_interior_nodes() {
        let t = table(&[("c1", "c2", 1.0), ("c2", "s", 1.0), ("c1", "s2", 1.0), ("s2", "s", 1.0)]);
        // c1 -> c2 -> s is shorter but c2 may not relay.
        let p = find_path_with(&t, &"c1".into(), &"s".into(), |n| n.as_str().starts_with('s')).unwrap();
        assert_eq!(p, ids(&["c1", "s2", "s"]));
    }

    #[test]
    fn same_node_rejected() {
        let t = table(&[]);
        assert!(matches!(find_path(&t, &"a".into(), &"a".into()), Err(RouteError::SameNode(_))));
    }
}
