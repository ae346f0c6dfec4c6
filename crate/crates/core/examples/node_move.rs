//! Timed playback with the event engine: a relay node moves away, its
//! links are torn down and re-acquired, and routing adapts.

use soqn::network::{Mode, NetworkConfig, NodeRole, NodeSpec};
use soqn::sim::{EventKind, ScenarioEvent, SimTime, Simulator};
use soqn::{BitString, GeoPosition};

fn at(t: f64) -> SimTime {
    SimTime::new(t).unwrap()
}

fn main() {
    let mut cfg = NetworkConfig::default();
    cfg.feasibility.max_range_km = 80.0;
    let mut sim = Simulator::new(Mode::PeerToPeer, 5, cfg);
    let pos = |lat: f64, lon: f64| GeoPosition::new(lat, lon, 300.0).unwrap();
    let peer = |id: &str, lat, lon| NodeSpec::new(id, NodeRole::Peer, pos(lat, lon));
    let msg = BitString::from_hex("abcd").unwrap();
    let send = |t| ScenarioEvent::new(at(t), EventKind::Send { src: "a".into(), dst: "c".into(), message: msg.clone() });

    let events = vec![
        ScenarioEvent::new(
            at(0.0),
            EventKind::Deploy { nodes: vec![peer("a", 0.0, 0.0), peer("b", 0.0, 0.5), peer("c", 0.0, 1.0), peer("d", 0.4, 0.5)] },
        ),
        send(1.0),
        ScenarioEvent::new(at(2.0), EventKind::Move { id: "b".into(), position: pos(-1.0, 0.5) }),
        send(3.0),
        ScenarioEvent::new(at(4.0), EventKind::Move { id: "d".into(), position: pos(1.5, 0.5) }),
        send(5.0),
    ];
    for ev in events {
        sim.schedule(ev).unwrap();
    }
    for t in [1.5, 3.5, 5.5] {
        sim.snapshot_at(at(t));
    }
    let summary = sim.run_until(at(6.0));
    println!("{summary:?}");
    for snap in sim.snapshots() {
        let links: Vec<String> = snap.table.links().map(|(k, _)| k.to_string()).collect();
        println!("t={} version={} links=[{}]", snap.time, snap.table.version(), links.join(" "));
    }
    for d in sim.network().deliveries() {
        let path: Vec<&str> = d.path.iter().map(|n| n.as_str()).collect();
        match &d.error {
            None => println!("send {} at t={}: {}", d.id, d.time, path.join(" > ")),
            Some(e) => println!("send {} at t={}: failed: {e}", d.id, d.time),
        }
    }
    assert!(sim.check_invariants().is_empty());
}
