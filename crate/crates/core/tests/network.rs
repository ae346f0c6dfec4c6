use soqn::bits::BitString;
use soqn::network::{
    audit_otp, check_invariants, LinkKey, Mode, NetError, Network, NetworkConfig, NodeId, NodeRole, NodeSpec, ParamValue,
};
use soqn::sim::LogKind;
use soqn::GeoPosition;

fn pos(lat: f64, lon: f64, alt: f64) -> GeoPosition {
    GeoPosition::new(lat, lon, alt).unwrap()
}

fn id(s: &str) -> NodeId {
    NodeId::new(s)
}

/// a--b is short, b--c is long enough that small sessions starve.
fn chain(pulses: u64) -> Network {
    let mut cfg = NetworkConfig::default();
    cfg.feasibility.max_range_km = 72.0;
    cfg.session_pulses = pulses;
    let mut net = Network::new(Mode::PeerToPeer, 11, cfg);
    net.organize_network(vec![
        NodeSpec::new("a", NodeRole::Peer, pos(0.0, 0.0, 300.0)),
        NodeSpec::new("b", NodeRole::Peer, pos(0.0, 0.045, 300.0)),
        NodeSpec::new("c", NodeRole::Peer, pos(0.0, 0.675, 300.0)),
    ])
    .unwrap();
    net
}

#[test]
fn chain_topology_has_two_links() {
    let net = chain(200_000);
    let active: Vec<String> = net.active_links().iter().map(|k| k.to_string()).collect();
    assert_eq!(active, ["a-b", "b-c"]);
    assert_eq!(net.route(&id("a"), &id("c")).unwrap(), vec![id("a"), id("b"), id("c")]);
}

fn assert_nothing_consumed(net: &Network) {
    for buf in net.key_buffers() {
        assert_eq!(buf.consumed_offset(), 0, "{} consumed on {}", buf.holder(), buf.pair());
    }
    assert_eq!(net.log().of_kind(LogKind::KeyConsume).count(), 0);
    let rec = net.deliveries().last().unwrap();
    assert!(!rec.delivered && rec.consumed.is_empty());
    audit_otp(net.log()).unwrap();
    assert!(check_invariants(net).is_empty());
}

#[test]
fn aborted_hop_is_named_and_consumes_nothing() {
    let mut net = chain(200_000);
    let msg = BitString::from_hex("deadbeef").unwrap();
    let err = net.send_message(&id("a"), &id("c"), &msg).unwrap_err();
    match &err {
        NetError::QkdAborted(a, b, _) => assert_eq!((a.as_str(), b.as_str()), ("b", "c")),
        other => panic!("{other}"),
    }
    // The a-b hop was keyed before b-c failed, yet nothing was spent.
    assert!(net.available_key(&id("a"), &id("b")) > 0);
    assert_nothing_consumed(&net);
}

#[test]
fn starving_hop_is_named_and_consumes_nothing() {
    let mut net = chain(200_000);
    net.set_param("max_session_attempts", ParamValue::Number(1.0)).unwrap();
    // Far more than one short-range session yields.
    let msg = BitString::zeros(60_000);
    let err = net.send_message(&id("a"), &id("b"), &msg).unwrap_err();
    match &err {
        NetError::KeyStarvation { a, b, needed, attempts, available } => {
            assert_eq!((a.as_str(), b.as_str(), *needed, *attempts), ("a", "b", 60_000, 1));
            assert!(*available > 0 && *available < 60_000);
        }
        other => panic!("{other}"),
    }
    assert_nothing_consumed(&net);
}

#[test]
fn relayed_send_delivers_and_hides_plaintext() {
    let mut net = chain(1_000_000);
    let msg = BitString::from_hex("0123456789abcdef").unwrap();
    let rec = net.send_message(&id("a"), &id("c"), &msg).unwrap();
    assert!(rec.delivered);
    assert_eq!(rec.path, vec![id("a"), id("b"), id("c")]);
    assert_eq!(rec.broadcasts, 1);
    assert_eq!(rec.consumed.len(), 2);
    assert!(rec.consumed.iter().all(|(_, n)| *n == 64));

    // An eavesdropper holding the ciphertext and every public broadcast
    // still does not have the message.
    let ciphertext = rec.ciphertext.clone().unwrap();
    assert_ne!(ciphertext, msg);
    let blocks: Vec<BitString> = net
        .log()
        .of_kind(LogKind::Broadcast)
        .filter_map(|r| r.field("block"))
        .map(|h| BitString::from_hex(h).unwrap())
        .collect();
    assert_eq!(blocks.len(), 1);
    let mut eve_view = ciphertext.clone();
    for b in &blocks {
        eve_view = eve_view.xor(&BitString::from(b.as_slice()[..msg.len()].to_vec()));
    }
    assert_ne!(eve_view, msg);

    let audit = audit_otp(net.log()).unwrap();
    assert_eq!(audit.total_consumed(), 2 * 2 * 64);
    assert!(check_invariants(&net).is_empty());
}

#[test]
fn direct_key_grows_both_ends_equally() {
    let mut net = chain(200_000);
    let rec = net.generate_direct_key(&id("a"), &id("b"), 200_000).unwrap();
    assert!(!rec.aborted);
    let ab = net.key_buffer(&id("a"), &id("b")).unwrap();
    let ba = net.key_buffer(&id("b"), &id("a")).unwrap();
    assert_eq!(ab.total_bits(), rec.final_key.len() as u64);
    assert_eq!(ab.total_bits(), ba.total_bits());
    assert_eq!(net.available_key(&id("a"), &id("b")), ab.total_bits());
}

#[test]
fn key_generation_on_missing_link_fails() {
    let mut net = chain(200_000);
    let err = net.generate_direct_key(&id("a"), &id("c"), 1000).unwrap_err();
    assert!(matches!(err, NetError::LinkInactive(..)));
}

#[test]
fn identical_seeds_give_identical_histories() {
    let run = || {
        let mut net = chain(300_000);
        let msg = BitString::from_hex("c0ffee").unwrap();
        let _ = net.send_message(&id("a"), &id("b"), &msg);
        let _ = net.send_message(&id("c"), &id("a"), &msg);
        net.move_node(&id("b"), pos(0.01, 0.3, 300.0)).unwrap();
        let _ = net.send_message(&id("a"), &id("c"), &msg);
        (net.log().render(), net.deliveries().to_vec(), net.tables().clone())
    };
    assert_eq!(run(), run());
}

#[test]
fn moving_away_tears_links_down() {
    let mut net = chain(200_000);
    net.move_node(&id("c"), pos(10.0, 10.0, 300.0)).unwrap();
    let active: Vec<String> = net.active_links().iter().map(|k| k.to_string()).collect();
    assert_eq!(active, ["a-b"]);
    let bc = LinkKey::of(&id("b"), &id("c")).unwrap();
    assert!(!net.links()[&bc].is_active());
    for t in net.tables().values() {
        assert!(!t.contains(&id("b"), &id("c")));
    }
    assert!(matches!(net.route(&id("a"), &id("c")), Err(NetError::NoRoute(..))));
    assert!(check_invariants(&net).is_empty());
}

fn star() -> Network {
    let mut net = Network::new(Mode::ClientServer, 5, NetworkConfig::default());
    net.organize_network(vec![
        NodeSpec::new("s1", NodeRole::Server, pos(0.0, 0.0, 500.0)),
        NodeSpec::new("s2", NodeRole::Server, pos(0.0, 0.3, 500.0)),
        NodeSpec::new("c1", NodeRole::Client, pos(0.01, -0.02, 20.0)),
        NodeSpec::new("c2", NodeRole::Client, pos(0.0, 0.32, 20.0)),
        NodeSpec::new("c3", NodeRole::Client, pos(0.02, 0.0, 20.0)),
    ])
    .unwrap();
    net
}

#[test]
fn client_server_never_links_clients() {
    let net = star();
    for key in net.active_links() {
        let roles = [net.node(key.lo()).unwrap().role, net.node(key.hi()).unwrap().role];
        assert!(roles.contains(&NodeRole::Server), "{key}");
    }
    assert_eq!(net.coordinator(), Some(&id("s1")));
}

#[test]
fn client_traffic_relays_only_through_servers() {
    let mut net = star();
    let msg = BitString::from_hex("a5a5").unwrap();
    let rec = net.send_message(&id("c1"), &id("c3"), &msg).unwrap();
    assert!(rec.delivered);
    assert_eq!(rec.path.len(), 3);
    assert_eq!(net.node(&rec.path[1]).unwrap().role, NodeRole::Server);
    let rec = net.send_message(&id("c1"), &id("c2"), &msg).unwrap();
    assert!(rec.delivered);
    for hop in &rec.path[1..rec.path.len() - 1] {
        assert_eq!(net.node(hop).unwrap().role, NodeRole::Server);
    }
    audit_otp(net.log()).unwrap();
}

#[test]
fn roles_are_checked_against_mode() {
    let mut net = Network::new(Mode::PeerToPeer, 1, NetworkConfig::default());
    let err = net
        .organize_network(vec![NodeSpec::new("x", NodeRole::Client, pos(0.0, 0.0, 0.0))])
        .unwrap_err();
    assert!(matches!(err, NetError::RoleConflict { .. }));
    net.organize_network(vec![NodeSpec::new("x", NodeRole::Peer, pos(0.0, 0.0, 0.0))]).unwrap();
    let err = net.join_network(NodeSpec::new("x", NodeRole::Peer, pos(0.0, 0.0, 0.0))).unwrap_err();
    assert!(matches!(err, NetError::DuplicateNode(_)));
}
