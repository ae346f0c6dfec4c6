//! Three peers on a line. The outer two are out of range of each other, so
//! a message between them is relayed by the middle node with an XOR
//! broadcast of its two hop keys.

use soqn::network::{audit_otp, check_invariants, Mode, Network, NetworkConfig, NodeRole, NodeSpec};
use soqn::{BitString, GeoPosition};

fn main() {
    let mut cfg = NetworkConfig::default();
    cfg.feasibility.max_range_km = 80.0;
    let mut net = Network::new(Mode::PeerToPeer, 2024, cfg);
    let peer = |id: &str, lon: f64| NodeSpec::new(id, NodeRole::Peer, GeoPosition::new(0.0, lon, 300.0).unwrap());
    net.organize_network(vec![peer("alice", 0.0), peer("bob", 0.5), peer("carol", 1.0)])
        .expect("fresh ids");

    println!("active links:");
    for link in net.links().values().filter(|l| l.is_active()) {
        println!("  {:<12} {:>7.2} km {:>6.2} dB", link.endpoints.to_string(), link.distance_km, link.loss_db);
    }

    let message = BitString::from_hex("cafe0123").unwrap();
    let rec = net
        .send_message(&"alice".into(), &"carol".into(), &message)
        .expect("relayed delivery");
    let path: Vec<&str> = rec.path.iter().map(|n| n.as_str()).collect();
    println!("path        {}", path.join(" > "));
    println!("message     {}", message.to_hex());
    println!("ciphertext  {}", rec.ciphertext.as_ref().unwrap().to_hex());
    println!("broadcasts  {}", rec.broadcasts);
    for (pair, bits) in &rec.consumed {
        println!("consumed    {bits} bits on {pair}");
    }
    for (pair, stats) in net.stats() {
        println!(
            "{:<12} sessions={} generated={} consumed={}",
            pair.to_string(),
            stats.sessions,
            stats.generated_bits,
            stats.consumed_bits
        );
    }
    let audit = audit_otp(net.log()).expect("clean audit");
    println!("audit: {} key bits consumed, each once", audit.total_consumed());
    assert!(check_invariants(&net).is_empty());
}
