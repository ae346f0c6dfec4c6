//! A two-server backbone with three clients. Clients never link to each
//! other, so even neighbouring clients talk through a server.

use soqn::network::{Mode, Network, NetworkConfig, NodeRole, NodeSpec};
use soqn::{BitString, GeoPosition};

fn main() {
    let mut cfg = NetworkConfig::default();
    cfg.feasibility.max_range_km = 80.0;
    let mut net = Network::new(Mode::ClientServer, 11, cfg);
    let node = |id: &str, role, lat: f64, lon: f64, alt: f64| {
        NodeSpec::new(id, role, GeoPosition::new(lat, lon, alt).unwrap())
    };
    net.organize_network(vec![
        node("s1", NodeRole::Server, 0.0, 0.0, 500.0),
        node("s2", NodeRole::Server, 0.0, 0.5, 500.0),
    ])
    .unwrap();
    println!("backbone links: {}", net.active_links().len());

    for c in [
        node("c1", NodeRole::Client, 0.05, 0.0, 100.0),
        node("c2", NodeRole::Client, 0.05, 0.5, 100.0),
        node("c3", NodeRole::Client, 0.06, 0.01, 100.0),
    ] {
        net.join_network(c).unwrap();
    }
    println!("links after clients joined:");
    for key in net.active_links() {
        println!("  {key}");
    }

    let msg = BitString::from_hex("5eed").unwrap();
    for (src, dst) in [("c1", "c2"), ("c1", "c3")] {
        match net.send_message(&src.into(), &dst.into(), &msg) {
            Ok(rec) => {
                let path: Vec<&str> = rec.path.iter().map(|n| n.as_str()).collect();
                println!("{src} -> {dst}: {}", path.join(" > "));
            }
            Err(e) => println!("{src} -> {dst}: failed: {e}"),
        }
    }
    for s in net.sessions() {
        println!(
            "session {:<16} {} sifted={} qber={:.4} final={}",
            s.label,
            s.record.protocol.name(),
            s.record.sifted_len,
            s.record.qber,
            s.record.final_key.len()
        );
    }
}
