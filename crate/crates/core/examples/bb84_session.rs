//! One honest BB84 session over a free-space link of a given length.
//!
//! cargo run --release --example bb84_session -- [distance_km] [pulses]

use std::time::Instant;

use soqn::channel::{path_loss_db, ChannelParams};
use soqn::network::OpticalLink;
use soqn::qkd::{run_bb84_session, EveConfig, QkdConfig};
use soqn::sim::RandomStream;
use soqn::SimTime;

fn main() {
    let mut args = std::env::args().skip(1);
    let distance_km: f64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(20.0);
    let pulses: u64 = args.next().and_then(|a| a.parse().ok()).unwrap_or(1_000_000);

    let channel = ChannelParams::default();
    let loss = path_loss_db(distance_km, &channel);
    let link = OpticalLink::active("alice".into(), "bob".into(), distance_km, loss, SimTime::ZERO);
    let mut rng = RandomStream::new(1, "example/bb84");

    let started = Instant::now();
    let rec = run_bb84_session(&link, pulses, &EveConfig::None, &channel, &QkdConfig::default(), &mut rng)
        .expect("valid configuration");
    let elapsed = started.elapsed();

    println!("distance      {distance_km} km, loss {loss:.2} dB, eta {:.3e}", channel.eta_total(loss));
    println!("pulses        {}", rec.n_pulses);
    println!("detections    {}", rec.detections);
    println!("sifted        {}", rec.sifted_len);
    println!("qber sample   {} bits, qber {:.4}", rec.qber_sample_len, rec.qber);
    println!("leak          {} bits", rec.reconciliation_leak_bits);
    println!("final key     {} bits", rec.final_key.len());
    println!("outcome       {}", if rec.aborted { rec.abort_reason.name() } else { "ok" });
    println!("digest        {}", rec.transcript_digest);
    println!("elapsed       {elapsed:.2?}");
}
