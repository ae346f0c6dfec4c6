//! Plug-&-play between a server and a client, with and without a
//! Trojan-horse probe injected into the client terminal.

use soqn::channel::ChannelParams;
use soqn::network::OpticalLink;
use soqn::qkd::{run_plugplay_session, EveConfig, QkdConfig};
use soqn::sim::RandomStream;
use soqn::SimTime;

fn main() {
    let link = OpticalLink::active("server".into(), "client".into(), 0.0, 0.0, SimTime::ZERO);
    let channel = ChannelParams::ideal();
    let cfg = QkdConfig {
        mean_photon_number: 1.0,
        ..QkdConfig::default()
    };
    let strong = cfg.strong_pulse_intensity;
    let cases = [
        ("no probe", EveConfig::None),
        ("probe +20% of pulse", EveConfig::trojan(0.2 * strong).unwrap()),
        ("probe doubling the monitor", EveConfig::trojan(strong).unwrap()),
        ("intercept-resend", EveConfig::InterceptResend),
    ];
    for (i, (name, eve)) in cases.into_iter().enumerate() {
        let mut rng = RandomStream::new(3, format!("example/plugplay/{i}"));
        let rec = run_plugplay_session(&link, 10_000, &eve, &channel, &cfg, &mut rng).unwrap();
        println!(
            "{:<28} sifted={:>5} qber={:.4} final={:>5} {}",
            name,
            rec.sifted_len,
            rec.qber,
            rec.final_key.len(),
            if rec.aborted { rec.abort_reason.name() } else { "ok" }
        );
    }
}
