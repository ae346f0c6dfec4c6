//! An intercept-resend eavesdropper pushes the QBER to about 25% and the
//! session aborts; the same link without Eve yields key.

use soqn::channel::ChannelParams;
use soqn::network::OpticalLink;
use soqn::qkd::{run_bb84_session, EveConfig, QkdConfig};
use soqn::sim::RandomStream;
use soqn::SimTime;

fn main() {
    let link = OpticalLink::active("alice".into(), "bob".into(), 0.0, 0.0, SimTime::ZERO);
    let channel = ChannelParams::ideal();
    let cfg = QkdConfig::default();
    for eve in [EveConfig::None, EveConfig::InterceptResend] {
        let mut rng = RandomStream::new(7, format!("example/{}", eve.name()));
        let rec = run_bb84_session(&link, 200_000, &eve, &channel, &cfg, &mut rng).unwrap();
        let n = rec.qber_sample_len as f64;
        println!(
            "eve={:<17} sifted={:>6} sample={:>6} qber={:.4} (3 sigma around 0.25: {:.4}) final={:>6} {}",
            eve.name(),
            rec.sifted_len,
            rec.qber_sample_len,
            rec.qber,
            3.0 * (0.25 * 0.75 / n).sqrt(),
            rec.final_key.len(),
            if rec.aborted { rec.abort_reason.name() } else { "ok" }
        );
    }
}
