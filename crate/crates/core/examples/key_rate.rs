//! Final key length after reconciliation and privacy amplification as a
//! function of QBER, for a fixed 10^4-bit sifted key.

use soqn::qkd::{binary_entropy, final_key_length, QkdConfig};

fn main() {
    let cfg = QkdConfig::default();
    let n = 10_000usize;
    println!("{:>6} {:>8} {:>8} {:>8}", "qber", "h2", "leak", "final");
    for step in 0..=12 {
        let q = step as f64 / 100.0;
        let h = binary_entropy(q);
        let leak = (cfg.f_ec * h * n as f64).ceil() as u64;
        let m = if q > cfg.qber_abort { 0 } else { final_key_length(n, q, leak, &cfg) };
        println!("{q:>6.2} {h:>8.4} {leak:>8} {m:>8}");
    }
}
