//! Parse a scenario file, run it and print the text report.
//!
//! cargo run --example run_scenario -- scenarios/p2p_five_nodes.scn

use soqn::scenario::{parse_scenario, run_scenario, RunFlags};
use soqn::SimTime;

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/p2p_five_nodes.scn").to_string());
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    let scenario = match parse_scenario(&text) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{path}:{e}");
            std::process::exit(2);
        }
    };
    let flags = RunFlags {
        snapshots: vec![SimTime::ZERO, scenario.end_time()],
        ..RunFlags::default()
    };
    let outcome = run_scenario(&scenario, &flags);
    print!("{}", outcome.report.render_text());
    std::process::exit(outcome.exit_code);
}
