use std::fs;
use std::io;
use std::path::Path;

use super::{Report, Scenario};
use crate::network::NetworkConfig;
use crate::sim::{SimTime, Simulator};

pub const EXIT_OK: i32 = 0;
pub const EXIT_PARSE: i32 = 2;
pub const EXIT_STRICT: i32 = 3;
pub const EXIT_INVARIANT: i32 = 4;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunFlags {
    /// Stop after this time instead of the last scenario event.
    pub until: Option<SimTime>,
    /// Treat any failed send as a run failure.
    pub strict: bool,
    pub snapshots: Vec<SimTime>,
    /// Overrides the scenario's seed.
    pub seed: Option<u64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: Report,
    /// Rendered event log.
    pub log: String,
    pub exit_code: i32,
    pub simulator: Simulator,
}

pub fn run_scenario(scenario: &Scenario, flags: &RunFlags) -> RunOutcome {
    let seed = flags.seed.unwrap_or(scenario.seed);
    let mut sim = Simulator::new(scenario.mode, seed, NetworkConfig::default());
    for ev in scenario.to_events() {
        sim.schedule(ev).expect("nothing has run yet");
    }
    for &t in &flags.snapshots {
        sim.snapshot_at(t);
    }
    let until = flags.until.unwrap_or_else(|| {
        let last_snapshot = flags.snapshots.iter().copied().max().unwrap_or(SimTime::ZERO);
        scenario.end_time().max(last_snapshot)
    });
    let summary = sim.run_until(until);
    let problems = sim.check_invariants();

    let exit_code = if summary.invariant_violations > 0 || !problems.is_empty() {
        EXIT_INVARIANT
    } else if flags.strict && summary.delivered < summary.deliveries {
        EXIT_STRICT
    } else {
        EXIT_OK
    };
    log::info!(
        "run finished: {} events, {} links, {} sessions, {}/{} delivered, exit {exit_code}",
        summary.events,
        summary.active_links,
        summary.sessions,
        summary.delivered,
        summary.deliveries
    );
    let report = Report::from_simulator(&sim, until, problems, exit_code);
    RunOutcome {
        report,
        log: sim.network().log().render(),
        exit_code,
        simulator: sim,
    }
}

/// Write `report.txt`, `report.tsv` and `events.log` into `dir`.
pub fn write_outputs(outcome: &RunOutcome, dir: &Path) -> io::Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("report.txt"), outcome.report.render_text())?;
    fs::write(dir.join("report.tsv"), outcome.report.render_tsv())?;
    fs::write(dir.join("events.log"), &outcome.log)?;
    Ok(())
}
