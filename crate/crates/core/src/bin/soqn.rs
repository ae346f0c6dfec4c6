use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use soqn::network::{NetworkConfig, ParamValue};
use soqn::scenario::{parse_scenario_bytes, run_scenario, write_outputs, RunFlags, Scenario, EXIT_PARSE};
use soqn::SimTime;

/// Run a self-organizing QKD network scenario.
#[derive(Debug, Parser)]
#[command(name = "soqn", version)]
struct Args {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Output directory for report.txt, report.tsv and events.log.
    #[arg(long, default_value = "soqn-out")]
    out: PathBuf,
    /// Stop after this simulation time in seconds.
    #[arg(long, value_parser = parse_time)]
    until: Option<SimTime>,
    /// Exit with status 3 if any send fails.
    #[arg(long)]
    strict: bool,
    /// Record routing tables at this time (repeatable).
    #[arg(long = "snapshot", value_parser = parse_time)]
    snapshots: Vec<SimTime>,
    /// Override the scenario seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Run once per value, in parallel, e.g. `max_range_km=50,100,144`.
    #[arg(long)]
    sweep: Option<String>,
}

fn parse_time(s: &str) -> Result<SimTime, String> {
    s.parse::<f64>()
        .ok()
        .and_then(SimTime::new)
        .ok_or_else(|| format!("expected a non-negative time in seconds, got {s:?}"))
}

fn parse_sweep(spec: &str) -> Result<(String, Vec<(String, ParamValue)>), String> {
    let (name, values) = spec
        .split_once('=')
        .ok_or_else(|| format!("--sweep expects name=v1,v2,..., got {spec:?}"))?;
    let mut out = Vec::new();
    for raw in values.split(',') {
        let v = ParamValue::parse(raw).ok_or_else(|| format!("bad sweep value {raw:?}"))?;
        NetworkConfig::default()
            .set(name, v)
            .map_err(|e| format!("--sweep: {e}"))?;
        out.push((raw.to_string(), v));
    }
    Ok((name.to_string(), out))
}

fn run_one(scenario: &Scenario, flags: &RunFlags, out: &Path) -> i32 {
    let outcome = run_scenario(scenario, flags);
    if let Err(e) = write_outputs(&outcome, out) {
        eprintln!("soqn: cannot write {}: {e}", out.display());
        return 1;
    }
    let s = &outcome.report.summary;
    println!(
        "{}: {} events, {} active links, {} sessions, {}/{} delivered, exit {}",
        out.display(),
        s.events,
        s.active_links,
        s.sessions,
        s.delivered,
        s.deliveries,
        outcome.exit_code
    );
    outcome.exit_code
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SOQN_LOG", "warn")).init();
    let args = Args::parse();

    let bytes = match std::fs::read(&args.scenario) {
        Ok(b) => b,
        Err(e) => {
            eprintln!("soqn: cannot read {}: {e}", args.scenario.display());
            return ExitCode::from(EXIT_PARSE as u8);
        }
    };
    let scenario = match parse_scenario_bytes(&bytes) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("{}:{e}", args.scenario.display());
            return ExitCode::from(EXIT_PARSE as u8);
        }
    };
    let flags = RunFlags {
        until: args.until,
        strict: args.strict,
        snapshots: args.snapshots.clone(),
        seed: args.seed,
    };

    let code = match &args.sweep {
        None => run_one(&scenario, &flags, &args.out),
        Some(spec) => {
            let (name, values) = match parse_sweep(spec) {
                Ok(v) => v,
                Err(e) => {
                    eprintln!("soqn: {e}");
                    return ExitCode::from(EXIT_PARSE as u8);
                }
            };
            std::thread::scope(|scope| {
                let handles: Vec<_> = values
                    .into_iter()
                    .map(|(raw, value)| {
                        let mut variant = scenario.clone();
                        variant.params.push((name.clone(), value));
                        let dir = args.out.join(format!("{name}={raw}"));
                        let flags = &flags;
                        scope.spawn(move || run_one(&variant, flags, &dir))
                    })
                    .collect();
                handles
                    .into_iter()
                    .map(|h| h.join().unwrap_or(1))
                    .max()
                    .unwrap_or(0)
            })
        }
    };
    ExitCode::from(code as u8)
}
