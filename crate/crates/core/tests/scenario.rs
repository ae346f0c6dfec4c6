use std::path::PathBuf;

use proptest::prelude::*;
use soqn::bits::BitString;
use soqn::geo::{geodesic_distance, line_of_sight};
use soqn::network::{feasibility_graph, NodeId, NodeRole, ParamValue};
use soqn::scenario::{parse_scenario, parse_scenario_bytes, run_scenario, Action, ErrorKind, NodeDecl, RunFlags, Scenario, TimedAction, EXIT_OK, EXIT_STRICT};
use soqn::{GeoPosition, Mode, SimTime};

fn load(name: &str) -> Scenario {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "scenarios", name].iter().collect();
    parse_scenario(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn two_peers_one_direct_send() {
    let s = parse_scenario(
        "mode p2p\nseed 1\nnode a peer 0 0 100\nnode b peer 0 0.1 100\nat 1 send a b hex:cafe\n",
    )
    .unwrap();
    let out = run_scenario(&s, &RunFlags::default());
    assert_eq!(out.exit_code, EXIT_OK);
    let d = &out.report.deliveries;
    assert_eq!(d.len(), 1);
    assert!(d[0].delivered);
    assert_eq!(d[0].path, vec![NodeId::new("a"), NodeId::new("b")]);
    assert_eq!(d[0].broadcasts, 0);
    assert!(out.report.render_text().contains("a>b (verified)"));
}

#[test]
fn strict_mode_flags_failed_send() {
    let s = parse_scenario("mode p2p\nnode a peer 0 0 0\nnode b peer 0 5 0\nat 1 send a b hex:01\n").unwrap();
    assert_eq!(run_scenario(&s, &RunFlags::default()).exit_code, EXIT_OK);
    let strict = RunFlags { strict: true, ..RunFlags::default() };
    let out = run_scenario(&s, &strict);
    assert_eq!(out.exit_code, EXIT_STRICT);
    assert!(out.report.render_tsv().contains("outcome=failed"));
}

#[test]
fn bundled_scenarios_run_as_documented() {
    let p2p = run_scenario(&load("p2p_five_nodes.scn"), &RunFlags::default());
    assert_eq!(p2p.exit_code, EXIT_OK);
    assert_eq!((p2p.report.summary.deliveries, p2p.report.summary.delivered), (5, 4));
    let eve = p2p.report.sessions.iter().find(|s| s.eve.name() != "none").unwrap();
    assert!(eve.record.aborted && eve.record.qber > 0.2);
    let last = p2p.report.deliveries.last().unwrap();
    assert!(!last.delivered && last.path.is_empty());

    let cs = run_scenario(&load("cs_backbone.scn"), &RunFlags::default());
    assert_eq!(cs.exit_code, EXIT_OK);
    assert_eq!((cs.report.summary.deliveries, cs.report.summary.delivered), (5, 4));
    assert!(cs.report.problems.is_empty());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let s = load("cs_backbone.scn");
    let flags = RunFlags { snapshots: vec![SimTime::new(3.0).unwrap()], ..RunFlags::default() };
    let a = run_scenario(&s, &flags);
    let b = run_scenario(&s, &flags);
    assert_eq!(a.log, b.log);
    assert_eq!(a.report.render_text(), b.report.render_text());
    assert_eq!(a.report.render_tsv(), b.report.render_tsv());
    let other = run_scenario(&s, &RunFlags { seed: Some(8), ..flags });
    assert_ne!(a.log, other.log);
}

#[test]
fn snapshot_tables_match_feasibility_oracle() {
    let s = load("p2p_five_nodes.scn");
    let times: Vec<SimTime> = [0.0, 6.5, 8.5].iter().map(|&t| SimTime::new(t).unwrap()).collect();
    let out = run_scenario(&s, &RunFlags { snapshots: times.clone(), ..RunFlags::default() });
    let snaps = &out.simulator.snapshots();
    assert_eq!(snaps.len(), times.len());
    for snap in snaps.iter() {
        assert!(snap.consistent, "inconsistent at {}", snap.time);
        assert_eq!(snap.table.link_set(), snap.active_links);
    }
    // Final state against the oracle computed from node positions.
    let net = out.simulator.network();
    let params = net.config().feasibility;
    let oracle = feasibility_graph(net.nodes(), net.mode(), &params);
    assert_eq!(net.active_links(), oracle);
    for key in &oracle {
        let (a, b) = (&net.nodes()[key.lo()].position, &net.nodes()[key.hi()].position);
        assert!(geodesic_distance(a, b) <= params.max_range_km && line_of_sight(a, b, &params));
    }
}

#[test]
fn parse_errors_carry_positions() {
    let e = parse_scenario("mode cs\nnode p1 peer 0 0 0\n").unwrap_err();
    assert_eq!((e.kind, e.line, e.column), (ErrorKind::Semantic, 2, 9));
    let e = parse_scenario("mode p2p\nnode a peer 0 0 0\nat 1 send a b hex:zz\n").unwrap_err();
    assert_eq!(e.kind, ErrorKind::Syntax);
    assert_eq!(e.line, 3);
    let e = parse_scenario("").unwrap_err();
    assert_eq!((e.kind, e.line, e.column), (ErrorKind::Semantic, 1, 1));
}

fn id_strategy() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9_.-]{0,6}"
}

fn position_strategy() -> impl Strategy<Value = GeoPosition> {
    (-90.0f64..=90.0, -180.0f64..180.0, 0.0f64..5000.0).prop_map(|(a, b, c)| GeoPosition::new(a, b, c).unwrap())
}

prop_compose! {
    fn scenario_strategy()(
        cs in any::<bool>(),
        seed in any::<u64>(),
        range in 1.0f64..500.0,
        raw_nodes in prop::collection::btree_map(id_strategy(), (any::<bool>(), position_strategy(), prop::option::of(0.0f64..50.0)), 2..8),
        raw_events in prop::collection::vec((0.0f64..100.0, 0u8..4, any::<prop::sample::Index>(), any::<prop::sample::Index>(), prop::collection::vec(any::<bool>(), 0..40), 1u64..10_000_000, position_strategy()), 0..12),
    ) -> Scenario {
        let mode = if cs { Mode::ClientServer } else { Mode::PeerToPeer };
        let mut s = Scenario::new(mode, seed);
        s.params.push(("max_range_km".into(), ParamValue::Number(range)));
        for (id, (server, position, deploy)) in raw_nodes {
            let role = match (mode, server) {
                (Mode::PeerToPeer, _) => NodeRole::Peer,
                (_, true) => NodeRole::Server,
                _ => NodeRole::Client,
            };
            s.nodes.push(NodeDecl { id: NodeId::new(id), role, position, deploy: deploy.map(|t| SimTime::new(t).unwrap()) });
        }
        let n = s.nodes.len();
        for (at, kind, i, j, bits, pulses, position) in raw_events {
            let a = i.index(n);
            let b = (a + 1 + j.index(n - 1)) % n;
            let (ida, idb) = (s.nodes[a].id.clone(), s.nodes[b].id.clone());
            // Hex text carries whole nibbles only.
            let bits = bits[..bits.len() / 4 * 4].to_vec();
            let action = match kind {
                0 => Action::Send { src: ida, dst: idb, message: BitString::from(bits) },
                1 => Action::Qkd { a: ida, b: idb, pulses },
                2 => Action::Move { id: ida, position },
                _ => Action::Eve { a: ida, b: idb, on: pulses % 2 == 0 },
            };
            s.events.push(TimedAction { at: SimTime::new(at).unwrap(), action });
        }
        s
    }
}

proptest! {
    #[test]
    fn parser_never_panics_on_bytes(bytes in prop::collection::vec(any::<u8>(), 0..300)) {
        let _ = parse_scenario_bytes(&bytes);
    }

    #[test]
    fn parser_never_panics_on_near_miss_text(
        lines in prop::collection::vec(
            prop::sample::select(vec![
                "mode p2p", "mode cs", "seed 7", "node a peer 0 0 0", "node s server 1 1 1 deploy=3",
                "node c client 0 0 0", "at 1 send a s hex:ff", "at -1 join c", "at 2 qkd a s pulses=0",
                "at 3 eve a s intercept_resend on", "param max_range_km nan", "at", "node", "\u{00e9}t\u{00e9}",
                "at 1 move a 100 0 0", "# only a comment", "param require_los true",
            ]),
            0..10,
        )
    ) {
        let text = lines.join("\n");
        if let Err(e) = parse_scenario(&text) {
            prop_assert!(e.line >= 1 && e.column >= 1);
            prop_assert!(e.line <= lines.len().max(1));
        }
    }

    #[test]
    fn display_then_parse_round_trips(s in scenario_strategy()) {
        let text = s.to_string();
        let back = parse_scenario(&text).map_err(|e| TestCaseError::fail(format!("{e}\n{text}")))?;
        prop_assert_eq!(back, s);
    }
}
