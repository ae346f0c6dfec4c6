use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use super::{Action, NodeDecl, Scenario, TimedAction};
use crate::bits::BitString;
use crate::geo::GeoPosition;
use crate::network::{Mode, NetworkConfig, NodeId, NodeRole, ParamValue, PARAM_NAMES};
use crate::sim::SimTime;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    Semantic,
}

/// Diagnostic with a 1-based line and column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScenarioError {
    pub kind: ErrorKind,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for ScenarioError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ErrorKind::Syntax => "syntax error",
            ErrorKind::Semantic => "semantic error",
        };
        write!(f, "{}:{}: {kind}: {}", self.line, self.column, self.message)
    }
}

impl std::error::Error for ScenarioError {}

#[derive(Debug, Clone, Copy)]
struct Tok<'a> {
    text: &'a str,
    col: usize,
}

fn tokenize(line: &str) -> Vec<Tok<'_>> {
    let line = match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    };
    let mut out = Vec::new();
    let mut start: Option<(usize, usize)> = None;
    for (col, (i, c)) in line.char_indices().enumerate() {
        if c.is_whitespace() {
            if let Some((s, sc)) = start.take() {
                out.push(Tok { text: &line[s..i], col: sc + 1 });
            }
        } else if start.is_none() {
            start = Some((i, col));
        }
    }
    if let Some((s, sc)) = start {
        out.push(Tok { text: &line[s..], col: sc + 1 });
    }
    out
}

/// Parse raw bytes; invalid UTF-8 is reported at the offending position.
pub fn parse_scenario_bytes(bytes: &[u8]) -> Result<Scenario, ScenarioError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse_scenario(text),
        Err(e) => {
            let good = &bytes[..e.valid_up_to()];
            let line = good.iter().filter(|&&b| b == b'\n').count() + 1;
            let line_start = good.iter().rposition(|&b| b == b'\n').map_or(0, |p| p + 1);
            let column = std::str::from_utf8(&good[line_start..]).map_or(1, |s| s.chars().count() + 1);
            Err(ScenarioError {
                kind: ErrorKind::Syntax,
                line,
                column,
                message: "invalid UTF-8".into(),
            })
        }
    }
}

pub fn parse_scenario(text: &str) -> Result<Scenario, ScenarioError> {
    let mut p = Parser::default();
    for (i, line) in text.lines().enumerate() {
        p.line = i + 1;
        p.line_len = line.chars().count();
        let toks = tokenize(line);
        if toks.is_empty() {
            continue;
        }
        p.directive(&toks)?;
    }
    p.finish()
}

#[derive(Default)]
struct Parser {
    line: usize,
    line_len: usize,
    mode: Option<(Mode, usize)>,
    seed: Option<u64>,
    params: Vec<(String, ParamValue)>,
    config: NetworkConfig,
    nodes: Vec<NodeDecl>,
    /// Line and role column of each node, parallel to `nodes`.
    node_lines: Vec<(usize, usize)>,
    events: Vec<TimedAction>,
    /// Every node id an event mentions, with its location.
    refs: Vec<(usize, usize, NodeId)>,
    joins: Vec<(usize, usize, NodeId)>,
}

impl Parser {
    fn syntax(&self, col: usize, msg: impl Into<String>) -> ScenarioError {
        ScenarioError {
            kind: ErrorKind::Syntax,
            line: self.line,
            column: col,
            message: msg.into(),
        }
    }

    fn semantic_at(line: usize, col: usize, msg: impl Into<String>) -> ScenarioError {
        ScenarioError {
            kind: ErrorKind::Semantic,
            line,
            column: col,
            message: msg.into(),
        }
    }

    fn semantic(&self, col: usize, msg: impl Into<String>) -> ScenarioError {
        Self::semantic_at(self.line, col, msg)
    }

    fn end_col(&self) -> usize {
        self.line_len + 1
    }

    /// Between `min` and `max` arguments after the directive keyword.
    fn arity<'a>(&self, args: &[Tok<'a>], min: usize, max: usize, usage: &str) -> Result<(), ScenarioError> {
        if args.len() < min {
            return Err(self.syntax(self.end_col(), format!("missing arguments, expected `{usage}`")));
        }
        if args.len() > max {
            return Err(self.syntax(args[max].col, format!("unexpected token {:?}, expected `{usage}`", args[max].text)));
        }
        Ok(())
    }

    fn directive(&mut self, toks: &[Tok<'_>]) -> Result<(), ScenarioError> {
        let (head, args) = (toks[0], &toks[1..]);
        match head.text {
            "mode" => {
                self.arity(args, 1, 1, "mode p2p|cs")?;
                let mode = match args[0].text {
                    "p2p" => Mode::PeerToPeer,
                    "cs" => Mode::ClientServer,
                    other => return Err(self.syntax(args[0].col, format!("unknown mode {other:?}, expected p2p or cs"))),
                };
                if self.mode.is_some() {
                    return Err(self.semantic(head.col, "mode given twice"));
                }
                self.mode = Some((mode, self.line));
            }
            "seed" => {
                self.arity(args, 1, 1, "seed <u64>")?;
                let seed = args[0]
                    .text
                    .parse::<u64>()
                    .map_err(|_| self.syntax(args[0].col, format!("bad seed {:?}", args[0].text)))?;
                if self.seed.is_some() {
                    return Err(self.semantic(head.col, "seed given twice"));
                }
                self.seed = Some(seed);
            }
            "param" => {
                self.arity(args, 2, 2, "param <name> <value>")?;
                let name = args[0].text;
                if !PARAM_NAMES.contains(&name) {
                    return Err(self.semantic(args[0].col, format!("unknown parameter {name:?}")));
                }
                let value = ParamValue::parse(args[1].text)
                    .ok_or_else(|| self.syntax(args[1].col, format!("bad parameter value {:?}", args[1].text)))?;
                self.config
                    .set(name, value)
                    .map_err(|e| self.semantic(args[1].col, e.to_string()))?;
                self.params.push((name.to_string(), value));
            }
            "node" => self.node(args)?,
            "at" => self.event(args)?,
            other => return Err(self.syntax(head.col, format!("unknown directive {other:?}"))),
        }
        Ok(())
    }

    fn id(&self, tok: Tok<'_>) -> Result<NodeId, ScenarioError> {
        let t = tok.text;
        let ok = t.chars().next().is_some_and(|c| c.is_ascii_alphanumeric())
            && t.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-'));
        if ok {
            Ok(NodeId::new(t))
        } else {
            Err(self.syntax(tok.col, format!("bad node id {t:?}")))
        }
    }

    fn number(&self, tok: Tok<'_>, what: &str) -> Result<f64, ScenarioError> {
        tok.text
            .parse::<f64>()
            .ok()
            .filter(|v| v.is_finite())
            .ok_or_else(|| self.syntax(tok.col, format!("bad {what} {:?}", tok.text)))
    }

    fn time(&self, tok: Tok<'_>) -> Result<SimTime, ScenarioError> {
        let t = self.number(tok, "time")?;
        SimTime::new(t).ok_or_else(|| self.semantic(tok.col, format!("time {t} is negative")))
    }

    fn position(&self, toks: &[Tok<'_>]) -> Result<GeoPosition, ScenarioError> {
        let lat = self.number(toks[0], "latitude")?;
        let lon = self.number(toks[1], "longitude")?;
        let alt = self.number(toks[2], "altitude")?;
        GeoPosition::new(lat, lon, alt).map_err(|e| {
            let col = match e {
                crate::geo::GeoError::Latitude(_) => toks[0].col,
                crate::geo::GeoError::Longitude(_) => toks[1].col,
                _ => toks[2].col,
            };
            self.semantic(col, e.to_string())
        })
    }

    fn node(&mut self, args: &[Tok<'_>]) -> Result<(), ScenarioError> {
        let usage = "node <id> peer|server|client <lat> <lon> <alt> [deploy=<t>]";
        self.arity(args, 5, 6, usage)?;
        let id = self.id(args[0])?;
        let role = match args[1].text {
            "peer" => NodeRole::Peer,
            "server" => NodeRole::Server,
            "client" => NodeRole::Client,
            other => return Err(self.syntax(args[1].col, format!("unknown role {other:?}"))),
        };
        let position = self.position(&args[2..5])?;
        let deploy = match args.get(5) {
            Some(tok) => {
                let value = tok
                    .text
                    .strip_prefix("deploy=")
                    .ok_or_else(|| self.syntax(tok.col, format!("unexpected token {:?}, expected deploy=<t>", tok.text)))?;
                let col = tok.col + "deploy=".len();
                Some(self.time(Tok { text: value, col })?)
            }
            None => None,
        };
        if self.nodes.iter().any(|n| n.id == id) {
            return Err(self.semantic(args[0].col, format!("node {id} declared twice")));
        }
        self.nodes.push(NodeDecl { id, role, position, deploy });
        self.node_lines.push((self.line, args[1].col));
        Ok(())
    }

    fn refer(&mut self, tok: Tok<'_>) -> Result<NodeId, ScenarioError> {
        let id = self.id(tok)?;
        self.refs.push((self.line, tok.col, id.clone()));
        Ok(id)
    }

    fn pair(&mut self, a: Tok<'_>, b: Tok<'_>) -> Result<(NodeId, NodeId), ScenarioError> {
        let ia = self.refer(a)?;
        let ib = self.refer(b)?;
        if ia == ib {
            return Err(self.semantic(b.col, format!("both ends are {ia}")));
        }
        Ok((ia, ib))
    }

    fn event(&mut self, args: &[Tok<'_>]) -> Result<(), ScenarioError> {
        if args.is_empty() {
            return Err(self.syntax(self.end_col(), "missing time after `at`"));
        }
        let at = self.time(args[0])?;
        let Some(&kind) = args.get(1) else {
            return Err(self.syntax(self.end_col(), "missing event kind"));
        };
        let rest = &args[2..];
        let action = match kind.text {
            "join" => {
                self.arity(rest, 1, 1, "at <t> join <id>")?;
                let id = self.refer(rest[0])?;
                self.joins.push((self.line, rest[0].col, id.clone()));
                Action::Join { id }
            }
            "move" => {
                self.arity(rest, 4, 4, "at <t> move <id> <lat> <lon> <alt>")?;
                let id = self.refer(rest[0])?;
                let position = self.position(&rest[1..4])?;
                Action::Move { id, position }
            }
            "qkd" => {
                self.arity(rest, 3, 3, "at <t> qkd <a> <b> pulses=<n>")?;
                let (a, b) = self.pair(rest[0], rest[1])?;
                let pulses = rest[2]
                    .text
                    .strip_prefix("pulses=")
                    .and_then(|v| v.parse::<u64>().ok())
                    .ok_or_else(|| self.syntax(rest[2].col, format!("expected pulses=<n>, got {:?}", rest[2].text)))?;
                if pulses == 0 {
                    return Err(self.semantic(rest[2].col, "pulses must be positive"));
                }
                Action::Qkd { a, b, pulses }
            }
            "send" => {
                self.arity(rest, 3, 3, "at <t> send <src> <dst> hex:<hex>")?;
                let (src, dst) = self.pair(rest[0], rest[1])?;
                let tok = rest[2];
                let hex = tok
                    .text
                    .strip_prefix("hex:")
                    .ok_or_else(|| self.syntax(tok.col, format!("expected hex:<digits>, got {:?}", tok.text)))?;
                let message = BitString::from_hex(hex).map_err(|e| {
                    let crate::bits::HexError::InvalidDigit { offset, .. } = e;
                    self.syntax(tok.col + "hex:".len() + offset, e.to_string())
                })?;
                Action::Send { src, dst, message }
            }
            "eve" => {
                self.arity(rest, 4, 4, "at <t> eve <a> <b> intercept_resend on|off")?;
                let (a, b) = self.pair(rest[0], rest[1])?;
                if rest[2].text != "intercept_resend" {
                    return Err(self.syntax(rest[2].col, format!("unknown attack {:?}", rest[2].text)));
                }
                let on = match rest[3].text {
                    "on" => true,
                    "off" => false,
                    other => return Err(self.syntax(rest[3].col, format!("expected on or off, got {other:?}"))),
                };
                Action::Eve { a, b, on }
            }
            other => return Err(self.syntax(kind.col, format!("unknown event {other:?}"))),
        };
        self.events.push(TimedAction { at, action });
        Ok(())
    }

    fn finish(self) -> Result<Scenario, ScenarioError> {
        let Some((mode, _)) = self.mode else {
            return Err(Self::semantic_at(1, 1, "missing `mode` directive"));
        };
        let mut errors = Vec::new();
        for (n, &(line, col)) in self.nodes.iter().zip(&self.node_lines) {
            if !mode.allows(n.role) {
                errors.push(Self::semantic_at(line, col, format!("role {} not allowed in {mode} mode", n.role)));
            }
        }
        let declared: BTreeMap<&NodeId, &NodeDecl> = self.nodes.iter().map(|n| (&n.id, n)).collect();
        for (line, col, id) in &self.refs {
            if !declared.contains_key(id) {
                errors.push(Self::semantic_at(*line, *col, format!("unknown node {id}")));
            }
        }
        let mut joined = BTreeSet::new();
        for (line, col, id) in &self.joins {
            if declared.get(id).is_some_and(|n| n.deploy.is_some()) {
                errors.push(Self::semantic_at(*line, *col, format!("node {id} already has deploy=")));
            }
            if !joined.insert(id) {
                errors.push(Self::semantic_at(*line, *col, format!("node {id} joins twice")));
            }
        }
        if let Some(first) = errors.into_iter().min_by_key(|e| (e.line, e.column)) {
            return Err(first);
        }
        Ok(Scenario {
            mode,
            seed: self.seed.unwrap_or(0),
            params: self.params,
            nodes: self.nodes,
            events: self.events,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn err(text: &str) -> ScenarioError {
        parse_scenario(text).unwrap_err()
    }

    #[test]
    fn minimal_file() {
        let s = parse_scenario("mode p2p\nnode a peer 0 0 0\nnode b peer 0 0.5 0\n").unwrap();
        assert_eq!(s.nodes.len(), 2);
        assert!(s.events.is_empty());
        assert_eq!(s.seed, 0);
    }

    #[test]
    fn client_in_p2p_is_semantic_error() {
        let e = err("mode p2p\nnode c1 client 0 0 0\n");
        assert_eq!((e.kind, e.line, e.column), (ErrorKind::Semantic, 2, 9));
    }

    #[test]
    fn mode_may_come_last() {
        let e = err("node c1 client 0 0 0\nmode p2p\n");
        assert_eq!((e.line, e.kind), (1, ErrorKind::Semantic));
        assert!(parse_scenario("node s server 0 0 0\nmode cs\n").is_ok());
    }

    #[test]
    fn unknown_directive_column() {
        let e = err("mode p2p\n  launch rocket\n");
        assert_eq!((e.kind, e.line, e.column), (ErrorKind::Syntax, 2, 3));
        assert_eq!(e.to_string(), "2:3: syntax error: unknown directive \"launch\"");
    }

    #[test]
    fn comments_and_blank_lines() {
        let s = parse_scenario("# header\n\nmode cs # trailing\nseed 9\n").unwrap();
        assert_eq!(s.seed, 9);
        assert_eq!(s.mode, Mode::ClientServer);
    }

    #[test]
    fn events_parse() {
        let text = "mode p2p\nseed 4\nparam max_range_km 100\nnode a peer 0 0 0\nnode b peer 0 0.5 0 deploy=2\nnode c peer 1 0 0\n\
                    at 3 join c\nat 4 move a 0.1 0 10\nat 5 qkd a b pulses=1000\nat 6 send a b hex:0f\nat 7 eve a b intercept_resend on\n";
        let s = parse_scenario(text).unwrap();
        assert_eq!(s.events.len(), 5);
        assert_eq!(s.params, vec![("max_range_km".to_string(), ParamValue::Number(100.0))]);
        match &s.events[3].action {
            Action::Send { message, .. } => assert_eq!(message.to_binary(), "00001111"),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_scenario(&s.to_string()).unwrap(), s);
    }

    #[test]
    fn semantic_reference_errors() {
        let e = err("mode p2p\nnode a peer 0 0 0\nat 1 send a zz hex:00\n");
        assert_eq!((e.kind, e.line, e.column), (ErrorKind::Semantic, 3, 13));
        let e = err("mode p2p\nnode a peer 0 0 0 deploy=1\nat 2 join a\n");
        assert_eq!((e.kind, e.line), (ErrorKind::Semantic, 3));
        let e = err("mode p2p\nnode a peer 0 0 0\nnode a peer 0 0 0\n");
        assert_eq!((e.kind, e.line), (ErrorKind::Semantic, 3));
        let e = err("mode p2p\nnode a peer 0 0 0\nat 1 qkd a a pulses=5\n");
        assert_eq!(e.kind, ErrorKind::Semantic);
    }

    #[test]
    fn syntax_errors() {
        for (text, line, col) in [
            ("mode mesh\n", 1, 6),
            ("mode p2p\nseed -1\n", 2, 6),
            ("mode p2p\nnode a peer 0 0\n", 2, 16),
            ("mode p2p\nnode a peer 0 0 0 later\n", 2, 19),
            ("mode p2p\nnode a peer x 0 0\n", 2, 13),
            ("mode p2p\nnode a peer 0 0 0\nat 1 send a b hex:0g\n", 3, 20),
            ("mode p2p\nnode a peer 0 0 0\nat 1 qkd a b pulses=x\n", 3, 14),
            ("mode p2p\nat\n", 2, 3),
            ("mode p2p\nat 1 dance\n", 2, 6),
            ("mode p2p\nnode a peer 0 0 0\nnode b peer 0 0 0\nat 1 eve a b sniff on\n", 4, 14),
            ("mode p2p\nparam require_los maybe\n", 2, 19),
        ] {
            let e = err(text);
            assert_eq!((e.kind, e.line, e.column), (ErrorKind::Syntax, line, col), "{text:?}: {e}");
        }
    }

    #[test]
    fn param_range_is_checked() {
        let e = err("mode p2p\nparam detector_efficiency 2\n");
        assert_eq!((e.kind, e.line, e.column), (ErrorKind::Semantic, 2, 27));
        let e = err("mode p2p\nparam warp_factor 9\n");
        assert_eq!((e.kind, e.column), (ErrorKind::Semantic, 7));
    }

    #[test]
    fn negative_time_and_bad_position() {
        assert_eq!(err("mode p2p\nnode a peer 0 0 0 deploy=-1\n").kind, ErrorKind::Semantic);
        let e = err("mode p2p\nnode a peer 91 0 0\n");
        assert_eq!((e.kind, e.column), (ErrorKind::Semantic, 13));
    }

    #[test]
    fn invalid_utf8_position() {
        let e = parse_scenario_bytes(b"mode p2p\nno\xffde\n").unwrap_err();
        assert_eq!((e.line, e.column), (2, 3));
    }

    #[test]
    fn empty_hex_is_empty_message() {
        let s = parse_scenario("mode p2p\nnode a peer 0 0 0\nnode b peer 0 0 1\nat 0 send a b hex:\n").unwrap();
        assert!(matches!(&s.events[0].action, Action::Send { message, .. } if message.is_empty()));
    }
}
