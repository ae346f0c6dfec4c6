//! Line-oriented event log.
//!
//! One record per line, tab-separated: `time`, `sequence`, `kind`, `origin`,
//! `details`. `details` is a space-separated list of `key=value` pairs.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use super::SimTime;

macro_rules! log_kinds {
    ($($variant:ident => $name:literal,)*) => {
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
        pub enum LogKind {
            $($variant,)*
        }

        impl LogKind {
            pub fn as_str(self) -> &'static str {
                match self {
                    $(LogKind::$variant => $name,)*
                }
            }
        }

        impl FromStr for LogKind {
            type Err = LogParseError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($name => Ok(LogKind::$variant),)*
                    other => Err(LogParseError::UnknownKind(other.to_string())),
                }
            }
        }
    };
}

log_kinds! {
    Param => "param",
    Deploy => "deploy",
    Broadcast => "bcast",
    Receive => "recv",
    LinkAcquiring => "link_acquiring",
    LinkActive => "link_active",
    LinkDown => "link_down",
    LinkRejected => "link_rejected",
    Tables => "tables",
    Session => "qkd_session",
    KeyAppend => "key_append",
    KeyConsume => "key_consume",
    Eve => "eve",
    Deliver => "deliver",
    SendFailed => "send_failed",
    Error => "error",
}

impl fmt::Display for LogKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogRecord {
    pub time: SimTime,
    pub seq: u64,
    pub kind: LogKind,
    /// Node id, or `-` for engine-level records.
    pub origin: String,
    pub details: String,
}

impl LogRecord {
    /// Value of `key` in the details field.
    pub fn field(&self, key: &str) -> Option<&str> {
        self.details.split(' ').find_map(|kv| {
            let (k, v) = kv.split_once('=')?;
            (k == key).then_some(v)
        })
    }

    pub fn parse_line(line: &str) -> Result<Self, LogParseError> {
        let mut parts = line.splitn(5, '\t');
        let mut next = |name: &'static str| parts.next().ok_or(LogParseError::MissingField(name));
        let time = next("time")?;
        let seq = next("sequence")?;
        let kind = next("kind")?;
        let origin = next("origin")?;
        let details = next("details")?;
        let time = time
            .parse::<f64>()
            .ok()
            .and_then(SimTime::new)
            .ok_or_else(|| LogParseError::BadNumber(time.to_string()))?;
        let seq = seq
            .parse::<u64>()
            .map_err(|_| LogParseError::BadNumber(seq.to_string()))?;
        Ok(Self {
            time,
            seq,
            kind: kind.parse()?,
            origin: origin.to_string(),
            details: details.to_string(),
        })
    }
}

impl fmt::Display for LogRecord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}\t{}\t{}\t{}\t{}",
            self.time, self.seq, self.kind, self.origin, self.details
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LogParseError {
    #[error("missing {0} field")]
    MissingField(&'static str),
    #[error("bad number {0:?}")]
    BadNumber(String),
    #[error("unknown record kind {0:?}")]
    UnknownKind(String),
}

#[derive(Debug, Clone, Default)]
pub struct EventLog {
    records: Vec<LogRecord>,
}

impl EventLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(
        &mut self,
        time: SimTime,
        kind: LogKind,
        origin: impl fmt::Display,
        details: impl Into<String>,
    ) {
        let seq = self.records.len() as u64;
        let rec = LogRecord {
            time,
            seq,
            kind,
            origin: origin.to_string(),
            details: details.into(),
        };
        log::trace!("{rec}");
        self.records.push(rec);
    }

    pub fn records(&self) -> &[LogRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn of_kind(&self, kind: LogKind) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&r.to_string());
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self, (usize, LogParseError)> {
        let records = text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.is_empty())
            .map(|(i, l)| LogRecord::parse_line(l).map_err(|e| (i + 1, e)))
            .collect::<Result<_, _>>()?;
        Ok(Self { records })
    }
}
