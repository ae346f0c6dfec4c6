//! Deterministic discrete-event backbone: virtual clock, event queue,
//! ideal classical broadcast bus, label-keyed random streams and the event
//! log.

mod bus;
mod engine;
mod log;
mod rng;
mod time;

pub use bus::{BroadcastBus, BusError};
pub use engine::{
    EventFailure, EventKind, RunSummary, ScenarioEvent, ScheduleError, Simulator, TableSnapshot,
};
pub use log::{EventLog, LogKind, LogParseError, LogRecord};
pub use rng::RandomStream;
pub use time::SimTime;
