//! The live-play service core: wire protocol, per-connection session engine,
//! session log persistence with replay and export, and a loopback pilot.

pub mod engine;
pub mod loopback;
pub mod protocol;
pub mod store;

pub use engine::{InputOutcome, LogEntry, Session, SessionOptions, SessionState, WheelMap, WheelMode, LATE_TICK_MS};
pub use loopback::{loopback_records, run_loopback_session, LoopbackPilot};
pub use protocol::{EndSummary, WireMessage};
pub use store::{export_session, read_log, replay_log, write_log, ExportFormat, ReplayReport, SessionStore};
