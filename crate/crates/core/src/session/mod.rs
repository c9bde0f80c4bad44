//! The play as a state machine: act columns, per-turn dispatch, player
//! interruptions, pause and interview, export and replay.

mod config;
mod engine;
mod events;
mod record;

pub use config::{ConfigError, EngineConfig};
pub use engine::{
    ActRun, ActSummary, Completion, ObjectiveRun, PlaySession, PlayerAction, PlayerInput, SessionBuilder, SessionError,
    SessionStatus,
};
pub use events::{TurnEvent, TurnEventKind};
pub use record::{replay, ActRecord, ObjectiveRecord, PlayRecord, RECORD_FORMAT, RECORD_VERSION};
