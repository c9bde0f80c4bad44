use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::config::EngineConfig;
use super::engine::{Completion, PlaySession, PlayerAction, PlayerInput, SessionBuilder, SessionError, SessionStatus};
use crate::director::DecisionRecord;
use crate::llm::{ReplayBackend, TranscriptEntry};
use crate::script::{load_script, to_toml, DialogueTurn};
use crate::util::sha256_hex;

pub const RECORD_FORMAT: &str = "dramaturg-play";
pub const RECORD_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveRecord {
    pub id: String,
    pub text: String,
    pub completion: Option<Completion>,
    pub turns: Vec<DialogueTurn>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActRecord {
    pub id: String,
    pub column: usize,
    pub place: String,
    pub complete: bool,
    pub objectives: Vec<ObjectiveRecord>,
}

/// The exported drama script: every realized line grouped by act and
/// objective, the directors' decisions and the full model transcript.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlayRecord {
    pub format: String,
    pub version: u32,
    pub title: String,
    pub seed: u64,
    pub config: EngineConfig,
    /// The script setting, as TOML.
    pub script: String,
    pub ticks: u64,
    pub finished: bool,
    pub acts: Vec<ActRecord>,
    pub player_inputs: Vec<PlayerInput>,
    pub decisions: Vec<DecisionRecord>,
    pub transcript: Vec<TranscriptEntry>,
}

impl PlayRecord {
    pub fn turn_count(&self) -> usize {
        self.acts
            .iter()
            .flat_map(|a| &a.objectives)
            .map(|o| o.turns.len())
            .sum()
    }

    /// Every realized turn across acts, in tick order.
    pub fn dialogue(&self) -> Vec<(&str, &DialogueTurn)> {
        let mut all: Vec<(&str, &DialogueTurn)> = self
            .acts
            .iter()
            .flat_map(|a| {
                a.objectives
                    .iter()
                    .flat_map(move |o| o.turns.iter().map(move |t| (a.id.as_str(), t)))
            })
            .collect();
        all.sort_by_key(|(_, t)| t.tick);
        all
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("play record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, SessionError> {
        let record: PlayRecord = serde_json::from_str(text).map_err(|e| SessionError::Record(e.to_string()))?;
        if record.format != RECORD_FORMAT {
            return Err(SessionError::Record(format!("unexpected format `{}`", record.format)));
        }
        if record.version != RECORD_VERSION {
            return Err(SessionError::Record(format!("unsupported version {}", record.version)));
        }
        Ok(record)
    }

    /// Digest of the play itself, independent of formatting.
    pub fn digest(&self) -> String {
        sha256_hex(&serde_json::to_vec(self).expect("play record serializes"))
    }
}

impl PlaySession {
    pub fn export_play(&self) -> PlayRecord {
        PlayRecord {
            format: RECORD_FORMAT.into(),
            version: RECORD_VERSION,
            title: self.setting().title.clone(),
            seed: self.seed(),
            config: self.config().clone(),
            script: to_toml(self.setting()),
            ticks: self.global_tick(),
            finished: self.status() == SessionStatus::Finished,
            acts: self
                .act_runs()
                .map(|r| ActRecord {
                    id: r.act().id.clone(),
                    column: r.act().column,
                    place: r.act().place.clone(),
                    complete: r.is_complete(),
                    objectives: r
                        .objectives()
                        .iter()
                        .map(|o| ObjectiveRecord {
                            id: o.objective_id.clone(),
                            text: o.text.clone(),
                            completion: o.completion,
                            turns: o.turns.clone(),
                        })
                        .collect(),
                })
                .collect(),
            player_inputs: self.inputs().to_vec(),
            decisions: self.decisions(),
            transcript: self.gateway().transcript().to_vec(),
        }
    }
}

/// Re-run a recorded play against its own transcript, re-injecting the
/// player's inputs at the ticks they preceded.
pub fn replay(record: &PlayRecord) -> Result<PlaySession, SessionError> {
    let setting = load_script(record.script.as_bytes()).map_err(|e| SessionError::Record(e.to_string()))?;
    let backend = Arc::new(ReplayBackend::new(record.transcript.clone()));
    let mut session = SessionBuilder::new(setting, backend)
        .config(record.config.clone())
        .seed(record.seed)
        .build()?;
    let mut inputs = record.player_inputs.iter().peekable();
    while session.global_tick() < record.ticks {
        let next = session.global_tick() + 1;
        while let Some(input) = inputs.next_if(|i| i.before_tick <= next) {
            match &input.action {
                PlayerAction::Enter => session.enter_act(&input.act_id)?,
                PlayerAction::Speak { text } => session.player_speak(&input.act_id, text)?,
            }
        }
        if session.status() != SessionStatus::Running {
            break;
        }
        session.tick()?;
    }
    Ok(session)
}
