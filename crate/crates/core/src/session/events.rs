use serde::{Deserialize, Serialize};

use crate::script::DialogueTurn;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TurnEventKind {
    /// A narration line realized exactly as planned.
    Planned,
    ActorResponse,
    PlayerAction,
    ForceComplete,
    ObjectiveAdvanced,
    StorylineRebuilt,
    ActComplete,
    ColumnAdvanced,
    Finished,
}

impl TurnEventKind {
    /// Kinds that carry a realized dialogue turn.
    pub fn is_dialogue(self) -> bool {
        matches!(
            self,
            TurnEventKind::Planned | TurnEventKind::ActorResponse | TurnEventKind::PlayerAction
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TurnEvent {
    pub session_id: String,
    /// Absent for session-wide events.
    pub act_id: Option<String>,
    pub kind: TurnEventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub turn: Option<DialogueTurn>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub objective_id: Option<String>,
    pub column: usize,
    pub tick: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<String>,
}
