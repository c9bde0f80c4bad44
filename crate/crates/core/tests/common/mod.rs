#![allow(dead_code)]

use std::sync::Arc;

use dramaturg_core::llm::{DemoResponder, ScriptedBackend, TemplateId};
use dramaturg_core::script::{load_script, ScriptSetting};
use dramaturg_core::session::{EngineConfig, PlaySession, SessionBuilder, TurnEvent, TurnEventKind};

pub const SMALL: &str = r#"
title = "Harbour Night"

[[characters]]
name = "Hedda Gai"
kind = "actor"
description = "A proud woman who hates being bored."

[[characters]]
name = "George Dai"
kind = "actor"
description = "Her earnest husband, a scholar."

[[characters]]
name = "Berta"
kind = "actor"
description = "The housekeeper, always in a hurry."

[[characters]]
name = "Helson"
kind = "player"
description = "A visiting journalist."

[[relations]]
subject = "Hedda Gai"
object = "George Dai"
content = "Hedda finds George dull."
monologue = "George talks about his books and I count the minutes."

[[memories]]
role = "Hedda Gai"
content = "Hedda hid her father's red pistol in the drawer."
monologue = "I keep my father's red pistol in the drawer, where nobody looks."

[[acts]]
id = "1-1"
column = 0
place = "Drawing room"
background = "Morning. A press conference is due at noon."
characters = ["Hedda Gai", "George Dai"]
objectives = ["George asked Hedda to come to the press conference.", "Hedda agreed to go."]

[[acts]]
id = "1-2"
column = 0
place = "Kitchen"
background = "Berta prepares tea."
characters = ["Berta"]
objectives = ["Berta finished the tea."]

[[acts]]
id = "2-1"
column = 1
place = "Press room"
background = "Reporters wait."
characters = ["Hedda Gai", "George Dai", "Berta"]
objectives = ["The conference began."]
"#;

pub fn small_setting() -> ScriptSetting {
    load_script(SMALL.as_bytes()).unwrap()
}

pub const NEVER: &str = r#"{"completed": false, "reason": "not yet"}"#;
pub const DONE: &str = r#"{"completed": true, "reason": "objective reached"}"#;

/// Deterministic backend: demo text for everything, the given check answer.
pub fn backend(seed: u64, check: &str) -> ScriptedBackend {
    ScriptedBackend::new()
        .with_fallback(DemoResponder::new(seed))
        .always(TemplateId::CheckObjective, check)
}

pub fn session(setting: ScriptSetting, backend: ScriptedBackend, config: EngineConfig) -> PlaySession {
    SessionBuilder::new(setting, Arc::new(backend))
        .config(config)
        .seed(7)
        .build()
        .unwrap()
}

pub fn demo_session(seed: u64, config: EngineConfig) -> PlaySession {
    SessionBuilder::new(
        dramaturg_core::script::demo_script(),
        Arc::new(ScriptedBackend::new().with_fallback(DemoResponder::new(seed))),
    )
    .config(config)
    .seed(seed)
    .build()
    .unwrap()
}

pub fn kinds(events: &[TurnEvent]) -> Vec<TurnEventKind> {
    events.iter().map(|e| e.kind).collect()
}

pub fn act_events<'a>(events: &'a [TurnEvent], act: &str) -> Vec<&'a TurnEvent> {
    events.iter().filter(|e| e.act_id.as_deref() == Some(act)).collect()
}
