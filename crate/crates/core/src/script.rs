//! Authored play settings: characters, relations, seed memories and acts.
//!
//! A script is a single TOML document. Acts carry an explicit `column`
//! that stages them: every act in column `c` must finish before any act in
//! column `c + 1` begins. See `docs/script-format.md` for the file layout.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved speaker name for narration turns.
pub const NARRATION: &str = "Narration";

/// Name of a character (or [`NARRATION`]) within one script.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RoleId(String);

impl RoleId {
    pub fn new(name: impl Into<String>) -> Self {
        RoleId(name.into())
    }

    pub fn narration() -> Self {
        RoleId(NARRATION.to_string())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn is_narration(&self) -> bool {
        self.0 == NARRATION
    }

    /// First whitespace-separated token of the name ("Mara" for "Mara Voss").
    pub fn given_name(&self) -> &str {
        self.0.split_whitespace().next().unwrap_or(&self.0)
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RoleId {
    fn from(s: &str) -> Self {
        RoleId::new(s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CharacterKind {
    Actor,
    Player,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterProfile {
    #[serde(rename = "name")]
    pub role: RoleId,
    pub kind: CharacterKind,
    pub description: String,
}

/// What `subject` knows or feels about `object`, with a first-person
/// monologue voiced by `subject`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RelationDoc {
    pub subject: RoleId,
    pub object: RoleId,
    pub content: String,
    pub monologue: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeedMemory {
    pub content: String,
    pub monologue: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlotObjective {
    pub id: String,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Act {
    pub id: String,
    pub column: usize,
    pub place: String,
    pub background: String,
    pub characters: Vec<RoleId>,
    pub objectives: Vec<PlotObjective>,
}

impl Act {
    pub fn has_character(&self, role: &RoleId) -> bool {
        self.characters.contains(role)
    }
}

/// A loaded and validated script. Immutable after load.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ScriptSetting {
    pub title: String,
    pub characters: Vec<CharacterProfile>,
    pub relations: Vec<RelationDoc>,
    pub seed_memories: BTreeMap<RoleId, Vec<SeedMemory>>,
    pub acts: Vec<Act>,
}

/// One realized line of the play.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueTurn {
    pub role: RoleId,
    pub utterance: String,
    pub tick: u64,
}

impl DialogueTurn {
    pub fn new(role: RoleId, utterance: impl Into<String>, tick: u64) -> Self {
        DialogueTurn {
            role,
            utterance: utterance.into(),
            tick,
        }
    }

    /// `NAME: text`, or `[text]` for narration.
    pub fn render(&self) -> String {
        if self.role.is_narration() {
            format!("[{}]", self.utterance)
        } else {
            format!("{}: {}", self.role, self.utterance)
        }
    }
}

/// A director-planned line: the speaker and what they are expected to say.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedTurn {
    pub role: RoleId,
    pub expected_utterance: String,
}

#[derive(Debug, Error)]
pub enum ScriptError {
    #[error("malformed script document: {0}")]
    Parse(String),
    #[error("invalid script field `{field}`: {message}")]
    Validation { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ScriptError {
    ScriptError::Validation {
        field: field.into(),
        message: message.into(),
    }
}

// On-disk layout. Kept separate from `ScriptSetting` so objectives may be
// written as bare strings and memories as a flat list.

#[derive(Debug, Serialize, Deserialize)]
struct ScriptFile {
    title: String,
    #[serde(default)]
    characters: Vec<CharacterProfile>,
    #[serde(default)]
    relations: Vec<RelationDoc>,
    #[serde(default)]
    memories: Vec<MemoryEntry>,
    #[serde(default)]
    acts: Vec<ActEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
struct MemoryEntry {
    role: RoleId,
    content: String,
    monologue: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct ActEntry {
    id: String,
    column: usize,
    place: String,
    background: String,
    characters: Vec<RoleId>,
    objectives: Vec<ObjectiveEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(untagged)]
enum ObjectiveEntry {
    Text(String),
    Full { id: String, text: String },
}

/// Parse and validate a script document.
pub fn load_script(source: &[u8]) -> Result<ScriptSetting, ScriptError> {
    let text = std::str::from_utf8(source).map_err(|e| ScriptError::Parse(e.to_string()))?;
    let file: ScriptFile = toml::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;

    let mut seed_memories: BTreeMap<RoleId, Vec<SeedMemory>> = BTreeMap::new();
    for m in file.memories {
        seed_memories.entry(m.role).or_default().push(SeedMemory {
            content: m.content,
            monologue: m.monologue,
        });
    }

    let acts = file
        .acts
        .into_iter()
        .map(|a| {
            let objectives = a
                .objectives
                .into_iter()
                .enumerate()
                .map(|(i, o)| match o {
                    ObjectiveEntry::Text(text) => PlotObjective {
                        id: format!("{}/{}", a.id, i + 1),
                        text,
                    },
                    ObjectiveEntry::Full { id, text } => PlotObjective { id, text },
                })
                .collect();
            Act {
                id: a.id,
                column: a.column,
                place: a.place,
                background: a.background,
                characters: a.characters,
                objectives,
            }
        })
        .collect();

    let setting = ScriptSetting {
        title: file.title,
        characters: file.characters,
        relations: file.relations,
        seed_memories,
        acts,
    };
    setting.validate()?;
    Ok(setting)
}

/// Serialize back into the script document format.
pub fn to_toml(setting: &ScriptSetting) -> String {
    let file = ScriptFile {
        title: setting.title.clone(),
        characters: setting.characters.clone(),
        relations: setting.relations.clone(),
        memories: setting
            .seed_memories
            .iter()
            .flat_map(|(role, ms)| {
                ms.iter().map(move |m| MemoryEntry {
                    role: role.clone(),
                    content: m.content.clone(),
                    monologue: m.monologue.clone(),
                })
            })
            .collect(),
        acts: setting
            .acts
            .iter()
            .map(|a| ActEntry {
                id: a.id.clone(),
                column: a.column,
                place: a.place.clone(),
                background: a.background.clone(),
                characters: a.characters.clone(),
                objectives: a
                    .objectives
                    .iter()
                    .map(|o| ObjectiveEntry::Full {
                        id: o.id.clone(),
                        text: o.text.clone(),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&file).expect("script settings always serialize")
}

/// Acts staged in `column`, in declaration order.
pub fn acts_in_column(setting: &ScriptSetting, column: usize) -> Vec<&Act> {
    setting.acts.iter().filter(|a| a.column == column).collect()
}

impl ScriptSetting {
    pub fn character(&self, role: &RoleId) -> Option<&CharacterProfile> {
        self.characters.iter().find(|c| &c.role == role)
    }

    pub fn player(&self) -> &CharacterProfile {
        self.characters
            .iter()
            .find(|c| c.kind == CharacterKind::Player)
            .expect("validated script has a player character")
    }

    pub fn act(&self, id: &str) -> Option<&Act> {
        self.acts.iter().find(|a| a.id == id)
    }

    /// Number of columns, i.e. one past the highest column index.
    pub fn column_count(&self) -> usize {
        self.acts.iter().map(|a| a.column + 1).max().unwrap_or(0)
    }

    pub fn objective_count(&self) -> usize {
        self.acts.iter().map(|a| a.objectives.len()).sum()
    }

    pub fn is_actor(&self, role: &RoleId) -> bool {
        self.character(role).is_some_and(|c| c.kind == CharacterKind::Actor)
    }

    fn validate(&self) -> Result<(), ScriptError> {
        if self.title.trim().is_empty() {
            return Err(invalid("title", "must not be empty"));
        }

        let mut names = BTreeSet::new();
        for (i, c) in self.characters.iter().enumerate() {
            if c.role.as_str().trim().is_empty() {
                return Err(invalid(format!("characters[{i}].name"), "must not be empty"));
            }
            if c.role.is_narration() {
                return Err(invalid(
                    format!("characters[{i}].name"),
                    format!("`{NARRATION}` is reserved"),
                ));
            }
            if !names.insert(c.role.clone()) {
                return Err(invalid(
                    format!("characters[{i}].name"),
                    format!("duplicate character `{}`", c.role),
                ));
            }
        }
        let players = self
            .characters
            .iter()
            .filter(|c| c.kind == CharacterKind::Player)
            .count();
        if players != 1 {
            return Err(invalid(
                "characters",
                format!("exactly one player character required, found {players}"),
            ));
        }

        let known = |field: String, role: &RoleId| -> Result<(), ScriptError> {
            if names.contains(role) {
                Ok(())
            } else {
                Err(invalid(field, format!("unknown role `{role}`")))
            }
        };

        for (i, r) in self.relations.iter().enumerate() {
            known(format!("relations[{i}].subject"), &r.subject)?;
            known(format!("relations[{i}].object"), &r.object)?;
            if r.subject == r.object {
                return Err(invalid(format!("relations[{i}]"), "subject and object must differ"));
            }
            if !r.content.trim().is_empty() && r.monologue.trim().is_empty() {
                return Err(invalid(
                    format!("relations[{i}].monologue"),
                    "required when content is present",
                ));
            }
        }

        for (role, memories) in &self.seed_memories {
            known(format!("memories[role = {role}]"), role)?;
            for m in memories {
                if m.content.trim().is_empty() || m.monologue.trim().is_empty() {
                    return Err(invalid(
                        format!("memories[role = {role}]"),
                        "content and monologue must not be empty",
                    ));
                }
            }
        }

        let mut act_ids = BTreeSet::new();
        for (i, act) in self.acts.iter().enumerate() {
            if act.id.trim().is_empty() {
                return Err(invalid(format!("acts[{i}].id"), "must not be empty"));
            }
            if !act_ids.insert(act.id.as_str()) {
                return Err(invalid(format!("acts[{i}].id"), format!("duplicate act `{}`", act.id)));
            }
            for (j, role) in act.characters.iter().enumerate() {
                if role.is_narration() {
                    return Err(invalid(
                        format!("acts[{i}].characters[{j}]"),
                        format!("`{NARRATION}` is reserved"),
                    ));
                }
                known(format!("acts[{i}].characters[{j}]"), role)?;
            }
            if act.objectives.is_empty() {
                return Err(invalid(
                    format!("acts[{i}].objectives"),
                    "at least one objective required",
                ));
            }
            let mut obj_ids = BTreeSet::new();
            for (j, o) in act.objectives.iter().enumerate() {
                if o.text.trim().is_empty() {
                    return Err(invalid(
                        format!("acts[{i}].objectives[{j}]"),
                        "objective text must not be empty",
                    ));
                }
                if !obj_ids.insert(o.id.as_str()) {
                    return Err(invalid(
                        format!("acts[{i}].objectives[{j}].id"),
                        format!("duplicate objective id `{}`", o.id),
                    ));
                }
            }
        }
        if self.acts.is_empty() {
            return Err(invalid("acts", "at least one act required"));
        }

        let columns: BTreeSet<usize> = self.acts.iter().map(|a| a.column).collect();
        if columns.iter().copied().ne(0..columns.len()) {
            return Err(invalid(
                "acts.column",
                format!("columns must be contiguous from 0, found {columns:?}"),
            ));
        }

        // An actor can only be on one stage at a time.
        for column in columns {
            let mut seen: BTreeMap<&RoleId, &str> = BTreeMap::new();
            for act in self.acts.iter().filter(|a| a.column == column) {
                for role in &act.characters {
                    if !self.is_actor(role) {
                        continue;
                    }
                    if let Some(other) = seen.insert(role, &act.id) {
                        return Err(invalid(
                            format!("acts[id = {}].characters", act.id),
                            format!("`{role}` already appears in act `{other}` of column {column}"),
                        ));
                    }
                }
            }
        }
        Ok(())
    }
}

/// The bundled demo play.
pub const DEMO_SCRIPT: &str = include_str!("../scripts/demo.toml");

pub fn demo_script() -> ScriptSetting {
    load_script(DEMO_SCRIPT.as_bytes()).expect("bundled demo script is valid")
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
title = "Minimal"

[[characters]]
name = "Ana"
kind = "actor"
description = "A baker."

[[characters]]
name = "Pol"
kind = "player"
description = "A visitor."

[[acts]]
id = "1"
column = 0
place = "Bakery"
background = "Morning."
characters = ["Ana"]
objectives = ["Ana opens the shop."]
"#;

    fn err_field(src: &str) -> String {
        match load_script(src.as_bytes()) {
            Err(ScriptError::Validation { field, .. }) => field,
            other => panic!("expected validation error, got {other:?}"),
        }
    }

    #[test]
    fn loads_minimal_and_assigns_objective_ids() {
        let s = load_script(MINIMAL.as_bytes()).unwrap();
        assert_eq!(s.acts.len(), 1);
        assert_eq!(s.acts[0].objectives[0].id, "1/1");
        assert_eq!(s.player().role.as_str(), "Pol");
    }

    #[test]
    fn narration_in_act_is_rejected() {
        let src = MINIMAL.replace(r#"characters = ["Ana"]"#, r#"characters = ["Ana", "Narration"]"#);
        assert_eq!(err_field(&src), "acts[0].characters[1]");
    }

    #[test]
    fn unknown_role_is_rejected() {
        let src = MINIMAL.replace(r#"characters = ["Ana"]"#, r#"characters = ["Zed"]"#);
        assert_eq!(err_field(&src), "acts[0].characters[0]");
    }

    #[test]
    fn empty_objectives_rejected() {
        let src = MINIMAL.replace(r#"objectives = ["Ana opens the shop."]"#, "objectives = []");
        assert_eq!(err_field(&src), "acts[0].objectives");
    }

    #[test]
    fn non_contiguous_columns_rejected() {
        let src = MINIMAL.replace("column = 0", "column = 2");
        assert_eq!(err_field(&src), "acts.column");
    }

    #[test]
    fn malformed_document_is_parse_error() {
        assert!(matches!(load_script(b"title = [unclosed"), Err(ScriptError::Parse(_))));
    }

    #[test]
    fn demo_script_shape() {
        let s = demo_script();
        assert_eq!(s.acts.len(), 7);
        assert_eq!(s.objective_count(), 14);
        let cols: Vec<usize> = s.acts.iter().map(|a| a.column).collect();
        assert_eq!(&cols[..3], &[0, 0, 1]);
        let first: Vec<&str> = acts_in_column(&s, 0).iter().map(|a| a.id.as_str()).collect();
        assert_eq!(first, ["1-1", "1-2"]);
        assert!(acts_in_column(&s, 99).is_empty());
    }

    #[test]
    fn columns_partition_acts() {
        let s = demo_script();
        // group-by oracle
        let mut groups: BTreeMap<usize, Vec<&str>> = BTreeMap::new();
        for a in &s.acts {
            groups.entry(a.column).or_default().push(&a.id);
        }
        let mut covered = 0;
        for c in 0..s.column_count() {
            let ids: Vec<&str> = acts_in_column(&s, c).iter().map(|a| a.id.as_str()).collect();
            assert_eq!(ids, groups[&c]);
            covered += ids.len();
        }
        assert_eq!(covered, s.acts.len());
    }

    #[test]
    fn round_trip_through_toml() {
        let s = demo_script();
        let again = load_script(to_toml(&s).as_bytes()).unwrap();
        assert_eq!(s, again);
    }
}
