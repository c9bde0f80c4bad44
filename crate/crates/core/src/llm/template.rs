//! Prompt templates with `{{name}}` placeholders.
//!
//! Defaults are compiled in from `templates/*.toml`. A directory holding
//! files with the same names overrides them at runtime, and
//! [`TemplateSet::reload`] picks up edits without restarting.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type Bindings = BTreeMap<String, String>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TemplateId {
    WriteOutline,
    TranslateScript,
    InstructActor,
    ActorResponse,
    ActorResponseUndirected,
    CheckObjective,
    SummarizeLog,
    Monologue,
    Interview,
    JudgeStoryline,
}

impl TemplateId {
    pub const ALL: [TemplateId; 10] = [
        TemplateId::WriteOutline,
        TemplateId::TranslateScript,
        TemplateId::InstructActor,
        TemplateId::ActorResponse,
        TemplateId::ActorResponseUndirected,
        TemplateId::CheckObjective,
        TemplateId::SummarizeLog,
        TemplateId::Monologue,
        TemplateId::Interview,
        TemplateId::JudgeStoryline,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TemplateId::WriteOutline => "write_outline",
            TemplateId::TranslateScript => "translate_script",
            TemplateId::InstructActor => "instruct_actor",
            TemplateId::ActorResponse => "actor_response",
            TemplateId::ActorResponseUndirected => "actor_response_undirected",
            TemplateId::CheckObjective => "check_objective",
            TemplateId::SummarizeLog => "summarize_log",
            TemplateId::Monologue => "monologue",
            TemplateId::Interview => "interview",
            TemplateId::JudgeStoryline => "judge_storyline",
        }
    }

    fn default_source(self) -> &'static str {
        match self {
            TemplateId::WriteOutline => include_str!("../../templates/write_outline.toml"),
            TemplateId::TranslateScript => include_str!("../../templates/translate_script.toml"),
            TemplateId::InstructActor => include_str!("../../templates/instruct_actor.toml"),
            TemplateId::ActorResponse => include_str!("../../templates/actor_response.toml"),
            TemplateId::ActorResponseUndirected => {
                include_str!("../../templates/actor_response_undirected.toml")
            }
            TemplateId::CheckObjective => include_str!("../../templates/check_objective.toml"),
            TemplateId::SummarizeLog => include_str!("../../templates/summarize_log.toml"),
            TemplateId::Monologue => include_str!("../../templates/monologue.toml"),
            TemplateId::Interview => include_str!("../../templates/interview.toml"),
            TemplateId::JudgeStoryline => include_str!("../../templates/judge_storyline.toml"),
        }
    }
}

impl fmt::Display for TemplateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TemplateId {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TemplateId::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown template `{s}`"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SpeakerRole {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: SpeakerRole,
    pub text: String,
}

impl ChatMessage {
    pub fn system(text: impl Into<String>) -> Self {
        ChatMessage {
            role: SpeakerRole::System,
            text: text.into(),
        }
    }
}

/// Advisory decoding parameters passed through to the backend.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecodeHints {
    pub max_output_tokens: u32,
    pub temperature: f32,
}

impl Default for DecodeHints {
    fn default() -> Self {
        DecodeHints {
            max_output_tokens: 512,
            temperature: 0.7,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptTemplate {
    pub id: TemplateId,
    /// True for templates written for this project rather than transcribed.
    #[serde(default)]
    pub authored: bool,
    pub placeholders: BTreeSet<String>,
    #[serde(default)]
    pub hints: DecodeHints,
    pub messages: Vec<TemplateMessage>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemplateMessage {
    pub role: SpeakerRole,
    pub text: String,
}

#[derive(Debug, Error)]
pub enum TemplateError {
    #[error("missing binding for placeholder `{placeholder}` in template `{template}`")]
    MissingPlaceholder { template: TemplateId, placeholder: String },
    #[error("template `{template}` references undeclared placeholder `{placeholder}`")]
    Undeclared { template: TemplateId, placeholder: String },
    #[error("template file {path}: {message}")]
    File { path: PathBuf, message: String },
}

/// Split template text into literal and placeholder pieces.
fn pieces(text: &str) -> Vec<Piece<'_>> {
    let mut out = Vec::new();
    let mut rest = text;
    while let Some(start) = rest.find("{{") {
        match rest[start + 2..].find("}}") {
            Some(len) => {
                let name = &rest[start + 2..start + 2 + len];
                if is_placeholder_name(name) {
                    out.push(Piece::Literal(&rest[..start]));
                    out.push(Piece::Placeholder(name));
                } else {
                    out.push(Piece::Literal(&rest[..start + 4 + len]));
                }
                rest = &rest[start + 4 + len..];
            }
            None => break,
        }
    }
    out.push(Piece::Literal(rest));
    out
}

fn is_placeholder_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

enum Piece<'a> {
    Literal(&'a str),
    Placeholder(&'a str),
}

impl PromptTemplate {
    pub fn parse(source: &str) -> Result<Self, String> {
        let t: PromptTemplate = toml::from_str(source).map_err(|e| e.to_string())?;
        t.check_declared().map_err(|e| e.to_string())?;
        Ok(t)
    }

    /// Placeholders actually referenced by the message texts.
    pub fn referenced(&self) -> BTreeSet<&str> {
        self.messages
            .iter()
            .flat_map(|m| pieces(&m.text))
            .filter_map(|p| match p {
                Piece::Placeholder(n) => Some(n),
                Piece::Literal(_) => None,
            })
            .collect()
    }

    fn check_declared(&self) -> Result<(), TemplateError> {
        for name in self.referenced() {
            if !self.placeholders.contains(name) {
                return Err(TemplateError::Undeclared {
                    template: self.id,
                    placeholder: name.to_string(),
                });
            }
        }
        Ok(())
    }

    /// Substitute every placeholder in a single pass. Bound values are
    /// inserted literally and never re-expanded.
    pub fn render(&self, bindings: &Bindings) -> Result<Vec<ChatMessage>, TemplateError> {
        for name in &self.placeholders {
            if !bindings.contains_key(name) {
                return Err(TemplateError::MissingPlaceholder {
                    template: self.id,
                    placeholder: name.clone(),
                });
            }
        }
        Ok(self
            .messages
            .iter()
            .map(|m| {
                let mut text = String::with_capacity(m.text.len());
                for p in pieces(&m.text) {
                    match p {
                        Piece::Literal(s) => text.push_str(s),
                        Piece::Placeholder(n) => text.push_str(&bindings[n]),
                    }
                }
                ChatMessage { role: m.role, text }
            })
            .collect())
    }
}

/// The full set of templates, one per [`TemplateId`].
#[derive(Debug, Clone)]
pub struct TemplateSet {
    templates: BTreeMap<TemplateId, PromptTemplate>,
    override_dir: Option<PathBuf>,
}

impl Default for TemplateSet {
    fn default() -> Self {
        let templates = TemplateId::ALL
            .into_iter()
            .map(|id| {
                let t =
                    PromptTemplate::parse(id.default_source()).unwrap_or_else(|e| panic!("bundled template {id}: {e}"));
                assert_eq!(t.id, id, "bundled template file id mismatch");
                (id, t)
            })
            .collect();
        TemplateSet {
            templates,
            override_dir: None,
        }
    }
}

impl TemplateSet {
    /// Defaults overridden by any `<id>.toml` found in `dir`.
    pub fn with_overrides(dir: impl AsRef<Path>) -> Result<Self, TemplateError> {
        let mut set = TemplateSet {
            override_dir: Some(dir.as_ref().to_path_buf()),
            ..TemplateSet::default()
        };
        set.reload()?;
        Ok(set)
    }

    /// Re-read override files. A broken file leaves the set unchanged.
    pub fn reload(&mut self) -> Result<(), TemplateError> {
        let Some(dir) = &self.override_dir else {
            return Ok(());
        };
        let mut next = self.templates.clone();
        for id in TemplateId::ALL {
            let path = dir.join(format!("{id}.toml"));
            if !path.exists() {
                next.insert(id, PromptTemplate::parse(id.default_source()).expect("bundled"));
                continue;
            }
            let source = std::fs::read_to_string(&path).map_err(|e| TemplateError::File {
                path: path.clone(),
                message: e.to_string(),
            })?;
            let t = PromptTemplate::parse(&source).map_err(|message| TemplateError::File {
                path: path.clone(),
                message,
            })?;
            if t.id != id {
                return Err(TemplateError::File {
                    path,
                    message: format!("declares id `{}`, expected `{id}`", t.id),
                });
            }
            next.insert(id, t);
        }
        self.templates = next;
        Ok(())
    }

    pub fn get(&self, id: TemplateId) -> &PromptTemplate {
        &self.templates[&id]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn full_bindings(t: &PromptTemplate) -> Bindings {
        t.placeholders.iter().map(|p| (p.clone(), format!("<{p}>"))).collect()
    }

    #[test]
    fn bundled_templates_declare_exactly_what_they_use() {
        let set = TemplateSet::default();
        for id in TemplateId::ALL {
            let t = set.get(id);
            let declared: BTreeSet<&str> = t.placeholders.iter().map(String::as_str).collect();
            assert_eq!(t.referenced(), declared, "{id}");
        }
    }

    #[test]
    fn complete_binding_leaves_nothing_unresolved() {
        let set = TemplateSet::default();
        for id in TemplateId::ALL {
            let t = set.get(id);
            let msgs = t.render(&full_bindings(t)).unwrap();
            assert_eq!(msgs.len(), t.messages.len());
            for m in msgs {
                for p in &t.placeholders {
                    assert!(!m.text.contains(&format!("{{{{{p}}}}}")), "{id}: {p}");
                }
            }
        }
    }

    #[test]
    fn outline_renders_characters_line() {
        let set = TemplateSet::default();
        let t = set.get(TemplateId::WriteOutline);
        let mut b = full_bindings(t);
        b.insert("characters".into(), "A, B".into());
        let msgs = t.render(&b).unwrap();
        assert!(msgs[1].text.contains("Characters in the scene: A, B"));
        assert_eq!(msgs[0].role, SpeakerRole::System);
        assert_eq!(msgs[1].role, SpeakerRole::User);
    }

    #[test]
    fn no_placeholders_is_identity() {
        let t = PromptTemplate {
            id: TemplateId::Monologue,
            authored: true,
            placeholders: BTreeSet::new(),
            hints: DecodeHints::default(),
            messages: vec![TemplateMessage {
                role: SpeakerRole::User,
                text: "plain {text} with {{ spaced }} braces".into(),
            }],
        };
        let out = t.render(&Bindings::new()).unwrap();
        assert_eq!(out[0].text, "plain {text} with {{ spaced }} braces");
    }

    #[test]
    fn missing_binding_is_reported() {
        let set = TemplateSet::default();
        let t = set.get(TemplateId::CheckObjective);
        let mut b = full_bindings(t);
        b.remove("act_goal");
        match t.render(&b) {
            Err(TemplateError::MissingPlaceholder { placeholder, .. }) => {
                assert_eq!(placeholder, "act_goal")
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn values_are_not_re_expanded() {
        let set = TemplateSet::default();
        let t = set.get(TemplateId::Monologue);
        let mut b = full_bindings(t);
        b.insert("content".into(), "{{name}}".into());
        let out = t.render(&b).unwrap();
        assert_eq!(out[1].text, "{{name}}");
    }

    #[test]
    fn override_dir_replaces_and_reloads() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("monologue.toml");
        std::fs::write(
            &path,
            "id = \"monologue\"\nplaceholders = [\"content\"]\n[[messages]]\nrole = \"user\"\ntext = \"v1 {{content}}\"\n",
        )
        .unwrap();
        let mut set = TemplateSet::with_overrides(dir.path()).unwrap();
        let b: Bindings = [("content".to_string(), "x".to_string())].into();
        assert_eq!(set.get(TemplateId::Monologue).render(&b).unwrap()[0].text, "v1 x");

        std::fs::write(
            &path,
            "id = \"monologue\"\nplaceholders = [\"content\"]\n[[messages]]\nrole = \"user\"\ntext = \"v2 {{content}}\"\n",
        )
        .unwrap();
        set.reload().unwrap();
        assert_eq!(set.get(TemplateId::Monologue).render(&b).unwrap()[0].text, "v2 x");

        std::fs::write(
            &path,
            "id = \"monologue\"\nplaceholders = []\n[[messages]]\nrole = \"user\"\ntext = \"{{oops}}\"\n",
        )
        .unwrap();
        assert!(set.reload().is_err());
        assert_eq!(set.get(TemplateId::Monologue).render(&b).unwrap()[0].text, "v2 x");
    }
}
