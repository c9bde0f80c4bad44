use serde::{Deserialize, Serialize};

use crate::script::{RelationDoc, RoleId};
use crate::util::tokenize;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterDocument {
    pub owner: RoleId,
    pub about: RoleId,
    pub content: String,
    pub monologue: String,
}

impl CharacterDocument {
    pub fn surfaced(&self, monologue_enabled: bool) -> &str {
        if monologue_enabled {
            &self.monologue
        } else {
            &self.content
        }
    }
}

/// One character's impressions of the others, triggered by name.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CharacterStore {
    owner: Option<RoleId>,
    docs: Vec<CharacterDocument>,
}

fn contains_run(haystack: &[String], needle: &[String]) -> bool {
    !needle.is_empty() && haystack.windows(needle.len()).any(|w| w == needle)
}

/// Whether `text` names `role`, by full name or given name, as whole words.
pub fn mentions(text: &str, role: &RoleId) -> bool {
    let words = tokenize(text);
    contains_run(&words, &tokenize(role.as_str())) || contains_run(&words, &tokenize(role.given_name()))
}

impl CharacterStore {
    pub fn new(owner: RoleId) -> Self {
        CharacterStore {
            owner: Some(owner),
            docs: Vec::new(),
        }
    }

    /// Documents for `owner` built from the script's relations.
    pub fn from_relations(owner: &RoleId, relations: &[RelationDoc]) -> Self {
        let mut store = CharacterStore::new(owner.clone());
        for r in relations.iter().filter(|r| &r.subject == owner) {
            if r.content.trim().is_empty() {
                continue;
            }
            store.add(CharacterDocument {
                owner: owner.clone(),
                about: r.object.clone(),
                content: r.content.clone(),
                monologue: r.monologue.clone(),
            });
        }
        store
    }

    pub fn add(&mut self, doc: CharacterDocument) {
        assert_ne!(doc.owner, doc.about, "a character document cannot be about its owner");
        self.docs.push(doc);
    }

    pub fn documents(&self) -> &[CharacterDocument] {
        &self.docs
    }

    /// Documents whose subject is named in `trigger_text`, in declaration
    /// order. Matching is case-insensitive on whole words, by full name or
    /// by given name.
    pub fn retrieve(&self, trigger_text: &str) -> Vec<&CharacterDocument> {
        self.docs.iter().filter(|d| mentions(trigger_text, &d.about)).collect()
    }
}
