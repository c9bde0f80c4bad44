use std::collections::VecDeque;
use std::sync::Mutex;

use thiserror::Error;

use super::gateway::TranscriptEntry;
use super::template::{Bindings, ChatMessage, DecodeHints, TemplateId};

/// One fully rendered completion request as seen by a backend.
#[derive(Debug, Clone, Copy)]
pub struct LlmCall<'a> {
    pub template_id: TemplateId,
    pub bindings: &'a Bindings,
    pub messages: &'a [ChatMessage],
    pub hints: DecodeHints,
}

#[derive(Debug, Clone, Error, PartialEq, Eq)]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    Unavailable(String),
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
}

/// A chat-completion provider. Shared across sessions, so implementations
/// keep any mutable state behind interior locks.
pub trait LlmBackend: Send + Sync {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError>;
}

impl<T: LlmBackend + ?Sized> LlmBackend for std::sync::Arc<T> {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError> {
        (**self).complete(call)
    }
}

#[derive(Debug)]
struct Rule {
    template: TemplateId,
    pattern: Option<String>,
    responses: VecDeque<String>,
    sticky: bool,
}

impl Rule {
    fn matches(&self, call: &LlmCall<'_>) -> bool {
        if self.template != call.template_id || self.responses.is_empty() {
            return false;
        }
        match &self.pattern {
            None => true,
            Some(p) => call.bindings.values().any(|v| v.contains(p.as_str())),
        }
    }
}

/// Canned responses keyed by template and an optional binding substring.
///
/// Rules are tried in insertion order. A queued rule hands out its
/// responses once each and then stops matching; a sticky rule repeats its
/// last response forever. Unmatched calls go to the fallback backend.
#[derive(Default)]
pub struct ScriptedBackend {
    rules: Mutex<Vec<Rule>>,
    calls: Mutex<Vec<TemplateId>>,
    fallback: Option<Box<dyn LlmBackend>>,
}

impl ScriptedBackend {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_fallback(mut self, fallback: impl LlmBackend + 'static) -> Self {
        self.fallback = Some(Box::new(fallback));
        self
    }

    fn push(self, template: TemplateId, pattern: Option<&str>, response: &str, sticky: bool) -> Self {
        self.rules.lock().unwrap().push(Rule {
            template,
            pattern: pattern.map(str::to_string),
            responses: VecDeque::from([response.to_string()]),
            sticky,
        });
        self
    }

    /// Queue a one-shot response.
    pub fn on(self, template: TemplateId, response: &str) -> Self {
        self.push(template, None, response, false)
    }

    /// Queue a one-shot response for calls whose bindings contain `pattern`.
    pub fn on_matching(self, template: TemplateId, pattern: &str, response: &str) -> Self {
        self.push(template, Some(pattern), response, false)
    }

    pub fn always(self, template: TemplateId, response: &str) -> Self {
        self.push(template, None, response, true)
    }

    pub fn always_matching(self, template: TemplateId, pattern: &str, response: &str) -> Self {
        self.push(template, Some(pattern), response, true)
    }

    /// Number of calls served so far for `template`.
    pub fn calls(&self, template: TemplateId) -> usize {
        self.calls.lock().unwrap().iter().filter(|t| **t == template).count()
    }
}

impl LlmBackend for ScriptedBackend {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError> {
        self.calls.lock().unwrap().push(call.template_id);
        {
            let mut rules = self.rules.lock().unwrap();
            if let Some(rule) = rules.iter_mut().find(|r| r.matches(call)) {
                let out = if rule.sticky {
                    rule.responses.front().cloned()
                } else {
                    rule.responses.pop_front()
                };
                return Ok(out.expect("matching rule has a response"));
            }
        }
        match &self.fallback {
            Some(f) => f.complete(call),
            None => Err(BackendError::Unavailable(format!(
                "no scripted response for `{}`",
                call.template_id
            ))),
        }
    }
}

/// Replays a recorded transcript in order, checking each request against
/// what was recorded.
pub struct ReplayBackend {
    entries: Vec<TranscriptEntry>,
    cursor: Mutex<usize>,
}

impl ReplayBackend {
    pub fn new(entries: Vec<TranscriptEntry>) -> Self {
        ReplayBackend {
            entries,
            cursor: Mutex::new(0),
        }
    }

    pub fn remaining(&self) -> usize {
        self.entries.len() - *self.cursor.lock().unwrap()
    }
}

impl LlmBackend for ReplayBackend {
    fn complete(&self, call: &LlmCall<'_>) -> Result<String, BackendError> {
        let mut cursor = self.cursor.lock().unwrap();
        let entry = self.entries.get(*cursor).ok_or_else(|| {
            BackendError::ReplayMismatch(format!(
                "transcript exhausted at call {} (`{}`)",
                *cursor, call.template_id
            ))
        })?;
        if entry.template_id != call.template_id {
            return Err(BackendError::ReplayMismatch(format!(
                "call {}: expected `{}`, got `{}`",
                *cursor, entry.template_id, call.template_id
            )));
        }
        if entry.messages != call.messages {
            return Err(BackendError::ReplayMismatch(format!(
                "call {}: prompt for `{}` differs from the recording",
                *cursor, call.template_id
            )));
        }
        *cursor += 1;
        Ok(entry.response.clone())
    }
}
