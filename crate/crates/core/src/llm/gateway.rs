use std::fs::OpenOptions;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::backend::{BackendError, LlmBackend, LlmCall};
use super::parse::ParseError;
use super::template::{Bindings, ChatMessage, DecodeHints, TemplateError, TemplateId, TemplateSet};

#[derive(Debug, Clone, PartialEq)]
pub struct LlmRequest {
    pub template_id: TemplateId,
    pub bindings: Bindings,
    /// Overrides the template's own hints when set.
    pub hints: Option<DecodeHints>,
    /// Extra system lines appended after the rendered template.
    pub extra_system: Vec<String>,
}

impl LlmRequest {
    pub fn new(template_id: TemplateId, bindings: Bindings) -> Self {
        LlmRequest {
            template_id,
            bindings,
            hints: None,
            extra_system: Vec::new(),
        }
    }
}

/// One completed call, as recorded for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TranscriptEntry {
    pub seq: u64,
    pub tick: u64,
    pub template_id: TemplateId,
    pub messages: Vec<ChatMessage>,
    pub hints: DecodeHints,
    pub response: String,
}

#[derive(Debug, Error)]
pub enum LlmError {
    #[error(transparent)]
    Template(#[from] TemplateError),
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("replay diverged: {0}")]
    ReplayMismatch(String),
    #[error("session call budget of {cap} completions exhausted")]
    BudgetExceeded { cap: usize },
    #[error("generation failed for `{template}` after {attempts} attempt(s): {last}")]
    GenerationFailed {
        template: TemplateId,
        attempts: usize,
        last: ParseError,
    },
}

impl From<BackendError> for LlmError {
    fn from(e: BackendError) -> Self {
        match e {
            BackendError::Unavailable(m) => LlmError::BackendUnavailable(m),
            BackendError::ReplayMismatch(m) => LlmError::ReplayMismatch(m),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct GatewayConfig {
    /// Maximum completions per session; `None` is unlimited.
    pub call_cap: Option<usize>,
    /// Extra attempts after a malformed structured response.
    pub retries: usize,
}

impl Default for GatewayConfig {
    fn default() -> Self {
        GatewayConfig {
            call_cap: None,
            retries: 2,
        }
    }
}

/// Mutable per-session gateway state. Cloned for pause snapshots.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GatewayState {
    pub tick: u64,
    pub transcript: Vec<TranscriptEntry>,
}

/// Per-session entry point to the model: renders templates, enforces the
/// call budget, records every exchange and retries malformed output.
#[derive(Clone)]
pub struct Gateway {
    backend: Arc<dyn LlmBackend>,
    templates: Arc<TemplateSet>,
    config: GatewayConfig,
    state: GatewayState,
}

impl Gateway {
    pub fn new(backend: Arc<dyn LlmBackend>) -> Self {
        Gateway::with_templates(backend, Arc::new(TemplateSet::default()), GatewayConfig::default())
    }

    pub fn with_templates(backend: Arc<dyn LlmBackend>, templates: Arc<TemplateSet>, config: GatewayConfig) -> Self {
        Gateway {
            backend,
            templates,
            config,
            state: GatewayState::default(),
        }
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn set_tick(&mut self, tick: u64) {
        self.state.tick = tick;
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.state.transcript
    }

    pub fn state(&self) -> &GatewayState {
        &self.state
    }

    pub fn restore_state(&mut self, state: GatewayState) {
        self.state = state;
    }

    pub fn render(&self, request: &LlmRequest) -> Result<Vec<ChatMessage>, LlmError> {
        let mut messages = self.templates.get(request.template_id).render(&request.bindings)?;
        messages.extend(request.extra_system.iter().map(ChatMessage::system));
        Ok(messages)
    }

    /// Raw assistant text for one request.
    pub fn complete(&mut self, request: &LlmRequest) -> Result<String, LlmError> {
        if let Some(cap) = self.config.call_cap {
            if self.state.transcript.len() >= cap {
                return Err(LlmError::BudgetExceeded { cap });
            }
        }
        let messages = self.render(request)?;
        let hints = request.hints.unwrap_or(self.templates.get(request.template_id).hints);
        let response = self.backend.complete(&LlmCall {
            template_id: request.template_id,
            bindings: &request.bindings,
            messages: &messages,
            hints,
        })?;
        self.state.transcript.push(TranscriptEntry {
            seq: self.state.transcript.len() as u64,
            tick: self.state.tick,
            template_id: request.template_id,
            messages,
            hints,
            response: response.clone(),
        });
        Ok(response)
    }

    /// Complete and parse, retrying on malformed output. An empty script is
    /// not retried here; callers decide how to regenerate.
    pub fn generate<T>(
        &mut self,
        request: &LlmRequest,
        parse: impl Fn(&str) -> Result<T, ParseError>,
    ) -> Result<T, LlmError> {
        let attempts = self.config.retries + 1;
        for attempt in 1..=attempts {
            let raw = self.complete(request)?;
            match parse(&raw) {
                Ok(v) => return Ok(v),
                Err(last @ ParseError::EmptyScript) => {
                    return Err(LlmError::GenerationFailed {
                        template: request.template_id,
                        attempts: attempt,
                        last,
                    })
                }
                Err(last) if attempt == attempts => {
                    return Err(LlmError::GenerationFailed {
                        template: request.template_id,
                        attempts,
                        last,
                    })
                }
                Err(e) => log::debug!("{}: attempt {attempt} malformed: {e}", request.template_id),
            }
        }
        unreachable!("loop returns on the last attempt")
    }
}

/// Append entries as JSON lines.
pub fn append_transcript(path: &Path, entries: &[TranscriptEntry]) -> std::io::Result<()> {
    let mut f = OpenOptions::new().create(true).append(true).open(path)?;
    for e in entries {
        serde_json::to_writer(&mut f, e)?;
        f.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_transcript(path: &Path) -> std::io::Result<Vec<TranscriptEntry>> {
    let f = std::fs::File::open(path)?;
    BufReader::new(f)
        .lines()
        .filter(|l| l.as_ref().map_or(true, |l| !l.trim().is_empty()))
        .map(|l| {
            let l = l?;
            serde_json::from_str(&l).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
        })
        .collect()
}
