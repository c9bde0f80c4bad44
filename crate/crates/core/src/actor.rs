//! Role-playing agents for actor characters.
//!
//! An actor keeps its own dialogue log of everything it has witnessed in
//! the current act. When the log outgrows the window, the older part is
//! summarized into points that become memory documents, and the log is
//! reduced to one narration turn holding the points plus the most recent
//! turns. A head that is itself a summary is never summarized again.

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::director::DirectorInstruction;
use crate::llm::parse::{parse_points, resolve_role, ParseError};
use crate::llm::{Bindings, Gateway, LlmError, LlmRequest, TemplateId};
use crate::retrieval::{
    CharacterDocument, CharacterStore, Embedder, MemoryDocument, MemoryStore, RetrievalConfig, RetrievalScore,
    StoreError,
};
use crate::script::{CharacterKind, CharacterProfile, DialogueTurn, RoleId, ScriptSetting};

pub const NO_MEMORIES: &str = "(no relevant memories)";
pub const NO_IMPRESSIONS: &str = "(no particular impressions)";
pub const ACT_JUST_BEGUN: &str = "(the act has just begun)";

const REPEAT_CORRECTION: &str = "Do not repeat your previous lines. Say something new.";
const ABNORMAL_CORRECTION: &str = "Stay in character and reply with exactly one line of dialogue for your role.";

/// Which side of the threshold counts as "too similar".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimilarityRule {
    /// Regenerate when relative edit distance is below the threshold.
    RejectBelow,
    /// Regenerate when it is above.
    RejectAbove,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorConfig {
    pub summarize_window: usize,
    pub keep_suffix: usize,
    pub retrieval_k: usize,
    pub similarity_threshold: f64,
    pub similarity_rule: SimilarityRule,
    /// How many of the actor's own latest lines a candidate is compared to.
    pub recent_own: usize,
    pub revision_retries: usize,
    pub instruction_enabled: bool,
    pub monologue_enabled: bool,
    pub abnormal_markers: Vec<String>,
    /// Recent log turns folded into retrieval queries and name triggers.
    pub context_turns: usize,
}

impl Default for ActorConfig {
    fn default() -> Self {
        ActorConfig {
            summarize_window: 16,
            keep_suffix: 8,
            retrieval_k: 5,
            similarity_threshold: 0.4,
            similarity_rule: SimilarityRule::RejectBelow,
            recent_own: 3,
            revision_retries: 2,
            instruction_enabled: true,
            monologue_enabled: true,
            abnormal_markers: default_abnormal_markers(),
            context_turns: 3,
        }
    }
}

pub fn default_abnormal_markers() -> Vec<String> {
    [
        "as an ai",
        "language model",
        "i cannot fulfill",
        "i can't assist",
        "i cannot assist",
        "i'm sorry, but i",
        "i am sorry, but i",
        "i'm unable to",
    ]
    .into_iter()
    .map(String::from)
    .collect()
}

#[derive(Debug, Error)]
pub enum ActorError {
    #[error("turn tick {got} is not after the last logged tick {last}")]
    OutOfOrderTick { last: u64, got: u64 },
    #[error("`{0}` is not an actor character")]
    NotAnActor(RoleId),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error(transparent)]
    Store(#[from] StoreError),
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DialogueLog {
    turns: Vec<DialogueTurn>,
    summarized_head: bool,
}

impl DialogueLog {
    pub fn turns(&self) -> &[DialogueTurn] {
        &self.turns
    }

    pub fn len(&self) -> usize {
        self.turns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.turns.is_empty()
    }

    pub fn summarized_head(&self) -> bool {
        self.summarized_head
    }

    pub fn last_tick(&self) -> Option<u64> {
        self.turns.last().map(|t| t.tick)
    }

    /// Turns by index from the end: `-1` is the newest.
    pub fn from_end(&self, index: usize) -> Option<&DialogueTurn> {
        self.turns.len().checked_sub(index).map(|i| &self.turns[i])
    }

    pub fn recent(&self, n: usize) -> &[DialogueTurn] {
        &self.turns[self.turns.len().saturating_sub(n)..]
    }
}

/// Render turns as script lines, or a sentinel when there are none.
pub fn render_history(turns: &[DialogueTurn]) -> String {
    if turns.is_empty() {
        return ACT_JUST_BEGUN.to_string();
    }
    turns.iter().map(DialogueTurn::render).collect::<Vec<_>>().join("\n")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SummaryPoints {
    pub points: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RejectReason {
    TooSimilar { distance: f64 },
    Abnormal(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Revision {
    Accept,
    Reject(RejectReason),
}

/// Character-level edit distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `lev(a, b) / max(|a|, |b|)` in characters; 0 for two empty strings.
pub fn relative_distance(a: &str, b: &str) -> f64 {
    let longest = a.chars().count().max(b.chars().count());
    if longest == 0 {
        return 0.0;
    }
    levenshtein(a, b) as f64 / longest as f64
}

fn is_prefix_only(text: &str) -> bool {
    let t = text.trim();
    t.strip_suffix(':')
        .is_some_and(|name| !name.is_empty() && name.split_whitespace().count() <= 3)
}

/// Judge one candidate line against the actor's recent lines.
pub fn revision_check(config: &ActorConfig, candidate: &str, recent_own: &[String]) -> Revision {
    let text = candidate.trim();
    if text.is_empty() {
        return Revision::Reject(RejectReason::Abnormal("empty response".into()));
    }
    if is_prefix_only(text) {
        return Revision::Reject(RejectReason::Abnormal("speaker prefix without a line".into()));
    }
    let lower = text.to_lowercase();
    if let Some(m) = config
        .abnormal_markers
        .iter()
        .find(|m| lower.contains(m.to_lowercase().as_str()))
    {
        return Revision::Reject(RejectReason::Abnormal(format!("contains `{m}`")));
    }
    let window = &recent_own[recent_own.len().saturating_sub(config.recent_own)..];
    for previous in window {
        let d = relative_distance(text, previous);
        let reject = match config.similarity_rule {
            SimilarityRule::RejectBelow => d < config.similarity_threshold,
            SimilarityRule::RejectAbove => d > config.similarity_threshold,
        };
        if reject {
            return Revision::Reject(RejectReason::TooSimilar { distance: d });
        }
    }
    Revision::Accept
}

/// The first line of `raw` spoken by `actor`: unprefixed lines count as the
/// actor's, lines prefixed with another scene character are skipped, and a
/// leading `NAME:` for the actor is stripped.
pub fn extract_own_line(raw: &str, actor: &RoleId, scene: &[RoleId]) -> Option<String> {
    let body = raw.trim();
    let body = body
        .strip_prefix("```")
        .map(|b| b.trim_start_matches(|c: char| c.is_alphanumeric()))
        .and_then(|b| b.rsplit_once("```").map(|(inner, _)| inner))
        .unwrap_or(body);
    for line in body.lines() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let text = match line.split_once(':') {
            Some((prefix, rest)) => match resolve_role(prefix, scene) {
                Some(r) if &r == actor => rest.trim(),
                Some(_) => continue,
                None => line,
            },
            None => line,
        };
        let text = text.trim_matches(|c| c == '"' || c == '“' || c == '”').trim();
        if !text.is_empty() {
            return Some(text.to_string());
        }
    }
    None
}

/// Serializable view of an actor's mutable state, for digests.
#[derive(Debug, Serialize)]
pub struct ActorView<'a> {
    pub role: &'a RoleId,
    pub log: &'a DialogueLog,
    pub memories: &'a [MemoryDocument],
    pub characters: &'a [CharacterDocument],
    pub recent_own: &'a [String],
    pub scene: &'a [RoleId],
    pub summarizations: usize,
}

/// One actor character's agent state.
#[derive(Debug, Clone)]
pub struct ActorState {
    profile: CharacterProfile,
    config: ActorConfig,
    log: DialogueLog,
    memory: MemoryStore,
    characters: CharacterStore,
    recent_own: Vec<String>,
    /// Everyone who can speak in the current scene, for prefix detection.
    scene: Vec<RoleId>,
    summarizations: usize,
}

impl ActorState {
    pub fn new(
        profile: CharacterProfile,
        memory: MemoryStore,
        characters: CharacterStore,
        config: ActorConfig,
    ) -> Result<Self, ActorError> {
        if profile.kind != CharacterKind::Actor {
            return Err(ActorError::NotAnActor(profile.role));
        }
        Ok(ActorState {
            scene: vec![profile.role.clone()],
            profile,
            config,
            log: DialogueLog::default(),
            memory,
            characters,
            recent_own: Vec::new(),
            summarizations: 0,
        })
    }

    /// Build an actor from the script: relations become character documents
    /// and seed memories are stored at tick 0.
    pub fn from_script(
        setting: &ScriptSetting,
        role: &RoleId,
        embedder: Arc<dyn Embedder>,
        retrieval: RetrievalConfig,
        config: ActorConfig,
    ) -> Result<Self, ActorError> {
        let profile = setting
            .character(role)
            .cloned()
            .ok_or_else(|| ActorError::NotAnActor(role.clone()))?;
        let mut memory = MemoryStore::new(role.clone(), embedder, retrieval);
        for m in setting.seed_memories.get(role).into_iter().flatten() {
            memory.add_memory(&m.content, &m.monologue, 0)?;
        }
        let characters = CharacterStore::from_relations(role, &setting.relations);
        ActorState::new(profile, memory, characters, config)
    }

    pub fn role(&self) -> &RoleId {
        &self.profile.role
    }

    pub fn profile(&self) -> &CharacterProfile {
        &self.profile
    }

    pub fn config(&self) -> &ActorConfig {
        &self.config
    }

    pub fn log(&self) -> &DialogueLog {
        &self.log
    }

    pub fn memory(&self) -> &MemoryStore {
        &self.memory
    }

    pub fn memory_mut(&mut self) -> &mut MemoryStore {
        &mut self.memory
    }

    pub fn characters(&self) -> &CharacterStore {
        &self.characters
    }

    pub fn view(&self) -> ActorView<'_> {
        ActorView {
            role: &self.profile.role,
            log: &self.log,
            memories: self.memory.documents(),
            characters: self.characters.documents(),
            recent_own: &self.recent_own,
            scene: &self.scene,
            summarizations: self.summarizations,
        }
    }

    pub fn add_impression(&mut self, about: RoleId, content: &str, monologue: &str) {
        self.characters.add(CharacterDocument {
            owner: self.profile.role.clone(),
            about,
            content: content.to_string(),
            monologue: monologue.to_string(),
        });
    }

    pub fn summarizations(&self) -> usize {
        self.summarizations
    }

    pub fn recent_own(&self) -> &[String] {
        &self.recent_own
    }

    /// Enter a new scene with an empty log. Memories carry over.
    pub fn enter_scene(&mut self, scene: Vec<RoleId>) {
        self.log = DialogueLog::default();
        self.recent_own.clear();
        self.scene = scene;
    }

    pub fn set_scene(&mut self, scene: Vec<RoleId>) {
        self.scene = scene;
    }

    pub fn recall(&self, query: &str, now_tick: u64, k: usize) -> Vec<(MemoryDocument, RetrievalScore)> {
        self.memory.retrieve(query, now_tick, k)
    }

    /// Impressions of characters named in `names`.
    pub fn impressions_of<'a>(&'a self, names: &'a [RoleId]) -> impl Iterator<Item = &'a CharacterDocument> + 'a {
        self.characters
            .documents()
            .iter()
            .filter(move |d| names.contains(&d.about))
    }

    /// Append a witnessed turn at the end of the log, summarizing if the
    /// log has outgrown its window.
    pub fn observe(&mut self, turn: DialogueTurn, gw: &mut Gateway) -> Result<Option<SummaryPoints>, ActorError> {
        if let Some(last) = self.log.last_tick() {
            if turn.tick <= last {
                return Err(ActorError::OutOfOrderTick { last, got: turn.tick });
            }
        }
        if &turn.role == self.role() {
            self.recent_own.push(turn.utterance.clone());
            let excess = self.recent_own.len().saturating_sub(self.config.recent_own);
            self.recent_own.drain(..excess);
        }
        self.log.turns.push(turn);
        self.maybe_summarize(gw)
    }

    pub fn maybe_summarize(&mut self, gw: &mut Gateway) -> Result<Option<SummaryPoints>, ActorError> {
        if self.log.len() <= self.config.summarize_window {
            return Ok(None);
        }
        let keep = self.config.keep_suffix.min(self.log.len());
        self.summarize_prefix(self.log.len() - keep, gw)
    }

    /// Summarize everything except a summary head, leaving only the new
    /// head. Used when the actor leaves a scene.
    pub fn flush(&mut self, gw: &mut Gateway) -> Result<Option<SummaryPoints>, ActorError> {
        self.summarize_prefix(self.log.len(), gw)
    }

    /// Summarize turns `[head, end)` where `head` skips an existing summary
    /// turn, then replace `[0, end)` with a single summary turn.
    fn summarize_prefix(&mut self, end: usize, gw: &mut Gateway) -> Result<Option<SummaryPoints>, ActorError> {
        let start = usize::from(self.log.summarized_head);
        if end <= start {
            return Ok(None);
        }
        let span = &self.log.turns[start..end];
        let tick = span.last().expect("non-empty span").tick;
        let bindings = Bindings::from([
            ("name".to_string(), self.role().to_string()),
            ("dialogue_history".to_string(), render_history(span)),
        ]);
        let mut points = gw.generate(&LlmRequest::new(TemplateId::SummarizeLog, bindings), parse_points)?;
        let mut seen = std::collections::BTreeSet::new();
        points.retain(|p| seen.insert(p.clone()));

        for point in &points {
            let monologue = if self.config.monologue_enabled {
                let raw = gw.complete(&LlmRequest::new(
                    TemplateId::Monologue,
                    Bindings::from([
                        ("name".to_string(), self.role().to_string()),
                        ("description".to_string(), self.profile.description.clone()),
                        ("content".to_string(), point.clone()),
                    ]),
                ))?;
                let raw = raw.trim();
                if raw.is_empty() {
                    point.clone()
                } else {
                    raw.to_string()
                }
            } else {
                point.clone()
            };
            self.memory.add_memory(point, &monologue, tick)?;
        }

        let head = DialogueTurn::new(RoleId::narration(), points.join(" "), tick);
        self.log.turns.splice(..end, [head]);
        self.log.summarized_head = true;
        self.summarizations += 1;
        Ok(Some(SummaryPoints { points }))
    }

    fn trigger_text(&self, instruction: Option<&DirectorInstruction>) -> String {
        let mut text = String::new();
        if let Some(i) = instruction {
            text.push_str(&i.outline);
            text.push('\n');
            text.push_str(&i.synopsis);
            text.push('\n');
            text.push_str(&i.keywords.join(", "));
            text.push('\n');
        }
        for t in self.log.recent(self.config.context_turns) {
            text.push_str(&t.render());
            text.push('\n');
        }
        text
    }

    fn memory_query(&self, instruction: Option<&DirectorInstruction>) -> String {
        let mut parts: Vec<&str> = Vec::new();
        if let Some(i) = instruction {
            parts.push(&i.synopsis);
        }
        parts.extend(
            self.log
                .recent(self.config.context_turns)
                .iter()
                .map(|t| t.utterance.as_str()),
        );
        if parts.iter().all(|p| p.trim().is_empty()) {
            parts.push(&self.profile.description);
        }
        parts.join("\n")
    }

    /// Bindings for the response prompt, and which template they fill.
    pub fn build_response_context(
        &self,
        instruction: Option<&DirectorInstruction>,
        background: &str,
        now_tick: u64,
    ) -> (TemplateId, Bindings) {
        let mono = self.config.monologue_enabled;
        let instruction = instruction.filter(|_| self.config.instruction_enabled);

        let trigger = self.trigger_text(instruction);
        let impressions: Vec<String> = self
            .characters
            .retrieve(&trigger)
            .into_iter()
            .map(|d| format!("About {}: {}", d.about, d.surfaced(mono)))
            .collect();
        let memories: Vec<String> = self
            .recall(&self.memory_query(instruction), now_tick, self.config.retrieval_k)
            .into_iter()
            .map(|(d, _)| format!("- {}", d.surfaced(mono)))
            .collect();

        let mut b = Bindings::new();
        b.insert("name".into(), self.role().to_string());
        b.insert("description".into(), self.profile.description.clone());
        b.insert("background".into(), background.to_string());
        b.insert(
            "impressions".into(),
            if impressions.is_empty() {
                NO_IMPRESSIONS.into()
            } else {
                impressions.join("\n")
            },
        );
        b.insert(
            "relevant_memories".into(),
            if memories.is_empty() {
                NO_MEMORIES.into()
            } else {
                format!("\n{}", memories.join("\n"))
            },
        );
        b.insert("dialogue_history".into(), render_history(self.log.turns()));

        match instruction {
            Some(i) => {
                b.insert("director_outline".into(), i.outline.clone());
                b.insert("instruction".into(), i.render());
                (TemplateId::ActorResponse, b)
            }
            None => (TemplateId::ActorResponseUndirected, b),
        }
    }

    /// Generate this actor's next line. The turn is not added to the log;
    /// the caller broadcasts it to everyone in the scene.
    pub fn respond(
        &self,
        instruction: Option<&DirectorInstruction>,
        background: &str,
        tick: u64,
        gw: &mut Gateway,
    ) -> Result<DialogueTurn, ActorError> {
        let (template, bindings) = self.build_response_context(instruction, background, tick);
        let mut request = LlmRequest::new(template, bindings);
        // Least similar rejected candidate, as (line, closest distance).
        let mut fallback: Option<(String, f64)> = None;
        let mut last_problem = String::from("no response");

        for _ in 0..=self.config.revision_retries {
            let raw = gw.complete(&request)?;
            let candidate = extract_own_line(&raw, self.role(), &self.scene).unwrap_or_default();
            match revision_check(&self.config, &candidate, &self.recent_own) {
                Revision::Accept => return Ok(DialogueTurn::new(self.role().clone(), candidate, tick)),
                Revision::Reject(RejectReason::TooSimilar { distance }) => {
                    let closest = self
                        .recent_own
                        .iter()
                        .map(|p| relative_distance(&candidate, p))
                        .fold(f64::INFINITY, f64::min);
                    if fallback.as_ref().is_none_or(|(_, d)| closest > *d) {
                        fallback = Some((candidate, closest));
                    }
                    last_problem = format!("too similar to a previous line (distance {distance:.2})");
                    if !request.extra_system.iter().any(|s| s == REPEAT_CORRECTION) {
                        request.extra_system.push(REPEAT_CORRECTION.into());
                    }
                }
                Revision::Reject(RejectReason::Abnormal(why)) => {
                    log::debug!("{}: abnormal response ({why}), regenerating", self.role());
                    last_problem = why;
                    if !request.extra_system.iter().any(|s| s == ABNORMAL_CORRECTION) {
                        request.extra_system.push(ABNORMAL_CORRECTION.into());
                    }
                }
            }
        }
        match fallback {
            Some((line, _)) => Ok(DialogueTurn::new(self.role().clone(), line, tick)),
            None => Err(LlmError::GenerationFailed {
                template,
                attempts: self.config.revision_retries + 1,
                last: ParseError::MalformedOutput(last_problem),
            }
            .into()),
        }
    }

    /// Bindings for an out-of-play interview.
    pub fn interview_bindings(&self, question: &str, conversation: &str, now_tick: u64) -> Bindings {
        let mono = self.config.monologue_enabled;
        let memories: Vec<String> = self
            .recall(question, now_tick, self.config.retrieval_k)
            .into_iter()
            .map(|(d, _)| format!("- {}", d.surfaced(mono)))
            .collect();
        Bindings::from([
            ("name".to_string(), self.role().to_string()),
            ("description".to_string(), self.profile.description.clone()),
            (
                "relevant_memories".to_string(),
                if memories.is_empty() {
                    NO_MEMORIES.into()
                } else {
                    format!("\n{}", memories.join("\n"))
                },
            ),
            ("dialogue_history".to_string(), render_history(self.log.turns())),
            ("conversation".to_string(), conversation.to_string()),
        ])
    }
}
