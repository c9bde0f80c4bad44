//! Per-act director: storyline outline, planned script, actor instructions
//! and objective checks, one objective at a time.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::actor::{render_history, ActorState, ACT_JUST_BEGUN, NO_MEMORIES};
use crate::llm::parse::{parse_check, parse_instruction, parse_outline, parse_script};
use crate::llm::{Bindings, CheckResult, Gateway, LlmError, LlmRequest, ParseError, TemplateId};
use crate::script::{
    Act, CharacterProfile, DialogueTurn, PlannedTurn, PlotObjective, RelationDoc, RoleId, ScriptSetting,
};
use crate::util::sha256_hex;

pub const SCENE_CONTINUES: &str = "(the scene continues)";
const NO_QUOTING: &str = "Do not quote the script line. Describe it in your own words.";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectorConfig {
    pub line_budget: usize,
    pub check_start: usize,
    pub force_complete: usize,
    pub retrieval_k: usize,
    pub monologue_enabled: bool,
}

impl Default for DirectorConfig {
    fn default() -> Self {
        DirectorConfig {
            line_budget: 5,
            check_start: 5,
            force_complete: 9,
            retrieval_k: 5,
            monologue_enabled: true,
        }
    }
}

#[derive(Debug, Error)]
pub enum DirectorError {
    #[error("director precondition violated: {0}")]
    Precondition(String),
    #[error(transparent)]
    Llm(#[from] LlmError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Storyline {
    pub id: u64,
    pub objective_id: String,
    pub previous_outline: String,
    pub new_outline: String,
    pub generated_at_tick: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlannedScript {
    pub storyline_id: u64,
    pub turns: Vec<PlannedTurn>,
    pub cursor: usize,
}

impl PlannedScript {
    pub fn exhausted(&self) -> bool {
        self.cursor >= self.turns.len()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectorInstruction {
    pub target: RoleId,
    pub outline: String,
    pub synopsis: String,
    pub keywords: Vec<String>,
}

impl DirectorInstruction {
    /// The instruction as handed to the actor prompt.
    pub fn render(&self) -> String {
        if self.keywords.is_empty() {
            self.synopsis.clone()
        } else {
            format!("{}\nKeywords: {}", self.synopsis, self.keywords.join(", "))
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionAction {
    Outline,
    Script,
    Instruct,
    Check,
    Force,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub tick: u64,
    pub act_id: String,
    pub objective_id: String,
    pub action: DecisionAction,
    /// SHA-256 of the decision's payload.
    pub digest: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completed: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    /// Turns realized under the objective when the decision was taken.
    pub turns_on_objective: usize,
    #[serde(default)]
    pub post_player: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Advance {
    NextObjective,
    ActComplete,
}

/// Normalized form used for the verbatim check.
fn normalize(text: &str) -> String {
    text.to_lowercase()
        .split_whitespace()
        .collect::<Vec<_>>()
        .join(" ")
        .trim_matches(|c: char| !c.is_alphanumeric())
        .to_string()
}

/// Whether `synopsis` reproduces the planned line word for word.
pub fn is_verbatim(synopsis: &str, line: &str) -> bool {
    let line = normalize(line);
    !line.is_empty() && normalize(synopsis).contains(&line)
}

/// A synopsis built without the model: the opening words of the first
/// clause, with the rest elided.
pub fn mechanical_synopsis(actor: &RoleId, line: &str) -> String {
    let clause = line
        .split(['.', ',', ';', '!', '?', '\n'])
        .map(str::trim)
        .find(|c| !c.is_empty())
        .unwrap_or("");
    let words: Vec<&str> = clause.split_whitespace().collect();
    let keep = match words.len() {
        0 | 1 => 0,
        2 | 3 => 1,
        _ => 2,
    };
    let candidate = if keep == 0 {
        format!("{actor} delivers the next line in character.")
    } else {
        format!(
            "{actor} says something that begins \"{} ...\".",
            words[..keep].join(" ")
        )
    };
    if is_verbatim(&candidate, line) {
        format!("{actor} delivers the next line in character.")
    } else {
        candidate
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirectorState {
    act: Act,
    config: DirectorConfig,
    profiles: Vec<CharacterProfile>,
    relations: Vec<RelationDoc>,
    player: RoleId,
    player_present: bool,
    objective_index: usize,
    complete: bool,
    storyline: Option<Storyline>,
    script: Option<PlannedScript>,
    turns_on_objective: usize,
    checks_made: usize,
    storylines_written: u64,
    decisions: Vec<DecisionRecord>,
}

impl DirectorState {
    pub fn new(setting: &ScriptSetting, act: &Act, config: DirectorConfig) -> Self {
        let player = setting.player().role.clone();
        let mut profiles: Vec<CharacterProfile> = act
            .characters
            .iter()
            .filter_map(|r| setting.character(r).cloned())
            .collect();
        if !act.has_character(&player) {
            profiles.push(setting.player().clone());
        }
        let in_play = |r: &RoleId| act.has_character(r) || r == &player;
        DirectorState {
            act: act.clone(),
            config,
            relations: setting
                .relations
                .iter()
                .filter(|r| in_play(&r.subject) && in_play(&r.object))
                .cloned()
                .collect(),
            profiles,
            player_present: act.has_character(&player),
            player,
            objective_index: 0,
            complete: false,
            storyline: None,
            script: None,
            turns_on_objective: 0,
            checks_made: 0,
            storylines_written: 0,
            decisions: Vec::new(),
        }
    }

    pub fn act(&self) -> &Act {
        &self.act
    }

    pub fn config(&self) -> &DirectorConfig {
        &self.config
    }

    pub fn objective_index(&self) -> usize {
        self.objective_index
    }

    pub fn current_objective(&self) -> &PlotObjective {
        &self.act.objectives[self.objective_index]
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn storyline(&self) -> Option<&Storyline> {
        self.storyline.as_ref()
    }

    pub fn script(&self) -> Option<&PlannedScript> {
        self.script.as_ref()
    }

    pub fn turns_on_objective(&self) -> usize {
        self.turns_on_objective
    }

    pub fn checks_made(&self) -> usize {
        self.checks_made
    }

    pub fn decisions(&self) -> &[DecisionRecord] {
        &self.decisions
    }

    pub fn player(&self) -> &RoleId {
        &self.player
    }

    pub fn player_present(&self) -> bool {
        self.player_present
    }

    pub fn set_player_present(&mut self) {
        self.player_present = true;
    }

    /// Everyone who may speak in the scene right now.
    pub fn scene(&self) -> Vec<RoleId> {
        let mut scene = self.act.characters.clone();
        if self.player_present && !scene.contains(&self.player) {
            scene.push(self.player.clone());
        }
        scene
    }

    fn scene_profiles(&self) -> impl Iterator<Item = &CharacterProfile> {
        let scene = self.scene();
        self.profiles.iter().filter(move |p| scene.contains(&p.role))
    }

    fn record(&mut self, tick: u64, action: DecisionAction, payload: &str) -> &mut DecisionRecord {
        self.decisions.push(DecisionRecord {
            tick,
            act_id: self.act.id.clone(),
            objective_id: self.current_objective().id.clone(),
            action,
            digest: sha256_hex(payload.as_bytes()),
            completed: None,
            reason: None,
            turns_on_objective: self.turns_on_objective,
            post_player: false,
        });
        self.decisions.last_mut().expect("just pushed")
    }

    fn ensure_active(&self) -> Result<(), DirectorError> {
        if self.complete {
            return Err(DirectorError::Precondition(format!("act {} is complete", self.act.id)));
        }
        Ok(())
    }

    fn characters_binding(&self) -> String {
        self.scene().iter().map(RoleId::as_str).collect::<Vec<_>>().join(", ")
    }

    fn relations_binding(&self) -> String {
        let scene = self.scene();
        let lines: Vec<String> = self
            .relations
            .iter()
            .filter(|r| scene.contains(&r.subject) && scene.contains(&r.object))
            .map(|r| format!("\n- {} and {}: {}", r.subject, r.object, r.content))
            .collect();
        if lines.is_empty() {
            " (none recorded)".into()
        } else {
            lines.concat()
        }
    }

    fn background_binding(&self) -> String {
        format!("Place: {}\nBackground: {}", self.act.place, self.act.background)
    }

    /// Write a fresh continuation outline for the current objective.
    pub fn write_storyline(
        &mut self,
        actors: &[&ActorState],
        log: &[DialogueTurn],
        tick: u64,
        gw: &mut Gateway,
    ) -> Result<&Storyline, DirectorError> {
        self.ensure_active()?;
        let mono = self.config.monologue_enabled;
        let scene = self.scene();
        let objective = self.current_objective().clone();

        let descriptions: String = self
            .scene_profiles()
            .map(|p| format!("\n- {}: {}", p.role, p.description))
            .collect();
        let mut impressions = String::new();
        let mut memories = String::new();
        for actor in actors {
            for d in actor.impressions_of(&scene) {
                impressions.push_str(&format!("\n- {} about {}: {}", d.owner, d.about, d.surfaced(mono)));
            }
            for (d, _) in actor.recall(&objective.text, tick, self.config.retrieval_k) {
                memories.push_str(&format!("\n- {}: {}", actor.role(), d.surfaced(mono)));
            }
        }
        if impressions.is_empty() {
            impressions = " (none recorded)".into();
        }
        if memories.is_empty() {
            memories = format!(" {NO_MEMORIES}");
        }

        let bindings = Bindings::from([
            ("characters".to_string(), self.characters_binding()),
            ("descriptions".to_string(), descriptions),
            ("relations".to_string(), self.relations_binding()),
            ("impressions".to_string(), impressions),
            ("dialogue_history".to_string(), format!("\n{}", render_history(log))),
            ("background".to_string(), self.background_binding()),
            ("act_goal".to_string(), objective.text.clone()),
            ("memories".to_string(), memories),
        ]);
        let outline = gw.generate(&LlmRequest::new(TemplateId::WriteOutline, bindings), parse_outline)?;
        self.storylines_written += 1;
        let storyline = Storyline {
            id: self.storylines_written,
            objective_id: objective.id,
            previous_outline: outline.previous_outline,
            new_outline: outline.new_outline,
            generated_at_tick: tick,
        };
        self.record(tick, DecisionAction::Outline, &storyline.new_outline);
        self.script = None;
        Ok(self.storyline.insert(storyline))
    }

    /// Turn the current storyline into at most `line_budget` planned turns.
    pub fn translate_script(&mut self, tick: u64, gw: &mut Gateway) -> Result<&PlannedScript, DirectorError> {
        self.ensure_active()?;
        let storyline = self
            .storyline
            .clone()
            .ok_or_else(|| DirectorError::Precondition("no storyline to translate".into()))?;
        let mut allowed = vec![RoleId::narration()];
        allowed.extend(self.scene());
        let prev = if storyline.previous_outline.trim().is_empty() {
            ACT_JUST_BEGUN.to_string()
        } else {
            storyline.previous_outline.clone()
        };
        let request = LlmRequest::new(
            TemplateId::TranslateScript,
            Bindings::from([
                ("num_lines".to_string(), self.config.line_budget.to_string()),
                ("characters".to_string(), self.characters_binding()),
                ("relations".to_string(), self.relations_binding()),
                ("prev_outline".to_string(), format!(" {prev}")),
                ("background".to_string(), self.background_binding()),
                ("act_outline".to_string(), format!(" {}", storyline.new_outline)),
            ]),
        );
        let budget = self.config.line_budget;
        let parse = |text: &str| parse_script(text, budget, &allowed);

        let mut turns = None;
        for attempt in 0..2 {
            match gw.generate(&request, parse) {
                Ok(script) => {
                    turns = Some(script.turns);
                    break;
                }
                Err(LlmError::GenerationFailed {
                    last: ParseError::EmptyScript,
                    ..
                }) => {
                    log::warn!(
                        "act {}: script had no usable lines (attempt {})",
                        self.act.id,
                        attempt + 1
                    );
                }
                Err(e) => return Err(e.into()),
            }
        }
        let turns = turns.unwrap_or_else(|| {
            vec![PlannedTurn {
                role: RoleId::narration(),
                expected_utterance: SCENE_CONTINUES.into(),
            }]
        });
        let payload = serde_json::to_string(&turns).expect("planned turns serialize");
        self.record(tick, DecisionAction::Script, &payload);
        Ok(self.script.insert(PlannedScript {
            storyline_id: storyline.id,
            turns,
            cursor: 0,
        }))
    }

    /// Outline and script in one step.
    pub fn plan(
        &mut self,
        actors: &[&ActorState],
        log: &[DialogueTurn],
        tick: u64,
        gw: &mut Gateway,
    ) -> Result<(), DirectorError> {
        self.write_storyline(actors, log, tick, gw)?;
        self.translate_script(tick, gw)?;
        Ok(())
    }

    /// Whether a new storyline is needed before the next dispatch.
    pub fn needs_plan(&self) -> bool {
        !self.complete
            && self
                .script
                .as_ref()
                .is_none_or(|s| s.turns[s.cursor..].iter().all(|t| t.role == self.player))
    }

    /// Pop the next planned turn. Lines planned for the player are skipped:
    /// the player speaks only when the human does.
    pub fn next_planned(&mut self) -> Option<PlannedTurn> {
        let player = self.player.clone();
        let script = self.script.as_mut()?;
        while script.cursor < script.turns.len() {
            let turn = script.turns[script.cursor].clone();
            script.cursor += 1;
            if turn.role != player {
                return Some(turn);
            }
        }
        None
    }

    /// Instruct an actor about their planned line without quoting it.
    pub fn make_instruction(
        &mut self,
        planned: &PlannedTurn,
        actor: &ActorState,
        log: &[DialogueTurn],
        tick: u64,
        gw: &mut Gateway,
    ) -> Result<DirectorInstruction, DirectorError> {
        self.ensure_active()?;
        if planned.role.is_narration() || &planned.role != actor.role() {
            return Err(DirectorError::Precondition(format!(
                "instruction target `{}` is not the actor `{}`",
                planned.role,
                actor.role()
            )));
        }
        let outline = self
            .storyline
            .as_ref()
            .map(|s| s.new_outline.clone())
            .ok_or_else(|| DirectorError::Precondition("no storyline".into()))?;
        let mut request = LlmRequest::new(
            TemplateId::InstructActor,
            Bindings::from([
                ("characters".to_string(), self.characters_binding()),
                ("relations".to_string(), self.relations_binding()),
                ("dialogue_history".to_string(), format!("\n{}", render_history(log))),
                ("background".to_string(), self.background_binding()),
                ("act_goal".to_string(), self.current_objective().text.clone()),
                ("actor_name".to_string(), planned.role.to_string()),
                ("content".to_string(), planned.expected_utterance.clone()),
                ("description".to_string(), actor.profile().description.clone()),
            ]),
        );

        let mut parsed = gw.generate(&request, parse_instruction)?;
        if is_verbatim(&parsed.synopsis, &planned.expected_utterance) {
            request.extra_system.push(NO_QUOTING.into());
            parsed = gw.generate(&request, parse_instruction)?;
            if is_verbatim(&parsed.synopsis, &planned.expected_utterance) {
                parsed.synopsis = mechanical_synopsis(&planned.role, &planned.expected_utterance);
            }
        }
        let instruction = DirectorInstruction {
            target: planned.role.clone(),
            outline,
            synopsis: parsed.synopsis,
            keywords: parsed.keywords,
        };
        let payload = serde_json::to_string(&instruction).expect("instruction serializes");
        self.record(tick, DecisionAction::Instruct, &payload);
        Ok(instruction)
    }

    /// Count one realized turn under the current objective.
    pub fn record_turn(&mut self) {
        self.turns_on_objective += 1;
    }

    pub fn check_due(&self) -> bool {
        self.turns_on_objective >= self.config.check_start
    }

    pub fn force_due(&self) -> bool {
        self.turns_on_objective >= self.config.force_complete
    }

    /// Ask whether the current objective has been reached. A failed
    /// generation counts as "not yet".
    pub fn check_objective(
        &mut self,
        log: &[DialogueTurn],
        post_player: bool,
        tick: u64,
        gw: &mut Gateway,
    ) -> Result<CheckResult, DirectorError> {
        self.ensure_active()?;
        if !post_player && !self.check_due() {
            return Err(DirectorError::Precondition(format!(
                "objective check after {} turn(s); checks start at {}",
                self.turns_on_objective, self.config.check_start
            )));
        }
        let request = LlmRequest::new(
            TemplateId::CheckObjective,
            Bindings::from([
                ("characters".to_string(), self.characters_binding()),
                ("dialogue_history".to_string(), format!("\n{}", render_history(log))),
                ("background".to_string(), self.background_binding()),
                ("act_goal".to_string(), self.current_objective().text.clone()),
            ]),
        );
        let result = match gw.generate(&request, parse_check) {
            Ok(r) => r,
            Err(e @ LlmError::GenerationFailed { .. }) => {
                log::warn!(
                    "act {}: objective check failed, treating as not completed: {e}",
                    self.act.id
                );
                CheckResult {
                    completed: false,
                    reason: format!("check failed: {e}"),
                }
            }
            Err(e) => return Err(e.into()),
        };
        self.checks_made += 1;
        let payload = serde_json::to_string(&result).expect("check serializes");
        let rec = self.record(tick, DecisionAction::Check, &payload);
        rec.completed = Some(result.completed);
        rec.reason = Some(result.reason.clone());
        rec.post_player = post_player;
        Ok(result)
    }

    /// Mark the objective completed by the turn limit. No model call.
    pub fn force_complete(&mut self, tick: u64) {
        let payload = format!("force:{}:{}", self.current_objective().id, self.turns_on_objective);
        let reason = format!("turn limit of {} reached", self.config.force_complete);
        let rec = self.record(tick, DecisionAction::Force, &payload);
        rec.completed = Some(true);
        rec.reason = Some(reason);
    }

    /// Move past a completed objective.
    pub fn advance_objective(&mut self) -> Advance {
        self.turns_on_objective = 0;
        self.checks_made = 0;
        self.storyline = None;
        self.script = None;
        if self.objective_index + 1 < self.act.objectives.len() {
            self.objective_index += 1;
            Advance::NextObjective
        } else {
            self.complete = true;
            Advance::ActComplete
        }
    }

    /// Drop the planned script so the next dispatch replans.
    pub fn discard_script(&mut self) {
        self.script = None;
    }
}
