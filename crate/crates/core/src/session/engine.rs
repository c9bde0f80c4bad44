use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::{ConfigError, EngineConfig};
use super::events::{TurnEvent, TurnEventKind};
use crate::actor::{ActorError, ActorState, ActorView};
use crate::director::{Advance, DecisionRecord, DirectorError, DirectorState, SCENE_CONTINUES};
use crate::llm::parse::resolve_role;
use crate::llm::{Bindings, Gateway, GatewayState, LlmBackend, LlmError, LlmRequest, TemplateId, TemplateSet};
use crate::retrieval::{mentions, Embedder, HashedBowEmbedder};
use crate::script::{acts_in_column, Act, DialogueTurn, PlannedTurn, RoleId, ScriptSetting};
use crate::util::sha256_hex;

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("the session has finished")]
    SessionFinished,
    #[error("the session is paused for an interview")]
    Paused,
    #[error("the session is not paused")]
    NotPaused,
    #[error("unknown act `{0}`")]
    UnknownAct(String),
    #[error("act `{0}` is not playing right now")]
    ActNotActive(String),
    #[error("player must wait: {0}")]
    CooldownViolation(String),
    #[error("`{0}` is not an actor character")]
    UnknownRole(RoleId),
    #[error("player utterance is empty")]
    EmptyUtterance,
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Director(#[from] DirectorError),
    #[error(transparent)]
    Actor(#[from] ActorError),
    #[error(transparent)]
    Llm(#[from] LlmError),
    #[error("play record: {0}")]
    Record(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum SessionStatus {
    Running,
    Paused { role: RoleId },
    Finished,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum PlayerAction {
    Enter,
    Speak { text: String },
}

/// A player request, stamped with the tick it preceded.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlayerInput {
    pub before_tick: u64,
    pub act_id: String,
    pub action: PlayerAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Completion {
    Checked,
    Forced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObjectiveRun {
    pub objective_id: String,
    pub text: String,
    pub turns: Vec<DialogueTurn>,
    pub completion: Option<Completion>,
}

/// One act being played: its director, its actors and the shared scene log.
#[derive(Debug, Clone)]
pub struct ActRun {
    act: Act,
    director: DirectorState,
    actors: BTreeMap<RoleId, ActorState>,
    log: Vec<DialogueTurn>,
    player_pending: Option<String>,
    /// Realized turns since the player last spoke; `None` if never.
    turns_since_player: Option<usize>,
    objectives: Vec<ObjectiveRun>,
    complete: bool,
}

#[derive(Serialize)]
struct ActRunView<'a> {
    act_id: &'a str,
    director: &'a DirectorState,
    actors: Vec<ActorView<'a>>,
    log: &'a [DialogueTurn],
    player_pending: &'a Option<String>,
    turns_since_player: Option<usize>,
    objectives: &'a [ObjectiveRun],
    complete: bool,
}

struct Ctx<'a> {
    session_id: &'a str,
    column: usize,
    tick: u64,
    instruction_enabled: bool,
}

impl Ctx<'_> {
    fn event(&self, act: &ActRun, kind: TurnEventKind) -> TurnEvent {
        TurnEvent {
            session_id: self.session_id.to_string(),
            act_id: Some(act.act.id.clone()),
            kind,
            turn: None,
            objective_id: Some(act.director.current_objective().id.clone()),
            column: self.column,
            tick: self.tick,
            detail: None,
        }
    }
}

impl ActRun {
    fn new(act: &Act, director: DirectorState, actors: BTreeMap<RoleId, ActorState>) -> Self {
        let first = &act.objectives[0];
        ActRun {
            act: act.clone(),
            director,
            actors,
            log: Vec::new(),
            player_pending: None,
            turns_since_player: None,
            objectives: vec![ObjectiveRun {
                objective_id: first.id.clone(),
                text: first.text.clone(),
                turns: Vec::new(),
                completion: None,
            }],
            complete: false,
        }
    }

    pub fn act(&self) -> &Act {
        &self.act
    }

    pub fn director(&self) -> &DirectorState {
        &self.director
    }

    pub fn actors(&self) -> &BTreeMap<RoleId, ActorState> {
        &self.actors
    }

    pub fn log(&self) -> &[DialogueTurn] {
        &self.log
    }

    pub fn objectives(&self) -> &[ObjectiveRun] {
        &self.objectives
    }

    pub fn is_complete(&self) -> bool {
        self.complete
    }

    pub fn player_present(&self) -> bool {
        self.director.player_present()
    }

    pub fn player_pending(&self) -> Option<&str> {
        self.player_pending.as_deref()
    }

    pub fn completed_objectives(&self) -> usize {
        self.objectives.iter().filter(|o| o.completion.is_some()).count()
    }

    fn view(&self) -> ActRunView<'_> {
        ActRunView {
            act_id: &self.act.id,
            director: &self.director,
            actors: self.actors.values().map(ActorState::view).collect(),
            log: &self.log,
            player_pending: &self.player_pending,
            turns_since_player: self.turns_since_player,
            objectives: &self.objectives,
            complete: self.complete,
        }
    }

    fn background(&self) -> String {
        format!("Place: {}\nBackground: {}", self.act.place, self.act.background)
    }

    fn enter_player(&mut self) {
        if !self.director.player_present() {
            self.director.set_player_present();
            let scene = self.director.scene();
            for a in self.actors.values_mut() {
                a.set_scene(scene.clone());
            }
        }
    }

    fn plan(&mut self, tick: u64, gw: &mut Gateway) -> Result<(), SessionError> {
        let actors: Vec<&ActorState> = self.actors.values().collect();
        self.director.plan(&actors, &self.log, tick, gw)?;
        Ok(())
    }

    fn realize(&mut self, turn: DialogueTurn, gw: &mut Gateway) -> Result<(), SessionError> {
        for a in self.actors.values_mut() {
            a.observe(turn.clone(), gw)?;
        }
        self.director.record_turn();
        self.turns_since_player = self.turns_since_player.map(|n| n + 1);
        self.objectives
            .last_mut()
            .expect("an objective is open")
            .turns
            .push(turn.clone());
        self.log.push(turn);
        Ok(())
    }

    fn complete_objective(&mut self, how: Completion, reason: String, ctx: &Ctx<'_>, events: &mut Vec<TurnEvent>) {
        if how == Completion::Forced {
            self.director.force_complete(ctx.tick);
            events.push(TurnEvent {
                detail: Some(format!(
                    "turn limit of {} reached",
                    self.director.config().force_complete
                )),
                ..ctx.event(self, TurnEventKind::ForceComplete)
            });
        }
        self.objectives.last_mut().expect("an objective is open").completion = Some(how);
        let done = ctx.event(self, TurnEventKind::ObjectiveAdvanced);
        match self.director.advance_objective() {
            Advance::NextObjective => {
                events.push(TurnEvent {
                    detail: Some(reason),
                    ..done
                });
                let next = self.director.current_objective();
                self.objectives.push(ObjectiveRun {
                    objective_id: next.id.clone(),
                    text: next.text.clone(),
                    turns: Vec::new(),
                    completion: None,
                });
            }
            Advance::ActComplete => {
                self.complete = true;
                events.push(TurnEvent {
                    kind: TurnEventKind::ActComplete,
                    detail: Some(reason),
                    ..done
                });
            }
        }
    }

    /// Realize a pending player line, then check, then rebuild the plan.
    fn player_turn(
        &mut self,
        text: String,
        ctx: &Ctx<'_>,
        gw: &mut Gateway,
        events: &mut Vec<TurnEvent>,
    ) -> Result<(), SessionError> {
        let turn = DialogueTurn::new(self.director.player().clone(), text, ctx.tick);
        self.realize(turn.clone(), gw)?;
        self.turns_since_player = Some(0);
        events.push(TurnEvent {
            turn: Some(turn),
            ..ctx.event(self, TurnEventKind::PlayerAction)
        });
        let check = self.director.check_objective(&self.log, true, ctx.tick, gw)?;
        if check.completed {
            self.complete_objective(Completion::Checked, check.reason, ctx, events);
        } else if self.director.force_due() {
            self.complete_objective(Completion::Forced, "turn limit reached".into(), ctx, events);
        } else {
            self.plan(ctx.tick, gw)?;
            events.push(TurnEvent {
                detail: self.director.storyline().map(|s| s.new_outline.clone()),
                ..ctx.event(self, TurnEventKind::StorylineRebuilt)
            });
        }
        Ok(())
    }

    /// Dispatch the next planned line.
    fn dispatch_turn(
        &mut self,
        ctx: &Ctx<'_>,
        gw: &mut Gateway,
        events: &mut Vec<TurnEvent>,
    ) -> Result<(), SessionError> {
        if self.director.needs_plan() {
            self.plan(ctx.tick, gw)?;
        }
        let planned = match self.director.next_planned() {
            Some(p) => p,
            None => {
                // The fresh script held only player lines.
                self.plan(ctx.tick, gw)?;
                self.director.next_planned().unwrap_or(PlannedTurn {
                    role: RoleId::narration(),
                    expected_utterance: SCENE_CONTINUES.into(),
                })
            }
        };
        let (turn, kind) = match self.actors.get(&planned.role) {
            None => (
                DialogueTurn::new(RoleId::narration(), planned.expected_utterance.clone(), ctx.tick),
                TurnEventKind::Planned,
            ),
            Some(actor) => {
                let instruction = if ctx.instruction_enabled {
                    Some(
                        self.director
                            .make_instruction(&planned, actor, &self.log, ctx.tick, gw)?,
                    )
                } else {
                    None
                };
                let turn = actor.respond(instruction.as_ref(), &self.background(), ctx.tick, gw)?;
                (turn, TurnEventKind::ActorResponse)
            }
        };
        self.realize(turn.clone(), gw)?;
        events.push(TurnEvent {
            turn: Some(turn),
            ..ctx.event(self, kind)
        });

        if self.director.force_due() {
            self.complete_objective(Completion::Forced, "turn limit reached".into(), ctx, events);
        } else if self.director.check_due() {
            let check = self.director.check_objective(&self.log, false, ctx.tick, gw)?;
            if check.completed {
                self.complete_objective(Completion::Checked, check.reason, ctx, events);
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct SessionState {
    current_column: usize,
    act_runs: BTreeMap<String, ActRun>,
    /// Actors not currently on stage.
    archive: BTreeMap<RoleId, ActorState>,
    global_tick: u64,
    rr_cursor: usize,
    events: Vec<TurnEvent>,
    inputs: Vec<PlayerInput>,
    finished: bool,
}

#[derive(Serialize)]
struct StateView<'a> {
    current_column: usize,
    global_tick: u64,
    rr_cursor: usize,
    finished: bool,
    acts: Vec<ActRunView<'a>>,
    archive: Vec<ActorView<'a>>,
    events: &'a [TurnEvent],
    inputs: &'a [PlayerInput],
    gateway: &'a GatewayState,
}

struct PauseState {
    role: RoleId,
    snapshot: Box<(SessionState, GatewayState)>,
    conversation: Vec<(String, String)>,
}

/// Per-act progress, for listings.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActSummary {
    pub id: String,
    pub column: usize,
    pub objectives_completed: usize,
    pub objectives_total: usize,
    pub turn_count: usize,
    pub complete: bool,
    pub player_present: bool,
}

pub struct SessionBuilder {
    setting: ScriptSetting,
    backend: Arc<dyn LlmBackend>,
    id: String,
    config: EngineConfig,
    seed: u64,
    embedder: Arc<dyn Embedder>,
    templates: Arc<TemplateSet>,
}

impl SessionBuilder {
    pub fn new(setting: ScriptSetting, backend: Arc<dyn LlmBackend>) -> Self {
        SessionBuilder {
            setting,
            backend,
            id: "session".into(),
            config: EngineConfig::default(),
            seed: 0,
            embedder: Arc::new(HashedBowEmbedder::default()),
            templates: Arc::new(TemplateSet::default()),
        }
    }

    pub fn id(mut self, id: impl Into<String>) -> Self {
        self.id = id.into();
        self
    }

    pub fn config(mut self, config: EngineConfig) -> Self {
        self.config = config;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn embedder(mut self, embedder: Arc<dyn Embedder>) -> Self {
        self.embedder = embedder;
        self
    }

    pub fn templates(mut self, templates: Arc<TemplateSet>) -> Self {
        self.templates = templates;
        self
    }

    pub fn build(self) -> Result<PlaySession, SessionError> {
        self.config.validate()?;
        let gateway = Gateway::with_templates(self.backend, self.templates, self.config.gateway());
        let mut session = PlaySession {
            id: self.id,
            setting: self.setting,
            config: self.config,
            seed: self.seed,
            embedder: self.embedder,
            gateway,
            state: SessionState {
                current_column: 0,
                act_runs: BTreeMap::new(),
                archive: BTreeMap::new(),
                global_tick: 0,
                rr_cursor: 0,
                events: Vec::new(),
                inputs: Vec::new(),
                finished: false,
            },
            pause: None,
        };
        session.instantiate_column(0)?;
        Ok(session)
    }
}

/// A running play: the act-flow state machine over directors and actors.
pub struct PlaySession {
    id: String,
    setting: ScriptSetting,
    config: EngineConfig,
    seed: u64,
    embedder: Arc<dyn Embedder>,
    gateway: Gateway,
    state: SessionState,
    pause: Option<PauseState>,
}

impl PlaySession {
    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn setting(&self) -> &ScriptSetting {
        &self.setting
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn gateway(&self) -> &Gateway {
        &self.gateway
    }

    pub fn status(&self) -> SessionStatus {
        if let Some(p) = &self.pause {
            SessionStatus::Paused { role: p.role.clone() }
        } else if self.state.finished {
            SessionStatus::Finished
        } else {
            SessionStatus::Running
        }
    }

    pub fn current_column(&self) -> usize {
        self.state.current_column
    }

    pub fn global_tick(&self) -> u64 {
        self.state.global_tick
    }

    pub fn events(&self) -> &[TurnEvent] {
        &self.state.events
    }

    pub fn inputs(&self) -> &[PlayerInput] {
        &self.state.inputs
    }

    pub fn act_run(&self, act_id: &str) -> Option<&ActRun> {
        self.state.act_runs.get(act_id)
    }

    /// Instantiated acts in script order.
    pub fn act_runs(&self) -> impl Iterator<Item = &ActRun> {
        self.setting.acts.iter().filter_map(|a| self.state.act_runs.get(&a.id))
    }

    pub fn act_summaries(&self) -> Vec<ActSummary> {
        self.act_runs()
            .map(|r| ActSummary {
                id: r.act.id.clone(),
                column: r.act.column,
                objectives_completed: r.completed_objectives(),
                objectives_total: r.act.objectives.len(),
                turn_count: r.log.len(),
                complete: r.complete,
                player_present: r.player_present(),
            })
            .collect()
    }

    /// Every director's decisions, in tick order.
    pub fn decisions(&self) -> Vec<DecisionRecord> {
        let mut all: Vec<DecisionRecord> = self
            .act_runs()
            .flat_map(|r| r.director.decisions().iter().cloned())
            .collect();
        all.sort_by_key(|d| d.tick);
        all
    }

    /// Any actor's state, on stage or off.
    pub fn actor(&self, role: &RoleId) -> Option<&ActorState> {
        self.state
            .act_runs
            .values()
            .find_map(|r| r.actors.get(role))
            .or_else(|| self.state.archive.get(role))
    }

    /// SHA-256 over all mutable session state.
    pub fn state_digest(&self) -> String {
        let view = StateView {
            current_column: self.state.current_column,
            global_tick: self.state.global_tick,
            rr_cursor: self.state.rr_cursor,
            finished: self.state.finished,
            acts: self.state.act_runs.values().map(ActRun::view).collect(),
            archive: self.state.archive.values().map(ActorState::view).collect(),
            events: &self.state.events,
            inputs: &self.state.inputs,
            gateway: self.gateway.state(),
        };
        sha256_hex(&serde_json::to_vec(&view).expect("session state serializes"))
    }

    fn new_actor(&self, role: &RoleId) -> Result<ActorState, SessionError> {
        Ok(ActorState::from_script(
            &self.setting,
            role,
            self.embedder.clone(),
            self.config.retrieval,
            self.config.actor(),
        )?)
    }

    fn instantiate_column(&mut self, column: usize) -> Result<(), SessionError> {
        let acts: Vec<Act> = acts_in_column(&self.setting, column).into_iter().cloned().collect();
        for act in acts {
            let director = DirectorState::new(&self.setting, &act, self.config.director());
            let scene = director.scene();
            let mut actors = BTreeMap::new();
            for role in act.characters.iter().filter(|r| self.setting.is_actor(r)) {
                let mut actor = match self.state.archive.remove(role) {
                    Some(a) => a,
                    None => self.new_actor(role)?,
                };
                actor.enter_scene(scene.clone());
                actors.insert(role.clone(), actor);
            }
            self.state
                .act_runs
                .insert(act.id.clone(), ActRun::new(&act, director, actors));
        }
        self.state.current_column = column;
        self.state.rr_cursor = 0;
        Ok(())
    }

    fn column_act_ids(&self) -> Vec<String> {
        acts_in_column(&self.setting, self.state.current_column)
            .into_iter()
            .map(|a| a.id.clone())
            .collect()
    }

    fn next_act(&mut self) -> Option<String> {
        let ids = self.column_act_ids();
        let n = ids.len();
        for k in 0..n {
            let i = (self.state.rr_cursor + k) % n;
            if !self.state.act_runs[&ids[i]].complete {
                self.state.rr_cursor = (i + 1) % n;
                return Some(ids[i].clone());
            }
        }
        None
    }

    fn ensure_running(&self) -> Result<(), SessionError> {
        match self.status() {
            SessionStatus::Running => Ok(()),
            SessionStatus::Paused { .. } => Err(SessionError::Paused),
            SessionStatus::Finished => Err(SessionError::SessionFinished),
        }
    }

    /// Advance one act of the current column by one dialogue turn. On error
    /// the session is left as it was before the call.
    pub fn tick(&mut self) -> Result<Vec<TurnEvent>, SessionError> {
        self.ensure_running()?;
        let backup = (self.state.clone(), self.gateway.state().clone());
        match self.tick_inner() {
            Ok(events) => {
                self.state.events.extend(events.iter().cloned());
                Ok(events)
            }
            Err(e) => {
                self.state = backup.0;
                self.gateway.restore_state(backup.1);
                Err(e)
            }
        }
    }

    fn tick_inner(&mut self) -> Result<Vec<TurnEvent>, SessionError> {
        let act_id = self.next_act().expect("a running session has an incomplete act");
        self.state.global_tick += 1;
        let tick = self.state.global_tick;
        self.gateway.set_tick(tick);
        let ctx = Ctx {
            session_id: &self.id,
            column: self.state.current_column,
            tick,
            instruction_enabled: self.config.instruction_enabled,
        };
        let mut events = Vec::new();
        let run = self.state.act_runs.get_mut(&act_id).expect("scheduled act exists");
        match run.player_pending.take() {
            Some(text) => run.player_turn(text, &ctx, &mut self.gateway, &mut events)?,
            None => run.dispatch_turn(&ctx, &mut self.gateway, &mut events)?,
        }
        if run.complete {
            self.finish_act(&act_id, tick, &mut events)?;
        }
        Ok(events)
    }

    fn finish_act(&mut self, act_id: &str, tick: u64, events: &mut Vec<TurnEvent>) -> Result<(), SessionError> {
        let update = self.config.impression_update;
        let run = self.state.act_runs.get_mut(act_id).expect("finished act exists");
        let scene = run.director.scene();
        for actor in run.actors.values_mut() {
            let points = actor.flush(&mut self.gateway)?;
            if let (true, Some(points)) = (update, points) {
                let me = actor.role().clone();
                for p in &points.points {
                    for other in scene.iter().filter(|r| **r != me) {
                        if mentions(p, other) {
                            actor.add_impression(other.clone(), p, p);
                        }
                    }
                }
            }
        }
        let actors = std::mem::take(&mut run.actors);
        self.state.archive.extend(actors);

        let column_done = self.column_act_ids().iter().all(|id| self.state.act_runs[id].complete);
        if !column_done {
            return Ok(());
        }
        let next = self.state.current_column + 1;
        let session_event = |kind, column| TurnEvent {
            session_id: self.id.clone(),
            act_id: None,
            kind,
            turn: None,
            objective_id: None,
            column,
            tick,
            detail: None,
        };
        if next < self.setting.column_count() {
            events.push(session_event(TurnEventKind::ColumnAdvanced, next));
            self.instantiate_column(next)?;
        } else {
            events.push(session_event(TurnEventKind::Finished, self.state.current_column));
            self.state.finished = true;
        }
        Ok(())
    }

    fn active_run(&mut self, act_id: &str) -> Result<&mut ActRun, SessionError> {
        self.ensure_running()?;
        if self.setting.act(act_id).is_none() {
            return Err(SessionError::UnknownAct(act_id.to_string()));
        }
        let column = self.state.current_column;
        match self.state.act_runs.get_mut(act_id) {
            Some(r) if r.act.column == column && !r.complete => Ok(r),
            _ => Err(SessionError::ActNotActive(act_id.to_string())),
        }
    }

    /// Put the player into an act of the current column without speaking.
    pub fn enter_act(&mut self, act_id: &str) -> Result<(), SessionError> {
        let before_tick = self.state.global_tick + 1;
        self.active_run(act_id)?.enter_player();
        self.state.inputs.push(PlayerInput {
            before_tick,
            act_id: act_id.to_string(),
            action: PlayerAction::Enter,
        });
        Ok(())
    }

    /// Queue a player line; it is realized on the act's next tick.
    pub fn player_speak(&mut self, act_id: &str, text: &str) -> Result<(), SessionError> {
        let text = text.trim();
        let cooldown = self.config.player_cooldown_turns;
        let before_tick = self.state.global_tick + 1;
        let run = self.active_run(act_id)?;
        if text.is_empty() {
            return Err(SessionError::EmptyUtterance);
        }
        if run.player_pending.is_some() {
            return Err(SessionError::CooldownViolation(format!(
                "a player line is already waiting in act {act_id}"
            )));
        }
        if run.turns_since_player.is_some_and(|n| n < cooldown) {
            return Err(SessionError::CooldownViolation(format!(
                "the player spoke within the last {cooldown} turn(s) of act {act_id}"
            )));
        }
        run.enter_player();
        run.player_pending = Some(text.to_string());
        self.state.inputs.push(PlayerInput {
            before_tick,
            act_id: act_id.to_string(),
            action: PlayerAction::Speak { text: text.to_string() },
        });
        Ok(())
    }

    /// Tick until finished or `max_ticks` ticks have run. Returns the
    /// number of ticks run.
    pub fn run_to_end(&mut self, max_ticks: usize) -> Result<usize, SessionError> {
        let mut n = 0;
        while n < max_ticks && self.status() == SessionStatus::Running {
            self.tick()?;
            n += 1;
        }
        Ok(n)
    }

    /// Freeze the play and open an interview with `role`.
    pub fn pause_and_interview(&mut self, role: &RoleId) -> Result<(), SessionError> {
        if !self.setting.is_actor(role) {
            return Err(SessionError::UnknownRole(role.clone()));
        }
        self.ensure_running()?;
        self.pause = Some(PauseState {
            role: role.clone(),
            snapshot: Box::new((self.state.clone(), self.gateway.state().clone())),
            conversation: Vec::new(),
        });
        Ok(())
    }

    pub fn interview_ask(&mut self, question: &str) -> Result<String, SessionError> {
        let pause = self.pause.as_ref().ok_or(SessionError::NotPaused)?;
        let role = pause.role.clone();
        let mut conversation: String = pause
            .conversation
            .iter()
            .map(|(q, a)| format!("Interviewer: {q}\n{role}: {a}\n"))
            .collect();
        conversation.push_str(&format!("Interviewer: {question}"));

        let fresh;
        let actor = match self.actor(&role) {
            Some(a) => a,
            None => {
                fresh = self.new_actor(&role)?;
                &fresh
            }
        };
        let bindings: Bindings = actor.interview_bindings(question, &conversation, self.state.global_tick);
        let answer = self
            .gateway
            .complete(&LlmRequest::new(TemplateId::Interview, bindings))?
            .trim()
            .to_string();
        let answer = match answer.split_once(':') {
            Some((prefix, rest)) if resolve_role(prefix, std::slice::from_ref(&role)).is_some() => {
                rest.trim().to_string()
            }
            _ => answer,
        };
        self.pause
            .as_mut()
            .expect("checked above")
            .conversation
            .push((question.to_string(), answer.clone()));
        Ok(answer)
    }

    /// Restore the state captured at pause and continue.
    pub fn resume(&mut self) -> Result<(), SessionError> {
        let pause = self.pause.take().ok_or(SessionError::NotPaused)?;
        let (state, gateway) = *pause.snapshot;
        self.state = state;
        self.gateway.restore_state(gateway);
        Ok(())
    }
}
