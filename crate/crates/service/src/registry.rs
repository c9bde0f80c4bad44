use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, RwLock};

use dramaturg_core::llm::BackendSpec;
use dramaturg_core::script::{demo_script, load_script, ScriptSetting};
use dramaturg_core::session::{
    ActSummary, EngineConfig, PlaySession, SessionBuilder, SessionError, SessionStatus, TurnEvent,
};
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex};

use crate::config::ServiceConfig;
use crate::problem::Problem;

pub const DEMO_SCRIPT_ID: &str = "demo";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EventFrame {
    pub sequence: u64,
    pub event: TurnEvent,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ApiSession {
    pub session_id: String,
    pub setting_title: String,
    pub status: SessionStatus,
    pub current_column: usize,
    pub global_tick: u64,
    /// Frames buffered so far; the next frame has this sequence number.
    pub event_count: u64,
    pub acts: Vec<ActSummary>,
}

/// Body of a create request. Exactly one of `script_id` and `script` may be
/// given; with neither the bundled demo is played.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    pub script_id: Option<String>,
    /// Inline script, TOML.
    pub script: Option<String>,
    /// Overrides on top of the service's engine defaults.
    pub config: Option<serde_json::Map<String, serde_json::Value>>,
    pub seed: Option<u64>,
    pub backend: Option<BackendSpec>,
}

struct Slot {
    engine: PlaySession,
    checkpointed_tick: Option<u64>,
}

/// One live session. The engine sits behind an async mutex so mutating
/// requests run one at a time; frames and the summary are mirrored outside
/// it so readers never wait on a tick in progress.
pub struct SessionHandle {
    id: String,
    slot: Mutex<Slot>,
    frames: RwLock<Vec<EventFrame>>,
    summary: RwLock<ApiSession>,
    notify: watch::Sender<u64>,
    checkpoint: Option<(PathBuf, u64)>,
}

impl SessionHandle {
    fn new(engine: PlaySession, checkpoint: Option<(PathBuf, u64)>) -> Self {
        let summary = summarize(&engine, 0);
        let handle = SessionHandle {
            id: engine.id().to_string(),
            slot: Mutex::new(Slot {
                engine,
                checkpointed_tick: None,
            }),
            frames: RwLock::new(Vec::new()),
            summary: RwLock::new(summary),
            notify: watch::channel(0).0,
            checkpoint,
        };
        let slot = handle.slot.try_lock().expect("fresh mutex");
        handle.sync(&slot.engine);
        drop(slot);
        handle
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn summary(&self) -> ApiSession {
        self.summary.read().expect("summary lock").clone()
    }

    pub fn frame_count(&self) -> u64 {
        self.frames.read().expect("frames lock").len() as u64
    }

    pub fn frames_from(&self, from: u64, limit: usize) -> Vec<EventFrame> {
        let frames = self.frames.read().expect("frames lock");
        let start = (from as usize).min(frames.len());
        frames[start..].iter().take(limit).cloned().collect()
    }

    pub fn subscribe(&self) -> watch::Receiver<u64> {
        self.notify.subscribe()
    }

    pub fn is_finished(&self) -> bool {
        self.summary.read().expect("summary lock").status == SessionStatus::Finished
    }

    /// Run `f` on the engine off the async runtime, then publish whatever
    /// frames it produced. Returns `f`'s value and the frames.
    pub async fn mutate<T, F>(self: &Arc<Self>, f: F) -> Result<(T, Vec<EventFrame>), Problem>
    where
        T: Send + 'static,
        F: FnOnce(&mut PlaySession) -> Result<T, SessionError> + Send + 'static,
    {
        let handle = Arc::clone(self);
        tokio::task::spawn_blocking(move || {
            let mut slot = handle.slot.blocking_lock();
            let outcome = f(&mut slot.engine);
            let fresh = handle.sync(&slot.engine);
            handle.maybe_checkpoint(&mut slot);
            outcome.map(|v| (v, fresh)).map_err(Problem::from)
        })
        .await
        .map_err(|e| Problem::internal(format!("engine task failed: {e}")))?
    }

    /// Read-only access to the engine.
    pub async fn inspect<T>(&self, f: impl FnOnce(&PlaySession) -> T) -> T {
        let slot = self.slot.lock().await;
        f(&slot.engine)
    }

    fn sync(&self, engine: &PlaySession) -> Vec<EventFrame> {
        let fresh: Vec<EventFrame> = {
            let mut frames = self.frames.write().expect("frames lock");
            let start = frames.len();
            let new: Vec<EventFrame> = engine.events()[start..]
                .iter()
                .enumerate()
                .map(|(i, e)| EventFrame {
                    sequence: (start + i) as u64,
                    event: e.clone(),
                })
                .collect();
            frames.extend(new.iter().cloned());
            new
        };
        let count = self.frame_count();
        *self.summary.write().expect("summary lock") = summarize(engine, count);
        self.notify.send_replace(count);
        fresh
    }

    fn maybe_checkpoint(&self, slot: &mut Slot) {
        let Some((dir, every)) = &self.checkpoint else {
            return;
        };
        let tick = slot.engine.global_tick();
        let finished = slot.engine.status() == SessionStatus::Finished;
        let due = match slot.checkpointed_tick {
            None => tick > 0,
            Some(last) => tick >= last + every || (finished && tick > last),
        };
        if !due {
            return;
        }
        match write_checkpoint(dir, &self.id, &slot.engine) {
            Ok(()) => slot.checkpointed_tick = Some(tick),
            Err(e) => log::warn!("checkpoint of {} failed: {e}", self.id),
        }
    }
}

pub fn checkpoint_path(dir: &Path, session_id: &str) -> PathBuf {
    dir.join(format!("{session_id}.json"))
}

fn write_checkpoint(dir: &Path, id: &str, engine: &PlaySession) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    let path = checkpoint_path(dir, id);
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, engine.export_play().to_json())?;
    std::fs::rename(tmp, path)
}

fn summarize(engine: &PlaySession, event_count: u64) -> ApiSession {
    ApiSession {
        session_id: engine.id().to_string(),
        setting_title: engine.setting().title.clone(),
        status: engine.status(),
        current_column: engine.current_column(),
        global_tick: engine.global_tick(),
        event_count,
        acts: engine.act_summaries(),
    }
}

/// Shared state of the service: configuration, known scripts, live sessions.
pub struct Registry {
    config: ServiceConfig,
    scripts: BTreeMap<String, ScriptSetting>,
    sessions: RwLock<BTreeMap<String, Arc<SessionHandle>>>,
    counter: AtomicU64,
}

impl Registry {
    pub fn new(config: ServiceConfig) -> Result<Self, String> {
        let mut scripts = BTreeMap::new();
        scripts.insert(DEMO_SCRIPT_ID.to_string(), demo_script());
        if let Some(dir) = &config.scripts_dir {
            let entries = std::fs::read_dir(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
            let mut paths: Vec<PathBuf> = entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
            paths.sort();
            for path in paths.into_iter().filter(|p| p.extension().is_some_and(|x| x == "toml")) {
                let id = path
                    .file_stem()
                    .expect("toml file has a stem")
                    .to_string_lossy()
                    .to_string();
                let bytes = std::fs::read(&path).map_err(|e| format!("{}: {e}", path.display()))?;
                let setting = load_script(&bytes).map_err(|e| format!("{}: {e}", path.display()))?;
                scripts.insert(id, setting);
            }
        }
        Ok(Registry {
            config,
            scripts,
            sessions: RwLock::new(BTreeMap::new()),
            counter: AtomicU64::new(0),
        })
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    pub fn script_ids(&self) -> Vec<String> {
        self.scripts.keys().cloned().collect()
    }

    pub fn get(&self, id: &str) -> Result<Arc<SessionHandle>, Problem> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| Problem::unknown_session(id))
    }

    pub fn list(&self) -> Vec<ApiSession> {
        self.sessions
            .read()
            .expect("sessions lock")
            .values()
            .map(|h| h.summary())
            .collect()
    }

    fn engine_config(
        &self,
        overrides: Option<serde_json::Map<String, serde_json::Value>>,
    ) -> Result<EngineConfig, Problem> {
        let Some(overrides) = overrides else {
            return Ok(self.config.engine.clone());
        };
        let mut base = serde_json::to_value(&self.config.engine).expect("engine config serializes");
        let fields = base.as_object_mut().expect("engine config is an object");
        for (k, v) in overrides {
            if !fields.contains_key(&k) {
                return Err(Problem::bad_request(format!("unknown config field `{k}`")));
            }
            fields.insert(k, v);
        }
        serde_json::from_value(base).map_err(|e| Problem::bad_request(format!("config: {e}")))
    }

    pub fn create(&self, request: CreateSession) -> Result<Arc<SessionHandle>, Problem> {
        let setting = match (request.script_id, request.script) {
            (Some(_), Some(_)) => return Err(Problem::bad_request("give either `script_id` or `script`, not both")),
            (None, Some(text)) => load_script(text.as_bytes()).map_err(|e| {
                Problem::new(
                    axum::http::StatusCode::UNPROCESSABLE_ENTITY,
                    "invalid_script",
                    e.to_string(),
                )
            })?,
            (id, None) => {
                let id = id.unwrap_or_else(|| DEMO_SCRIPT_ID.into());
                self.scripts.get(&id).cloned().ok_or_else(|| {
                    Problem::new(
                        axum::http::StatusCode::NOT_FOUND,
                        "unknown_script",
                        format!("no script `{id}`"),
                    )
                })?
            }
        };
        let seed = request.seed.unwrap_or(0);
        let backend = request.backend.as_ref().unwrap_or(&self.config.backend).build(seed);
        let n = self.counter.fetch_add(1, Ordering::SeqCst) + 1;
        let id = format!("s{n}");
        let engine = SessionBuilder::new(setting, backend)
            .id(id.clone())
            .config(self.engine_config(request.config)?)
            .seed(seed)
            .build()?;
        let checkpoint = self
            .config
            .checkpoint_dir
            .clone()
            .map(|d| (d, self.config.checkpoint_every.max(1)));
        let handle = Arc::new(SessionHandle::new(engine, checkpoint));
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id, Arc::clone(&handle));
        Ok(handle)
    }
}
