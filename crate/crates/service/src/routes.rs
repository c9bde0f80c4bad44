use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use dramaturg_core::script::RoleId;
use dramaturg_core::session::{SessionError, SessionStatus};
use serde::{Deserialize, Serialize};

use crate::problem::Problem;
use crate::registry::{ApiSession, CreateSession, EventFrame, Registry, SessionHandle};

type AppState = Arc<Registry>;
type ApiResult<T> = Result<T, Problem>;

/// Frames sent per read of the buffer when streaming.
const STREAM_BATCH: usize = 256;

#[derive(Debug, Default, Deserialize)]
pub struct FromQuery {
    #[serde(default)]
    pub from: u64,
}

#[derive(Debug, Deserialize)]
pub struct AdvanceBody {
    #[serde(default = "one")]
    pub ticks: usize,
}

fn one() -> usize {
    1
}

#[derive(Debug, Deserialize)]
pub struct EnterBody {
    pub act_id: String,
}

#[derive(Debug, Deserialize)]
pub struct SpeakBody {
    pub act_id: String,
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Ack {
    pub accepted: bool,
    pub session: ApiSession,
}

#[derive(Debug, Deserialize)]
pub struct PauseBody {
    pub role: String,
}

#[derive(Debug, Deserialize)]
pub struct InterviewBody {
    /// Pauses for this character first if the play is running.
    pub role: Option<String>,
    pub question: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct InterviewAnswer {
    pub role: String,
    pub question: String,
    pub answer: String,
}

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/scripts", get(list_scripts))
        .route("/sessions", post(create_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/advance", post(advance))
        .route("/sessions/{id}/events", get(events))
        .route("/sessions/{id}/stream", get(stream))
        .route("/sessions/{id}/enter", post(enter))
        .route("/sessions/{id}/player", post(player_speak))
        .route("/sessions/{id}/pause", post(pause))
        .route("/sessions/{id}/interview", post(interview))
        .route("/sessions/{id}/resume", post(resume))
        .route("/sessions/{id}/export", get(export))
        .with_state(registry)
}

fn body<T>(b: Result<Json<T>, JsonRejection>) -> ApiResult<T> {
    b.map(|Json(v)| v).map_err(Problem::from)
}

async fn list_scripts(State(reg): State<AppState>) -> Json<Vec<String>> {
    Json(reg.script_ids())
}

async fn create_session(
    State(reg): State<AppState>,
    b: Result<Json<CreateSession>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<ApiSession>)> {
    let handle = reg.create(body(b)?)?;
    if let Some(ms) = reg.config().autoplay_ms {
        tokio::spawn(autoplay(Arc::clone(&handle), Duration::from_millis(ms)));
    }
    Ok((StatusCode::CREATED, Json(handle.summary())))
}

async fn list_sessions(State(reg): State<AppState>) -> Json<Vec<ApiSession>> {
    Json(reg.list())
}

async fn get_session(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<ApiSession>> {
    Ok(Json(reg.get(&id)?.summary()))
}

async fn advance(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<AdvanceBody>, JsonRejection>,
) -> ApiResult<Json<Vec<EventFrame>>> {
    let handle = reg.get(&id)?;
    let ticks = body(b)?.ticks;
    if ticks == 0 || ticks > reg.config().max_advance {
        return Err(Problem::bad_request(format!(
            "ticks must be between 1 and {}",
            reg.config().max_advance
        )));
    }
    let (_, frames) = handle
        .mutate(move |s| {
            for i in 0..ticks {
                if i > 0 && s.status() == SessionStatus::Finished {
                    break;
                }
                s.tick()?;
            }
            Ok(())
        })
        .await?;
    Ok(Json(frames))
}

async fn events(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<FromQuery>, QueryRejection>,
) -> ApiResult<Json<Vec<EventFrame>>> {
    let from = q?.from;
    Ok(Json(reg.get(&id)?.frames_from(from, usize::MAX)))
}

async fn enter(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<EnterBody>, JsonRejection>,
) -> ApiResult<Json<Ack>> {
    let handle = reg.get(&id)?;
    let act = body(b)?.act_id;
    handle.mutate(move |s| s.enter_act(&act)).await?;
    Ok(ack(&handle))
}

async fn player_speak(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<SpeakBody>, JsonRejection>,
) -> ApiResult<(StatusCode, Json<Ack>)> {
    let handle = reg.get(&id)?;
    let SpeakBody { act_id, text } = body(b)?;
    handle.mutate(move |s| s.player_speak(&act_id, &text)).await?;
    Ok((StatusCode::ACCEPTED, ack(&handle)))
}

async fn pause(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<PauseBody>, JsonRejection>,
) -> ApiResult<Json<Ack>> {
    let handle = reg.get(&id)?;
    let role = RoleId::new(body(b)?.role);
    handle.mutate(move |s| s.pause_and_interview(&role)).await?;
    Ok(ack(&handle))
}

async fn interview(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    b: Result<Json<InterviewBody>, JsonRejection>,
) -> ApiResult<Json<InterviewAnswer>> {
    let handle = reg.get(&id)?;
    let InterviewBody { role, question } = body(b)?;
    let q = question.clone();
    let (answer, _) = handle
        .mutate(move |s| {
            if let Some(role) = &role {
                match s.status() {
                    SessionStatus::Running => s.pause_and_interview(&RoleId::new(role.as_str()))?,
                    SessionStatus::Paused { role: current } if current.as_str() != role => {
                        return Err(SessionError::Paused)
                    }
                    _ => {}
                }
            }
            let answer = s.interview_ask(&q)?;
            let SessionStatus::Paused { role: current } = s.status() else {
                unreachable!("an interview answer implies a pause");
            };
            Ok((current.to_string(), answer))
        })
        .await?;
    Ok(Json(InterviewAnswer {
        role: answer.0,
        question,
        answer: answer.1,
    }))
}

async fn resume(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<Ack>> {
    let handle = reg.get(&id)?;
    handle.mutate(|s| s.resume()).await?;
    Ok(ack(&handle))
}

async fn export(State(reg): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let handle = reg.get(&id)?;
    let json = handle.inspect(|s| s.export_play().to_json()).await;
    Ok(([(header::CONTENT_TYPE, "application/json")], json).into_response())
}

async fn stream(
    State(reg): State<AppState>,
    Path(id): Path<String>,
    q: Result<Query<FromQuery>, QueryRejection>,
    ws: WebSocketUpgrade,
) -> ApiResult<Response> {
    let from = q?.from;
    let handle = reg.get(&id)?;
    let timeout = Duration::from_millis(reg.config().send_timeout_ms);
    Ok(ws.on_upgrade(move |socket| pump(socket, handle, from, timeout)))
}

fn ack(handle: &SessionHandle) -> Json<Ack> {
    Json(Ack {
        accepted: true,
        session: handle.summary(),
    })
}

/// Send buffered frames from `cursor` on, then follow new ones. Closes once
/// the play has finished and everything was delivered.
async fn pump(mut socket: WebSocket, handle: Arc<SessionHandle>, mut cursor: u64, timeout: Duration) {
    let mut changes = handle.subscribe();
    loop {
        changes.mark_unchanged();
        loop {
            let batch = handle.frames_from(cursor, STREAM_BATCH);
            if batch.is_empty() {
                break;
            }
            for frame in batch {
                let text = serde_json::to_string(&frame).expect("frame serializes");
                match tokio::time::timeout(timeout, socket.send(Message::Text(text.into()))).await {
                    Ok(Ok(())) => cursor = frame.sequence + 1,
                    Ok(Err(_)) => return,
                    Err(_) => {
                        log::info!("stream of {} too slow at frame {cursor}, disconnecting", handle.id());
                        return;
                    }
                }
            }
        }
        if handle.is_finished() && cursor >= handle.frame_count() {
            let _ = socket.send(Message::Close(None)).await;
            return;
        }
        tokio::select! {
            changed = changes.changed() => {
                if changed.is_err() {
                    return;
                }
            }
            incoming = socket.recv() => match incoming {
                None | Some(Err(_)) | Some(Ok(Message::Close(_))) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

/// Advance one tick per interval until the play ends. Paused sessions are
/// skipped; a failed tick stops autoplay for that session.
async fn autoplay(handle: Arc<SessionHandle>, every: Duration) {
    let mut interval = tokio::time::interval(every);
    interval.tick().await;
    loop {
        interval.tick().await;
        match handle.summary().status {
            SessionStatus::Finished => return,
            SessionStatus::Paused { .. } => continue,
            SessionStatus::Running => {}
        }
        if let Err(p) = handle.mutate(|s| s.tick()).await {
            if p.code != "finished" && p.code != "paused" {
                log::warn!("autoplay of {} stopped: {}", handle.id(), p.detail);
                return;
            }
        }
    }
}
