//! Network front end for [`SessionService`].
//!
//! Control requests are plain JSON over HTTP; the live event stream is
//! available two ways:
//!
//! - `/api/ws`: a WebSocket carrying every session event as a JSON text
//!   frame. The client may send [`ControlMessage`]s on the same socket and
//!   gets a `{"type": "reply", ...}` frame back for each.
//! - `/api/events`: server-sent events, one per session event, with the SSE
//!   event name set to the message `type` and the JSON message as data.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/api/start` | [`StartBody`] | `{session_id, dir}` |
//! | POST | `/api/stop` | | [`OutcomeBody`] |
//! | POST | `/api/misc` | [`MiscBody`] | the `misc_ack` event |
//! | POST | `/api/likert` | [`LikertBody`] | the `session_status` event |
//! | POST | `/api/guidance` | [`GuidanceBody`] | the `scene_state` event |
//! | GET | `/api/status` | | [`StatusReport`] |
//! | GET | `/api/events` | | SSE stream |
//! | GET | `/api/ws` | | WebSocket |

use std::convert::Infallible;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::Stream;
use mbci_core::feedback::SessionMode;
use mbci_core::ingest::{SourceSpec, StreamConfig, SynthControl, DEFAULT_SAMPLING_RATE};
use mbci_core::par::Execution;
use mbci_core::session::{
    CompletionStatus, Pacing, RunOptions, SessionError, SessionEvent, SessionOutcome, SessionService, StartRequest,
    StatusReport,
};
use serde::{Deserialize, Serialize};
use tokio::sync::mpsc;

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SourceBody {
    Synthetic {
        #[serde(default = "default_latent")]
        latent: f64,
        duration_seconds: f64,
        #[serde(default)]
        seed: u64,
    },
    Replay {
        path: PathBuf,
    },
    Device {
        address: String,
    },
}

fn default_latent() -> f64 {
    0.5
}

fn default_rate() -> f64 {
    DEFAULT_SAMPLING_RATE
}

fn default_speed() -> f64 {
    1.0
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StartBody {
    pub mode: SessionMode,
    #[serde(default)]
    pub subject_id: Option<String>,
    pub source: SourceBody,
    #[serde(default = "default_rate")]
    pub sampling_rate: f64,
    /// Weight container directory; falls back to the server default.
    #[serde(default)]
    pub weights: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub planned_seconds: Option<f64>,
    /// `false` consumes the source as fast as possible.
    #[serde(default = "default_true")]
    pub paced: bool,
    #[serde(default = "default_speed")]
    pub speed: f64,
    #[serde(default)]
    pub session_id: Option<String>,
}

fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct MiscBody {
    /// Minutes from session start of the prompt being answered.
    pub prompt_time: f64,
    pub value: i64,
    #[serde(default)]
    pub label: Option<String>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct LikertBody {
    pub value: i64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct GuidanceBody {
    pub volume: f64,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct StartedBody {
    pub session_id: String,
    pub dir: PathBuf,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct OutcomeBody {
    pub session_id: String,
    pub dir: PathBuf,
    pub status: CompletionStatus,
    pub detail: Option<String>,
    pub duration_seconds: f64,
    pub score_events: u64,
    pub dropped_windows: u64,
}

impl From<SessionOutcome> for OutcomeBody {
    fn from(o: SessionOutcome) -> Self {
        OutcomeBody {
            session_id: o.session_id,
            dir: o.dir,
            status: o.status,
            detail: o.detail,
            duration_seconds: o.duration_seconds,
            score_events: o.score_events,
            dropped_windows: o.dropped_windows,
        }
    }
}

/// JSON error reply: `{"error": "..."}`.
#[derive(Debug)]
pub struct ApiError(pub StatusCode, pub String);

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        use SessionError::*;
        let code = match &e {
            AlreadyActive(_) | NotActive | Exists(_) | DuplicateResponse(_) | DuplicateLikert => StatusCode::CONFLICT,
            UnknownPrompt(_) => StatusCode::NOT_FOUND,
            Feedback(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Weights(_) | Ingest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        ApiError(code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

#[derive(Clone)]
pub struct AppState {
    pub service: Arc<SessionService>,
    pub default_weights: Option<PathBuf>,
    pub execution: Execution,
}

impl AppState {
    pub fn new(service: Arc<SessionService>, default_weights: Option<PathBuf>) -> Self {
        AppState {
            service,
            default_weights,
            execution: Execution::default(),
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/start", post(start))
        .route("/api/stop", post(stop))
        .route("/api/misc", post(misc))
        .route("/api/likert", post(likert))
        .route("/api/guidance", post(guidance))
        .route("/api/status", get(status))
        .route("/api/events", get(events))
        .route("/api/ws", get(websocket))
        .with_state(state)
}

/// Runs a blocking service call off the async runtime.
async fn blocking<T: Send + 'static>(f: impl FnOnce() -> Result<T, SessionError> + Send + 'static) -> Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map_err(ApiError::from)
}

pub fn start_request(body: StartBody, default_weights: Option<PathBuf>, execution: Execution) -> Result<StartRequest, ApiError> {
    let weights = body
        .weights
        .or(default_weights)
        .ok_or_else(|| ApiError(StatusCode::BAD_REQUEST, "no weights given and the server has no default".into()))?;
    let source = match body.source {
        SourceBody::Synthetic {
            latent,
            duration_seconds,
            seed,
        } => SourceSpec::Synthetic {
            control: SynthControl::with_latent(latent),
            duration_seconds,
            seed,
        },
        SourceBody::Replay { path } => SourceSpec::Replay { path },
        SourceBody::Device { address } => SourceSpec::Device { address },
    };
    if body.paced && !(body.speed > 0.0 && body.speed.is_finite()) {
        return Err(ApiError(StatusCode::BAD_REQUEST, format!("speed must be positive, got {}", body.speed)));
    }
    let mut req = StartRequest::new(body.mode, StreamConfig::new(source).with_rate(body.sampling_rate), weights);
    req.subject_id = body.subject_id.unwrap_or(req.subject_id);
    req.seed = body.seed;
    req.planned_seconds = body.planned_seconds;
    req.session_id = body.session_id;
    req.options = RunOptions {
        pacing: if body.paced {
            Pacing::RealTime { speed: body.speed }
        } else {
            Pacing::Unpaced
        },
        execution,
    };
    Ok(req)
}

async fn start(State(s): State<AppState>, Json(body): Json<StartBody>) -> Result<(StatusCode, Json<StartedBody>), ApiError> {
    Ok((StatusCode::CREATED, Json(do_start(&s, body).await?)))
}

async fn stop(State(s): State<AppState>) -> Result<Json<OutcomeBody>, ApiError> {
    Ok(Json(do_stop(&s).await?))
}

async fn misc(State(s): State<AppState>, Json(b): Json<MiscBody>) -> Result<Json<SessionEvent>, ApiError> {
    Ok(Json(do_misc(&s, b).await?))
}

async fn likert(State(s): State<AppState>, Json(b): Json<LikertBody>) -> Result<Json<SessionEvent>, ApiError> {
    Ok(Json(do_likert(&s, b).await?))
}

async fn guidance(State(s): State<AppState>, Json(b): Json<GuidanceBody>) -> Result<Json<SessionEvent>, ApiError> {
    Ok(Json(do_guidance(&s, b).await?))
}

async fn status(State(s): State<AppState>) -> Result<Json<StatusReport>, ApiError> {
    Ok(Json(do_status(&s).await?))
}

async fn do_start(s: &AppState, body: StartBody) -> Result<StartedBody, ApiError> {
    let req = start_request(body, s.default_weights.clone(), s.execution)?;
    let service = s.service.clone();
    let (session_id, dir) = blocking(move || service.start(req)).await?;
    Ok(StartedBody { session_id, dir })
}

async fn do_stop(s: &AppState) -> Result<OutcomeBody, ApiError> {
    let service = s.service.clone();
    Ok(blocking(move || service.stop()).await?.into())
}

async fn do_misc(s: &AppState, b: MiscBody) -> Result<SessionEvent, ApiError> {
    let service = s.service.clone();
    blocking(move || service.submit_misc(b.prompt_time, b.value, b.label.as_deref())).await
}

async fn do_likert(s: &AppState, b: LikertBody) -> Result<SessionEvent, ApiError> {
    let service = s.service.clone();
    blocking(move || service.submit_likert(b.value)).await
}

async fn do_guidance(s: &AppState, b: GuidanceBody) -> Result<SessionEvent, ApiError> {
    let service = s.service.clone();
    blocking(move || service.set_guidance_volume(b.volume)).await
}

async fn do_status(s: &AppState) -> Result<StatusReport, ApiError> {
    let service = s.service.clone();
    blocking(move || Ok(service.status())).await
}

/// Forwards the blocking subscription into an async channel. The thread ends
/// when the receiver is dropped (at the next event) or the service goes away.
fn subscribe(s: &AppState) -> mpsc::UnboundedReceiver<SessionEvent> {
    let sub = s.service.subscribe();
    let (tx, rx) = mpsc::unbounded_channel();
    std::thread::spawn(move || {
        for ev in sub {
            if tx.send(ev).is_err() {
                break;
            }
        }
    });
    rx
}

async fn events(State(s): State<AppState>) -> Sse<impl Stream<Item = Result<Event, Infallible>>> {
    let rx = subscribe(&s);
    let stream = futures_util::stream::unfold(rx, |mut rx| async move {
        let ev = rx.recv().await?;
        let sse = Event::default().event(ev.payload.type_name()).data(ev.to_json_line());
        Some((Ok(sse), rx))
    });
    Sse::new(stream).keep_alive(KeepAlive::default())
}

/// A control request sent over the WebSocket.
#[derive(Clone, Debug, Deserialize, Serialize)]
pub struct ControlMessage {
    /// Echoed back in the reply for correlation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<u64>,
    #[serde(flatten)]
    pub request: ControlRequest,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "request", rename_all = "snake_case")]
pub enum ControlRequest {
    Start(StartBody),
    Stop,
    SubmitMisc(MiscBody),
    SubmitLikert(LikertBody),
    SetGuidance(GuidanceBody),
    GetStatus,
}

impl ControlRequest {
    fn name(&self) -> &'static str {
        match self {
            ControlRequest::Start(_) => "start",
            ControlRequest::Stop => "stop",
            ControlRequest::SubmitMisc(_) => "submit_misc",
            ControlRequest::SubmitLikert(_) => "submit_likert",
            ControlRequest::SetGuidance(_) => "set_guidance",
            ControlRequest::GetStatus => "get_status",
        }
    }
}

async fn control(s: &AppState, text: &str) -> serde_json::Value {
    let msg: ControlMessage = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => {
            return serde_json::json!({
                "type": "reply", "ok": false, "status": 400, "error": format!("bad control message: {e}"),
            })
        }
    };
    let name = msg.request.name();
    let result = match msg.request {
        ControlRequest::Start(b) => do_start(s, b).await.map(|r| serde_json::to_value(r)),
        ControlRequest::Stop => do_stop(s).await.map(|r| serde_json::to_value(r)),
        ControlRequest::SubmitMisc(b) => do_misc(s, b).await.map(|r| serde_json::to_value(r)),
        ControlRequest::SubmitLikert(b) => do_likert(s, b).await.map(|r| serde_json::to_value(r)),
        ControlRequest::SetGuidance(b) => do_guidance(s, b).await.map(|r| serde_json::to_value(r)),
        ControlRequest::GetStatus => do_status(s).await.map(|r| serde_json::to_value(r)),
    };
    let mut reply = match result {
        Ok(v) => serde_json::json!({ "type": "reply", "ok": true, "result": v.unwrap_or_default() }),
        Err(ApiError(code, error)) => {
            serde_json::json!({ "type": "reply", "ok": false, "status": code.as_u16(), "error": error })
        }
    };
    reply["request"] = name.into();
    if let Some(id) = msg.id {
        reply["id"] = id.into();
    }
    reply
}

async fn websocket(State(s): State<AppState>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| run_socket(s, socket))
}

async fn run_socket(s: AppState, mut socket: WebSocket) {
    let mut rx = subscribe(&s);
    loop {
        tokio::select! {
            ev = rx.recv() => {
                let Some(ev) = ev else { break };
                if socket.send(Message::Text(ev.to_json_line().into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => {
                let text = match msg {
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                    Some(Ok(_)) => continue,
                };
                let reply = control(&s, text.as_str()).await;
                if socket.send(Message::Text(reply.to_string().into())).await.is_err() {
                    break;
                }
            }
        }
    }
}

/// Serves `router` on an already bound listener until the future is dropped.
pub async fn serve(listener: tokio::net::TcpListener, router: Router) -> std::io::Result<()> {
    axum::serve(listener, router).await
}

/// Like [`serve`], returning once `shutdown` resolves and open requests drain.
pub async fn serve_until(
    listener: tokio::net::TcpListener,
    router: Router,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await
}
