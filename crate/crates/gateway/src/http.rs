//! REST and WebSocket routes.
//!
//! Every route under `/api` except the two auth routes needs
//! `Authorization: Bearer <token>`; `/ws` takes the token as a `token`
//! query parameter. Errors are `{"error": <class>, "message": ..}` with the
//! status from [`crate::error::status`].

use std::sync::Arc;

use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{FromRequest, FromRequestParts, Path, Query, Request, State};
use axum::http::request::Parts;
use axum::http::header::AUTHORIZATION;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use nora_core::chat::{ConversationRef, Notification};
use nora_core::ErrorKind;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{GatewayError, GatewayResult};
use crate::platform::{LoginRequest, Platform, ProfileUpdate, RegisterRequest, TurnRequest};
use crate::push::WsHub;

#[derive(Clone)]
pub struct AppState {
    pub platform: Arc<Platform>,
    pub hub: Arc<WsHub>,
}

/// JSON body whose rejections use the gateway error format.
pub struct ApiJson<T>(pub T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for ApiJson<T> {
    type Rejection = GatewayError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        match Json::<T>::from_request(req, state).await {
            Ok(Json(v)) => Ok(ApiJson(v)),
            Err(e) => Err(GatewayError::invalid(e.body_text())),
        }
    }
}

/// The authenticated user id.
pub struct AuthUser(pub String);

impl FromRequestParts<AppState> for AuthUser {
    type Rejection = GatewayError;

    async fn from_request_parts(parts: &mut Parts, state: &AppState) -> Result<Self, Self::Rejection> {
        let header = parts
            .headers
            .get(AUTHORIZATION)
            .ok_or_else(|| GatewayError::unauthorized("missing bearer token"))?;
        let token = header
            .to_str()
            .ok()
            .and_then(|h| h.strip_prefix("Bearer "))
            .map(str::trim)
            .filter(|t| !t.is_empty())
            .ok_or_else(|| GatewayError::unauthorized("malformed authorization header"))?;
        Ok(AuthUser(state.platform.authenticate(token)?))
    }
}

/// Runs a platform call off the async executor.
async fn call<T, F>(state: &AppState, f: F) -> GatewayResult<Json<T>>
where
    T: Send + 'static,
    F: FnOnce(&Platform) -> GatewayResult<T> + Send + 'static,
{
    let p = state.platform.clone();
    tokio::task::spawn_blocking(move || f(&p))
        .await
        .map_err(|e| GatewayError::new(ErrorKind::Storage, format!("worker failed: {e}")))?
        .map(Json)
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/api/auth/register", post(register))
        .route("/api/auth/login", post(login))
        .route("/api/profile", get(get_profile).put(put_profile))
        .route("/api/profile/interests", get(get_interests).put(put_interests))
        .route("/api/session", get(list_sessions))
        .route("/api/session/start", post(session_start))
        .route("/api/session/turn", post(session_turn))
        .route("/api/session/resume", post(session_resume))
        .route("/api/progress", get(progress))
        .route("/api/chat/topics", get(topics))
        .route("/api/chat/contacts", get(list_contacts).post(add_contact))
        .route("/api/chat/conversations", get(conversations))
        .route("/api/chat/direct", post(send_direct))
        .route("/api/chat/sync", get(sync))
        .route("/api/chat/topic/{id}", post(post_topic))
        .route("/api/chat/report", post(report))
        .route("/api/chat/meeting/{topic}", post(meeting))
        .route("/ws", get(ws))
        .fallback(|| async { GatewayError::new(ErrorKind::NotFound, "no such route") })
        .with_state(state)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn register(State(s): State<AppState>, ApiJson(req): ApiJson<RegisterRequest>) -> impl IntoResponse {
    call(&s, move |p| p.register(&req)).await
}

async fn login(State(s): State<AppState>, ApiJson(req): ApiJson<LoginRequest>) -> impl IntoResponse {
    call(&s, move |p| p.login(&req)).await
}

async fn get_profile(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.profile(&u)).await
}

async fn put_profile(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<ProfileUpdate>,
) -> impl IntoResponse {
    call(&s, move |p| p.update_profile(&u, &req)).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InterestsBody {
    pub topics: Vec<String>,
}

async fn get_interests(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.interests(&u).map(|topics| InterestsBody { topics })).await
}

async fn put_interests(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<InterestsBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.set_interests(&u, &req.topics)).await
}

async fn list_sessions(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.sessions(&u)).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartBody {
    pub day: u32,
}

async fn session_start(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<StartBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.start_session(&u, req.day)).await
}

async fn session_turn(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<TurnRequest>,
) -> impl IntoResponse {
    call(&s, move |p| p.turn(&u, &req)).await
}

async fn session_resume(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.resume(&u)).await
}

async fn progress(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.progress(&u)).await
}

async fn topics(State(s): State<AppState>, AuthUser(_): AuthUser) -> impl IntoResponse {
    call(&s, move |p| Ok(p.topics().to_vec())).await
}

async fn list_contacts(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.contacts(&u)).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactBody {
    pub alias: String,
}

async fn add_contact(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<ContactBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.add_contact(&u, &req.alias)).await
}

async fn conversations(State(s): State<AppState>, AuthUser(u): AuthUser) -> impl IntoResponse {
    call(&s, move |p| p.conversations(&u)).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DirectBody {
    /// Receiver's user id.
    pub to: String,
    pub body: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Posted {
    pub id: u64,
}

async fn send_direct(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<DirectBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.send_direct(&u, &req.to, &req.body).map(|id| Posted { id })).await
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopicBody {
    pub body: String,
}

async fn post_topic(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    Path(topic): Path<String>,
    ApiJson(req): ApiJson<TopicBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.post_topic(&u, &topic, &req.body).map(|id| Posted { id })).await
}

/// `?conversation=topic:movies&last_seen=3`
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SyncParams {
    pub conversation: String,
    #[serde(default)]
    pub last_seen: u64,
}

async fn sync(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    params: Result<Query<SyncParams>, axum::extract::rejection::QueryRejection>,
) -> Response {
    let Query(params) = match params {
        Ok(q) => q,
        Err(e) => return GatewayError::invalid(e.body_text()).into_response(),
    };
    let conv: ConversationRef = match params.conversation.parse() {
        Ok(c) => c,
        Err(e) => return GatewayError::from(e).into_response(),
    };
    call(&s, move |p| p.sync(&u, &conv, params.last_seen)).await.into_response()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportBody {
    pub conversation: ConversationRef,
    pub message_id: u64,
    #[serde(default)]
    pub reason: String,
}

async fn report(
    State(s): State<AppState>,
    AuthUser(u): AuthUser,
    ApiJson(req): ApiJson<ReportBody>,
) -> impl IntoResponse {
    call(&s, move |p| p.report(&u, &req.conversation, req.message_id, &req.reason)).await
}

async fn meeting(State(s): State<AppState>, AuthUser(u): AuthUser, Path(topic): Path<String>) -> impl IntoResponse {
    call(&s, move |p| p.meeting(&u, &topic)).await
}

#[derive(Debug, Deserialize)]
struct WsParams {
    token: Option<String>,
}

async fn ws(
    State(s): State<AppState>,
    Query(params): Query<WsParams>,
    upgrade: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    let user = match params.token.as_deref().map(|t| s.platform.authenticate(t)) {
        Some(Ok(u)) => u,
        Some(Err(e)) => return e.into_response(),
        None => return GatewayError::unauthorized("missing token").into_response(),
    };
    let upgrade = match upgrade {
        Ok(u) => u,
        Err(e) => return GatewayError::invalid(e.body_text()).into_response(),
    };
    upgrade.on_upgrade(move |socket| deliver(socket, s.hub, user))
}

/// Forwards the user's notifications until either side closes.
async fn deliver(mut socket: WebSocket, hub: Arc<WsHub>, user: String) {
    let (id, mut rx) = hub.connect(&user);
    loop {
        tokio::select! {
            n = rx.recv() => {
                let Some(n) = n else { break };
                if socket.send(Message::Text(encode(&n).into())).await.is_err() {
                    break;
                }
            }
            msg = socket.recv() => match msg {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                Some(Ok(_)) => {}
            }
        }
    }
    hub.disconnect(&user, id);
}

fn encode(n: &Notification) -> String {
    serde_json::to_string(n).unwrap_or_default()
}

/// Serves until `shutdown` resolves.
pub async fn serve(
    listener: tokio::net::TcpListener,
    state: AppState,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
