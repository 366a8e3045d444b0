//! HTTP and WebSocket front end. Each connection owns one [`Session`] and is
//! served by a single task, so messages within a connection never reorder.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::IntoResponse;
use axum::routing::get;
use axum::{Json, Router};
use serde::Serialize;
use tokio::net::TcpListener;

use crate::protocol::ServerMessage;
use crate::session::{ServiceConfig, Session};

#[derive(Debug, Clone, Serialize)]
pub struct ConnectionInfo {
    pub id: u64,
    pub phase: String,
    pub condition: Option<String>,
    pub sim_time: Option<f64>,
}

/// Live connections, for monitoring.
#[derive(Default)]
pub struct Registry {
    next_id: AtomicU64,
    connections: Mutex<HashMap<u64, ConnectionInfo>>,
}

impl Registry {
    fn register(&self) -> u64 {
        let id = self.next_id.fetch_add(1, Ordering::Relaxed);
        self.update(id, &Session::new(ServiceConfig::default()));
        id
    }

    fn update(&self, id: u64, session: &Session) {
        let info = ConnectionInfo {
            id,
            phase: format!("{:?}", session.phase()).to_lowercase(),
            condition: session.condition().map(|c| c.to_string()),
            sim_time: session.sim_time(),
        };
        self.connections.lock().expect("registry lock").insert(id, info);
    }

    fn remove(&self, id: u64) {
        self.connections.lock().expect("registry lock").remove(&id);
    }

    pub fn snapshot(&self) -> Vec<ConnectionInfo> {
        let mut v: Vec<_> = self.connections.lock().expect("registry lock").values().cloned().collect();
        v.sort_by_key(|c| c.id);
        v
    }
}

#[derive(Clone)]
struct AppState {
    config: Arc<ServiceConfig>,
    registry: Arc<Registry>,
}

pub fn router(config: ServiceConfig) -> Router {
    let state = AppState {
        config: Arc::new(config),
        registry: Arc::new(Registry::default()),
    };
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", get(sessions))
        .with_state(state)
}

async fn sessions(State(state): State<AppState>) -> impl IntoResponse {
    Json(state.registry.snapshot())
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| connection(socket, state))
}

async fn send_all(socket: &mut WebSocket, msgs: Vec<ServerMessage>) -> bool {
    for m in msgs {
        if socket.send(Message::Text(m.to_json().into())).await.is_err() {
            return false;
        }
    }
    true
}

async fn connection(mut socket: WebSocket, state: AppState) {
    let id = state.registry.register();
    let mut session = Session::new((*state.config).clone());
    let mut ticker = tokio::time::interval(Duration::from_secs_f64(state.config.tick_interval));
    ticker.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
    let mut last = Instant::now();
    tracing::info!(connection = id, "connected");

    loop {
        tokio::select! {
            incoming = socket.recv() => {
                let replies = match incoming {
                    Some(Ok(Message::Text(text))) => session.handle_text(text.as_str()),
                    Some(Ok(Message::Binary(bytes))) => match std::str::from_utf8(&bytes) {
                        Ok(text) => session.handle_text(text),
                        Err(_) => vec![ServerMessage::error("binary frame is not UTF-8 JSON")],
                    },
                    Some(Ok(Message::Ping(_) | Message::Pong(_))) => {
                        session.handle_heartbeat();
                        Vec::new()
                    }
                    Some(Ok(Message::Close(_))) | None | Some(Err(_)) => break,
                };
                if !send_all(&mut socket, replies).await {
                    break;
                }
                state.registry.update(id, &session);
            }
            _ = ticker.tick() => {
                let now = Instant::now();
                let out = session.tick(now.duration_since(last).as_secs_f64());
                last = now;
                if out.dropped > 0.0 {
                    tracing::warn!(connection = id, dropped = out.dropped, "simulation lagging; wall time dropped");
                }
                let timed_out = out.timed_out;
                if !send_all(&mut socket, out.messages).await || timed_out {
                    if timed_out {
                        tracing::info!(connection = id, "timed out");
                    }
                    break;
                }
                if out.steps > 0 {
                    state.registry.update(id, &session);
                }
            }
        }
    }
    state.registry.remove(id);
    tracing::info!(connection = id, "disconnected");
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<()> {
    let listener = TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(config)).await
}

/// Binds `addr` and serves in the background; returns the bound address.
pub async fn spawn(addr: SocketAddr, config: ServiceConfig) -> std::io::Result<SocketAddr> {
    let listener = TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    tokio::spawn(async move {
        let _ = axum::serve(listener, router(config)).await;
    });
    Ok(local)
}
