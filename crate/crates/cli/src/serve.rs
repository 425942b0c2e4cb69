//! Websocket host for live sessions.
//!
//! One task per connection owns the [`Session`] and ticks it on a timer.
//! A reader task feeds client messages into a bounded mailbox that the
//! tick loop drains once per tick. The clock starts with the first client
//! message after the initial frame.

use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use frost_hollow::harness::export::write_trial_log;
use frost_hollow::harness::ExperimentConfig;
use frost_hollow::session::protocol::{ClientMessage, ServerMessage};
use frost_hollow::session::Session;
use futures::stream::SplitSink;
use futures::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::mpsc::{self, error::TryRecvError};
use tokio::time::{interval, MissedTickBehavior};

/// Client messages buffered between ticks; extra messages are dropped.
pub const MAILBOX: usize = 256;

#[derive(Clone)]
pub struct ServerState {
    base: Arc<ExperimentConfig>,
    log_dir: Option<PathBuf>,
    sessions: Arc<AtomicU64>,
}

impl ServerState {
    pub fn new(base: ExperimentConfig, log_dir: Option<PathBuf>) -> Self {
        Self { base: Arc::new(base), log_dir, sessions: Arc::new(AtomicU64::new(0)) }
    }
}

pub fn router(state: ServerState) -> Router {
    Router::new().route("/ws", get(upgrade)).with_state(state)
}

pub async fn serve(listener: TcpListener, state: ServerState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

async fn upgrade(ws: WebSocketUpgrade, State(state): State<ServerState>) -> Response {
    ws.on_upgrade(move |socket| run_connection(socket, state))
}

type Tx = SplitSink<WebSocket, Message>;

async fn send(tx: &mut Tx, msg: &ServerMessage) -> bool {
    tx.send(Message::Text(msg.to_json().into())).await.is_ok()
}

async fn reject(tx: &mut Tx, reason: String) {
    tracing::info!(%reason, "rejecting session");
    let _ = send(tx, &ServerMessage::bye(reason)).await;
    let _ = tx.close().await;
}

async fn run_connection(socket: WebSocket, state: ServerState) {
    let (mut tx, mut rx) = socket.split();

    let cfg = loop {
        match rx.next().await {
            Some(Ok(Message::Text(text))) => match ClientMessage::parse(&text) {
                Ok(ClientMessage::Hello(cfg)) => break cfg,
                Ok(ClientMessage::Bye) => return,
                Ok(other) => return reject(&mut tx, format!("expected hello, got {other:?}")).await,
                Err(e) => return reject(&mut tx, format!("malformed message: {e}")).await,
            },
            Some(Ok(Message::Close(_))) | Some(Err(_)) | None => return,
            Some(Ok(_)) => continue,
        }
    };
    let (mut session, first) = match Session::start(&state.base, cfg) {
        Ok(started) => started,
        Err(e) => return reject(&mut tx, e.to_string()).await,
    };
    let id = state.sessions.fetch_add(1, Ordering::Relaxed);
    tracing::info!(id, ?cfg, "session started");
    if !send(&mut tx, &ServerMessage::Frame(first)).await {
        return;
    }

    let (mailbox, mut inbox) = mpsc::channel::<ClientMessage>(MAILBOX);
    let reader = tokio::spawn(async move {
        while let Some(Ok(msg)) = rx.next().await {
            match msg {
                Message::Text(text) => match ClientMessage::parse(&text) {
                    Ok(msg) => {
                        let bye = msg == ClientMessage::Bye;
                        if mailbox.try_send(msg).is_err() {
                            tracing::warn!("mailbox full, dropping client message");
                        }
                        if bye {
                            break;
                        }
                    }
                    Err(e) => tracing::warn!("ignoring malformed client message: {e}"),
                },
                Message::Close(_) => break,
                _ => {}
            }
        }
    });

    let reason = tick_loop(&mut session, &mut inbox, &mut tx).await;
    reader.abort();
    let _ = send(&mut tx, &ServerMessage::bye(reason.clone())).await;
    let _ = tx.close().await;
    tracing::info!(id, %reason, "session ended");

    let log = session.end();
    if let Some(dir) = state.log_dir.clone() {
        let name = format!("live_{id:04}_{}_{}_{:016x}.jsonl", log.header.condition, log.header.agent, log.header.seed);
        let path = dir.join(name);
        let written = tokio::task::spawn_blocking(move || write_trial_log(&path, &log).map(|_| path)).await;
        match written {
            Ok(Ok(path)) => tracing::info!(id, path = %path.display(), "session log written"),
            Ok(Err(e)) => tracing::error!(id, "writing session log failed: {e}"),
            Err(e) => tracing::error!(id, "log writer panicked: {e}"),
        }
    }
}

/// Applies one client message. Returns false when the client is leaving.
fn apply(session: &mut Session, msg: ClientMessage) -> bool {
    match msg {
        ClientMessage::Input(input) => {
            if let Err(e) = session.submit_input(input) {
                tracing::debug!("input rejected: {e}");
            }
            true
        }
        ClientMessage::Hello(_) => true,
        ClientMessage::Bye => false,
    }
}

async fn tick_loop(session: &mut Session, inbox: &mut mpsc::Receiver<ClientMessage>, tx: &mut Tx) -> String {
    // The clock starts on the client's first message.
    if !inbox.recv().await.is_some_and(|msg| apply(session, msg)) {
        return "client left before starting".to_string();
    }
    let period = Duration::from_secs_f64(1.0 / f64::from(session.config().tick_hz));
    let mut ticker = interval(period);
    // Catch up after a stall so the long-run frame rate stays at tick_hz.
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    loop {
        ticker.tick().await;
        loop {
            match inbox.try_recv() {
                Ok(msg) => {
                    if !apply(session, msg) {
                        return "client said bye".to_string();
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => return "client disconnected".to_string(),
            }
        }
        let out = match session.tick() {
            Ok(out) => out,
            Err(e) => return format!("session fault: {e}"),
        };
        if !send(tx, &ServerMessage::Frame(out.frame)).await {
            return "send failed".to_string();
        }
        if let Some(summary) = out.summary {
            let _ = send(tx, &ServerMessage::Summary(summary)).await;
            return "trial over".to_string();
        }
    }
}
