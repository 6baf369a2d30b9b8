//! WebSocket front for the session engine. Each connection drives one
//! session at 20 Hz; sessions outlive their connection so a client can
//! reattach with `Hello { resume_session }`.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use anyhow::{Context, Result};
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::Router;
use clap::{Args, ValueEnum};
use tokio::time::{interval_at, Instant, MissedTickBehavior};

use dess_core::experiment::{read_trial_file, write_campaign_csv, TrialConfig};
use dess_core::session::{
    replay_log, ExportFormat, Session, SessionOptions, SessionState, SessionStore, WheelMap, WheelMode, WireMessage,
};
use dess_core::TICK_SECONDS;

use crate::Common;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum WheelModeArg {
    Velocity,
    Position,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    /// Directory holding one JSON-lines log per session.
    #[arg(long, default_value = "sessions")]
    pub store: PathBuf,
    /// TOML trial queue every new session runs through.
    #[arg(long)]
    pub trials: PathBuf,
    #[arg(long, default_value_t = 40)]
    pub rest_ticks: u64,
    #[arg(long, value_enum, default_value_t = WheelModeArg::Velocity)]
    pub wheel_mode: WheelModeArg,
    #[arg(long)]
    pub wheel_gain: Option<f64>,
    /// Keep the trial file's world seeds instead of drawing fresh ones.
    #[arg(long)]
    pub fixed_worlds: bool,
    /// Wall-clock length of one tick; lower it only to fast-forward tests.
    #[arg(long, default_value_t = TICK_SECONDS * 1000.0)]
    pub tick_ms: f64,
}

pub struct AppState {
    store: SessionStore,
    queue: Vec<TrialConfig>,
    options: SessionOptions,
    seed: u64,
    started: Instant,
    period: Duration,
    next_id: Mutex<u64>,
    /// Sessions whose connection dropped, waiting to be resumed.
    parked: Mutex<HashMap<String, Session>>,
}

impl AppState {
    pub fn new(
        store: SessionStore,
        queue: Vec<TrialConfig>,
        options: SessionOptions,
        seed: u64,
        period: Duration,
    ) -> Self {
        Self {
            store,
            queue,
            options,
            seed,
            started: Instant::now(),
            period,
            next_id: Mutex::new(0),
            parked: Mutex::new(HashMap::new()),
        }
    }

    fn now_ms(&self) -> f64 {
        self.started.elapsed().as_secs_f64() * 1000.0
    }

    fn new_session(&self, label: &str) -> Result<Session> {
        let k = {
            let mut n = self.next_id.lock().expect("id counter");
            *n += 1;
            *n
        };
        let id = format!("s{}-{k}", self.seed);
        Ok(Session::new(id, label, self.queue.clone(), self.seed.wrapping_add(k), self.options)?)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/ws", get(ws_handler))
        .route("/health", get(|| async { "ok" }))
        .route("/sessions", get(list_sessions))
        .route("/sessions/:id/export", get(export_handler))
        .with_state(state)
}

async fn ws_handler(ws: WebSocketUpgrade, State(state): State<Arc<AppState>>) -> Response {
    ws.on_upgrade(move |socket| async move {
        if let Err(e) = drive(socket, state).await {
            log::warn!("connection ended with error: {e:#}");
        }
    })
}

async fn list_sessions(State(state): State<Arc<AppState>>) -> Response {
    match state.store.sessions() {
        Ok(ids) => axum::Json(ids).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

async fn export_handler(
    Path(id): Path<String>,
    Query(q): Query<HashMap<String, String>>,
    State(state): State<Arc<AppState>>,
) -> Response {
    let format = q.get("format").map(String::as_str).unwrap_or("campaign-csv");
    let kind: ExportFormat = match format.parse() {
        Ok(k) => k,
        Err(e) => return (StatusCode::BAD_REQUEST, e.to_string()).into_response(),
    };
    let entries = match state.store.load(&id) {
        Ok(e) => e,
        Err(e) => return (StatusCode::NOT_FOUND, e.to_string()).into_response(),
    };
    let body = match kind {
        ExportFormat::RawLog => entries
            .iter()
            .map(|e| serde_json::to_string(e).map(|s| s + "\n"))
            .collect::<std::result::Result<String, _>>()
            .map_err(|e| e.to_string()),
        ExportFormat::CampaignCsv => replay_log(&entries).map_err(|e| e.to_string()).and_then(|rep| {
            let mut buf = Vec::new();
            write_campaign_csv(&mut buf, &rep.records).map_err(|e| e.to_string())?;
            String::from_utf8(buf).map_err(|e| e.to_string())
        }),
    };
    match body {
        Ok(b) => b.into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e).into_response(),
    }
}

fn persist(state: &AppState, session: &mut Session) {
    let entries = session.take_new_log_entries();
    if let Err(e) = state.store.append(session.id(), &entries) {
        log::error!("session {}: could not persist log: {e}", session.id());
    }
}

async fn send(socket: &mut WebSocket, msgs: Vec<WireMessage>) -> Result<()> {
    for m in msgs {
        socket.send(Message::Text(m.to_json())).await?;
    }
    Ok(())
}

/// Wait for the Hello, then tick the session until it is done or the
/// client goes away.
async fn drive(mut socket: WebSocket, state: Arc<AppState>) -> Result<()> {
    let mut session = loop {
        let Some(msg) = socket.recv().await else { return Ok(()) };
        let Message::Text(text) = msg? else { continue };
        match WireMessage::from_json(&text) {
            Ok(hello @ WireMessage::Hello { .. }) => {
                let WireMessage::Hello { subject_label, resume_session, .. } = &hello else { unreachable!() };
                let resumed = resume_session.as_ref().and_then(|id| state.parked.lock().expect("parked").remove(id));
                let mut s = match resumed {
                    Some(s) => s,
                    None => state.new_session(subject_label.as_deref().unwrap_or(""))?,
                };
                let replies = s.handle(&hello, state.now_ms());
                send(&mut socket, replies).await?;
                persist(&state, &mut s);
                break s;
            }
            Ok(_) => send(&mut socket, vec![WireMessage::error("no_session", "send Hello first")]).await?,
            Err(e) => send(&mut socket, vec![WireMessage::error("bad_message", e.to_string())]).await?,
        }
    };
    let period = state.period;
    let mut ticker = interval_at(Instant::now() + period, period);
    ticker.set_missed_tick_behavior(MissedTickBehavior::Burst);
    let outcome: Result<()> = loop {
        tokio::select! {
            scheduled = ticker.tick() => {
                let lateness = Instant::now().saturating_duration_since(scheduled).as_secs_f64() * 1000.0;
                let msgs = match session.tick(state.now_ms(), lateness) {
                    Ok(m) => m,
                    Err(e) => break Err(e.into()),
                };
                let done = session.state() == SessionState::Done;
                let sent = send(&mut socket, msgs).await;
                persist(&state, &mut session);
                if let Err(e) = sent {
                    break Err(e);
                }
                if done {
                    let _ = socket.send(Message::Close(None)).await;
                    break Ok(());
                }
            }
            incoming = socket.recv() => {
                let text = match incoming {
                    None | Some(Ok(Message::Close(_))) => break Ok(()),
                    Some(Err(e)) => break Err(e.into()),
                    Some(Ok(Message::Text(t))) => t,
                    Some(Ok(_)) => continue,
                };
                let replies = match WireMessage::from_json(&text) {
                    Ok(m) => session.handle(&m, state.now_ms()),
                    Err(e) => vec![WireMessage::error("bad_message", e.to_string())],
                };
                if let Err(e) = send(&mut socket, replies).await {
                    break Err(e);
                }
            }
        }
    };
    if session.state() != SessionState::Done {
        session.disconnect(state.now_ms());
        persist(&state, &mut session);
        log::info!("session {} parked for resume", session.id());
        state.parked.lock().expect("parked").insert(session.id().to_string(), session);
    } else {
        persist(&state, &mut session);
    }
    outcome
}

pub fn serve(c: &Common, a: ServeArgs) -> Result<bool> {
    let file = read_trial_file(&a.trials).with_context(|| format!("reading {}", a.trials.display()))?;
    let mode = match a.wheel_mode {
        WheelModeArg::Velocity => WheelMode::Velocity,
        WheelModeArg::Position => WheelMode::Position,
    };
    let mut wheel = WheelMap { mode, ..WheelMap::default() };
    if let Some(g) = a.wheel_gain {
        wheel.gain = g;
    }
    let options = SessionOptions { wheel, rest_ticks: a.rest_ticks, reseed: !a.fixed_worlds };
    if !(a.tick_ms > 0.0) {
        anyhow::bail!("tick length must be positive");
    }
    let store = SessionStore::open(&a.store)?;
    let period = Duration::from_secs_f64(a.tick_ms / 1000.0);
    let state = Arc::new(AppState::new(store, file.trials, options, c.seed, period));
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr).await?;
        eprintln!("listening on ws://{}/ws", listener.local_addr()?);
        axum::serve(listener, router(state))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(true)
}
