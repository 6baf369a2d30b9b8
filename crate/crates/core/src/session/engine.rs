//! Per-connection session state machine. It owns no sockets and no clock:
//! the server feeds it messages and tick timestamps and forwards whatever it
//! returns, which keeps every trial deterministic given its inputs.

use serde::{Deserialize, Serialize};

use crate::dynamics::{TrajectoryRecord, TICK_SECONDS};
use crate::error::{Error, Result};
use crate::experiment::trial::{TrialConfig, TrialRecord, TrialRun, BASE_PREVIEW_TICKS};
use crate::session::protocol::{EndSummary, WireMessage};

/// Ticks later than this are flagged in the log.
pub const LATE_TICK_MS: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SessionState {
    Idle,
    Running,
    BetweenTrials,
    Done,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WheelMode {
    /// `u = gain · (wheel(t) - wheel(t-1))`. The first wheel sample of a
    /// trial only sets the reference, so the wheel may be re-centred
    /// between trials.
    Velocity,
    /// `u = gain · wheel(t)`
    Position,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WheelMap {
    pub mode: WheelMode,
    pub gain: f64,
}

impl Default for WheelMap {
    fn default() -> Self {
        Self { mode: WheelMode::Velocity, gain: 100.0 }
    }
}

impl WheelMap {
    pub fn command(&self, wheel: f64, previous: f64) -> f64 {
        match self.mode {
            WheelMode::Velocity => self.gain * (wheel - previous),
            WheelMode::Position => self.gain * wheel,
        }
    }

    /// Wheel position that produces `command`, clamped to the wheel's travel.
    pub fn wheel_for(&self, command: f64, previous: f64) -> f64 {
        let w = match self.mode {
            WheelMode::Velocity => previous + command / self.gain,
            WheelMode::Position => command / self.gain,
        };
        w.clamp(-1.0, 1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionOptions {
    pub wheel: WheelMap,
    /// Pause between trials.
    pub rest_ticks: u64,
    /// Replace each trial's world seed by one drawn from the session seed,
    /// so concurrent sessions see different trails.
    pub reseed: bool,
}

impl Default for SessionOptions {
    fn default() -> Self {
        Self { wheel: WheelMap::default(), rest_ticks: 40, reseed: true }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    In,
    Out,
}

/// One line of the append-only session log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "entry", rename_all = "snake_case")]
pub enum LogEntry {
    Open { session_id: String, subject_label: String, session_seed: u64, options: SessionOptions },
    Message { t_ms: f64, direction: Direction, message: WireMessage },
    /// Full config of a trial as run, after any reseeding.
    Trial { t_ms: f64, config: TrialConfig },
    Tick { t_ms: f64, trial_id: String, raw: f64, record: TrajectoryRecord, late: bool, lateness_ms: f64 },
    Note { t_ms: f64, text: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputOutcome {
    Accepted,
    Clamped,
    Ignored,
}

#[derive(Debug, Clone)]
struct Active {
    run: TrialRun,
    centerline: f64,
    /// Unknown until the first input of the trial arrives.
    wheel: Option<f64>,
    previous_wheel: Option<f64>,
    pending: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    subject_label: String,
    seed: u64,
    options: SessionOptions,
    queue: Vec<TrialConfig>,
    next_trial: usize,
    state: SessionState,
    greeted: bool,
    clock: u64,
    last_ms: f64,
    rest_left: u64,
    active: Option<Active>,
    records: Vec<TrialRecord>,
    log: Vec<LogEntry>,
    flushed: usize,
}

fn derive_seed(session_seed: u64, index: usize) -> u64 {
    use rand::{RngCore, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(session_seed);
    rng.set_stream(index as u64 + 1);
    rng.next_u64()
}

impl Session {
    pub fn new(
        id: impl Into<String>,
        subject_label: impl Into<String>,
        queue: Vec<TrialConfig>,
        seed: u64,
        options: SessionOptions,
    ) -> Result<Self> {
        for c in &queue {
            c.validate()?;
        }
        let id = id.into();
        let subject_label = subject_label.into();
        let log = vec![LogEntry::Open { session_id: id.clone(), subject_label: subject_label.clone(), session_seed: seed, options }];
        Ok(Self {
            id,
            subject_label,
            seed,
            options,
            queue,
            next_trial: 0,
            state: SessionState::Idle,
            greeted: false,
            clock: 0,
            last_ms: 0.0,
            rest_left: 0,
            active: None,
            records: Vec::new(),
            log,
            flushed: 0,
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn subject_label(&self) -> &str {
        &self.subject_label
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn clock(&self) -> u64 {
        self.clock
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    /// Entries appended since the last call, for persisting.
    pub fn take_new_log_entries(&mut self) -> Vec<LogEntry> {
        let out = self.log[self.flushed..].to_vec();
        self.flushed = self.log.len();
        out
    }

    fn stamp(&mut self, now_ms: f64) -> f64 {
        if now_ms < self.last_ms {
            self.note(self.last_ms, format!("clock went backwards to {now_ms} ms; holding {} ms", self.last_ms));
            return self.last_ms;
        }
        self.last_ms = now_ms;
        now_ms
    }

    fn note(&mut self, t_ms: f64, text: String) {
        log::warn!("session {}: {text}", self.id);
        self.log.push(LogEntry::Note { t_ms, text });
    }

    fn out(&mut self, t_ms: f64, msgs: Vec<WireMessage>) -> Vec<WireMessage> {
        for m in &msgs {
            self.log.push(LogEntry::Message { t_ms, direction: Direction::Out, message: m.clone() });
        }
        msgs
    }

    /// Handle one client message. Returns the replies to send.
    pub fn handle(&mut self, msg: &WireMessage, now_ms: f64) -> Vec<WireMessage> {
        let t = self.stamp(now_ms);
        self.log.push(LogEntry::Message { t_ms: t, direction: Direction::In, message: msg.clone() });
        match msg {
            WireMessage::Hello { .. } => {
                self.greeted = true;
                let ack = WireMessage::HelloAck {
                    session_id: self.id.clone(),
                    tick_seconds: TICK_SECONDS,
                    preview_ticks: BASE_PREVIEW_TICKS,
                };
                self.out(t, vec![ack])
            }
            WireMessage::Input { wheel, .. } => match self.ingest_input(*wheel, t) {
                Ok(_) => Vec::new(),
                Err(e) => self.out(t, vec![WireMessage::error("bad_input", e.to_string())]),
            },
            other => {
                let text = format!("unexpected client message {:?}", kind_of(other));
                self.out(t, vec![WireMessage::error("unexpected", text)])
            }
        }
    }

    /// Latest wheel position wins within a tick; out-of-range values are clamped.
    pub fn ingest_input(&mut self, wheel: f64, t_ms: f64) -> Result<InputOutcome> {
        if !wheel.is_finite() {
            return Err(Error::NonFinite { what: "wheel position", tick: self.clock, value: wheel });
        }
        let Some(active) = self.active.as_mut() else {
            self.note(t_ms, format!("input {wheel} ignored in state {:?}", self.state));
            return Ok(InputOutcome::Ignored);
        };
        let clamped = wheel.clamp(-1.0, 1.0);
        active.pending = Some(clamped);
        if clamped != wheel {
            self.note(t_ms, format!("wheel {wheel} clamped to {clamped}"));
            return Ok(InputOutcome::Clamped);
        }
        Ok(InputOutcome::Accepted)
    }

    /// Advance the server clock by one tick. `lateness_ms` is how far past
    /// its schedule the tick fired.
    pub fn tick(&mut self, now_ms: f64, lateness_ms: f64) -> Result<Vec<WireMessage>> {
        let t = self.stamp(now_ms);
        self.clock += 1;
        match self.state {
            SessionState::Idle if self.greeted => self.start_next(t),
            SessionState::Idle | SessionState::Done => Ok(Vec::new()),
            SessionState::BetweenTrials => {
                if self.rest_left > 0 {
                    self.rest_left -= 1;
                    return Ok(Vec::new());
                }
                self.start_next(t)
            }
            SessionState::Running => self.advance(t, lateness_ms),
        }
    }

    fn start_next(&mut self, t: f64) -> Result<Vec<WireMessage>> {
        if self.next_trial >= self.queue.len() {
            self.state = SessionState::Done;
            return Ok(Vec::new());
        }
        let mut cfg = self.queue[self.next_trial].clone();
        if self.options.reseed {
            cfg.seed = derive_seed(self.seed, self.next_trial);
        }
        self.next_trial += 1;
        let run = TrialRun::new(&cfg)?;
        self.log.push(LogEntry::Trial { t_ms: t, config: cfg.clone() });
        self.active = Some(Active { run, centerline: 0.0, wheel: None, previous_wheel: None, pending: None });
        self.state = SessionState::Running;
        let start = WireMessage::TrialStart {
            trial_id: cfg.trial_id.clone(),
            condition: cfg.condition,
            added_delay_ticks: cfg.added_delay_ticks,
            added_rate_bits: cfg.added_rate_bits,
            segment_ticks: cfg.segment_ticks,
            preview_ticks: cfg.preview_ticks(),
        };
        let frame = self.frame();
        Ok(self.out(t, vec![start, frame]))
    }

    fn frame(&self) -> WireMessage {
        let a = self.active.as_ref().expect("frame needs a running trial");
        let tick = a.run.tick();
        let now = a.run.disturbance(tick);
        let mut c = a.centerline;
        let mut preview = Vec::with_capacity(a.run.config().preview_ticks());
        for k in 0..a.run.config().preview_ticks() as u64 {
            c -= a.run.disturbance(tick + k).r;
            preview.push(c);
        }
        WireMessage::Frame {
            tick,
            cursor_x: a.run.x() + a.centerline,
            trail_now: a.centerline,
            trail_preview: preview,
            bump_active: now.b != 0.0,
            bump: now.b,
        }
    }

    fn advance(&mut self, t: f64, lateness_ms: f64) -> Result<Vec<WireMessage>> {
        let map = self.options.wheel;
        let a = self.active.as_mut().expect("running implies an active trial");
        if let Some(w) = a.pending.take() {
            a.wheel = Some(w);
        }
        let raw = match (a.wheel, a.previous_wheel) {
            (Some(w), Some(prev)) => map.command(w, prev),
            (Some(w), None) if map.mode == WheelMode::Position => map.command(w, w),
            _ => 0.0,
        };
        a.previous_wheel = a.wheel;
        let r = a.run.disturbance(a.run.tick()).r;
        a.run.step(raw)?;
        a.centerline -= r;
        let trial_id = a.run.config().trial_id.clone();
        let record = *a.run_records_last();
        let late = lateness_ms > LATE_TICK_MS;
        self.log.push(LogEntry::Tick { t_ms: t, trial_id, raw, record, late, lateness_ms });
        if late {
            self.note(t, format!("tick {} fired {lateness_ms:.1} ms late", record.tick));
        }
        if self.active.as_ref().is_some_and(|a| a.run.is_done()) {
            return Ok(self.end_trial(t));
        }
        let frame = self.frame();
        Ok(self.out(t, vec![frame]))
    }

    fn end_trial(&mut self, t: f64) -> Vec<WireMessage> {
        let a = self.active.take().expect("ending needs an active trial");
        let rec = a.run.finish();
        let msgs = vec![
            WireMessage::TrialEnd {
                trial_id: rec.config.trial_id.clone(),
                summary: EndSummary { sup_error: rec.summary.sup_error, mean_windowed: rec.summary.mean_windowed },
                complete: rec.complete,
            },
            WireMessage::Metrics { trial_id: rec.config.trial_id.clone(), windowed_errors: rec.windowed_errors.clone() },
        ];
        self.records.push(rec);
        self.rest_left = self.options.rest_ticks;
        self.state = if self.next_trial >= self.queue.len() { SessionState::Done } else { SessionState::BetweenTrials };
        self.out(t, msgs)
    }

    /// The connection dropped. A running trial is closed as incomplete and
    /// the session waits to resume at the next trial.
    pub fn disconnect(&mut self, now_ms: f64) {
        let t = self.stamp(now_ms);
        self.greeted = false;
        if self.active.is_some() {
            self.note(t, "client disconnected mid-trial".into());
            let msgs = self.end_trial(t);
            drop(msgs);
        }
        if self.state != SessionState::Done {
            self.state = SessionState::Idle;
        }
    }
}

impl Active {
    fn run_records_last(&self) -> &TrajectoryRecord {
        self.run.last_record().expect("a step was just taken")
    }
}

fn kind_of(m: &WireMessage) -> &'static str {
    match m {
        WireMessage::Hello { .. } => "Hello",
        WireMessage::HelloAck { .. } => "HelloAck",
        WireMessage::TrialStart { .. } => "TrialStart",
        WireMessage::Frame { .. } => "Frame",
        WireMessage::Input { .. } => "Input",
        WireMessage::TrialEnd { .. } => "TrialEnd",
        WireMessage::Metrics { .. } => "Metrics",
        WireMessage::Error { .. } => "Error",
    }
}
