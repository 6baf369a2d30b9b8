//! A simulated pilot that plays through the wire protocol the way the game
//! client does: it only sees Frames, rebuilds the error and the trail from
//! them, and answers with wheel positions.

use crate::control::{Pilot, PilotModel};
use crate::error::{Error, Result};
use crate::experiment::trial::{TrialConfig, TrialRecord};
use crate::session::engine::{Session, SessionOptions, SessionState, WheelMap};
use crate::session::protocol::WireMessage;

#[derive(Debug, Clone)]
pub struct LoopbackPilot {
    model: PilotModel,
    seed: u64,
    map: WheelMap,
    wheel: f64,
    trials_started: u64,
    pilot: Option<Pilot>,
}

impl LoopbackPilot {
    pub fn new(model: PilotModel, seed: u64, map: WheelMap) -> Result<Self> {
        model.validate()?;
        if model.reaction_delay == 0 {
            // a Frame shows the trail one tick short of what the direct
            // harness hands the pilot; a delay of one tick hides that
            return Err(Error::Domain("loopback pilot needs a reaction delay of at least one tick".into()));
        }
        Ok(Self { model, seed, map, wheel: 0.0, trials_started: 0, pilot: None })
    }

    pub fn hello(&self) -> WireMessage {
        WireMessage::Hello { client_version: "loopback-pilot".into(), subject_label: Some("pilot".into()), resume_session: None }
    }

    /// Pilot seed of the `k`-th trial of the session.
    pub fn trial_seed(&self, k: u64) -> u64 {
        self.seed.wrapping_add(k)
    }

    /// React to a server message; returns the Input to send, if any.
    pub fn handle(&mut self, msg: &WireMessage) -> Result<Option<WireMessage>> {
        match msg {
            WireMessage::TrialStart { added_delay_ticks, preview_ticks, .. } => {
                let seed = self.trial_seed(self.trials_started);
                // re-centre during the rest; the server takes the first
                // sample of the trial as the reference
                self.wheel = 0.0;
                self.trials_started += 1;
                let actuation = (*added_delay_ticks).max(0) as usize;
                self.pilot = Some(Pilot::new(self.model, seed)?.with_task(*preview_ticks, actuation));
                Ok(None)
            }
            WireMessage::Frame { tick, cursor_x, trail_now, trail_preview, bump, .. } => {
                let Some(pilot) = self.pilot.as_mut() else { return Ok(None) };
                pilot.observe_x(*tick, cursor_x - trail_now);
                pilot.observe_bump(*tick, *bump);
                let mut c = *trail_now;
                for (k, next) in trail_preview.iter().enumerate() {
                    pilot.observe_trail(tick + k as u64, c - next);
                    c = *next;
                }
                let u = pilot.decide(*tick);
                self.wheel = self.map.wheel_for(u, self.wheel);
                Ok(Some(WireMessage::Input { client_tick: *tick, wheel: self.wheel }))
            }
            WireMessage::TrialEnd { .. } => {
                self.pilot = None;
                Ok(None)
            }
            WireMessage::Error { code, message } => Err(Error::State(format!("server error {code}: {message}"))),
            _ => Ok(None),
        }
    }
}

/// Play a whole session against an in-process engine, without wall-clock
/// pacing. Returns the session so its log and records can be inspected.
pub fn run_loopback_session(
    session_id: &str,
    trials: Vec<TrialConfig>,
    session_seed: u64,
    options: SessionOptions,
    model: PilotModel,
    pilot_seed: u64,
) -> Result<Session> {
    let mut session = Session::new(session_id, "pilot", trials, session_seed, options)?;
    let mut client = LoopbackPilot::new(model, pilot_seed, options.wheel)?;
    let ms = |tick: u64| tick as f64 * 50.0;
    session.handle(&client.hello(), 0.0);
    while session.state() != SessionState::Done {
        let now = ms(session.clock() + 1);
        for m in session.tick(now, 0.0)? {
            if let Some(reply) = client.handle(&m)? {
                let replies = session.handle(&reply, now + 1.0);
                if let Some(e) = replies.into_iter().find(|r| matches!(r, WireMessage::Error { .. })) {
                    client.handle(&e)?;
                }
            }
        }
    }
    Ok(session)
}

/// Records of a loopback session, in trial order.
pub fn loopback_records(
    trials: Vec<TrialConfig>,
    model: PilotModel,
    pilot_seed: u64,
    options: SessionOptions,
) -> Result<Vec<TrialRecord>> {
    Ok(run_loopback_session("loopback", trials, 0, options, model, pilot_seed)?.records().to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::trial::{run_trial, Condition, InputSource};
    use crate::session::engine::WheelMode;

    fn fixed() -> SessionOptions {
        SessionOptions { rest_ticks: 0, reseed: false, ..Default::default() }
    }

    #[test]
    fn matches_direct_run_with_same_seed() {
        // no internal quantizer and no noise, so rounding cannot flip a
        // command into another cell and the two runs stay together
        let smooth = PilotModel { effective_rate: f64::INFINITY, motor_noise_std: 0.0, ..PilotModel::default() };
        for cfg in [
            TrialConfig::new("a", Condition::Both, 11),
            TrialConfig::new("b", Condition::Both, 12).with_delay(4),
            TrialConfig::new("c", Condition::TrailOnly, 13).with_delay(-8),
        ] {
            let direct = run_trial(&cfg, &InputSource::Pilot { model: smooth, seed: 7 }).unwrap();
            let via = loopback_records(vec![cfg.clone()], smooth, 7, fixed()).unwrap();
            let (a, b) = (&direct.windowed_errors, &via[0].windowed_errors);
            for (x, y) in a.iter().zip(b) {
                assert!((x - y).abs() < 1e-9, "{}: {a:?} vs {b:?}", cfg.trial_id);
            }
        }
    }

    #[test]
    fn position_mode_also_works() {
        let opts = SessionOptions { wheel: WheelMap { mode: WheelMode::Position, gain: 2.0 }, ..fixed() };
        let cfg = TrialConfig::new("a", Condition::Both, 4);
        let direct = run_trial(&cfg, &InputSource::Pilot { model: PilotModel::default(), seed: 0 }).unwrap();
        let via = loopback_records(vec![cfg], PilotModel::default(), 0, opts).unwrap();
        let rel = (direct.summary.mean_windowed - via[0].summary.mean_windowed).abs() / direct.summary.mean_windowed;
        assert!(rel < 0.25, "{rel}");
    }

    #[test]
    fn zero_reaction_delay_is_rejected() {
        let m = PilotModel { reaction_delay: 0, ..PilotModel::default() };
        assert!(LoopbackPilot::new(m, 0, WheelMap::default()).is_err());
    }
}
