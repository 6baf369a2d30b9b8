//! A simulated human driver for the trail-following task.
//!
//! The pilot sees the world `reaction_delay` ticks late: the error `x`, the
//! bump it feels through the wheel, and the trail including however far
//! ahead the screen shows it. It predicts where the error will be when its
//! next command lands, steers against that with a proportional gain, sends
//! the command through a coarse internal quantizer (a rate limit on what the
//! hand can resolve) and adds motor noise.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::channels::UniformQuantizer;
use crate::dynamics::{ControlCommand, Controller, Observation};
use crate::error::{domain, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PilotModel {
    /// Ticks between something happening and the pilot knowing it.
    pub reaction_delay: u32,
    /// Bits per tick the pilot can resolve; `f64::INFINITY` means unlimited.
    pub effective_rate: f64,
    pub motor_noise_std: f64,
    pub gain: f64,
    /// Largest command magnitude the pilot issues.
    pub command_range: f64,
}

impl Default for PilotModel {
    fn default() -> Self {
        Self { reaction_delay: 4, effective_rate: 4.0, motor_noise_std: 0.05, gain: 0.8, command_range: 1.5 }
    }
}

impl PilotModel {
    pub fn validate(&self) -> Result<()> {
        if !(self.effective_rate >= 1.0) {
            return Err(domain(format!("pilot rate must be at least 1 bit, got {}", self.effective_rate)));
        }
        if !(self.motor_noise_std >= 0.0) || !self.motor_noise_std.is_finite() {
            return Err(domain(format!("motor noise must be non-negative, got {}", self.motor_noise_std)));
        }
        if !(self.gain > 0.0 && self.gain <= 1.0) {
            return Err(domain(format!("gain must lie in (0, 1], got {}", self.gain)));
        }
        if !(self.command_range > 0.0) || !self.command_range.is_finite() {
            return Err(domain(format!("command range must be positive, got {}", self.command_range)));
        }
        Ok(())
    }

    /// Odd cell count `2^R - 1` so that "do nothing" is a reachable command.
    fn quantizer(&self) -> Result<Option<UniformQuantizer>> {
        if self.effective_rate.is_infinite() {
            return Ok(None);
        }
        let cells = (2f64.powf(self.effective_rate.min(62.0)).floor() as u64 - 1).max(1);
        Ok(Some(UniformQuantizer::new(cells, self.command_range)?))
    }
}

#[derive(Debug, Clone)]
pub struct Pilot {
    model: PilotModel,
    quantizer: Option<UniformQuantizer>,
    noise: Option<Normal<f64>>,
    rng: ChaCha8Rng,
    /// Trail samples visible ahead of the current tick.
    preview_ticks: usize,
    /// Ticks between issuing a command and it reaching the plant.
    actuation_delay: usize,
    xs: Vec<f64>,
    bumps: Vec<f64>,
    trail: Vec<f64>,
    intended: Vec<f64>,
}

pub fn make_pilot(pm: PilotModel, seed: u64) -> Result<Pilot> {
    Pilot::new(pm, seed)
}

impl Pilot {
    pub fn new(model: PilotModel, seed: u64) -> Result<Self> {
        model.validate()?;
        let noise = if model.motor_noise_std > 0.0 {
            Some(Normal::new(0.0, model.motor_noise_std).map_err(|e| domain(e.to_string()))?)
        } else {
            None
        };
        Ok(Self {
            model,
            quantizer: model.quantizer()?,
            noise,
            rng: ChaCha8Rng::seed_from_u64(seed),
            preview_ticks: 0,
            actuation_delay: 0,
            xs: Vec::new(),
            bumps: Vec::new(),
            trail: Vec::new(),
            intended: Vec::new(),
        })
    }

    /// Describe the task: how far ahead the trail is shown and how long
    /// commands take to land.
    pub fn with_task(mut self, preview_ticks: usize, actuation_delay: usize) -> Self {
        self.preview_ticks = preview_ticks;
        self.actuation_delay = actuation_delay;
        self
    }

    pub fn model(&self) -> &PilotModel {
        &self.model
    }

    fn record(v: &mut Vec<f64>, tick: u64, value: f64) {
        let i = tick as usize;
        if v.len() <= i {
            v.resize(i + 1, 0.0);
        }
        v[i] = value;
    }

    pub fn observe_x(&mut self, tick: u64, x: f64) {
        Self::record(&mut self.xs, tick, x);
    }

    pub fn observe_bump(&mut self, tick: u64, b: f64) {
        Self::record(&mut self.bumps, tick, b);
    }

    pub fn observe_trail(&mut self, tick: u64, r: f64) {
        Self::record(&mut self.trail, tick, r);
    }

    /// Command issued at `tick`, after all observations for that tick.
    pub fn decide(&mut self, tick: u64) -> f64 {
        let t = tick as usize;
        let d = self.model.reaction_delay as usize;
        let intended = if t < d {
            0.0
        } else {
            let base = t - d;
            let lands = t + self.actuation_delay;
            let trail_seen = (base + self.preview_ticks).min(self.trail.len().saturating_sub(1));
            let bump = |s: usize| self.bumps.get(s.min(base)).copied().unwrap_or(0.0);
            let trail = |s: usize| self.trail.get(s.min(trail_seen)).copied().unwrap_or(0.0);
            let mut x = self.xs.get(base).copied().unwrap_or(0.0);
            for s in base..lands {
                let landed = if s >= self.actuation_delay {
                    self.intended.get(s - self.actuation_delay).copied().unwrap_or(0.0)
                } else {
                    0.0
                };
                x += bump(s) + trail(s) + landed;
            }
            let target = x + bump(lands) + trail(lands);
            let u = (-self.model.gain * target).clamp(-self.model.command_range, self.model.command_range);
            match &mut self.quantizer {
                Some(q) => q.quantize(u),
                None => u,
            }
        };
        Self::record(&mut self.intended, tick, intended);
        let noise = self.noise.map_or(0.0, |n| n.sample(&mut self.rng));
        intended + noise
    }
}

impl Controller for Pilot {
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand> {
        self.observe_x(obs.tick, obs.x);
        self.observe_bump(obs.tick, obs.w.b);
        self.observe_trail(obs.tick, obs.w.r);
        for (k, p) in obs.preview.iter().enumerate() {
            self.observe_trail(obs.tick + 1 + k as u64, p.r);
        }
        Ok(ControlCommand::single(self.decide(obs.tick)))
    }

    fn preview_len(&self) -> usize {
        self.preview_ticks
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{run_closed_loop, DisturbanceSample, Schedule, SimConfig};

    fn quiet() -> PilotModel {
        PilotModel { reaction_delay: 0, effective_rate: f64::INFINITY, motor_noise_std: 0.0, gain: 1.0, command_range: 10.0 }
    }

    #[test]
    fn no_disturbance_no_motion() {
        let mut p = make_pilot(quiet(), 0).unwrap();
        let traj = run_closed_loop(&SimConfig::new(100), &mut Schedule::default(), &mut p).unwrap();
        assert!(traj.xs_with_final().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn reacts_after_reaction_delay() {
        let pm = PilotModel { reaction_delay: 4, motor_noise_std: 0.0, ..PilotModel::default() };
        let mut p = make_pilot(pm, 0).unwrap();
        let k = 10;
        let mut src = |t: u64| DisturbanceSample::single(if t >= k { 0.3 } else { 0.0 });
        let traj = run_closed_loop(&SimConfig::new(30), &mut src, &mut p).unwrap();
        let first = traj.records.iter().find(|r| r.u != 0.0).unwrap().tick;
        assert_eq!(first, k + 4);
    }

    #[test]
    fn perfect_pilot_cancels_previewed_trail() {
        let mut p = make_pilot(quiet(), 0).unwrap().with_task(5, 0);
        let r: Vec<f64> = (0..200).map(|t| if (t / 20) % 2 == 0 { 0.2 } else { -0.2 }).collect();
        let traj = run_closed_loop(&SimConfig::new(200), &mut Schedule::from_parts(&[], &r), &mut p).unwrap();
        assert!(traj.sup_abs_after(0) < 1e-12);
    }

    #[test]
    fn seeded_noise_is_reproducible() {
        let run = |seed| {
            let mut p = make_pilot(PilotModel::default(), seed).unwrap();
            run_closed_loop(&SimConfig::new(50), &mut Schedule::default(), &mut p).unwrap().xs()
        };
        assert_eq!(run(3), run(3));
        assert_ne!(run(3), run(4));
    }

    #[test]
    fn model_validation() {
        let ok = PilotModel::default();
        assert!(ok.validate().is_ok());
        assert!(PilotModel { motor_noise_std: -1.0, ..ok }.validate().is_err());
        assert!(PilotModel { gain: 0.0, ..ok }.validate().is_err());
        assert!(PilotModel { gain: 1.5, ..ok }.validate().is_err());
        assert!(PilotModel { effective_rate: 0.5, ..ok }.validate().is_err());
        assert_eq!(ok.quantizer().unwrap().unwrap().cells(), 15);
    }
}
