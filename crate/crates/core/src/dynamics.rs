//! The scalar lateral-error plant `x(t+1) = x(t) + w(t) + u(t)` and the
//! closed-loop driver around it.
//!
//! One tick is 0.05 s of experiment time, so every protocol value used by the
//! experiment (added delays, bump duration, the 2 s metric window) is an
//! integer number of ticks.

use serde::{Deserialize, Serialize};

use crate::error::{domain, ensure_finite, Result};

/// Seconds of experiment time per tick.
pub const TICK_SECONDS: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub x: f64,
    pub tick: u64,
}

/// The two physical disturbance channels. Unsplit disturbances travel on
/// the bump channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    Bump,
    Trail,
}

/// One tick of disturbance, split into its bump and trail parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct DisturbanceSample {
    pub w: f64,
    pub b: f64,
    pub r: f64,
}

impl DisturbanceSample {
    pub fn new(b: f64, r: f64) -> Self {
        Self { w: b + r, b, r }
    }

    /// A disturbance that is not split into channels; carried on the bump part.
    pub fn single(w: f64) -> Self {
        Self::new(w, 0.0)
    }

    pub const ZERO: Self = Self { w: 0.0, b: 0.0, r: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlCommand {
    pub u: f64,
    pub u_low: f64,
    pub u_high: f64,
}

impl ControlCommand {
    pub fn new(u_low: f64, u_high: f64) -> Self {
        Self { u: u_low + u_high, u_low, u_high }
    }

    /// Single-loop command; the whole effect is booked on the low part.
    pub fn single(u: f64) -> Self {
        Self::new(u, 0.0)
    }

    pub const ZERO: Self = Self { u: 0.0, u_low: 0.0, u_high: 0.0 };
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub horizon: u64,
    pub tick_seconds: f64,
    /// Ticks at the start of a run that metrics ignore.
    pub warmup_ticks: u64,
    pub seed: u64,
    pub x0: f64,
}

impl SimConfig {
    pub fn new(horizon: u64) -> Self {
        Self { horizon, tick_seconds: TICK_SECONDS, warmup_ticks: 0, seed: 0, x0: 0.0 }
    }

    pub fn with_warmup(mut self, warmup_ticks: u64) -> Self {
        self.warmup_ticks = warmup_ticks;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon <= self.warmup_ticks {
            return Err(domain(format!(
                "horizon {} must exceed warmup {}",
                self.horizon, self.warmup_ticks
            )));
        }
        if !(self.tick_seconds > 0.0) {
            return Err(domain("tick_seconds must be positive"));
        }
        ensure_finite("x0", 0, self.x0)?;
        Ok(())
    }
}

/// Advance the plant by one tick.
pub fn step_plant(
    s: PlantState,
    w: &DisturbanceSample,
    u: &ControlCommand,
) -> Result<PlantState> {
    ensure_finite("x", s.tick, s.x)?;
    ensure_finite("w", s.tick, w.w)?;
    ensure_finite("u", s.tick, u.u)?;
    Ok(PlantState { x: s.x + w.w + u.u, tick: s.tick + 1 })
}

/// What a controller is shown at tick `t`: the current error, the disturbance
/// sample committed for this tick and any previewed future samples. Each
/// controller applies its own delay lines to decide what it may actually use.
#[derive(Debug, Clone, Copy)]
pub struct Observation<'a> {
    pub tick: u64,
    pub x: f64,
    pub w: DisturbanceSample,
    pub preview: &'a [DisturbanceSample],
}

pub trait Controller {
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand>;

    /// Number of future disturbance samples this controller wants to see.
    fn preview_len(&self) -> usize {
        0
    }

    /// Values of this tick's disturbance on `channel` that would place the
    /// controller's quantizer input exactly on a cell boundary when that
    /// sample is eventually used. Adversaries probe just either side of these.
    fn edge_disturbances(&self, _channel: Channel, _bound: f64) -> Vec<f64> {
        Vec::new()
    }
}

impl<C: Controller + ?Sized> Controller for Box<C> {
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand> {
        (**self).step(obs)
    }
    fn preview_len(&self) -> usize {
        (**self).preview_len()
    }
    fn edge_disturbances(&self, channel: Channel, bound: f64) -> Vec<f64> {
        (**self).edge_disturbances(channel, bound)
    }
}

/// Always outputs zero.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroController;

impl Controller for ZeroController {
    fn step(&mut self, _obs: &Observation<'_>) -> Result<ControlCommand> {
        Ok(ControlCommand::ZERO)
    }
}

/// Wraps a closure as a controller.
#[derive(Clone)]
pub struct FnController<F>(pub F);

impl<F> Controller for FnController<F>
where
    F: FnMut(&Observation<'_>) -> ControlCommand,
{
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand> {
        Ok((self.0)(obs))
    }
}

pub trait DisturbanceSource {
    fn sample(&mut self, tick: u64) -> DisturbanceSample;

    /// Already-committed samples for ticks `from..from+len`. Sources without a
    /// committed future return fewer (possibly zero) samples.
    fn preview(&self, _from: u64, _len: usize) -> Vec<DisturbanceSample> {
        Vec::new()
    }
}

/// A fully committed disturbance schedule; ticks past its end are zero.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub samples: Vec<DisturbanceSample>,
}

impl Schedule {
    pub fn new(samples: Vec<DisturbanceSample>) -> Self {
        Self { samples }
    }

    pub fn from_parts(b: &[f64], r: &[f64]) -> Self {
        let n = b.len().max(r.len());
        let at = |v: &[f64], i: usize| v.get(i).copied().unwrap_or(0.0);
        Self::new((0..n).map(|i| DisturbanceSample::new(at(b, i), at(r, i))).collect())
    }

    pub fn get(&self, tick: u64) -> DisturbanceSample {
        self.samples.get(tick as usize).copied().unwrap_or(DisturbanceSample::ZERO)
    }
}

impl DisturbanceSource for Schedule {
    fn sample(&mut self, tick: u64) -> DisturbanceSample {
        self.get(tick)
    }

    fn preview(&self, from: u64, len: usize) -> Vec<DisturbanceSample> {
        let start = (from as usize).min(self.samples.len());
        let end = (start + len).min(self.samples.len());
        self.samples[start..end].to_vec()
    }
}

impl<F: FnMut(u64) -> DisturbanceSample> DisturbanceSource for F {
    fn sample(&mut self, tick: u64) -> DisturbanceSample {
        self(tick)
    }
}

/// One logged tick: the state at `tick`, the disturbance and command applied
/// during it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub tick: u64,
    pub x: f64,
    pub w: f64,
    pub b: f64,
    pub r: f64,
    pub u: f64,
    pub u_low: f64,
    pub u_high: f64,
}

impl TrajectoryRecord {
    pub fn new(s: PlantState, w: &DisturbanceSample, u: &ControlCommand) -> Self {
        Self { tick: s.tick, x: s.x, w: w.w, b: w.b, r: w.r, u: u.u, u_low: u.u_low, u_high: u.u_high }
    }

    pub fn disturbance(&self) -> DisturbanceSample {
        DisturbanceSample { w: self.w, b: self.b, r: self.r }
    }

    pub fn command(&self) -> ControlCommand {
        ControlCommand { u: self.u, u_low: self.u_low, u_high: self.u_high }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Trajectory {
    pub records: Vec<TrajectoryRecord>,
    pub final_state: PlantState,
}

impl Trajectory {
    pub fn xs(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.x).collect()
    }

    /// `x` at ticks `0..=horizon`, including the state after the last step.
    pub fn xs_with_final(&self) -> Vec<f64> {
        let mut xs = self.xs();
        xs.push(self.final_state.x);
        xs
    }

    /// Largest `|x|` over ticks `from..=horizon`.
    pub fn sup_abs_after(&self, from: u64) -> f64 {
        self.xs_with_final()
            .iter()
            .skip(from as usize)
            .fold(0.0_f64, |m, x| m.max(x.abs()))
    }
}

pub fn run_closed_loop<S, C>(cfg: &SimConfig, source: &mut S, controller: &mut C) -> Result<Trajectory>
where
    S: DisturbanceSource + ?Sized,
    C: Controller + ?Sized,
{
    cfg.validate()?;
    let mut state = PlantState { x: cfg.x0, tick: 0 };
    let mut records = Vec::with_capacity(cfg.horizon as usize);
    let k = controller.preview_len();
    for t in 0..cfg.horizon {
        let w = source.sample(t);
        let preview = if k > 0 { source.preview(t + 1, k) } else { Vec::new() };
        let obs = Observation { tick: t, x: state.x, w, preview: &preview };
        let u = controller.step(&obs)?;
        if !u.u.is_finite() {
            log::error!("controller emitted u={} at tick {t} (x={}, w={})", u.u, state.x, w.w);
        }
        ensure_finite("u", t, u.u)?;
        records.push(TrajectoryRecord::new(state, &w, &u));
        state = step_plant(state, &w, &u)?;
    }
    Ok(Trajectory { records, final_state: state })
}

/// Re-apply logged disturbances and commands from `x0`; returns `x` at every
/// tick including the final one.
pub fn replay(records: &[TrajectoryRecord], x0: f64) -> Result<Vec<f64>> {
    let mut state = PlantState { x: x0, tick: records.first().map_or(0, |r| r.tick) };
    let mut xs = Vec::with_capacity(records.len() + 1);
    for rec in records {
        xs.push(state.x);
        state = step_plant(state, &rec.disturbance(), &rec.command())?;
    }
    xs.push(state.x);
    Ok(xs)
}
