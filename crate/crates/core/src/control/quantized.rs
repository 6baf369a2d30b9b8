//! Interval-quantizing controller that meets the worst-case bound
//! `max(0, T) + 1/(2^R - 1)`.
//!
//! The controller keeps the part of the error it can account for (the
//! un-cancelled quantization residual plus every disturbance it has already
//! seen) in an interval `[-M, M]`, and each tick sends one quantizer cell
//! index for it. With `N` cells the residual after a tick is at most `M/N`,
//! and the next known disturbance grows it back to `M/N + |w|`. The fixed
//! point `M = |w| N/(N-1)` leaves a residual of `|w|/(N-1)`. Disturbances
//! that arrived within the last `T` ticks are not yet known; they add the
//! `T |w|` delay term on top.

use crate::channels::{DelayLine, LoopParams, RateSchedule, UniformQuantizer};
use crate::dynamics::{Channel, ControlCommand, Controller, Observation};
use crate::error::{domain, Result};

/// What the controller senses.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InformationPattern {
    /// Sees the disturbance itself, `max(0, T)` ticks late.
    Feedforward,
    /// Sees the error `x`, `max(0, T)` ticks late, and reconstructs the
    /// disturbance from consecutive readings (one extra tick of lag).
    Feedback,
}

/// Which part of the disturbance the controller is wired to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Tap {
    Total,
    Bump,
    Trail,
}

impl Tap {
    fn read(self, obs: &Observation<'_>) -> f64 {
        match self {
            Tap::Total => obs.w.w,
            Tap::Bump => obs.w.b,
            Tap::Trail => obs.w.r,
        }
    }

    fn senses(self, channel: Channel) -> bool {
        matches!(
            (self, channel),
            (Tap::Total, Channel::Bump) | (Tap::Bump, Channel::Bump) | (Tap::Trail, Channel::Trail)
        )
    }
}

#[derive(Debug, Clone)]
pub struct QuantizedController {
    params: LoopParams,
    w_bound: f64,
    pattern: InformationPattern,
    tap: Tap,
    schedule: RateSchedule,
    /// One quantizer per super-frame phase (a single one for integral rates).
    quantizers: Vec<UniformQuantizer>,
    line: DelayLine,
    residual: f64,
    next_tick: u64,
    // feedback reconstruction
    x_line: DelayLine,
    u_history: std::collections::VecDeque<f64>,
    last_seen_x: Option<f64>,
}

impl QuantizedController {
    pub fn new(params: LoopParams, w_bound: f64, pattern: InformationPattern, tap: Tap) -> Result<Self> {
        params.validate()?;
        if !(w_bound > 0.0) || !w_bound.is_finite() {
            return Err(domain(format!("disturbance bound must be positive, got {w_bound}")));
        }
        let schedule = RateSchedule::new(params.rate)?;
        let quantizers = phase_quantizers(&schedule, w_bound)?;
        let lag = params.total_delay().max(0) as usize;
        let (line, x_line) = match pattern {
            InformationPattern::Feedforward => (DelayLine::new(lag), DelayLine::new(0)),
            InformationPattern::Feedback => (DelayLine::new(0), DelayLine::new(lag)),
        };
        Ok(Self {
            params,
            w_bound,
            pattern,
            tap,
            schedule,
            quantizers,
            line,
            residual: 0.0,
            next_tick: 0,
            x_line,
            u_history: std::iter::repeat(0.0).take(lag + 1).collect(),
            last_seen_x: None,
        })
    }

    pub fn params(&self) -> &LoopParams {
        &self.params
    }

    pub fn w_bound(&self) -> f64 {
        self.w_bound
    }

    pub fn pattern(&self) -> InformationPattern {
        self.pattern
    }

    pub fn schedule(&self) -> &RateSchedule {
        &self.schedule
    }

    /// Half-range `M` of the quantizer used on `tick`.
    pub fn range_at(&self, tick: u64) -> f64 {
        self.quantizer_at(tick).half_range()
    }

    pub fn quantizer_at(&self, tick: u64) -> &UniformQuantizer {
        let i = (tick % self.quantizers.len() as u64) as usize;
        &self.quantizers[i]
    }

    /// Largest quantization residual the interval construction can leave.
    pub fn residual_bound(&self) -> f64 {
        self.quantizers.iter().map(|q| q.max_error()).fold(0.0, f64::max)
    }

    pub fn saturations(&self) -> u64 {
        self.quantizers.iter().map(|q| q.saturations()).sum()
    }

    /// Ticks between a disturbance entering the plant and the controller
    /// acting on it.
    pub fn effective_lag(&self) -> usize {
        let base = self.params.total_delay().max(0) as usize;
        match self.pattern {
            InformationPattern::Feedforward => base,
            InformationPattern::Feedback => base + 1,
        }
    }

    fn quantize(&mut self, tick: u64, a: f64) -> f64 {
        let i = (tick % self.quantizers.len() as u64) as usize;
        self.quantizers[i].quantize(a)
    }

    /// Disturbance sample the interval update consumes this tick.
    fn known_disturbance(&mut self, obs: &Observation<'_>) -> f64 {
        match self.pattern {
            InformationPattern::Feedforward => self.line.push(self.tap.read(obs)),
            InformationPattern::Feedback => {
                // x(t - T) - x(t - T - 1) - u(t - T - 1) = w(t - T - 1)
                let seen = self.x_line.push(obs.x);
                let u_old = self.u_history.pop_front().unwrap_or(0.0);
                let w = match self.last_seen_x {
                    Some(prev) if obs.tick as usize > self.x_line.len() => seen - prev - u_old,
                    _ => 0.0,
                };
                if obs.tick as usize >= self.x_line.len() {
                    self.last_seen_x = Some(seen);
                }
                w
            }
        }
    }
}

/// Per-phase quantizer ranges from the periodic fixed point of
/// `rho_i = (rho_{i-1} + w) / N_i`, with range `M_i = rho_{i-1} + w`.
fn phase_quantizers(schedule: &RateSchedule, w_bound: f64) -> Result<Vec<UniformQuantizer>> {
    if schedule.is_integral() {
        let n = schedule.cells_at(0);
        let m = w_bound * n as f64 / (n as f64 - 1.0);
        return Ok(vec![UniformQuantizer::new(n, m)?]);
    }
    let k = schedule.frame() as u64;
    let cells: Vec<u64> = (0..k).map(|t| schedule.cells_at(t)).collect();
    if cells.iter().product::<u64>() < 2 {
        return Err(domain(format!(
            "rate {} carries no bits over a {}-tick super-frame",
            schedule.rate(),
            k
        )));
    }
    let mut rho = 0.0;
    for _ in 0..10_000 {
        let start = rho;
        for &n in &cells {
            rho = (rho + w_bound) / n as f64;
        }
        if (rho - start).abs() < 1e-15 * w_bound.max(1.0) {
            break;
        }
    }
    let mut out = Vec::with_capacity(cells.len());
    for &n in &cells {
        let m = rho + w_bound;
        out.push(UniformQuantizer::new(n, m)?);
        rho = m / n as f64;
    }
    Ok(out)
}

/// The achieving controller for a loop with parameters `p` facing
/// disturbances bounded by `w_bound`.
pub fn make_optimal_controller(p: &LoopParams, w_bound: f64) -> Result<QuantizedController> {
    QuantizedController::new(*p, w_bound, InformationPattern::Feedforward, Tap::Total)
}

impl Controller for QuantizedController {
    fn step(&mut self, obs: &Observation<'_>) -> Result<ControlCommand> {
        let w_known = self.known_disturbance(obs);
        let a = self.residual + w_known;
        let q = self.quantize(obs.tick, a);
        self.residual = a - q;
        self.next_tick = obs.tick + 1;
        let u = -q;
        if self.pattern == InformationPattern::Feedback {
            self.u_history.push_back(u);
        }
        Ok(match self.tap {
            Tap::Trail => ControlCommand::new(0.0, u),
            _ => ControlCommand::single(u),
        })
    }

    fn edge_disturbances(&self, channel: Channel, bound: f64) -> Vec<f64> {
        if self.pattern != InformationPattern::Feedforward || !self.tap.senses(channel) {
            return Vec::new();
        }
        // Residual just before the sample pushed now is consumed.
        let mut r = self.residual;
        let mut tick = self.next_tick;
        for w in self.line.pending() {
            let a = r + w;
            r = a - self.quantizer_at(tick).quantize_pure(a).0;
            tick += 1;
        }
        self.quantizer_at(tick)
            .nearest_boundary(r)
            .map(|b| b - r)
            .filter(|w| w.abs() <= bound)
            .into_iter()
            .collect()
    }
}
