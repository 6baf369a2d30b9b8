//! One 30 s trial: disturbance generation, the delay/quantization
//! manipulation on the input path, the closed loop and its windowed metrics.

use serde::{Deserialize, Serialize};

use crate::channels::{DelayLine, UniformQuantizer};
use crate::control::{Pilot, PilotModel};
use crate::dynamics::{
    step_plant, Controller, DisturbanceSample, Observation, PlantState, Trajectory, TrajectoryRecord,
};
use crate::error::{domain, Error, Result};
use crate::experiment::disturbance::{generate_bumps, generate_trail, BumpSpec, TrailSpec};

/// Trail samples visible ahead of the cursor with no added warning.
pub const BASE_PREVIEW_TICKS: usize = 10;
/// Half-range of the quantizer placed on the input path.
pub const ADDED_RATE_RANGE: f64 = 1.2;
/// Two seconds.
pub const WINDOW_TICKS: usize = 40;
pub const SEGMENT_TICKS: u64 = 600;
pub const DISCARD_TICKS: u64 = 200;
/// Added delays of the delay sweep, -0.8 s to 0.4 s in 0.2 s steps.
pub const PAPER_DELAYS: [i32; 7] = [-16, -12, -8, -4, 0, 4, 8];
pub const PAPER_RATES: [u32; 7] = [1, 2, 3, 4, 5, 6, 7];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    BumpOnly,
    TrailOnly,
    Both,
}

impl Condition {
    pub fn as_str(&self) -> &'static str {
        match self {
            Condition::BumpOnly => "bump_only",
            Condition::TrailOnly => "trail_only",
            Condition::Both => "both",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "bump_only" => Ok(Condition::BumpOnly),
            "trail_only" => Ok(Condition::TrailOnly),
            "both" => Ok(Condition::Both),
            other => Err(Error::Parse(format!("unknown condition {other:?}"))),
        }
    }
}

/// Coupled delay for a rate under the simulated component law
/// `T = (R - 5) / 20` seconds, in ticks.
pub fn coupled_delay_ticks(rate: u32) -> i32 {
    rate as i32 - 5
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialConfig {
    pub trial_id: String,
    pub condition: Condition,
    /// Positive: input-path delay. Negative: extra trail preview.
    #[serde(default)]
    pub added_delay_ticks: i32,
    #[serde(default)]
    pub added_rate_bits: Option<u32>,
    #[serde(default)]
    pub coupled_sat: bool,
    #[serde(default = "default_segment")]
    pub segment_ticks: u64,
    #[serde(default = "default_discard")]
    pub discard_ticks: u64,
    /// Seeds the trail and bump generators.
    #[serde(default)]
    pub seed: u64,
    /// Bump size relative to the steepest trail push.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
}

fn default_segment() -> u64 {
    SEGMENT_TICKS
}
fn default_discard() -> u64 {
    DISCARD_TICKS
}
fn default_epsilon() -> f64 {
    1.0
}

impl TrialConfig {
    pub fn new(trial_id: impl Into<String>, condition: Condition, seed: u64) -> Self {
        Self {
            trial_id: trial_id.into(),
            condition,
            added_delay_ticks: 0,
            added_rate_bits: None,
            coupled_sat: false,
            segment_ticks: SEGMENT_TICKS,
            discard_ticks: DISCARD_TICKS,
            seed,
            epsilon: 1.0,
        }
    }

    pub fn with_delay(mut self, ticks: i32) -> Self {
        self.added_delay_ticks = ticks;
        self
    }

    pub fn with_rate(mut self, bits: Option<u32>) -> Self {
        self.added_rate_bits = bits;
        self
    }

    /// Rate `bits` together with the delay the component law ties to it.
    pub fn coupled(mut self, bits: u32) -> Self {
        self.added_rate_bits = Some(bits);
        self.added_delay_ticks = coupled_delay_ticks(bits);
        self.coupled_sat = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.segment_ticks < self.discard_ticks + WINDOW_TICKS as u64 {
            return Err(domain("segment must leave at least one window after the discard"));
        }
        if let Some(r) = self.added_rate_bits {
            if r == 0 || r > 30 {
                return Err(domain(format!("added rate must lie in 1..=30 bits, got {r}")));
            }
        }
        if self.coupled_sat {
            match self.added_rate_bits {
                Some(r) if self.added_delay_ticks == coupled_delay_ticks(r) => {}
                _ => return Err(domain("coupled trial needs added_delay_ticks = added_rate_bits - 5")),
            }
        }
        if !(self.epsilon >= 0.0) {
            return Err(domain("epsilon must be non-negative"));
        }
        Ok(())
    }

    pub fn preview_ticks(&self) -> usize {
        BASE_PREVIEW_TICKS + (-self.added_delay_ticks).max(0) as usize
    }

    pub fn actuation_delay(&self) -> usize {
        self.added_delay_ticks.max(0) as usize
    }

    /// Same disturbances and manipulations, different channel mix.
    pub fn same_world(&self, other: &TrialConfig) -> bool {
        self.seed == other.seed
            && self.segment_ticks == other.segment_ticks
            && self.discard_ticks == other.discard_ticks
            && self.added_delay_ticks == other.added_delay_ticks
            && self.added_rate_bits == other.added_rate_bits
            && self.epsilon == other.epsilon
    }
}

/// The experimenter's manipulation between the wheel and the plant: an
/// optional quantizer followed by a delay line.
#[derive(Debug, Clone)]
pub struct InputPipeline {
    quantizer: Option<UniformQuantizer>,
    line: DelayLine,
}

impl InputPipeline {
    pub fn new(cfg: &TrialConfig) -> Result<Self> {
        let quantizer = match cfg.added_rate_bits {
            Some(bits) => Some(UniformQuantizer::new(1u64 << bits, ADDED_RATE_RANGE)?),
            None => None,
        };
        Ok(Self { quantizer, line: DelayLine::new(cfg.actuation_delay()) })
    }

    pub fn apply(&mut self, command: f64) -> f64 {
        let q = match &mut self.quantizer {
            Some(q) => q.quantize(command),
            None => command,
        };
        self.line.push(q)
    }

    pub fn saturations(&self) -> u64 {
        self.quantizer.as_ref().map_or(0, |q| q.saturations())
    }
}

/// Disturbances for a trial, with the channel mix of its condition applied.
pub fn trial_disturbance(cfg: &TrialConfig) -> Result<Vec<DisturbanceSample>> {
    let trail_spec = TrailSpec::standard(cfg.seed);
    let trail = generate_trail(&trail_spec, cfg.segment_ticks)?;
    let bumps = generate_bumps(&BumpSpec::matched(&trail_spec, cfg.epsilon, cfg.seed), cfg.segment_ticks)?;
    let (use_b, use_r) = match cfg.condition {
        Condition::BumpOnly => (1.0, 0.0),
        Condition::TrailOnly => (0.0, 1.0),
        Condition::Both => (1.0, 1.0),
    };
    Ok(trail.r.iter().zip(&bumps.b).map(|(r, b)| DisturbanceSample::new(use_b * b, use_r * r)).collect())
}

/// A trial advanced one tick at a time by whoever holds the wheel.
#[derive(Debug, Clone)]
pub struct TrialRun {
    cfg: TrialConfig,
    w: Vec<DisturbanceSample>,
    pipeline: InputPipeline,
    state: PlantState,
    records: Vec<TrajectoryRecord>,
    raw: Vec<f64>,
}

impl TrialRun {
    pub fn new(cfg: &TrialConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            cfg: cfg.clone(),
            w: trial_disturbance(cfg)?,
            pipeline: InputPipeline::new(cfg)?,
            state: PlantState::default(),
            records: Vec::with_capacity(cfg.segment_ticks as usize),
            raw: Vec::with_capacity(cfg.segment_ticks as usize),
        })
    }

    pub fn config(&self) -> &TrialConfig {
        &self.cfg
    }

    pub fn tick(&self) -> u64 {
        self.state.tick
    }

    pub fn x(&self) -> f64 {
        self.state.x
    }

    pub fn is_done(&self) -> bool {
        self.state.tick >= self.cfg.segment_ticks
    }

    pub fn disturbance(&self, tick: u64) -> DisturbanceSample {
        self.w.get(tick as usize).copied().unwrap_or(DisturbanceSample::ZERO)
    }

    pub fn last_record(&self) -> Option<&TrajectoryRecord> {
        self.records.last()
    }

    /// Committed disturbances for the next `preview_ticks` ticks.
    pub fn preview(&self) -> &[DisturbanceSample] {
        let from = (self.state.tick as usize + 1).min(self.w.len());
        let to = (from + self.cfg.preview_ticks()).min(self.w.len());
        &self.w[from..to]
    }

    /// Apply the raw command issued at the current tick; returns the new `x`.
    pub fn step(&mut self, raw_command: f64) -> Result<f64> {
        if self.is_done() {
            return Err(Error::State("trial already finished".into()));
        }
        let t = self.state.tick;
        let w = self.disturbance(t);
        let applied = self.pipeline.apply(raw_command);
        let u = crate::dynamics::ControlCommand::single(applied);
        self.records.push(TrajectoryRecord::new(self.state, &w, &u));
        self.raw.push(raw_command);
        self.state = step_plant(self.state, &w, &u)?;
        Ok(self.state.x)
    }

    /// Close the trial; unfinished trials are flagged incomplete.
    pub fn finish(self) -> TrialRecord {
        let complete = self.is_done();
        TrialRecord::new(self.cfg, Trajectory { records: self.records, final_state: self.state }, self.raw, complete)
    }
}

#[derive(Debug, Clone)]
pub enum InputSource {
    Pilot { model: PilotModel, seed: u64 },
    /// Logged raw commands, one per tick.
    Replay(Vec<f64>),
}

pub fn run_trial(cfg: &TrialConfig, input: &InputSource) -> Result<TrialRecord> {
    let mut run = TrialRun::new(cfg)?;
    match input {
        InputSource::Pilot { model, seed } => {
            let mut pilot = Pilot::new(*model, *seed)?.with_task(cfg.preview_ticks(), cfg.actuation_delay());
            while !run.is_done() {
                let t = run.tick();
                let obs = Observation { tick: t, x: run.x(), w: run.disturbance(t), preview: run.preview() };
                let cmd = pilot.step(&obs)?.u;
                run.step(cmd)?;
            }
        }
        InputSource::Replay(raw) => {
            if raw.len() as u64 != cfg.segment_ticks {
                log::warn!("replaying {} commands into a {}-tick trial", raw.len(), cfg.segment_ticks);
            }
            for &cmd in raw.iter().take(cfg.segment_ticks as usize) {
                run.step(cmd)?;
            }
        }
    }
    Ok(run.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialSummary {
    pub sup_error: f64,
    pub mean_windowed: f64,
    pub mse: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub config: TrialConfig,
    pub trajectory: Trajectory,
    /// Commands as issued, before the input-path manipulation.
    pub raw_commands: Vec<f64>,
    pub windowed_errors: Vec<f64>,
    pub summary: TrialSummary,
    pub complete: bool,
}

impl TrialRecord {
    pub fn new(config: TrialConfig, trajectory: Trajectory, raw_commands: Vec<f64>, complete: bool) -> Self {
        let kept = post_discard(&trajectory, config.discard_ticks);
        let windowed_errors = compute_windowed_worst_case(&kept, WINDOW_TICKS);
        let summary = summarize(&kept, &windowed_errors);
        Self { config, trajectory, raw_commands, windowed_errors, summary, complete }
    }

    /// Per window, the `x` of largest magnitude with its sign.
    pub fn signed_window_peaks(&self) -> Vec<f64> {
        signed_window_peaks(&post_discard(&self.trajectory, self.config.discard_ticks), WINDOW_TICKS)
    }
}

fn post_discard(traj: &Trajectory, discard: u64) -> Vec<f64> {
    traj.records.iter().skip(discard as usize).map(|r| r.x).collect()
}

fn summarize(xs: &[f64], windows: &[f64]) -> TrialSummary {
    let sup_error = xs.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let mean = |v: &[f64]| if v.is_empty() { 0.0 } else { v.iter().sum::<f64>() / v.len() as f64 };
    let sq: Vec<f64> = xs.iter().map(|x| x * x).collect();
    TrialSummary { sup_error, mean_windowed: mean(windows), mse: mean(&sq) }
}

/// Largest `|x|` in each full, non-overlapping window; a partial tail is dropped.
pub fn compute_windowed_worst_case(xs: &[f64], window: usize) -> Vec<f64> {
    xs.chunks_exact(window.max(1)).map(|w| w.iter().fold(0.0_f64, |m, x| m.max(x.abs()))).collect()
}

pub fn signed_window_peaks(xs: &[f64], window: usize) -> Vec<f64> {
    xs.chunks_exact(window.max(1))
        .map(|w| w.iter().copied().fold(0.0_f64, |m, x| if x.abs() > m.abs() { x } else { m }))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pilot(seed: u64) -> InputSource {
        InputSource::Pilot { model: PilotModel::default(), seed }
    }

    #[test]
    fn window_examples() {
        assert_eq!(compute_windowed_worst_case(&[-2.5; 120], 40), vec![2.5; 3]);
        let ramp: Vec<f64> = (0..80).map(f64::from).collect();
        assert_eq!(compute_windowed_worst_case(&ramp, 40), vec![39.0, 79.0]);
        assert_eq!(signed_window_peaks(&[0.1, -0.5, 0.3, 0.2], 2), vec![-0.5, 0.3]);
    }

    proptest! {
        #[test]
        fn shuffling_inside_window_keeps_value(mut xs in proptest::collection::vec(-5.0f64..5.0, 40), k in 0usize..40) {
            let before = compute_windowed_worst_case(&xs, 40);
            xs.rotate_left(k);
            prop_assert_eq!(before, compute_windowed_worst_case(&xs, 40));
        }
    }

    #[test]
    fn config_validation() {
        let base = TrialConfig::new("t", Condition::Both, 0);
        assert!(base.validate().is_ok());
        assert!(base.clone().coupled(3).validate().is_ok());
        let mut bad = base.clone().coupled(3);
        bad.added_delay_ticks = 0;
        assert!(bad.validate().is_err());
        assert!(base.clone().with_rate(Some(0)).validate().is_err());
    }

    #[test]
    fn coupled_pairs_hit_paper_points() {
        let want = [(1, -0.2), (2, -0.15), (3, -0.1), (4, -0.05), (5, 0.0), (6, 0.05), (7, 0.1)];
        for (r, secs) in want {
            let c = TrialConfig::new("c", Condition::Both, 0).coupled(r);
            let t = c.added_delay_ticks as f64 * crate::dynamics::TICK_SECONDS;
            assert!((t - secs).abs() < 1e-12);
            assert!((t - (r as f64 - 5.0) / 20.0).abs() < 1e-12);
        }
    }

    #[test]
    fn bump_only_has_no_trail() {
        let w = trial_disturbance(&TrialConfig::new("b", Condition::BumpOnly, 4)).unwrap();
        assert!(w.iter().all(|s| s.r == 0.0));
        assert!(w.iter().any(|s| s.b != 0.0));
    }

    #[test]
    fn quiet_world_gives_noise_floor() {
        let cfg = TrialConfig { epsilon: 0.0, ..TrialConfig::new("q", Condition::BumpOnly, 1) };
        let rec = run_trial(&cfg, &pilot(1)).unwrap();
        assert_eq!(rec.windowed_errors.len(), 10);
        // motor noise plus the pilot's own command quantization
        assert!(rec.windowed_errors.iter().all(|e| *e < 0.6), "{:?}", rec.windowed_errors);
    }

    #[test]
    fn input_path_timing() {
        let cfg = TrialConfig { epsilon: 0.0, ..TrialConfig::new("d", Condition::BumpOnly, 1) }.with_delay(4);
        let mut run = TrialRun::new(&cfg).unwrap();
        run.step(1.0).unwrap();
        for _ in 0..3 {
            assert_eq!(run.step(0.0).unwrap(), 0.0);
        }
        assert_eq!(run.step(0.0).unwrap(), 1.0);
    }

    #[test]
    fn one_bit_input_has_two_levels() {
        let cfg = TrialConfig::new("q", Condition::Both, 2).with_rate(Some(1));
        let rec = run_trial(&cfg, &pilot(2)).unwrap();
        let mut levels: Vec<f64> = rec.trajectory.records.iter().map(|r| r.u).collect();
        levels.sort_by(f64::total_cmp);
        levels.dedup();
        levels.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        assert_eq!(levels.len(), 2);
        assert!((levels[0] + 0.6).abs() < 1e-12 && (levels[1] - 0.6).abs() < 1e-12);
    }

    #[test]
    fn replay_reproduces_pilot_run() {
        let cfg = TrialConfig::new("r", Condition::Both, 3).with_delay(4).with_rate(Some(3));
        let rec = run_trial(&cfg, &pilot(3)).unwrap();
        let again = run_trial(&cfg, &InputSource::Replay(rec.raw_commands.clone())).unwrap();
        assert_eq!(rec.trajectory, again.trajectory);
        assert_eq!(rec.windowed_errors, again.windowed_errors);
    }

    #[test]
    fn metrics_ignore_discarded_span() {
        let cfg = TrialConfig::new("m", Condition::Both, 6);
        let rec = run_trial(&cfg, &pilot(6)).unwrap();
        let mut traj = rec.trajectory.clone();
        for r in traj.records.iter_mut().take(DISCARD_TICKS as usize) {
            r.x = 1e6;
        }
        let edited = TrialRecord::new(cfg, traj, rec.raw_commands.clone(), true);
        assert_eq!(edited.windowed_errors, rec.windowed_errors);
        assert_eq!(edited.summary, rec.summary);
    }

    #[test]
    fn incomplete_trial_is_flagged() {
        let cfg = TrialConfig::new("i", Condition::Both, 0);
        let mut run = TrialRun::new(&cfg).unwrap();
        for _ in 0..300 {
            run.step(0.0).unwrap();
        }
        let rec = run.finish();
        assert!(!rec.complete);
        assert_eq!(rec.windowed_errors.len(), 2);
    }
}
