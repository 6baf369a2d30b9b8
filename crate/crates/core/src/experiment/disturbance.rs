//! Trail and bump generators for the driving task.
//!
//! The trail scrolls at a fixed speed and is made of straight segments whose
//! angle is drawn from a fixed set; a segment at angle `θ` pushes the error
//! sideways by `scroll_speed · tan θ` per second. Segment direction strictly
//! alternates and segment lengths are exponential. Bumps are constant
//! pushes lasting a fixed number of ticks, separated by exponential gaps.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::dynamics::TICK_SECONDS;
use crate::error::{domain, Result};

/// Stream ids keep the trail and bump generators independent when they
/// share a seed.
const TRAIL_STREAM: u64 = 1;
const BUMP_STREAM: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrailSpec {
    pub angles_deg: Vec<f64>,
    pub mean_switch_seconds: f64,
    /// Normalized lateral units per second of scrolling.
    pub scroll_speed: f64,
    pub seed: u64,
}

impl TrailSpec {
    pub fn standard(seed: u64) -> Self {
        Self {
            angles_deg: (1..=8).map(|k| 10.0 * k as f64).collect(),
            mean_switch_seconds: 2.0,
            scroll_speed: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.angles_deg.is_empty() || self.angles_deg.iter().any(|a| !(a.abs() < 90.0)) {
            return Err(domain("trail angles must be non-empty and strictly inside (-90, 90) degrees"));
        }
        if !(self.mean_switch_seconds > 0.0) || !(self.scroll_speed > 0.0) {
            return Err(domain("trail switch interval and scroll speed must be positive"));
        }
        Ok(())
    }

    /// Largest per-tick lateral push the spec can produce.
    pub fn max_push(&self) -> f64 {
        let max_tan = self.angles_deg.iter().map(|a| a.to_radians().tan().abs()).fold(0.0, f64::max);
        (self.scroll_speed * max_tan * TICK_SECONDS).min(1.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrailSegment {
    pub start: u64,
    pub len: u64,
    pub angle_deg: f64,
    /// +1 or -1
    pub direction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trail {
    pub r: Vec<f64>,
    pub segments: Vec<TrailSegment>,
    /// Factor applied so that `|r| <= 1`; 1 unless the spec was extreme.
    pub scale: f64,
}

fn exp_ticks(rng: &mut ChaCha8Rng, mean_seconds: f64) -> u64 {
    let e = Exp::new(1.0 / mean_seconds).expect("positive rate");
    ((e.sample(rng) / TICK_SECONDS).round() as u64).max(1)
}

pub fn generate_trail(spec: &TrailSpec, horizon: u64) -> Result<Trail> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(TRAIL_STREAM);
    let mut direction = if rng.gen::<bool>() { 1.0 } else { -1.0 };
    let mut segments = Vec::new();
    let mut r = Vec::with_capacity(horizon as usize);
    let mut start = 0;
    while start < horizon {
        let angle = *spec.angles_deg.choose(&mut rng).expect("validated non-empty");
        let len = exp_ticks(&mut rng, spec.mean_switch_seconds).min(horizon - start);
        let push = direction * spec.scroll_speed * angle.to_radians().tan() * TICK_SECONDS;
        r.extend(std::iter::repeat(push).take(len as usize));
        segments.push(TrailSegment { start, len, angle_deg: angle, direction });
        start += len;
        direction = -direction;
    }
    let peak = r.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let scale = if peak > 1.0 { 1.0 / peak } else { 1.0 };
    if scale != 1.0 {
        log::info!("trail rescaled by {scale} to keep |r| <= 1");
        r.iter_mut().for_each(|v| *v *= scale);
    }
    Ok(Trail { r, segments, scale })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    /// Lateral push per tick while a bump is on.
    pub amplitude: f64,
    pub duration_ticks: u64,
    pub mean_gap_seconds: f64,
    pub seed: u64,
}

impl BumpSpec {
    pub const DURATION_TICKS: u64 = 10;

    /// Bumps of size `epsilon` times the steepest trail push.
    pub fn matched(trail: &TrailSpec, epsilon: f64, seed: u64) -> Self {
        Self { amplitude: epsilon * trail.max_push(), duration_ticks: Self::DURATION_TICKS, mean_gap_seconds: 3.0, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.amplitude >= 0.0) || self.amplitude > 1.0 {
            return Err(domain(format!("bump amplitude must lie in [0, 1], got {}", self.amplitude)));
        }
        if self.duration_ticks == 0 || !(self.mean_gap_seconds > 0.0) {
            return Err(domain("bump duration and mean gap must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Bump {
    pub start: u64,
    pub sign: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bumps {
    pub b: Vec<f64>,
    pub bumps: Vec<Bump>,
}

pub fn generate_bumps(spec: &BumpSpec, horizon: u64) -> Result<Bumps> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(BUMP_STREAM);
    let mut b = vec![0.0; horizon as usize];
    let mut bumps = Vec::new();
    let mut t = exp_ticks(&mut rng, spec.mean_gap_seconds);
    while t < horizon {
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        let end = (t + spec.duration_ticks).min(horizon);
        for v in &mut b[t as usize..end as usize] {
            *v = sign * spec.amplitude;
        }
        bumps.push(Bump { start: t, sign });
        t += spec.duration_ticks + exp_ticks(&mut rng, spec.mean_gap_seconds);
    }
    Ok(Bumps { b, bumps })
}
