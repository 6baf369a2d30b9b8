//! Signal channels: delay lines, uniform quantizers and the component
//! speed/accuracy laws that couple a nerve's delay to its rate.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Result};

/// Delays and rate of one control loop. All delays are in ticks, the rate in
/// bits per tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoopParams {
    pub signaling_delay: u32,
    pub internal_delay: u32,
    pub warning: u32,
    pub rate: f64,
}

impl LoopParams {
    pub fn new(signaling_delay: u32, internal_delay: u32, warning: u32, rate: f64) -> Result<Self> {
        let p = Self { signaling_delay, internal_delay, warning, rate };
        p.validate()?;
        Ok(p)
    }

    /// Loop parameters whose total delay is `total` ticks: positive totals
    /// are carried as signaling delay, negative ones as advanced warning.
    pub fn with_total_delay(total: i64, rate: f64) -> Result<Self> {
        let t = total.unsigned_abs() as u32;
        if total >= 0 {
            Self::new(t, 0, 0, rate)
        } else {
            Self::new(0, 0, t, rate)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0) || !self.rate.is_finite() {
            return Err(domain(format!("rate must be positive and finite, got {}", self.rate)));
        }
        Ok(())
    }

    /// `T = T_s + T_i - T_a`; may be negative.
    pub fn total_delay(&self) -> i64 {
        self.signaling_delay as i64 + self.internal_delay as i64 - self.warning as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Encoding {
    SpikeBased,
    RateBased,
}

/// Resource level of a nerve (proportional to its cross-section) together
/// with how it encodes information.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComponentBudget {
    pub lambda: f64,
    pub encoding: Encoding,
}

impl ComponentBudget {
    pub fn new(lambda: f64, encoding: Encoding) -> Result<Self> {
        if !(lambda > 0.0) || !lambda.is_finite() {
            return Err(domain(format!("resource level must be positive, got {lambda}")));
        }
        Ok(Self { lambda, encoding })
    }

    pub fn spike(lambda: f64) -> Result<Self> {
        Self::new(lambda, Encoding::SpikeBased)
    }

    pub fn rate_based(lambda: f64) -> Result<Self> {
        Self::new(lambda, Encoding::RateBased)
    }
}

/// Spike-timing code: `R = λ T_s`.
pub fn sat_rate_spike(budget: &ComponentBudget, signaling_delay: f64) -> Result<f64> {
    if budget.encoding != Encoding::SpikeBased {
        return Err(domain("sat_rate_spike needs a spike-based budget"));
    }
    if !(signaling_delay > 0.0) {
        return Err(domain(format!("signaling delay must be positive, got {signaling_delay}")));
    }
    Ok(budget.lambda * signaling_delay)
}

/// Rate code (Poisson channel capacity): `R = λ T / 2`.
pub fn sat_rate_based(budget: &ComponentBudget, delay: f64) -> Result<f64> {
    if budget.encoding != Encoding::RateBased {
        return Err(domain("sat_rate_based needs a rate-based budget"));
    }
    if !(delay > 0.0) {
        return Err(domain(format!("delay must be positive, got {delay}")));
    }
    Ok(0.5 * budget.lambda * delay)
}

/// Fixed-length FIFO: what comes out at tick `t` went in at `t - length`.
#[derive(Debug, Clone, PartialEq)]
pub struct DelayLine {
    length: usize,
    buf: VecDeque<f64>,
}

impl DelayLine {
    pub fn new(length: usize) -> Self {
        Self::with_fill(length, 0.0)
    }

    pub fn with_fill(length: usize, fill: f64) -> Self {
        Self { length, buf: std::iter::repeat(fill).take(length).collect() }
    }

    pub fn len(&self) -> usize {
        self.length
    }

    pub fn is_empty(&self) -> bool {
        self.length == 0
    }

    pub fn push(&mut self, sample: f64) -> f64 {
        if self.length == 0 {
            return sample;
        }
        self.buf.push_back(sample);
        self.buf.pop_front().expect("delay line holds `length` samples")
    }

    /// Samples still in flight, oldest (next to be emitted) first.
    pub fn pending(&self) -> impl Iterator<Item = f64> + '_ {
        self.buf.iter().copied()
    }
}

/// Mid-rise uniform quantizer over `[-M, M]` with `N` equal cells. Inputs are
/// mapped to the midpoint of their cell; the top cell is closed at `M`.
#[derive(Debug, Clone, PartialEq)]
pub struct UniformQuantizer {
    cells: u64,
    half_range: f64,
    saturations: u64,
}

impl UniformQuantizer {
    pub fn new(cells: u64, half_range: f64) -> Result<Self> {
        if cells == 0 {
            return Err(domain("quantizer needs at least one cell"));
        }
        if !(half_range > 0.0) || !half_range.is_finite() {
            return Err(domain(format!("quantizer range must be positive, got {half_range}")));
        }
        Ok(Self { cells, half_range, saturations: 0 })
    }

    /// `floor(2^bits)` cells.
    pub fn from_bits(bits: f64, half_range: f64) -> Result<Self> {
        if !(bits > 0.0) || bits > 62.0 {
            return Err(domain(format!("bits per use must lie in (0, 62], got {bits}")));
        }
        Self::new(2f64.powf(bits).floor() as u64, half_range)
    }

    pub fn cells(&self) -> u64 {
        self.cells
    }

    pub fn half_range(&self) -> f64 {
        self.half_range
    }

    pub fn cell_width(&self) -> f64 {
        2.0 * self.half_range / self.cells as f64
    }

    /// Worst-case quantization error `M / N`.
    pub fn max_error(&self) -> f64 {
        self.half_range / self.cells as f64
    }

    pub fn saturations(&self) -> u64 {
        self.saturations
    }

    /// Cell midpoint for `v` and whether `v` had to be clamped into range.
    pub fn quantize_pure(&self, v: f64) -> (f64, bool) {
        let m = self.half_range;
        let saturated = v.abs() > m;
        let v = v.clamp(-m, m);
        let width = self.cell_width();
        let idx = (((v + m) / width).floor() as i64).clamp(0, self.cells as i64 - 1);
        (-m + (idx as f64 + 0.5) * width, saturated)
    }

    pub fn quantize(&mut self, v: f64) -> f64 {
        let (q, saturated) = self.quantize_pure(v);
        if saturated {
            self.saturations += 1;
            log::debug!("quantizer saturated: |{v}| > {}", self.half_range);
        }
        q
    }

    /// Interior cell boundaries, ascending.
    pub fn boundaries(&self) -> impl Iterator<Item = f64> + '_ {
        let w = self.cell_width();
        (1..self.cells).map(move |j| -self.half_range + j as f64 * w)
    }

    /// Interior boundary nearest to `v`, if there is one.
    pub fn nearest_boundary(&self, v: f64) -> Option<f64> {
        if self.cells < 2 {
            return None;
        }
        let w = self.cell_width();
        let j = ((v + self.half_range) / w).round().clamp(1.0, (self.cells - 1) as f64);
        Some(-self.half_range + j * w)
    }
}

/// Spreads a possibly fractional rate over a super-frame of `frame` ticks.
/// Tick `i` of a frame gets `floor((i+1)R) - floor(iR)` bits, so each frame
/// carries `floor(frame * R)` bits and integral rates get `R` bits every tick.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateSchedule {
    rate: f64,
    frame: u32,
}

impl RateSchedule {
    pub const DEFAULT_FRAME: u32 = 8;

    pub fn new(rate: f64) -> Result<Self> {
        Self::with_frame(rate, Self::DEFAULT_FRAME)
    }

    pub fn with_frame(rate: f64, frame: u32) -> Result<Self> {
        if !(rate > 0.0) || !rate.is_finite() {
            return Err(domain(format!("rate must be positive, got {rate}")));
        }
        if frame == 0 {
            return Err(domain("super-frame must be at least one tick"));
        }
        Ok(Self { rate, frame })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn frame(&self) -> u32 {
        self.frame
    }

    pub fn is_integral(&self) -> bool {
        self.rate.fract() == 0.0
    }

    pub fn bits_at(&self, tick: u64) -> u32 {
        if self.is_integral() {
            return self.rate as u32;
        }
        let i = (tick % self.frame as u64) as f64;
        ((i + 1.0) * self.rate).floor() as u32 - (i * self.rate).floor() as u32
    }

    pub fn cells_at(&self, tick: u64) -> u64 {
        1u64 << self.bits_at(tick).min(62)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn spike_sat_examples() {
        let b = ComponentBudget::spike(0.1).unwrap();
        assert!((sat_rate_spike(&b, 10.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((sat_rate_spike(&b, 50.0).unwrap() - 5.0).abs() < 1e-15);
        let one = ComponentBudget::spike(1.0).unwrap();
        assert_eq!(sat_rate_spike(&one, 1.0).unwrap(), 1.0);
        assert!(sat_rate_spike(&b, 0.0).is_err());
        assert!(sat_rate_spike(&b, -3.0).is_err());
    }

    #[test]
    fn rate_based_sat_examples() {
        let b = ComponentBudget::rate_based(0.1).unwrap();
        assert!((sat_rate_based(&b, 20.0).unwrap() - 1.0).abs() < 1e-15);
        let b2 = ComponentBudget::rate_based(0.2).unwrap();
        assert!((sat_rate_based(&b2, 10.0).unwrap() - 1.0).abs() < 1e-15);
        assert!(sat_rate_based(&b, 0.0).is_err());
        // spike coding reaches the same rate with half the delay
        let s = ComponentBudget::spike(0.1).unwrap();
        for d in [1.0, 7.5, 40.0] {
            assert_eq!(sat_rate_spike(&s, d).unwrap(), 2.0 * sat_rate_based(&b, d).unwrap());
        }
    }

    #[test]
    fn encoding_mismatch_and_bad_budget() {
        assert!(ComponentBudget::spike(0.0).is_err());
        let b = ComponentBudget::rate_based(0.1).unwrap();
        assert!(sat_rate_spike(&b, 1.0).is_err());
    }

    #[test]
    fn loop_params_total_delay() {
        let p = LoopParams::new(3, 10, 20, 1.0).unwrap();
        assert_eq!(p.total_delay(), -7);
        assert!(LoopParams::new(0, 0, 0, 0.0).is_err());
        assert_eq!(LoopParams::with_total_delay(-4, 2.0).unwrap().total_delay(), -4);
        assert_eq!(LoopParams::with_total_delay(5, 2.0).unwrap().total_delay(), 5);
    }

    #[test]
    fn delay_line_examples() {
        let mut d = DelayLine::new(0);
        assert_eq!(d.push(3.5), 3.5);
        let mut d = DelayLine::new(2);
        let out: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&v| d.push(v)).collect();
        assert_eq!(out, vec![0.0, 0.0, 1.0]);
        let mut d = DelayLine::new(1);
        assert_eq!((d.push(5.0), d.push(7.0)), (0.0, 5.0));
        let mut d = DelayLine::with_fill(1, -1.0);
        assert_eq!(d.push(2.0), -1.0);
    }

    #[test]
    fn quantizer_examples() {
        let mut q = UniformQuantizer::from_bits(1.0, 2.0).unwrap();
        assert_eq!(q.cells(), 2);
        assert_eq!(q.quantize(-0.3), -1.0);
        assert_eq!(q.quantize(1.999), 1.0);
        // four cells on [-1, 1] are half a unit wide: 0.6 lies in [0.5, 1)
        let mut q = UniformQuantizer::new(4, 1.0).unwrap();
        assert_eq!(q.quantize(0.6), 0.75);
        assert_eq!(q.max_error(), 0.25);
    }

    #[test]
    fn quantizer_saturation_is_counted() {
        let mut q = UniformQuantizer::new(2, 2.0).unwrap();
        assert_eq!(q.quantize(5.0), 1.0);
        assert_eq!(q.quantize(-2.0), -1.0);
        assert_eq!(q.quantize(2.0), 1.0);
        assert_eq!(q.saturations(), 1);
    }

    #[test]
    fn quantizer_resolution_statistics() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for (cells, m) in [(2u64, 2.0), (8, 1.0), (32, 3.0)] {
            let q = UniformQuantizer::new(cells, m).unwrap();
            let mut max_err: f64 = 0.0;
            let mut sum = 0.0;
            let n = 10_000;
            for _ in 0..n {
                let v: f64 = rng.gen_range(-m..=m);
                let e = (v - q.quantize_pure(v).0).abs();
                max_err = max_err.max(e);
                sum += e;
            }
            assert!(max_err <= q.max_error() + 1e-12);
            let mean = sum / n as f64;
            let expect = q.max_error() / 2.0;
            assert!((mean - expect).abs() / expect < 0.05, "mean {mean} vs {expect}");
        }
    }

    #[test]
    fn nearest_boundary() {
        let q = UniformQuantizer::new(4, 1.0).unwrap();
        assert_eq!(q.boundaries().collect::<Vec<_>>(), vec![-0.5, 0.0, 0.5]);
        assert_eq!(q.nearest_boundary(0.2), Some(0.0));
        assert_eq!(q.nearest_boundary(0.9), Some(0.5));
        assert_eq!(q.nearest_boundary(-3.0), Some(-0.5));
        assert_eq!(UniformQuantizer::new(1, 1.0).unwrap().nearest_boundary(0.0), None);
    }

    #[test]
    fn rate_schedule_averages_to_rate() {
        for rate in [0.379, 1.0, 2.5, 3.125] {
            let s = RateSchedule::new(rate).unwrap();
            let total: u32 = (0..8).map(|t| s.bits_at(t)).sum();
            assert_eq!(total, (8.0 * rate).floor() as u32);
            let long: u32 = (0..800).map(|t| s.bits_at(t)).sum();
            assert!((long as f64 / 800.0 - rate).abs() <= 1.0 / 8.0);
        }
        assert_eq!(RateSchedule::new(3.0).unwrap().cells_at(17), 8);
    }

    proptest! {
        #[test]
        fn quantizer_idempotent_and_bounded(v in -10.0f64..10.0, cells in 1u64..300, m in 0.1f64..5.0) {
            let q = UniformQuantizer::new(cells, m).unwrap();
            let (once, _) = q.quantize_pure(v);
            let (twice, _) = q.quantize_pure(once);
            prop_assert_eq!(once, twice);
            if v.abs() <= m {
                prop_assert!((v - once).abs() <= q.max_error() * (1.0 + 1e-12));
            }
        }

        #[test]
        fn delay_lines_compose(a in 0usize..6, b in 0usize..6, xs in proptest::collection::vec(-5.0f64..5.0, 0..40)) {
            let mut d1 = DelayLine::new(a);
            let mut d2 = DelayLine::new(b);
            let mut d = DelayLine::new(a + b);
            for &x in &xs {
                prop_assert_eq!(d2.push(d1.push(x)), d.push(x));
            }
        }

        #[test]
        fn spike_sat_is_linear(lambda in 0.01f64..2.0, ts in 0.01f64..100.0) {
            let b = ComponentBudget::spike(lambda).unwrap();
            let r = sat_rate_spike(&b, ts).unwrap();
            prop_assert!((r / ts - lambda).abs() <= 1e-12 * lambda);
            let b2 = ComponentBudget::spike(2.0 * lambda).unwrap();
            prop_assert!((sat_rate_spike(&b2, ts).unwrap() - 2.0 * r).abs() <= 1e-12 * r);
        }
    }
}
