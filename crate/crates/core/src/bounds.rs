//! Closed-form system-level error bounds for delayed, rate-limited loops.
//!
//! Everything here is in normalized units: per unit sup-norm disturbance for
//! the worst-case bounds, per unit disturbance variance for the mean-square
//! one. Delays are in ticks and rates in bits per tick; convert seconds to
//! ticks before calling.

use serde::{Deserialize, Serialize};

use crate::channels::LoopParams;
use crate::error::{domain, Error, Result};

/// Error split into the part caused by delay and the part caused by rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub delay_error: f64,
    pub rate_error: f64,
    pub total: f64,
}

impl ErrorDecomposition {
    pub fn new(delay_error: f64, rate_error: f64) -> Self {
        Self { delay_error, rate_error, total: delay_error + rate_error }
    }
}

fn check_rate(rate: f64) -> Result<()> {
    if rate > 0.0 {
        Ok(())
    } else {
        Err(domain(format!("rate must be positive, got {rate}")))
    }
}

/// `1 / (2^R - 1)`
pub fn worst_case_rate_error(rate: f64) -> f64 {
    1.0 / (rate * std::f64::consts::LN_2).exp_m1()
}

/// `1 / (2^(2R) - 1)`
pub fn mean_square_rate_error(rate: f64) -> f64 {
    1.0 / (2.0 * rate * std::f64::consts::LN_2).exp_m1()
}

pub fn delay_error(total_delay: f64) -> f64 {
    total_delay.max(0.0)
}

/// Worst-case bound for a continuous (delay, rate) pair.
pub fn worst_case_terms(total_delay: f64, rate: f64) -> Result<ErrorDecomposition> {
    check_rate(rate)?;
    Ok(ErrorDecomposition::new(delay_error(total_delay), worst_case_rate_error(rate)))
}

/// `sup_{|w|<=1} |x|_inf >= max(0, T) + 1/(2^R - 1)`
pub fn worst_case_bound(p: &LoopParams) -> Result<ErrorDecomposition> {
    worst_case_terms(p.total_delay() as f64, p.rate)
}

/// Mean-square bound for a continuous (delay, rate) pair.
pub fn stochastic_terms(total_delay: f64, rate: f64) -> Result<ErrorDecomposition> {
    check_rate(rate)?;
    Ok(ErrorDecomposition::new(delay_error(total_delay), mean_square_rate_error(rate)))
}

/// `E[x^2] >= max(0, T) + 1/(2^(2R) - 1)` at unit disturbance variance.
pub fn stochastic_bound(p: &LoopParams) -> Result<ErrorDecomposition> {
    stochastic_terms(p.total_delay() as f64, p.rate)
}

/// Two-layer loop: a reflex layer rejecting bumps and a planning layer
/// tracking the trail with advanced warning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredParams {
    /// Reflex signaling delay as `signaling_delay`, its internal delay as
    /// `internal_delay`, its rate as `rate`.
    pub reflex: LoopParams,
    /// Planning signaling delay as `signaling_delay`, advanced warning as
    /// `warning`, its rate as `rate`.
    pub planning: LoopParams,
    /// Bump size relative to trail size.
    pub epsilon: f64,
}

impl LayeredParams {
    pub fn new(reflex: LoopParams, planning: LoopParams, epsilon: f64) -> Result<Self> {
        let lp = Self { reflex, planning, epsilon };
        lp.validate()?;
        Ok(lp)
    }

    pub fn validate(&self) -> Result<()> {
        self.reflex.validate()?;
        self.planning.validate()?;
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(domain(format!("epsilon must be non-negative, got {}", self.epsilon)));
        }
        if self.planning.warning <= self.planning.signaling_delay {
            return Err(Error::Regime {
                warning: self.planning.warning as f64,
                planning_delay: self.planning.signaling_delay as f64,
            });
        }
        Ok(())
    }

    /// Delay seen by the reflex loop, `T_l + T_i`.
    pub fn reflex_delay(&self) -> u32 {
        self.reflex.signaling_delay + self.reflex.internal_delay
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredBound {
    pub reflex_part: f64,
    pub planning_part: f64,
    pub total: f64,
}

/// Continuous form of the layered bound. Fails if the warning does not
/// exceed the planning delay.
pub fn layered_terms(
    reflex_delay: f64,
    internal_delay: f64,
    reflex_rate: f64,
    planning_delay: f64,
    warning: f64,
    planning_rate: f64,
    epsilon: f64,
) -> Result<LayeredBound> {
    check_rate(reflex_rate)?;
    check_rate(planning_rate)?;
    if warning <= planning_delay {
        return Err(Error::Regime { warning, planning_delay });
    }
    let reflex_part = (reflex_delay + internal_delay + worst_case_rate_error(reflex_rate)) * epsilon;
    let planning_part = worst_case_rate_error(planning_rate);
    Ok(LayeredBound { reflex_part, planning_part, total: reflex_part + planning_part })
}

/// `{T_l + T_i + 1/(2^R_l - 1)} ε + 1/(2^R_h - 1)`
pub fn layered_bound(lp: &LayeredParams) -> Result<LayeredBound> {
    lp.validate()?;
    layered_terms(
        lp.reflex.signaling_delay as f64,
        lp.reflex.internal_delay as f64,
        lp.reflex.rate,
        lp.planning.signaling_delay as f64,
        lp.planning.warning as f64,
        lp.planning.rate,
        lp.epsilon,
    )
}
