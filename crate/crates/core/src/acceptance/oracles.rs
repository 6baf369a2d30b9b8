//! Reference computations the acceptance checks compare against. Each one is
//! written from the formulas directly and shares no code with the library
//! routines it checks.

use crate::optimize::LayerMode;

/// `max(0, T) + 1/(2^R - 1)`
pub fn worst_case_by_hand(t: f64, r: f64) -> f64 {
    t.max(0.0) + 1.0 / (2f64.powf(r) - 1.0)
}

/// `max(0, T) + 1/(2^{2R} - 1)`
pub fn stochastic_by_hand(t: f64, r: f64) -> f64 {
    t.max(0.0) + 1.0 / (4f64.powf(r) - 1.0)
}

/// Closed-form fixed point of `M = M / 2^R + w` and its residual `M / 2^R`.
pub fn interval_fixed_point_closed_form(r: f64, w: f64) -> (f64, f64) {
    let n = 2f64.powf(r);
    let m = w * n / (n - 1.0);
    (m, m / n)
}

/// Arg-min of the single-loop objective by exhaustive scan on a uniform grid.
pub fn dense_grid_argmin(lambda: f64, net_delay: f64, lo: f64, hi: f64, step: f64) -> (f64, f64) {
    let f = |t: f64| (t + net_delay).max(0.0) + 1.0 / (2f64.powf(lambda * t) - 1.0);
    let n = ((hi - lo) / step).floor() as usize;
    let mut best = (lo, f(lo));
    for i in 1..=n {
        let t = lo + i as f64 * step;
        let v = f(t);
        if v < best.1 {
            best = (t, v);
        }
    }
    best
}

/// Minimum of the layered objective over a grid of signaling delays, with
/// the planning delay kept strictly below the warning.
pub fn brute_layered(
    lambda_l: f64,
    lambda_h: f64,
    internal_delay: f64,
    warning: f64,
    epsilon: f64,
    mode: LayerMode,
    step: f64,
    t_max: f64,
) -> f64 {
    let rate_err = |r: f64| 1.0 / (2f64.powf(r) - 1.0);
    let grid: Vec<f64> = (1..).map(|i| i as f64 * step).take_while(|&t| t <= t_max).collect();
    let planning: Vec<f64> = grid.iter().copied().filter(|&t| t < warning).collect();
    match mode {
        LayerMode::Diverse => {
            let low = grid
                .iter()
                .map(|&t| epsilon * (t + internal_delay + rate_err(lambda_l * t)))
                .fold(f64::INFINITY, f64::min);
            let high = planning.iter().map(|&t| rate_err(lambda_h * t)).fold(f64::INFINITY, f64::min);
            low + high
        }
        LayerMode::Uniform => {
            let lam = lambda_l.min(lambda_h);
            planning
                .iter()
                .map(|&t| epsilon * (t + internal_delay + rate_err(lam * t)) + rate_err(lam * t))
                .fold(f64::INFINITY, f64::min)
        }
    }
}
