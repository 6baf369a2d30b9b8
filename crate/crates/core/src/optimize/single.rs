//! Single-loop composition: pick the signaling delay `T_s` (and with it the
//! rate `R = λ T_s`) that minimizes `max(0, T_s + n) + 1/(2^(λ T_s) - 1)`,
//! where `n = T_i - T_a` is the net delay.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::{worst_case_rate_error, worst_case_terms, ErrorDecomposition};
use crate::error::{domain, Result};
use crate::optimize::golden::grid_then_golden;

/// Smallest signaling delay searched; the rate error blows up at zero.
pub const T_S_MIN: f64 = 1e-3;
pub const T_S_MAX: f64 = 1e4;

const GRID_POINTS: usize = 4000;
const TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegimePoint {
    pub lambda: f64,
    /// `T_i - T_a`; negative values are net warning.
    pub net_delay: f64,
    pub t_s_opt: f64,
    pub r_opt: f64,
    /// `T_s + net_delay`
    pub t_opt: f64,
    pub decomposition: ErrorDecomposition,
}

/// Total worst-case error as a function of signaling delay.
pub fn single_loop_objective(lambda: f64, net_delay: f64, t_s: f64) -> f64 {
    (t_s + net_delay).max(0.0) + worst_case_rate_error(lambda * t_s)
}

pub fn optimize_single_loop(lambda: f64, net_delay: f64) -> Result<RegimePoint> {
    optimize_single_loop_within(lambda, net_delay, T_S_MAX)
}

pub fn optimize_single_loop_within(lambda: f64, net_delay: f64, t_max: f64) -> Result<RegimePoint> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(domain(format!("resource level must be positive, got {lambda}")));
    }
    if !net_delay.is_finite() || !(t_max > T_S_MIN) {
        return Err(domain("net delay must be finite and T_max above the search floor"));
    }
    let f = |t: f64| single_loop_objective(lambda, net_delay, t);
    // the objective has a kink where the loop delay crosses zero; each side
    // is unimodal, so refine both and keep the better
    let kink = -net_delay;
    let mut pieces = Vec::with_capacity(2);
    if kink > T_S_MIN && kink < t_max {
        pieces.push((T_S_MIN, kink));
        pieces.push((kink, t_max));
    } else {
        pieces.push((T_S_MIN, t_max));
    }
    let mut best: Option<(f64, f64)> = None;
    for (lo, hi) in pieces {
        let cand = grid_then_golden(f, lo, hi, GRID_POINTS, TOL)?;
        if best.map_or(true, |b| cand.1 < b.1) {
            best = Some(cand);
        }
    }
    let (t_s, _) = best.expect("at least one piece");
    let r = lambda * t_s;
    let t = t_s + net_delay;
    Ok(RegimePoint {
        lambda,
        net_delay,
        t_s_opt: t_s,
        r_opt: r,
        t_opt: t,
        decomposition: worst_case_terms(t, r)?,
    })
}

pub fn sweep_regimes(lambda: f64, net_delays: &[f64]) -> Result<Vec<RegimePoint>> {
    net_delays.par_iter().map(|&n| optimize_single_loop(lambda, n)).collect()
}

/// Integer signaling delay for instantiating a composition as a simulated
/// controller: the better of floor and ceil (never below one tick).
pub fn integer_signaling_delay(point: &RegimePoint) -> (u32, f64) {
    let lo = point.t_s_opt.floor().max(1.0);
    let hi = point.t_s_opt.ceil().max(1.0);
    let f = |t: f64| single_loop_objective(point.lambda, point.net_delay, t);
    if f(lo) <= f(hi) {
        (lo as u32, f(lo))
    } else {
        (hi as u32, f(hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Plain two-stage scan, no golden section.
    fn scan(lambda: f64, n: f64) -> (f64, f64) {
        let f = |t: f64| single_loop_objective(lambda, n, t);
        let mut best = (T_S_MIN, f(T_S_MIN));
        let mut t = T_S_MIN;
        while t <= 200.0 {
            if f(t) < best.1 {
                best = (t, f(t));
            }
            t += 0.1;
        }
        let (lo, hi) = ((best.0 - 0.2).max(T_S_MIN), best.0 + 0.2);
        let mut t = lo;
        while t <= hi {
            if f(t) < best.1 {
                best = (t, f(t));
            }
            t += 1e-4;
        }
        // the kink is a legitimate optimum the step grid can straddle
        if -n > T_S_MIN && f(-n) < best.1 {
            best = (-n, f(-n));
        }
        best
    }

    #[test]
    fn reference_point() {
        let p = optimize_single_loop(0.1, 0.0).unwrap();
        let (t, v) = scan(0.1, 0.0);
        assert!((p.t_s_opt - t).abs() < 1e-3);
        assert!((p.decomposition.total - v).abs() < 1e-6);
        // frozen from the scan above
        assert!((p.t_s_opt - 3.788).abs() < 1e-3, "{}", p.t_s_opt);
        assert!((p.r_opt - 0.3788).abs() < 1e-4);
        assert!((p.decomposition.total - 7.12).abs() < 5e-3, "{}", p.decomposition.total);
        assert!((p.r_opt - 0.1 * p.t_s_opt).abs() < 1e-12);
    }

    #[test]
    fn deep_delay_is_flat_and_warning_helps() {
        let a = optimize_single_loop(0.1, 40.0).unwrap();
        let b = optimize_single_loop(0.1, 10.0).unwrap();
        assert!((a.t_s_opt - b.t_s_opt).abs() < 1e-3);
        let pts = sweep_regimes(0.1, &[-20.0, -40.0, -80.0]).unwrap();
        assert!(pts[0].r_opt <= pts[1].r_opt && pts[1].r_opt <= pts[2].r_opt);
        assert!(pts[2].decomposition.total < pts[1].decomposition.total);
        assert!(pts[1].decomposition.total < pts[0].decomposition.total);
        assert!(pts[2].decomposition.total < 5e-3);
    }

    #[test]
    fn sweep_properties() {
        let nets: Vec<f64> = (-20..=20).map(f64::from).collect();
        let pts = sweep_regimes(0.1, &nets).unwrap();
        assert_eq!(pts.len(), 41);
        // once the loop is delayed the total rises with unit slope, so
        // neighbours one tick apart differ by exactly one there
        for w in pts.windows(2) {
            assert!((w[1].decomposition.total - w[0].decomposition.total).abs() <= 1.0 + 1e-9);
        }
        for p in &pts {
            if p.t_opt <= 0.0 {
                assert_eq!(p.decomposition.delay_error, 0.0);
            }
        }
        let at = |n: f64| pts.iter().find(|p| p.net_delay == n).unwrap().decomposition.total;
        assert!(at(10.0) > at(-10.0));
    }

    #[test]
    fn matches_scan_at_random_points() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10 {
            let lambda = rng.gen_range(0.05..1.0);
            let n = rng.gen_range(-20.0..20.0);
            let p = optimize_single_loop(lambda, n).unwrap();
            let (t, v) = scan(lambda, n);
            assert!((p.t_s_opt - t).abs() < 1e-3, "λ={lambda} n={n}: {} vs {t}", p.t_s_opt);
            assert!(p.decomposition.total <= v + 1e-6);
        }
    }

    #[test]
    fn integer_instantiation() {
        let p = optimize_single_loop(0.1, 0.0).unwrap();
        let (t, v) = integer_signaling_delay(&p);
        assert_eq!(t, 4);
        assert!(v >= p.decomposition.total);
        assert!(optimize_single_loop(0.0, 0.0).is_err());
    }
}
