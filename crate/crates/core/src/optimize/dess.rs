//! Two-layer composition: how to split delay and rate between a reflex
//! layer and a planning layer, with the layers free to differ (diverse) or
//! forced to use the same components (uniform).

use serde::{Deserialize, Serialize};

use crate::bounds::worst_case_rate_error;
use crate::error::{domain, Result};
use crate::optimize::golden::grid_then_golden;
use crate::optimize::single::{T_S_MAX, T_S_MIN};

/// How far below the advanced warning the planning delay is pushed when the
/// open constraint `T_h < T_a` is active.
pub const REGIME_MARGIN: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LayerMode {
    Diverse,
    Uniform,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredProblem {
    pub lambda_l: f64,
    pub lambda_h: f64,
    pub internal_delay: f64,
    pub warning: f64,
    pub epsilon: f64,
}

impl LayeredProblem {
    pub fn new(lambda_l: f64, lambda_h: f64, internal_delay: f64, warning: f64, epsilon: f64) -> Result<Self> {
        let p = Self { lambda_l, lambda_h, internal_delay, warning, epsilon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_l > 0.0 && self.lambda_h > 0.0) {
            return Err(domain("resource levels must be positive"));
        }
        if !(self.internal_delay >= 0.0 && self.warning >= 0.0 && self.epsilon >= 0.0) {
            return Err(domain("internal delay, warning and epsilon must be non-negative"));
        }
        Ok(())
    }

    pub fn reflex_part(&self, t_l: f64) -> f64 {
        self.epsilon * (t_l + self.internal_delay + worst_case_rate_error(self.lambda_l * t_l))
    }

    pub fn planning_part(&self, t_h: f64) -> f64 {
        worst_case_rate_error(self.lambda_h * t_h)
    }

    /// Rate shared by both layers when they use the same components.
    pub fn uniform_rate(&self, t: f64) -> f64 {
        self.lambda_l.min(self.lambda_h) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayerChoice {
    pub delay: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LayeredOptimum {
    pub mode: LayerMode,
    pub reflex: LayerChoice,
    pub planning: LayerChoice,
    pub reflex_part: f64,
    pub planning_part: f64,
    pub total: f64,
    /// False when no planning delay satisfies `T_h < T_a`.
    pub feasible: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DessComparison {
    pub diverse: LayeredOptimum,
    pub uniform: LayeredOptimum,
}

impl DessComparison {
    /// `(uniform - diverse) / uniform`
    pub fn relative_gain(&self) -> f64 {
        (self.uniform.total - self.diverse.total) / self.uniform.total
    }
}

fn infeasible(mode: LayerMode) -> LayeredOptimum {
    let nan = LayerChoice { delay: f64::NAN, rate: f64::NAN };
    LayeredOptimum {
        mode,
        reflex: nan,
        planning: nan,
        reflex_part: f64::INFINITY,
        planning_part: f64::INFINITY,
        total: f64::INFINITY,
        feasible: false,
    }
}

pub fn optimize_layered(p: &LayeredProblem, mode: LayerMode) -> Result<LayeredOptimum> {
    p.validate()?;
    let t_h_max = p.warning - REGIME_MARGIN;
    if t_h_max <= T_S_MIN {
        log::warn!("no planning delay fits under warning {}", p.warning);
        return Ok(infeasible(mode));
    }
    let out = match mode {
        LayerMode::Diverse => {
            // the layered bound separates: each layer is a 1-D problem
            let (t_l, _) = if p.epsilon > 0.0 {
                grid_then_golden(|t| p.reflex_part(t), T_S_MIN, T_S_MAX, 4000, 1e-12)?
            } else {
                (T_S_MIN, 0.0)
            };
            // the planning term only falls with delay, so it sits at the margin
            let (t_h, _) = grid_then_golden(|t| p.planning_part(t), T_S_MIN, t_h_max, 4000, 1e-12)?;
            let reflex = LayerChoice { delay: t_l, rate: p.lambda_l * t_l };
            let planning = LayerChoice { delay: t_h, rate: p.lambda_h * t_h };
            (reflex, planning)
        }
        LayerMode::Uniform => {
            let f = |t: f64| {
                let r = p.uniform_rate(t);
                p.epsilon * (t + p.internal_delay + worst_case_rate_error(r)) + worst_case_rate_error(r)
            };
            let (t, _) = grid_then_golden(f, T_S_MIN, t_h_max, 4000, 1e-12)?;
            let c = LayerChoice { delay: t, rate: p.uniform_rate(t) };
            (c, c)
        }
    };
    let (reflex, planning) = out;
    let reflex_part = if p.epsilon > 0.0 {
        p.epsilon * (reflex.delay + p.internal_delay + worst_case_rate_error(reflex.rate))
    } else {
        0.0
    };
    let planning_part = worst_case_rate_error(planning.rate);
    Ok(LayeredOptimum {
        mode,
        reflex,
        planning,
        reflex_part,
        planning_part,
        total: reflex_part + planning_part,
        feasible: planning.delay < p.warning,
    })
}

pub fn compare_layered(p: &LayeredProblem) -> Result<DessComparison> {
    Ok(DessComparison {
        diverse: optimize_layered(p, LayerMode::Diverse)?,
        uniform: optimize_layered(p, LayerMode::Uniform)?,
    })
}

/// One feasible composition placed on the system-SAT plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TradeoffPoint {
    pub mode: LayerMode,
    pub t_l: f64,
    pub t_h: f64,
    pub r_l: f64,
    pub r_h: f64,
    pub rate_error_sum: f64,
    pub delay_error_sum: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffCurve {
    pub points: Vec<TradeoffPoint>,
    /// Sampled abscissae (sum of rate errors).
    pub abscissae: Vec<f64>,
    /// Least delay-error sum reachable with at most the abscissa's rate-error sum.
    pub diverse_frontier: Vec<f64>,
    pub uniform_frontier: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TradeoffConfig {
    /// Signaling delays tried for each layer; the uniform grid is the diagonal.
    pub delays: Vec<f64>,
    pub n_abscissae: usize,
}

impl TradeoffConfig {
    pub fn regular(step: f64, max: f64, n_abscissae: usize) -> Self {
        let n = (max / step).floor() as usize;
        Self { delays: (1..=n).map(|i| i as f64 * step).collect(), n_abscissae }
    }
}

fn point(p: &LayeredProblem, mode: LayerMode, t_l: f64, t_h: f64) -> TradeoffPoint {
    let (r_l, r_h) = match mode {
        LayerMode::Diverse => (p.lambda_l * t_l, p.lambda_h * t_h),
        LayerMode::Uniform => (p.uniform_rate(t_l), p.uniform_rate(t_h)),
    };
    TradeoffPoint {
        mode,
        t_l,
        t_h,
        r_l,
        r_h,
        rate_error_sum: p.epsilon * worst_case_rate_error(r_l) + worst_case_rate_error(r_h),
        delay_error_sum: p.epsilon * (t_l + p.internal_delay),
    }
}

fn frontier(points: &[TradeoffPoint], mode: LayerMode, abscissae: &[f64]) -> Vec<f64> {
    let mut own: Vec<(f64, f64)> = points
        .iter()
        .filter(|q| q.mode == mode)
        .map(|q| (q.rate_error_sum, q.delay_error_sum))
        .collect();
    own.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut out = Vec::with_capacity(abscissae.len());
    let (mut i, mut best) = (0, f64::INFINITY);
    for &a in abscissae {
        while i < own.len() && own[i].0 <= a {
            best = best.min(own[i].1);
            i += 1;
        }
        out.push(best);
    }
    out
}

/// Every feasible composition on the delay grid, plus the lower-left
/// frontiers of the diverse and uniform families.
pub fn dess_tradeoff_curve(p: &LayeredProblem, cfg: &TradeoffConfig) -> Result<TradeoffCurve> {
    p.validate()?;
    if cfg.delays.is_empty() || cfg.n_abscissae < 2 {
        return Err(domain("trade-off curve needs delays and at least two abscissae"));
    }
    let planning: Vec<f64> = cfg.delays.iter().copied().filter(|&t| t < p.warning).collect();
    let mut points = Vec::new();
    for &t_l in &cfg.delays {
        for &t_h in &planning {
            points.push(point(p, LayerMode::Diverse, t_l, t_h));
        }
    }
    for &t in &planning {
        points.push(point(p, LayerMode::Uniform, t, t));
    }
    let xs: Vec<f64> = points.iter().map(|q| q.rate_error_sum).filter(|v| v.is_finite() && *v > 0.0).collect();
    if xs.is_empty() {
        return Err(domain("no feasible composition on the grid"));
    }
    let lo = xs.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = xs.iter().copied().fold(0.0, f64::max);
    let n = cfg.n_abscissae;
    let abscissae: Vec<f64> = (0..n).map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64)).collect();
    let diverse_frontier = frontier(&points, LayerMode::Diverse, &abscissae);
    let uniform_frontier = frontier(&points, LayerMode::Uniform, &abscissae);
    Ok(TradeoffCurve { points, abscissae, diverse_frontier, uniform_frontier })
}
