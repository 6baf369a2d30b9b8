//! Worst-case disturbance search and small independent oracles for the
//! error bounds.
//!
//! The greedy adversary plays one tick at a time. Each candidate disturbance
//! is scored by cloning the controller and rolling the loop forward a few
//! ticks under a constant full-size push; the best candidate is committed.
//! The candidates that matter for a quantizing controller are the corners
//! `±w_bound` and the values that will put its quantizer input just beside a
//! cell boundary, which is where the residual is largest. The exhaustive
//! search enumerates every sequence over the same candidate generator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channels::LoopParams;
use crate::dynamics::{
    run_closed_loop, step_plant, Channel, Controller, DisturbanceSample, Observation, PlantState, Schedule,
    SimConfig, Trajectory,
};
use crate::error::{domain, Error, Result};

/// Largest number of leaf sequences exhaustive search will enumerate.
pub const EXHAUSTIVE_BUDGET: f64 = 1e7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum AdversaryMode {
    Greedy,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CandidatePolicy {
    /// `±bound` only.
    Corners,
    /// Corners plus each side of the controller's nearest cell edge.
    CellEdges,
    /// `n` evenly spaced values over `[-bound, bound]`.
    Grid(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdversaryConfig {
    pub mode: AdversaryMode,
    pub horizon: u64,
    pub policy: CandidatePolicy,
    pub delta: f64,
    /// Ticks ignored when taking the sup.
    pub warmup: u64,
    /// Rollout length used to score greedy candidates.
    pub lookahead: u64,
}

impl AdversaryConfig {
    pub fn greedy(horizon: u64) -> Self {
        Self {
            mode: AdversaryMode::Greedy,
            horizon,
            policy: CandidatePolicy::CellEdges,
            delta: 1e-6,
            warmup: 0,
            lookahead: 16,
        }
    }

    pub fn exhaustive(horizon: u64) -> Self {
        Self { mode: AdversaryMode::Exhaustive, ..Self::greedy(horizon) }
    }

    pub fn with_policy(mut self, policy: CandidatePolicy) -> Self {
        self.policy = policy;
        self
    }

    pub fn with_warmup(mut self, warmup: u64) -> Self {
        self.warmup = warmup;
        self
    }

    pub fn with_lookahead(mut self, lookahead: u64) -> Self {
        self.lookahead = lookahead;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.horizon == 0 {
            return Err(domain("adversary horizon must be at least 1"));
        }
        if self.warmup >= self.horizon {
            return Err(domain("adversary warmup must be shorter than the horizon"));
        }
        if !(self.delta > 0.0) {
            return Err(domain("edge offset delta must be positive"));
        }
        if let CandidatePolicy::Grid(n) = self.policy {
            if n < 2 {
                return Err(domain("grid policy needs at least two points"));
            }
        }
        Ok(())
    }
}

/// Per-channel disturbance bounds. A zero bound leaves that channel quiet.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Attack {
    pub bump: f64,
    pub trail: f64,
}

impl Attack {
    /// Unsplit disturbance of size `w_bound`.
    pub fn single(w_bound: f64) -> Self {
        Self { bump: w_bound, trail: 0.0 }
    }

    pub fn dual(bump: f64, trail: f64) -> Self {
        Self { bump, trail }
    }

    fn validate(&self) -> Result<()> {
        for v in [self.bump, self.trail] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(domain(format!("disturbance bounds must be non-negative, got {v}")));
            }
        }
        if self.bump == 0.0 && self.trail == 0.0 {
            return Err(domain("at least one channel needs a positive bound"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdversaryResult {
    pub sup_x: f64,
    /// Tick at which the sup was reached.
    pub argmax_tick: u64,
    pub witness: Vec<DisturbanceSample>,
}

impl AdversaryResult {
    pub fn witness_schedule(&self) -> Schedule {
        Schedule::new(self.witness.clone())
    }

    /// Feed the witness back through the ordinary closed-loop driver.
    pub fn replay<C: Controller>(&self, fresh: &mut C) -> Result<Trajectory> {
        let cfg = SimConfig::new(self.witness.len() as u64);
        run_closed_loop(&cfg, &mut self.witness_schedule(), fresh)
    }
}

fn channel_candidates<C: Controller>(c: &C, channel: Channel, bound: f64, cfg: &AdversaryConfig) -> Vec<f64> {
    if bound == 0.0 {
        return vec![0.0];
    }
    let mut out = match cfg.policy {
        CandidatePolicy::Corners => vec![bound, -bound],
        CandidatePolicy::Grid(n) => (0..n).map(|i| -bound + 2.0 * bound * i as f64 / (n - 1) as f64).collect(),
        CandidatePolicy::CellEdges => {
            let mut v = vec![bound, -bound];
            for e in c.edge_disturbances(channel, bound) {
                for w in [e - cfg.delta, e + cfg.delta] {
                    if w.abs() <= bound {
                        v.push(w);
                    }
                }
            }
            v
        }
    };
    out.dedup();
    out
}

/// Joint candidates for the next tick, given the controller's current state.
pub fn candidates<C: Controller>(c: &C, attack: &Attack, cfg: &AdversaryConfig) -> Vec<DisturbanceSample> {
    let bs = channel_candidates(c, Channel::Bump, attack.bump, cfg);
    let rs = channel_candidates(c, Channel::Trail, attack.trail, cfg);
    let mut out = Vec::with_capacity(bs.len() * rs.len());
    for &b in &bs {
        for &r in &rs {
            out.push(DisturbanceSample::new(b, r));
        }
    }
    out
}

fn advance<C: Controller>(c: &mut C, s: PlantState, w: DisturbanceSample) -> Result<PlantState> {
    let obs = Observation { tick: s.tick, x: s.x, w, preview: &[] };
    let u = c.step(&obs)?;
    step_plant(s, &w, &u)
}

/// Largest `|x|` reached by applying `first` and then holding `hold` for
/// the rest of the lookahead, never past the horizon.
fn rollout<C: Controller + Clone>(
    c: &C,
    s: PlantState,
    first: DisturbanceSample,
    hold: DisturbanceSample,
    cfg: &AdversaryConfig,
) -> Result<f64> {
    let mut c = c.clone();
    let mut s = advance(&mut c, s, first)?;
    let mut best = s.x.abs();
    let end = (s.tick + cfg.lookahead).min(cfg.horizon);
    while s.tick < end {
        s = advance(&mut c, s, hold)?;
        best = best.max(s.x.abs());
    }
    Ok(best)
}

/// Greedy worst case over ticks `warmup..=horizon` against `controller`.
pub fn greedy_adversary<C: Controller + Clone>(
    controller: &C,
    attack: Attack,
    cfg: &AdversaryConfig,
) -> Result<AdversaryResult> {
    cfg.validate()?;
    attack.validate()?;
    let holds = candidates(controller, &attack, &AdversaryConfig { policy: CandidatePolicy::Corners, ..*cfg });
    let mut c = controller.clone();
    let mut s = PlantState::default();
    let mut witness = Vec::with_capacity(cfg.horizon as usize);
    let (mut sup, mut arg) = (0.0_f64, 0);
    for _ in 0..cfg.horizon {
        let mut best: Option<(f64, DisturbanceSample)> = None;
        for w in candidates(&c, &attack, cfg) {
            let mut score = f64::NEG_INFINITY;
            for &h in &holds {
                score = score.max(rollout(&c, s, w, h, cfg)?);
            }
            if best.map_or(true, |(b, _)| score > b) {
                best = Some((score, w));
            }
        }
        let (_, w) = best.expect("candidate set is never empty");
        witness.push(w);
        s = advance(&mut c, s, w)?;
        if s.tick >= cfg.warmup && s.x.abs() > sup {
            sup = s.x.abs();
            arg = s.tick;
        }
    }
    log::debug!("greedy adversary: sup |x| = {sup} at tick {arg}");
    Ok(AdversaryResult { sup_x: sup, argmax_tick: arg, witness })
}

fn dfs<C: Controller + Clone>(c: C, s: PlantState, sup: f64, attack: &Attack, cfg: &AdversaryConfig) -> Result<f64> {
    if s.tick >= cfg.horizon {
        return Ok(sup);
    }
    let mut best = sup;
    for w in candidates(&c, attack, cfg) {
        let mut next = c.clone();
        let ns = advance(&mut next, s, w)?;
        let sup = if ns.tick >= cfg.warmup { sup.max(ns.x.abs()) } else { sup };
        best = best.max(dfs(next, ns, sup, attack, cfg)?);
    }
    Ok(best)
}

/// Exact maximum of `sup |x|` over every candidate sequence of length
/// `horizon`. Refuses when the tree would exceed [`EXHAUSTIVE_BUDGET`]
/// leaves, estimated from the branching at the root.
pub fn exhaustive_worst_case<C: Controller + Clone + Send + Sync>(
    controller: &C,
    attack: Attack,
    cfg: &AdversaryConfig,
) -> Result<f64> {
    cfg.validate()?;
    attack.validate()?;
    let roots = candidates(controller, &attack, cfg);
    let branching = match cfg.policy {
        CandidatePolicy::CellEdges => {
            let per = |b: f64| if b > 0.0 { 4.0 } else { 1.0 };
            per(attack.bump) * per(attack.trail)
        }
        _ => roots.len() as f64,
    };
    let required = branching.powf(cfg.horizon as f64);
    if required > EXHAUSTIVE_BUDGET {
        return Err(Error::Budget { required, budget: EXHAUSTIVE_BUDGET });
    }
    let s = PlantState::default();
    let per_root: Result<Vec<f64>> = roots
        .par_iter()
        .map(|&w| {
            let mut c = controller.clone();
            let ns = advance(&mut c, s, w)?;
            let sup = if ns.tick >= cfg.warmup { ns.x.abs() } else { 0.0 };
            dfs(c, ns, sup, &attack, cfg)
        })
        .collect();
    Ok(per_root?.into_iter().fold(0.0, f64::max))
}

/// Iterate `M <- M / 2^R + w` from `M = w` until it stops moving. Returns the
/// fixed point and the residual `M / 2^R` it leaves after quantization.
pub fn interval_fixed_point_oracle(rate: f64, w_bound: f64) -> Result<(f64, f64)> {
    if !(rate > 0.0) {
        return Err(domain(format!("rate must be positive, got {rate}")));
    }
    let n = 2f64.powf(rate);
    let mut m = w_bound;
    for _ in 0..100_000 {
        let next = m / n + w_bound;
        let done = (next - m).abs() < 1e-15 * w_bound.abs().max(1.0);
        m = next;
        if done {
            break;
        }
    }
    Ok((m, m / n))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    /// Mean of the batch means of `x^2`.
    pub mse: f64,
    /// Standard error from the spread of the batch means.
    pub sigma: f64,
    pub batch_means: Vec<f64>,
    /// Pooled mean `x^2` grew by more than a quarter between the halves of the runs.
    pub non_stationary: bool,
}

pub const MC_BATCHES: usize = 10;

/// Zero-mean, unit-variance disturbance laws for the Monte-Carlo check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NoiseLaw {
    /// i.i.d. `±1`.
    Binary,
    /// i.i.d. standard normal.
    Gaussian,
}

/// Time-averaged `x^2` under i.i.d. `±1` disturbances, split into
/// [`MC_BATCHES`] independently seeded runs of `n_ticks / MC_BATCHES` ticks
/// each (the first tenth of each run is discarded as warmup).
///
/// A binary disturbance carries one bit per tick, so any loop with `R >= 1`
/// and no delay can cancel it exactly; the mean-square bound only bites for
/// the maximum-entropy (Gaussian) law. See [`stochastic_mc_check_with`].
pub fn stochastic_mc_check<C: Controller + Clone + Send + Sync>(
    controller: &C,
    p: &LoopParams,
    n_ticks: u64,
    seed: u64,
) -> Result<MonteCarloReport> {
    stochastic_mc_check_with(controller, p, n_ticks, seed, NoiseLaw::Binary)
}

pub fn stochastic_mc_check_with<C: Controller + Clone + Send + Sync>(
    controller: &C,
    p: &LoopParams,
    n_ticks: u64,
    seed: u64,
    law: NoiseLaw,
) -> Result<MonteCarloReport> {
    p.validate()?;
    let per = n_ticks / MC_BATCHES as u64;
    if per < 20 {
        return Err(domain(format!("need at least {} ticks, got {n_ticks}", 20 * MC_BATCHES)));
    }
    let warm = per / 10;
    let runs: Result<Vec<(f64, f64, f64)>> = (0..MC_BATCHES as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(k.wrapping_mul(0x9E37_79B9)));
            let mut src = move |_t: u64| {
                DisturbanceSample::single(match law {
                    NoiseLaw::Binary => if rng.gen::<bool>() { 1.0 } else { -1.0 },
                    NoiseLaw::Gaussian => rng.sample(rand_distr::StandardNormal),
                })
            };
            let mut c = controller.clone();
            let traj = run_closed_loop(&SimConfig::new(per), &mut src, &mut c)?;
            let sq: Vec<f64> = traj.xs_with_final()[warm as usize..].iter().map(|x| x * x).collect();
            let half = sq.len() / 2;
            let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
            Ok((mean(&sq), mean(&sq[..half]), mean(&sq[half..])))
        })
        .collect();
    let runs = runs?;
    let batch_means: Vec<f64> = runs.iter().map(|r| r.0).collect();
    let k = batch_means.len() as f64;
    let mse = batch_means.iter().sum::<f64>() / k;
    let var = batch_means.iter().map(|m| (m - mse).powi(2)).sum::<f64>() / (k - 1.0);
    let sigma = (var / k).sqrt();
    let first: f64 = runs.iter().map(|r| r.1).sum::<f64>() / k;
    let second: f64 = runs.iter().map(|r| r.2).sum::<f64>() / k;
    // a stationary loop keeps both halves alike; a random walk's mean square
    // roughly doubles between them
    let non_stationary = second > 1.25 * first && second > 1e-12;
    Ok(MonteCarloReport { mse, sigma, batch_means, non_stationary })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bounds::{mean_square_rate_error, worst_case_bound, worst_case_rate_error};
    use crate::control::make_optimal_controller;
    use crate::dynamics::ZeroController;

    fn opt(t: i64, r: f64) -> crate::control::QuantizedController {
        make_optimal_controller(&LoopParams::with_total_delay(t, r).unwrap(), 1.0).unwrap()
    }

    #[test]
    fn zero_controller_ramp() {
        let res = greedy_adversary(&ZeroController, Attack::single(1.0), &AdversaryConfig::greedy(10)).unwrap();
        assert_eq!(res.sup_x, 10.0);
        assert_eq!(res.witness.len(), 10);
        assert!(res.witness.iter().all(|w| w.w.abs() == 1.0));
        let cfg = AdversaryConfig::exhaustive(3).with_policy(CandidatePolicy::Corners);
        assert_eq!(exhaustive_worst_case(&ZeroController, Attack::single(1.0), &cfg).unwrap(), 3.0);
    }

    #[test]
    fn greedy_reaches_rate_term() {
        let r1 = greedy_adversary(&opt(0, 1.0), Attack::single(1.0), &AdversaryConfig::greedy(400)).unwrap();
        assert!(r1.sup_x <= 1.0 && r1.sup_x >= 0.98, "{}", r1.sup_x);
        let r2 = greedy_adversary(&opt(0, 2.0), Attack::single(1.0), &AdversaryConfig::greedy(400)).unwrap();
        assert!((r2.sup_x - 1.0 / 3.0).abs() < 0.01, "{}", r2.sup_x);
        let r3 = greedy_adversary(&opt(-4, 3.0), Attack::single(1.0), &AdversaryConfig::greedy(400)).unwrap();
        assert!((r3.sup_x - 1.0 / 7.0).abs() < 0.01, "{}", r3.sup_x);
    }

    #[test]
    fn witness_replays_exactly() {
        let c = opt(2, 2.0);
        let res = greedy_adversary(&c, Attack::single(1.0), &AdversaryConfig::greedy(120)).unwrap();
        let traj = res.replay(&mut c.clone()).unwrap();
        assert_eq!(traj.sup_abs_after(0), res.sup_x);
    }

    #[test]
    fn exhaustive_dominates_greedy_and_grows_with_horizon() {
        for t in [0, 1] {
            for r in [1.0, 2.0] {
                let c = opt(t, r);
                let h = 8;
                let g = greedy_adversary(&c, Attack::single(1.0), &AdversaryConfig::greedy(h)).unwrap().sup_x;
                let e = exhaustive_worst_case(&c, Attack::single(1.0), &AdversaryConfig::exhaustive(h)).unwrap();
                assert!(e >= g - 1e-12, "T={t} R={r}: {e} < {g}");
                let b = worst_case_bound(&LoopParams::with_total_delay(t, r).unwrap()).unwrap().total;
                assert!(e <= b + 1e-9);
            }
        }
        let c = opt(1, 1.0);
        let mut last = 0.0;
        for h in 1..=9 {
            let e = exhaustive_worst_case(&c, Attack::single(1.0), &AdversaryConfig::exhaustive(h)).unwrap();
            assert!(e >= last);
            last = e;
        }
        assert!((1.9..=2.0).contains(&last), "{last}");
    }

    #[test]
    fn exhaustive_refuses_large_trees() {
        let err = exhaustive_worst_case(&opt(0, 1.0), Attack::single(1.0), &AdversaryConfig::exhaustive(13)).unwrap_err();
        assert!(matches!(err, Error::Budget { .. }));
    }

    #[test]
    fn fixed_point_oracle() {
        let (m, r) = interval_fixed_point_oracle(2.0, 1.0).unwrap();
        assert!((m - 4.0 / 3.0).abs() < 1e-12 && (r - 1.0 / 3.0).abs() < 1e-12);
        let (m, r) = interval_fixed_point_oracle(1.0, 1.0).unwrap();
        assert!((m - 2.0).abs() < 1e-12 && (r - 1.0).abs() < 1e-12);
        let (_, r) = interval_fixed_point_oracle(3.0, 2.0).unwrap();
        assert!((r - 2.0 / 7.0).abs() < 1e-12);
        for k in 1..=16 {
            let rate = 0.5 * k as f64;
            let (_, r) = interval_fixed_point_oracle(rate, 1.0).unwrap();
            assert!((r - worst_case_rate_error(rate)).abs() < 1e-12, "R={rate}");
        }
        assert!(interval_fixed_point_oracle(0.0, 1.0).is_err());
    }

    #[test]
    fn monte_carlo_checks() {
        let p = LoopParams::with_total_delay(0, 2.0).unwrap();
        let walk = stochastic_mc_check(&ZeroController, &p, 100_000, 1).unwrap();
        assert!(walk.non_stationary);
        // one bit per tick is enough to cancel a coin-flip disturbance outright
        let coin = stochastic_mc_check(&opt(0, 2.0), &p, 100_000, 1).unwrap();
        assert!(coin.mse < 1e-12 && !coin.non_stationary, "{coin:?}");

        let gauss = |r: f64, w_bound: f64| {
            let p = LoopParams::with_total_delay(0, r).unwrap();
            let c = make_optimal_controller(&p, w_bound).unwrap();
            stochastic_mc_check_with(&c, &p, 1_000_000, 7, NoiseLaw::Gaussian).unwrap()
        };
        let rep = gauss(2.0, 3.0);
        assert!(!rep.non_stationary, "{rep:?}");
        assert!(rep.mse >= mean_square_rate_error(2.0) - 3.0 * rep.sigma, "{rep:?}");
        // a sup-norm design pays for clipping Gaussian tails: the best range
        // (about 3 sigma) lands near 4.8x the mean-square bound, not within 4x
        let rep = gauss(6.0, 3.0);
        let b = mean_square_rate_error(6.0);
        assert!(rep.mse >= b - 3.0 * rep.sigma && rep.mse <= 5.0 * b, "{} vs {b}", rep.mse);
    }
}
