//! The acceptance suite: ten checks that tie the bounds, the controllers
//! that meet them, the optimizer and the experiment pipeline together.
//! Each check reports the value it measured and the tolerance it was held
//! to; a failed check is a report entry, not an error.

pub mod oracles;

use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::adversary::{exhaustive_worst_case, greedy_adversary, interval_fixed_point_oracle, AdversaryConfig, Attack};
use crate::bounds::{layered_bound, stochastic_bound, worst_case_bound, LayeredParams};
use crate::channels::LoopParams;
use crate::control::{make_layered_controller, make_optimal_controller, PilotModel};
use crate::error::{Error, Result};
use crate::experiment::analysis::{additivity_campaign, run_additivity_triplets, sat_sweeps};
use crate::experiment::io::read_campaign_csv;
use crate::experiment::stats::ks_two_sample;
use crate::experiment::trial::{run_trial, Condition, InputSource, TrialConfig, PAPER_DELAYS};
use crate::optimize::single::integer_signaling_delay;
use crate::optimize::{compare_layered, dess_tradeoff_curve, optimize_single_loop, LayerMode, LayeredProblem, TradeoffConfig};
use crate::session::{
    export_session, read_log, replay_log, run_loopback_session, ExportFormat, SessionOptions, SessionStore,
};

/// Human value of the additivity correlation, shown for reference only.
pub const HUMAN_ADDITIVITY_R: f64 = 0.57;
pub const CRITERIA: [u8; 10] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Fast,
    /// Adds the deep exhaustive-search oracle.
    Full,
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "fast" => Ok(Suite::Fast),
            "full" => Ok(Suite::Full),
            other => Err(Error::Parse(format!("unknown suite {other:?}; expected fast or full"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AcceptOptions {
    pub suite: Suite,
    /// Scratch space for the replay check's session files.
    pub work_dir: PathBuf,
}

impl AcceptOptions {
    pub fn new(suite: Suite, work_dir: impl Into<PathBuf>) -> Self {
        Self { suite, work_dir: work_dir.into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionReport {
    pub id: u8,
    pub name: String,
    /// The headline number the verdict is based on.
    pub measured: f64,
    pub tolerance: String,
    pub passed: bool,
    pub seconds: f64,
    /// Supporting numbers, one per line.
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn line(&self) -> String {
        format!(
            "[{}] criterion {:>2} {:<24} measured {:<12.6} ({}) {:.2}s",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.measured,
            self.tolerance,
            self.seconds
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceReport {
    pub suite: Suite,
    pub criteria: Vec<CriterionReport>,
}

impl AcceptanceReport {
    pub fn all_passed(&self) -> bool {
        self.criteria.iter().all(|c| c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

struct Outcome {
    measured: f64,
    tolerance: String,
    passed: bool,
    notes: Vec<String>,
}

pub fn criterion_name(id: u8) -> &'static str {
    match id {
        1 => "bound formulas",
        2 => "rate-term oracle",
        3 => "achievability",
        4 => "layered bound",
        5 => "error additivity",
        6 => "system SAT sweeps",
        7 => "regime optimization",
        8 => "DESS dominance",
        9 => "replay determinism",
        10 => "service equivalence",
        _ => "unknown",
    }
}

/// Run one check. Unknown ids and internal errors come back as failures.
pub fn run_criterion(id: u8, opts: &AcceptOptions) -> CriterionReport {
    let start = Instant::now();
    let res = match id {
        1 => bound_formulas(),
        2 => rate_term_oracle(),
        3 => achievability(opts.suite),
        4 => layered_achievability(),
        5 => additivity(),
        6 => system_sat(),
        7 => regime_optimization(),
        8 => dess_dominance(),
        9 => replay_determinism(&opts.work_dir),
        10 => service_equivalence(),
        _ => Err(Error::NotFound(format!("criterion {id}"))),
    };
    let o = res.unwrap_or_else(|e| Outcome {
        measured: f64::NAN,
        tolerance: "ran to completion".into(),
        passed: false,
        notes: vec![format!("error: {e}")],
    });
    CriterionReport {
        id,
        name: criterion_name(id).into(),
        measured: o.measured,
        tolerance: o.tolerance,
        passed: o.passed,
        seconds: start.elapsed().as_secs_f64(),
        notes: o.notes,
    }
}

pub fn run_suite(opts: &AcceptOptions) -> AcceptanceReport {
    AcceptanceReport { suite: opts.suite, criteria: CRITERIA.iter().map(|&id| run_criterion(id, opts)).collect() }
}

/// 50 (T, R) pairs covering T in -8..=8 and R in 0.5..=8.
pub fn bound_grid() -> Vec<(i64, f64)> {
    (0..50).map(|k| (-8 + (k * 7 % 17) as i64, 0.5 + 0.5 * ((k * 3) % 16) as f64)).collect()
}

fn bound_formulas() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for (t, r) in bound_grid() {
        let p = LoopParams::with_total_delay(t, r)?;
        let wc = worst_case_bound(&p)?.total;
        let st = stochastic_bound(&p)?.total;
        worst = worst
            .max((wc - oracles::worst_case_by_hand(t as f64, r)).abs())
            .max((st - oracles::stochastic_by_hand(t as f64, r)).abs());
    }
    Ok(Outcome { measured: worst, tolerance: "max abs diff <= 1e-12".into(), passed: worst <= 1e-12, notes: vec![] })
}

fn rate_term_oracle() -> Result<Outcome> {
    let rates = [0.5, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0];
    let mut worst = 0.0_f64;
    let mut cross = 0.0_f64;
    for r in rates {
        let (m, residual) = interval_fixed_point_oracle(r, 1.0)?;
        worst = worst.max((residual - 1.0 / (2f64.powf(r) - 1.0)).abs());
        let (m_closed, _) = oracles::interval_fixed_point_closed_form(r, 1.0);
        cross = cross.max((m - m_closed).abs());
        if r.fract() == 0.0 {
            // the controller's own quantizer leaves the same residual
            let c = make_optimal_controller(&LoopParams::new(0, 0, 0, r)?, 1.0)?;
            cross = cross.max((c.residual_bound() - residual).abs());
        }
    }
    Ok(Outcome {
        measured: worst,
        tolerance: "max abs diff <= 1e-12".into(),
        passed: worst <= 1e-12 && cross <= 1e-12,
        notes: vec![format!("fixed point vs closed form and controller residual: {cross:.3e}")],
    })
}

fn achievability(suite: Suite) -> Result<Outcome> {
    let exhaustive_h = match suite {
        Suite::Fast => 8,
        Suite::Full => 11,
    };
    let mut lowest_ratio = f64::INFINITY;
    let mut passed = true;
    let mut notes = Vec::new();
    for t in [-4i64, 0, 2] {
        for r in [1.0, 2.0, 3.0] {
            let p = LoopParams::with_total_delay(t, r)?;
            let b = worst_case_bound(&p)?.total;
            let c = make_optimal_controller(&p, 1.0)?;
            let g = greedy_adversary(&c, Attack::single(1.0), &AdversaryConfig::greedy(400))?.sup_x;
            let ratio = g / b;
            lowest_ratio = lowest_ratio.min(ratio);
            let in_band = g >= 0.95 * b && g <= b + 1e-12;
            let e = exhaustive_worst_case(&c, Attack::single(1.0), &AdversaryConfig::exhaustive(exhaustive_h))?;
            let g_short = greedy_adversary(&c, Attack::single(1.0), &AdversaryConfig::greedy(exhaustive_h))?.sup_x;
            let oracle_ok = e <= b + 1e-12 && e <= g_short + 1e-9;
            passed &= in_band && oracle_ok;
            notes.push(format!(
                "T={t:>2} R={r}: B={b:.9} greedy={g:.9} exhaustive(h={exhaustive_h})={e:.9} greedy(h={exhaustive_h})={g_short:.9}"
            ));
        }
    }
    Ok(Outcome {
        measured: lowest_ratio,
        tolerance: "greedy/B in [0.95, 1]; exhaustive <= min(B, greedy + 1e-9)".into(),
        passed,
        notes,
    })
}

fn layered_achievability() -> Result<Outcome> {
    let reflex = LoopParams::new(1, 10, 0, 1.0)?;
    let planning = LoopParams::new(0, 0, 5, 5.0)?;
    let lp = LayeredParams::new(reflex, planning, 1.0)?;
    let bound = layered_bound(&lp)?.total;
    let c = make_layered_controller(&lp, 1.0, 1.0)?;
    let sup = greedy_adversary(&c, Attack::dual(1.0, 1.0), &AdversaryConfig::greedy(2000))?.sup_x;
    Ok(Outcome {
        measured: sup,
        tolerance: format!("in [{:.4}, 12.033]", 0.9 * bound),
        passed: sup <= 12.033 && sup >= 0.9 * bound,
        notes: vec![format!("layered bound {bound:.9}")],
    })
}

fn additivity() -> Result<Outcome> {
    let seeds: Vec<u64> = (1..=20).collect();
    let triplets = run_additivity_triplets(&PilotModel::default(), &seeds)?;
    let rep = additivity_campaign(&triplets)?;
    let s = rep.signed;
    Ok(Outcome {
        measured: s.pearson_r,
        tolerance: "r > 0.3 and paired t p > 0.05".into(),
        passed: s.pearson_r > 0.3 && s.p_value > 0.05,
        notes: vec![
            format!("signed peaks: r={:.4} t={:.4} p={:.4} over {} windows", s.pearson_r, s.t_stat, s.p_value, rep.windows),
            format!(
                "unsigned peaks (reference): r={:.4} t={:.4} p={:.3e} mean diff={:.4}",
                rep.unsigned.pearson_r, rep.unsigned.t_stat, rep.unsigned.p_value, rep.unsigned.mean_difference
            ),
            format!("human reference r={HUMAN_ADDITIVITY_R}"),
        ],
    })
}

fn system_sat() -> Result<Outcome> {
    let seeds: Vec<u64> = (1..=200).collect();
    let s = sat_sweeps(&PilotModel::default(), &seeds)?;
    let mut notes = vec![format!("baseline {:.4}", s.baseline)];
    let nonneg: Vec<(i32, f64)> = s
        .delay_sweep
        .iter()
        .filter(|p| p.added_delay_ticks >= 0)
        .map(|p| (p.added_delay_ticks, p.mean_error))
        .collect();
    let delay_ok = nonneg.windows(2).all(|w| w[1].1 >= w[0].1);
    notes.push(format!("delay sweep (ticks >= 0): {nonneg:?}"));
    let paper: Vec<(i32, f64)> =
        PAPER_DELAYS.iter().map(|&d| (d, s.delay_error(d).expect("swept"))).collect();
    notes.push(format!("delay sweep (all paper delays): {paper:?}"));
    let rates: Vec<(u32, f64)> =
        s.rate_sweep.iter().map(|p| (p.added_rate_bits.unwrap_or(0), p.mean_error)).collect();
    let rate_ok = rates.windows(2).all(|w| w[1].1 <= w[0].1);
    notes.push(format!("rate sweep: {rates:?}"));
    let gap = s.coupled.iter().map(|c| c.relative_gap()).fold(0.0, f64::max);
    for c in &s.coupled {
        notes.push(format!(
            "coupled R={} delay={}: observed {:.4} predicted {:.4} gap {:.2}%",
            c.rate,
            c.delay_ticks,
            c.observed,
            c.predicted,
            100.0 * c.relative_gap()
        ));
    }
    notes.push(format!("delay monotone: {delay_ok}, rate monotone: {rate_ok}"));
    Ok(Outcome {
        measured: gap,
        tolerance: "monotone sweeps; coupled gap <= 15%".into(),
        passed: delay_ok && rate_ok && gap <= 0.15,
        notes,
    })
}

fn regime_optimization() -> Result<Outcome> {
    let lambda = 0.1;
    let nets: Vec<f64> = (0..=56).map(|i| -4.0 + 0.25 * i as f64).collect();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    let mut int_spread = (u32::MAX, 0u32);
    for &n in &nets {
        let p = optimize_single_loop(lambda, n)?;
        lo = lo.min(p.t_s_opt);
        hi = hi.max(p.t_s_opt);
        let (ti, _) = integer_signaling_delay(&p);
        int_spread = (int_spread.0.min(ti), int_spread.1.max(ti));
    }
    let spread = hi - lo;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_arg = 0.0_f64;
    for _ in 0..20 {
        let lam = rng.gen_range(0.05..0.5);
        let n = rng.gen_range(-20.0..20.0);
        let p = optimize_single_loop(lam, n)?;
        let (t_grid, _) = oracles::dense_grid_argmin(lam, n, 1e-3, 60.0, 1e-4);
        worst_arg = worst_arg.max((p.t_s_opt - t_grid).abs());
    }
    let flat = spread <= 1e-3;
    let matches = worst_arg <= 1e-3;
    Ok(Outcome {
        measured: spread,
        tolerance: "T_s spread over [-4, 10] <= 1e-3; grid argument gap <= 1e-3".into(),
        passed: flat && matches,
        notes: vec![
            format!("continuous T_s* ranges over [{lo:.4}, {hi:.4}]"),
            format!("integer signaling delay ranges over [{}, {}]", int_spread.0, int_spread.1),
            format!("largest optimizer vs dense-grid argument gap: {worst_arg:.3e}"),
        ],
    })
}

fn dess_dominance() -> Result<Outcome> {
    let mut best_gain = f64::NEG_INFINITY;
    let mut passed = true;
    let mut notes = Vec::new();
    for t_i in [0.0, 10.0] {
        let p = LayeredProblem::new(0.1, 0.1, t_i, 100.0, 1.0)?;
        let c = compare_layered(&p)?;
        let gain = c.relative_gain();
        best_gain = best_gain.max(gain);
        let bd = oracles::brute_layered(0.1, 0.1, t_i, 100.0, 1.0, LayerMode::Diverse, 1e-3, 200.0);
        let bu = oracles::brute_layered(0.1, 0.1, t_i, 100.0, 1.0, LayerMode::Uniform, 1e-3, 200.0);
        let oracle_ok = (c.diverse.total - bd).abs() < 1e-6 && (c.uniform.total - bu).abs() < 1e-6;
        let curve = dess_tradeoff_curve(&p, &TradeoffConfig::regular(0.25, 150.0, 60))?;
        let frontier_ok = curve.diverse_frontier.iter().zip(&curve.uniform_frontier).all(|(d, u)| d <= u);
        passed &= c.diverse.total <= c.uniform.total && oracle_ok && frontier_ok;
        notes.push(format!(
            "T_i={t_i}: diverse {:.6} uniform {:.6} gain {:.2}% (grid oracle {bd:.6} / {bu:.6}); frontier dominance {frontier_ok}",
            c.diverse.total,
            c.uniform.total,
            100.0 * gain
        ));
    }
    passed &= best_gain > 0.01;
    Ok(Outcome { measured: best_gain, tolerance: "diverse <= uniform; best gain > 1%".into(), passed, notes })
}

fn random_session_trials(rng: &mut ChaCha8Rng, session: usize) -> Vec<TrialConfig> {
    let conditions = [Condition::BumpOnly, Condition::TrailOnly, Condition::Both];
    (0..3)
        .map(|k| {
            let cfg = TrialConfig::new(format!("s{session}-t{k}"), conditions[rng.gen_range(0..3)], rng.gen());
            match rng.gen_range(0..3) {
                0 => cfg.with_delay(PAPER_DELAYS[rng.gen_range(0..PAPER_DELAYS.len())]),
                1 => cfg.with_rate(Some(rng.gen_range(1..=7))),
                _ => cfg.coupled(rng.gen_range(1..=7)),
            }
        })
        .collect()
}

fn replay_determinism(work_dir: &Path) -> Result<Outcome> {
    let store = SessionStore::open(work_dir.join("sessions"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut mismatched_ticks = 0usize;
    let mut metric_mismatches = 0usize;
    let mut trials = 0usize;
    for s in 0..10 {
        let id = format!("accept-{s}");
        let cfgs = random_session_trials(&mut rng, s);
        let mut session =
            run_loopback_session(&id, cfgs, rng.gen(), SessionOptions::default(), PilotModel::default(), rng.gen())?;
        let _ = std::fs::remove_file(store.path_of(&id));
        store.append(&id, &session.take_new_log_entries())?;
        let raw = work_dir.join(format!("{id}.export.jsonl"));
        export_session(&store, &id, ExportFormat::RawLog, &raw)?;
        let replay = replay_log(&read_log(&raw)?)?;
        mismatched_ticks += replay.mismatches;
        let csv = work_dir.join(format!("{id}.csv"));
        export_session(&store, &id, ExportFormat::CampaignCsv, &csv)?;
        let rows = read_campaign_csv(std::fs::File::open(&csv)?)?;
        let exported: Vec<f64> = rows.iter().map(|r| r.window_worst_case).collect();
        let live: Vec<f64> = session.records().iter().flat_map(|r| r.windowed_errors.iter().copied()).collect();
        if exported.len() != live.len() || exported.iter().zip(&live).any(|(a, b)| a.to_bits() != b.to_bits()) {
            metric_mismatches += 1;
        }
        for (a, b) in replay.records.iter().zip(session.records()) {
            trials += 1;
            let same_x = a.trajectory.records.len() == b.trajectory.records.len()
                && a.trajectory.records.iter().zip(&b.trajectory.records).all(|(p, q)| p.x.to_bits() == q.x.to_bits());
            if !same_x {
                mismatched_ticks += 1;
            }
            if a.windowed_errors != b.windowed_errors || a.summary != b.summary {
                metric_mismatches += 1;
            }
        }
    }
    let bad = (mismatched_ticks + metric_mismatches) as f64;
    Ok(Outcome {
        measured: bad,
        tolerance: "0 mismatches".into(),
        passed: bad == 0.0 && trials == 30,
        notes: vec![format!(
            "{trials} trials replayed; {mismatched_ticks} x mismatches, {metric_mismatches} metric mismatches"
        )],
    })
}

fn service_equivalence() -> Result<Outcome> {
    let pilot = PilotModel::default();
    let cfgs: Vec<TrialConfig> = (1..=20).map(|s| TrialConfig::new(format!("t{s}"), Condition::Both, s)).collect();
    let mut direct = Vec::new();
    for c in &cfgs {
        direct.extend(run_trial(c, &InputSource::Pilot { model: pilot, seed: c.seed })?.windowed_errors);
    }
    let opts = SessionOptions { rest_ticks: 0, reseed: false, ..Default::default() };
    let session = run_loopback_session("equivalence", cfgs, 0, opts, pilot, 1000)?;
    let via: Vec<f64> = session.records().iter().flat_map(|r| r.windowed_errors.iter().copied()).collect();
    let ks = ks_two_sample(&direct, &via)?;
    Ok(Outcome {
        measured: ks.p,
        tolerance: "KS p > 0.01".into(),
        passed: ks.p > 0.01,
        notes: vec![format!("D={:.4} over {} vs {} windows", ks.d, direct.len(), via.len())],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_covers_both_ranges() {
        let g = bound_grid();
        assert_eq!(g.len(), 50);
        assert_eq!(g.iter().map(|p| p.0).min(), Some(-8));
        assert_eq!(g.iter().map(|p| p.0).max(), Some(8));
        assert_eq!(g.iter().map(|p| p.1).fold(f64::INFINITY, f64::min), 0.5);
        assert_eq!(g.iter().map(|p| p.1).fold(0.0, f64::max), 8.0);
    }

    #[test]
    fn unknown_criterion_is_a_failed_entry() {
        let r = run_criterion(42, &AcceptOptions::new(Suite::Fast, std::env::temp_dir()));
        assert!(!r.passed);
        assert!(r.notes[0].contains("42"));
    }

    #[test]
    fn cheap_criteria_pass() {
        let opts = AcceptOptions::new(Suite::Fast, std::env::temp_dir());
        for id in [1, 2, 8] {
            let r = run_criterion(id, &opts);
            assert!(r.passed, "{}: {:?}", r.line(), r.notes);
        }
        assert_eq!("full".parse::<Suite>().unwrap(), Suite::Full);
    }
}
