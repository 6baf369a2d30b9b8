//! Campaign-level analysis: error additivity across the bump and trail
//! conditions, and the delay, rate and coupled sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::control::PilotModel;
use crate::error::{Error, Result};
use crate::experiment::stats::{paired_t_test, pearson, TTest};
use crate::experiment::trial::{
    coupled_delay_ticks, run_trial, Condition, InputSource, TrialConfig, TrialRecord, PAPER_DELAYS, PAPER_RATES,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdditivityStats {
    pub pearson_r: f64,
    pub t_stat: f64,
    pub p_value: f64,
    pub mean_difference: f64,
}

impl AdditivityStats {
    fn from(sum: &[f64], both: &[f64]) -> Result<Self> {
        let r = pearson(sum, both)?;
        let TTest { stat, p, mean_difference } = paired_t_test(sum, both)?;
        Ok(Self { pearson_r: r, t_stat: stat, p_value: p, mean_difference })
    }
}

/// Per-window comparison of (bump-only + trail-only) against both.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdditivityReport {
    /// On signed window peaks: errors keep their direction, so a bump push
    /// and a trail push the same way add, and opposite ones cancel.
    pub signed: AdditivityStats,
    /// On window worst-case magnitudes.
    pub unsigned: AdditivityStats,
    /// `(bump + trail, both)` per window, signed.
    pub scatter: Vec<(f64, f64)>,
    pub windows: usize,
}

fn check_triplet(bump: &TrialRecord, trail: &TrialRecord, both: &TrialRecord) -> Result<()> {
    let conds = (bump.config.condition, trail.config.condition, both.config.condition);
    if conds != (Condition::BumpOnly, Condition::TrailOnly, Condition::Both) {
        return Err(Error::Mismatch(format!("expected bump-only, trail-only, both; got {conds:?}")));
    }
    if !bump.config.same_world(&both.config) || !trail.config.same_world(&both.config) {
        return Err(Error::Mismatch("records differ in seed, duration or manipulation".into()));
    }
    if bump.windowed_errors.len() != both.windowed_errors.len()
        || trail.windowed_errors.len() != both.windowed_errors.len()
    {
        return Err(Error::Mismatch("records have different window counts".into()));
    }
    Ok(())
}

pub fn additivity_analysis(bump: &TrialRecord, trail: &TrialRecord, both: &TrialRecord) -> Result<AdditivityReport> {
    additivity_campaign(&[(bump.clone(), trail.clone(), both.clone())])
}

/// Pools the windows of several matched triplets.
pub fn additivity_campaign(triplets: &[(TrialRecord, TrialRecord, TrialRecord)]) -> Result<AdditivityReport> {
    let (mut sum_s, mut both_s, mut sum_u, mut both_u) = (vec![], vec![], vec![], vec![]);
    for (b, r, x) in triplets {
        check_triplet(b, r, x)?;
        let (pb, pr, px) = (b.signed_window_peaks(), r.signed_window_peaks(), x.signed_window_peaks());
        for i in 0..px.len() {
            sum_s.push(pb[i] + pr[i]);
            both_s.push(px[i]);
            sum_u.push(b.windowed_errors[i] + r.windowed_errors[i]);
            both_u.push(x.windowed_errors[i]);
        }
    }
    Ok(AdditivityReport {
        signed: AdditivityStats::from(&sum_s, &both_s)?,
        unsigned: AdditivityStats::from(&sum_u, &both_u)?,
        scatter: sum_s.into_iter().zip(both_s).collect(),
        windows: both_u.len(),
    })
}

/// Run the three conditions for each seed with the same pilot noise seed.
pub fn run_additivity_triplets(
    pilot: &PilotModel,
    seeds: &[u64],
) -> Result<Vec<(TrialRecord, TrialRecord, TrialRecord)>> {
    seeds
        .par_iter()
        .map(|&seed| {
            let input = InputSource::Pilot { model: *pilot, seed };
            let run = |c: Condition| run_trial(&TrialConfig::new(format!("{}-{seed}", c.as_str()), c, seed), &input);
            Ok((run(Condition::BumpOnly)?, run(Condition::TrailOnly)?, run(Condition::Both)?))
        })
        .collect()
}

/// Run every config against the pilot, each with `pilot_seed = config.seed`.
pub fn run_campaign(pilot: &PilotModel, configs: &[TrialConfig]) -> Result<Vec<TrialRecord>> {
    configs
        .par_iter()
        .map(|c| run_trial(c, &InputSource::Pilot { model: *pilot, seed: c.seed }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub added_delay_ticks: i32,
    pub added_rate_bits: Option<u32>,
    /// Windowed worst-case error averaged over windows and seeds.
    pub mean_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CoupledPoint {
    pub rate: u32,
    pub delay_ticks: i32,
    pub observed: f64,
    /// delay-sweep error + rate-sweep error - baseline
    pub predicted: f64,
}

impl CoupledPoint {
    pub fn relative_gap(&self) -> f64 {
        (self.observed - self.predicted).abs() / self.predicted
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SatSweeps {
    pub baseline: f64,
    /// The paper's seven delays plus any delay the coupled sweep needs.
    pub delay_sweep: Vec<SweepPoint>,
    pub rate_sweep: Vec<SweepPoint>,
    pub coupled: Vec<CoupledPoint>,
}

impl SatSweeps {
    pub fn delay_error(&self, ticks: i32) -> Option<f64> {
        self.delay_sweep.iter().find(|p| p.added_delay_ticks == ticks).map(|p| p.mean_error)
    }
}

fn mean_error(pilot: &PilotModel, seeds: &[u64], make: impl Fn(u64) -> TrialConfig + Sync) -> Result<f64> {
    let configs: Vec<TrialConfig> = seeds.iter().map(|&s| make(s)).collect();
    let recs = run_campaign(pilot, &configs)?;
    let all: Vec<f64> = recs.iter().flat_map(|r| r.windowed_errors.iter().copied()).collect();
    Ok(all.iter().sum::<f64>() / all.len() as f64)
}

/// Delay sweep, rate sweep and coupled sweep on the combined condition,
/// every setting run on the same seeds.
pub fn sat_sweeps(pilot: &PilotModel, seeds: &[u64]) -> Result<SatSweeps> {
    let base = |s: u64| TrialConfig::new(format!("sweep-{s}"), Condition::Both, s);
    let baseline = mean_error(pilot, seeds, base)?;
    let mut delays: Vec<i32> = PAPER_DELAYS.to_vec();
    delays.extend(PAPER_RATES.iter().map(|&r| coupled_delay_ticks(r)));
    delays.sort_unstable();
    delays.dedup();
    let delay_sweep = delays
        .iter()
        .map(|&d| {
            Ok(SweepPoint {
                added_delay_ticks: d,
                added_rate_bits: None,
                mean_error: mean_error(pilot, seeds, |s| base(s).with_delay(d))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let rate_sweep = PAPER_RATES
        .iter()
        .map(|&r| {
            Ok(SweepPoint {
                added_delay_ticks: 0,
                added_rate_bits: Some(r),
                mean_error: mean_error(pilot, seeds, |s| base(s).with_rate(Some(r)))?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut out = SatSweeps { baseline, delay_sweep, rate_sweep, coupled: Vec::new() };
    for (i, &r) in PAPER_RATES.iter().enumerate() {
        let d = coupled_delay_ticks(r);
        let observed = mean_error(pilot, seeds, |s| base(s).coupled(r))?;
        let predicted = out.delay_error(d).expect("swept above") + out.rate_sweep[i].mean_error - baseline;
        out.coupled.push(CoupledPoint { rate: r, delay_ticks: d, observed, predicted });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn degenerate_triplet_smoke() {
        let pilot = PilotModel::default();
        let t = &run_additivity_triplets(&pilot, &[1]).unwrap()[0];
        // identical records: sum = 2x, so r = 1 and the offset is the mean itself
        let both = t.2.clone();
        let mut b = both.clone();
        b.config.condition = Condition::BumpOnly;
        let mut r = both.clone();
        r.config.condition = Condition::TrailOnly;
        let rep = additivity_analysis(&b, &r, &both).unwrap();
        assert!((rep.unsigned.pearson_r - 1.0).abs() < 1e-12);
        let m = both.windowed_errors.iter().sum::<f64>() / both.windowed_errors.len() as f64;
        assert!((rep.unsigned.mean_difference - m).abs() < 1e-12);
    }

    #[test]
    fn mismatched_records_are_rejected() {
        let pilot = PilotModel::default();
        let ts = run_additivity_triplets(&pilot, &[1, 2]).unwrap();
        assert!(additivity_analysis(&ts[0].0, &ts[1].1, &ts[0].2).is_err());
        assert!(additivity_analysis(&ts[0].1, &ts[0].0, &ts[0].2).is_err());
    }

    #[test]
    fn layered_controller_errors_are_subadditive() {
        use crate::bounds::LayeredParams;
        use crate::channels::LoopParams;
        use crate::control::make_layered_controller;
        use crate::dynamics::{run_closed_loop, Schedule, SimConfig};
        use crate::experiment::trial::{compute_windowed_worst_case, trial_disturbance};
        let lp = LayeredParams::new(LoopParams::new(1, 3, 0, 4.0).unwrap(), LoopParams::new(0, 0, 5, 6.0).unwrap(), 1.0)
            .unwrap();
        let cfg = TrialConfig::new("l", Condition::Both, 3);
        let w = trial_disturbance(&cfg).unwrap();
        let amp = w.iter().fold(0.0_f64, |m, s| m.max(s.b.abs()).max(s.r.abs()));
        let run = |keep_b: f64, keep_r: f64| {
            let parts: Vec<_> = w.iter().map(|s| crate::dynamics::DisturbanceSample::new(keep_b * s.b, keep_r * s.r)).collect();
            let mut c = make_layered_controller(&lp, amp, amp).unwrap();
            let traj = run_closed_loop(&SimConfig::new(w.len() as u64), &mut Schedule::new(parts), &mut c).unwrap();
            compute_windowed_worst_case(&traj.xs()[200..], 40)
        };
        let (eb, er, ex) = (run(1.0, 0.0), run(0.0, 1.0), run(1.0, 1.0));
        // both single runs also carry the idle limit cycle, so this is loose
        for i in 0..ex.len() {
            assert!(ex[i] <= (eb[i] + er[i]) * 1.02 + 1e-12, "window {i}");
        }
    }
}
