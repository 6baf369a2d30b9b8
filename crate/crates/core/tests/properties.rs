//! Cross-module properties: plant linearity, controllers staying under
//! their bounds, optimizer feasibility and nesting, pilot sanity.

use proptest::prelude::*;

use dess_core::adversary::{greedy_adversary, AdversaryConfig, Attack};
use dess_core::experiment::{run_trial, Condition, InputSource, TrialConfig};
use dess_core::optimize::optimize_single_loop;
use dess_core::optimize::single::single_loop_objective;
use dess_core::optimize::{compare_layered, LayeredProblem};
use dess_core::{
    layered_bound, make_layered_controller, make_optimal_controller, run_closed_loop, step_plant, worst_case_bound,
    ControlCommand, DisturbanceSample, LayeredParams, LoopParams, PilotModel, PlantState, Schedule, SimConfig,
};

fn roll(ws: &[DisturbanceSample], us: &[f64]) -> Vec<f64> {
    let mut s = PlantState::default();
    let mut xs = vec![s.x];
    for (w, &u) in ws.iter().zip(us) {
        s = step_plant(s, w, &ControlCommand::single(u)).unwrap();
        xs.push(s.x);
    }
    xs
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn plant_superposes(parts in prop::collection::vec((-1.0..1.0f64, -1.0..1.0f64, -2.0..2.0f64), 1..200)) {
        let both: Vec<_> = parts.iter().map(|&(b, r, _)| DisturbanceSample::new(b, r)).collect();
        let bump: Vec<_> = parts.iter().map(|&(b, _, _)| DisturbanceSample::single(b)).collect();
        let trail: Vec<_> = parts.iter().map(|&(_, r, _)| DisturbanceSample::new(0.0, r)).collect();
        let us: Vec<f64> = parts.iter().map(|p| p.2).collect();
        let zeros = vec![0.0; us.len()];
        let x = roll(&both, &us);
        let (xb, xr) = (roll(&bump, &us), roll(&trail, &zeros));
        for i in 0..x.len() {
            prop_assert!((x[i] - xb[i] - xr[i]).abs() < 1e-9);
        }
    }

    #[test]
    fn optimal_controller_stays_under_bound(
        t in -6i64..6,
        r in 1u32..5,
        w in prop::collection::vec(-1.0..=1.0f64, 1..300),
    ) {
        let p = LoopParams::with_total_delay(t, r as f64).unwrap();
        let bound = worst_case_bound(&p).unwrap().total;
        let mut c = make_optimal_controller(&p, 1.0).unwrap();
        let mut src = Schedule::new(w.iter().map(|&v| DisturbanceSample::single(v)).collect());
        let traj = run_closed_loop(&SimConfig::new(w.len() as u64), &mut src, &mut c).unwrap();
        for rec in &traj.records {
            prop_assert!(rec.x.abs() <= bound + 1e-9, "|x| = {} > {bound}", rec.x.abs());
        }
    }

    #[test]
    fn layered_controller_stays_under_bound(
        t_l in 0u32..3,
        t_i in 0u32..6,
        r_l in 1u32..4,
        t_a in 1u32..6,
        r_h in 1u32..6,
        parts in prop::collection::vec((-1.0..=1.0f64, -1.0..=1.0f64), 1..300),
    ) {
        let reflex = LoopParams::new(t_l, t_i, 0, r_l as f64).unwrap();
        let planning = LoopParams::new(0, 0, t_a, r_h as f64).unwrap();
        let lp = LayeredParams::new(reflex, planning, 1.0).unwrap();
        let bound = layered_bound(&lp).unwrap().total;
        let mut c = make_layered_controller(&lp, 1.0, 1.0).unwrap();
        let (b, r): (Vec<f64>, Vec<f64>) = parts.into_iter().unzip();
        let traj = run_closed_loop(&SimConfig::new(b.len() as u64), &mut Schedule::from_parts(&b, &r), &mut c).unwrap();
        for rec in &traj.records {
            prop_assert!(rec.x.abs() <= bound + 1e-9);
        }
    }

    #[test]
    fn single_loop_optimum_is_feasible_and_unbeaten(
        lambda in 0.02..1.0f64,
        n in -30.0..30.0f64,
        probes in prop::collection::vec(1e-3..80.0f64, 20),
    ) {
        let p = optimize_single_loop(lambda, n).unwrap();
        prop_assert!((p.r_opt - lambda * p.t_s_opt).abs() < 1e-9);
        for t in probes {
            prop_assert!(p.decomposition.total <= single_loop_objective(lambda, n, t) + 1e-9);
        }
    }

    #[test]
    fn diverse_never_loses_to_uniform(
        lambda_l in 0.02..0.5f64,
        lambda_h in 0.02..0.5f64,
        t_i in 0.0..20.0f64,
        t_a in 1.0..150.0f64,
        eps in 0.0..3.0f64,
    ) {
        let c = compare_layered(&LayeredProblem::new(lambda_l, lambda_h, t_i, t_a, eps).unwrap()).unwrap();
        prop_assert!(c.diverse.total <= c.uniform.total + 1e-9);
        prop_assert!((c.diverse.reflex.rate - lambda_l * c.diverse.reflex.delay).abs() < 1e-9);
        prop_assert!((c.diverse.planning.rate - lambda_h * c.diverse.planning.delay).abs() < 1e-9);
    }
}

#[test]
fn greedy_approaches_bound_across_grid() {
    for t in -8i64..=8 {
        for r in 1..=4 {
            let p = LoopParams::with_total_delay(t, r as f64).unwrap();
            let b = worst_case_bound(&p).unwrap().total;
            let c = make_optimal_controller(&p, 1.0).unwrap();
            let g = greedy_adversary(&c, Attack::single(1.0), &AdversaryConfig::greedy(400)).unwrap().sup_x;
            assert!(g <= b + 1e-12 && g >= 0.95 * b, "T={t} R={r}: {g} vs {b}");
        }
    }
}

fn pilot_error(model: PilotModel) -> f64 {
    let seeds = 1..=12u64;
    let n = seeds.clone().count() as f64;
    seeds
        .map(|s| {
            let cfg = TrialConfig::new("p", Condition::Both, s);
            run_trial(&cfg, &InputSource::Pilot { model, seed: s }).unwrap().summary.mean_windowed
        })
        .sum::<f64>()
        / n
}

#[test]
fn pilot_error_tracks_its_limits() {
    let base = PilotModel::default();
    let by_rate: Vec<f64> =
        [1.0, 2.0, 3.0, 4.0, 6.0].iter().map(|&r| pilot_error(PilotModel { effective_rate: r, ..base })).collect();
    assert!(by_rate.windows(2).all(|w| w[1] <= w[0]), "{by_rate:?}");
    let by_delay: Vec<f64> =
        [1, 2, 4, 6, 8].iter().map(|&d| pilot_error(PilotModel { reaction_delay: d, ..base })).collect();
    assert!(by_delay.windows(2).all(|w| w[1] >= w[0]), "{by_delay:?}");
}
