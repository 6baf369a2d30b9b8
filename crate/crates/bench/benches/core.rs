use criterion::{black_box, criterion_group, criterion_main, Criterion};

use dess_bench::{combined_trial, reference_layered, single_loop};
use dess_core::adversary::{exhaustive_worst_case, greedy_adversary, AdversaryConfig, Attack};
use dess_core::experiment::{run_trial, InputSource};
use dess_core::optimize::{compare_layered, optimize_single_loop, LayeredProblem};
use dess_core::PilotModel;

fn adversaries(c: &mut Criterion) {
    let ctl = single_loop(2, 2.0);
    c.bench_function("greedy_400_ticks", |b| {
        b.iter(|| greedy_adversary(&ctl, Attack::single(1.0), &AdversaryConfig::greedy(400)).unwrap())
    });
    c.bench_function("exhaustive_h8", |b| {
        b.iter(|| exhaustive_worst_case(&ctl, Attack::single(1.0), &AdversaryConfig::exhaustive(8)).unwrap())
    });
    let layered = reference_layered();
    c.bench_function("greedy_layered_500_ticks", |b| {
        b.iter(|| greedy_adversary(&layered, Attack::dual(1.0, 1.0), &AdversaryConfig::greedy(500)).unwrap())
    });
}

fn optimizer(c: &mut Criterion) {
    c.bench_function("single_loop_optimum", |b| b.iter(|| optimize_single_loop(0.1, black_box(-2.0)).unwrap()));
    let p = LayeredProblem::new(0.1, 0.1, 10.0, 100.0, 1.0).unwrap();
    c.bench_function("layered_comparison", |b| b.iter(|| compare_layered(black_box(&p)).unwrap()));
}

fn trials(c: &mut Criterion) {
    let cfg = combined_trial(3);
    let pilot = InputSource::Pilot { model: PilotModel::default(), seed: 3 };
    c.bench_function("pilot_trial_600_ticks", |b| b.iter(|| run_trial(&cfg, &pilot).unwrap()));
}

criterion_group!(benches, adversaries, optimizer, trials);
criterion_main!(benches);
