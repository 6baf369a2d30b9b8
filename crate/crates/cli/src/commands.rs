use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Subcommand, ValueEnum};

use dess_core::acceptance::{criterion_name, run_criterion, AcceptOptions, AcceptanceReport, Suite, CRITERIA};
use dess_core::adversary::{exhaustive_worst_case, greedy_adversary, AdversaryConfig, Attack};
use dess_core::bounds::{stochastic_terms, worst_case_terms};
use dess_core::channels::{sat_rate_based, sat_rate_spike};
use dess_core::experiment::{
    additivity_campaign, read_trial_file, run_additivity_triplets, run_campaign, sat_sweeps, write_campaign_csv,
    write_summary_csv, write_trajectory_csv,
};
use dess_core::figures::{figure_data, Figure, FigureParams};
use dess_core::optimize::{compare_layered, dess_tradeoff_curve, sweep_regimes, LayeredProblem, TradeoffConfig};
use dess_core::session::{export_session, read_log, replay_log, ExportFormat, SessionStore};
use dess_core::{
    layered_bound, make_layered_controller, make_optimal_controller, worst_case_bound, ComponentBudget, LayeredParams,
    LoopParams, PilotModel,
};

use crate::output::Sink;
use crate::{Cli, Command, Common};

pub fn run(cli: Cli) -> Result<bool> {
    let c = &cli.common;
    match cli.command {
        Command::Bounds(a) => bounds(c, a),
        Command::Optimize(a) => optimize(c, a),
        Command::Dess(a) => dess(c, a),
        Command::Simulate(a) => simulate(c, a),
        Command::Experiment(a) => experiment(c, a),
        Command::Figure(a) => figure(c, a),
        Command::Serve(a) => crate::serve::serve(c, a),
        Command::Replay(a) => replay(c, a),
        Command::Export(a) => export(c, a),
        Command::Accept(a) => accept(c, a),
    }
}

fn steps(lo: f64, hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0) || !(hi >= lo) {
        bail!("bad range {lo}..{hi} step {step}");
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + i as f64 * step).collect())
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    #[arg(long, default_value_t = -8, allow_negative_numbers = true)]
    pub t_min: i64,
    #[arg(long, default_value_t = 8, allow_negative_numbers = true)]
    pub t_max: i64,
    #[arg(long, default_value_t = 0.5)]
    pub r_min: f64,
    #[arg(long, default_value_t = 8.0)]
    pub r_max: f64,
    #[arg(long, default_value_t = 0.5)]
    pub r_step: f64,
}

fn bounds(c: &Common, a: BoundsArgs) -> Result<bool> {
    let mut rows = Vec::new();
    for t in a.t_min..=a.t_max {
        for r in steps(a.r_min, a.r_max, a.r_step)? {
            let w = worst_case_terms(t as f64, r)?;
            let s = stochastic_terms(t as f64, r)?;
            rows.push(vec![t as f64, r, w.delay_error, w.rate_error, w.total, s.rate_error, s.total]);
        }
    }
    Sink::new(c.out.as_deref())?.table(
        "bounds.csv",
        &["total_delay", "rate", "delay_error", "worst_rate_error", "worst_total", "ms_rate_error", "ms_total"],
        &rows,
    )?;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncodingArg {
    /// `R = λ T_s`
    Spike,
    /// `R = λ T / 2`
    Rate,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lambda: f64,
    #[arg(long, value_enum, default_value_t = EncodingArg::Spike)]
    pub encoding: EncodingArg,
    #[arg(long, default_value_t = -20.0, allow_negative_numbers = true)]
    pub net_min: f64,
    #[arg(long, default_value_t = 20.0, allow_negative_numbers = true)]
    pub net_max: f64,
    #[arg(long, default_value_t = 0.25)]
    pub step: f64,
}

fn optimize(c: &Common, a: OptimizeArgs) -> Result<bool> {
    // both laws are linear in delay, so the slope is the rate bought by one tick
    let slope = match a.encoding {
        EncodingArg::Spike => sat_rate_spike(&ComponentBudget::spike(a.lambda)?, 1.0)?,
        EncodingArg::Rate => sat_rate_based(&ComponentBudget::rate_based(a.lambda)?, 1.0)?,
    };
    let nets = steps(a.net_min, a.net_max, a.step)?;
    let rows: Vec<Vec<f64>> = sweep_regimes(slope, &nets)?
        .iter()
        .map(|q| {
            let d = q.decomposition;
            vec![q.net_delay, q.t_s_opt, q.t_opt, q.r_opt, d.delay_error, d.rate_error, d.total]
        })
        .collect();
    Sink::new(c.out.as_deref())?.table(
        "optimize.csv",
        &["net_delay", "t_s_opt", "t_opt", "r_opt", "delay_error", "rate_error", "total_error"],
        &rows,
    )?;
    Ok(true)
}

#[derive(Debug, Args)]
pub struct DessArgs {
    #[arg(long, default_value_t = 0.1)]
    pub lambda_l: f64,
    #[arg(long, default_value_t = 0.1)]
    pub lambda_h: f64,
    #[arg(long, default_value_t = 0.0)]
    pub internal_delay: f64,
    #[arg(long, default_value_t = 100.0)]
    pub warning: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
    #[arg(long, default_value_t = 0.25)]
    pub delay_step: f64,
    #[arg(long, default_value_t = 150.0)]
    pub delay_max: f64,
    #[arg(long, default_value_t = 60)]
    pub abscissae: usize,
}

fn dess(c: &Common, a: DessArgs) -> Result<bool> {
    let p = LayeredProblem::new(a.lambda_l, a.lambda_h, a.internal_delay, a.warning, a.epsilon)?;
    let cmp = compare_layered(&p)?;
    let row = |o: &dess_core::optimize::LayeredOptimum, mode: f64| {
        vec![
            mode,
            o.reflex.delay,
            o.reflex.rate,
            o.planning.delay,
            o.planning.rate,
            o.reflex_part,
            o.planning_part,
            o.total,
            if o.feasible { 1.0 } else { 0.0 },
        ]
    };
    let sink = Sink::new(c.out.as_deref())?;
    // mode column: 0 diverse, 1 uniform
    sink.table(
        "dess.csv",
        &[
            "uniform",
            "reflex_delay",
            "reflex_rate",
            "planning_delay",
            "planning_rate",
            "reflex_part",
            "planning_part",
            "total",
            "feasible",
        ],
        &[row(&cmp.diverse, 0.0), row(&cmp.uniform, 1.0)],
    )?;
    eprintln!("relative gain of diverse over uniform: {:.4}", cmp.relative_gain());
    let curve = dess_tradeoff_curve(&p, &TradeoffConfig::regular(a.delay_step, a.delay_max, a.abscissae))?;
    let rows: Vec<Vec<f64>> = curve
        .abscissae
        .iter()
        .enumerate()
        .map(|(i, x)| vec![*x, curve.diverse_frontier[i], curve.uniform_frontier[i]])
        .collect();
    sink.table("frontier.csv", &["rate_error_sum", "diverse_delay_error_sum", "uniform_delay_error_sum"], &rows)?;
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AdversaryArg {
    Greedy,
    Exhaustive,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Total loop delay in ticks; negative means net warning.
    #[arg(long, default_value_t = 0, allow_negative_numbers = true)]
    pub total_delay: i64,
    #[arg(long, default_value_t = 2.0)]
    pub rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub w_bound: f64,
    #[arg(long, value_enum, default_value_t = AdversaryArg::Greedy)]
    pub adversary: AdversaryArg,
    #[arg(long, default_value_t = 400)]
    pub horizon: u64,
    /// Use the two-layer controller; the flags below then apply.
    #[arg(long)]
    pub layered: bool,
    #[arg(long, default_value_t = 1)]
    pub reflex_delay: u32,
    #[arg(long, default_value_t = 10)]
    pub internal_delay: u32,
    #[arg(long, default_value_t = 1.0)]
    pub reflex_rate: f64,
    #[arg(long, default_value_t = 0)]
    pub planning_delay: u32,
    #[arg(long, default_value_t = 5)]
    pub warning: u32,
    #[arg(long, default_value_t = 5.0)]
    pub planning_rate: f64,
    #[arg(long, default_value_t = 1.0)]
    pub epsilon: f64,
}

fn simulate(c: &Common, a: SimulateArgs) -> Result<bool> {
    let cfg = match a.adversary {
        AdversaryArg::Greedy => AdversaryConfig::greedy(a.horizon),
        AdversaryArg::Exhaustive => AdversaryConfig::exhaustive(a.horizon),
    };
    let sink = Sink::new(c.out.as_deref())?;
    let (bound, sup, witness) = if a.layered {
        let reflex = LoopParams::new(a.reflex_delay, a.internal_delay, 0, a.reflex_rate)?;
        let planning = LoopParams::new(a.planning_delay, 0, a.warning, a.planning_rate)?;
        let lp = LayeredParams::new(reflex, planning, a.epsilon)?;
        let ctl = make_layered_controller(&lp, a.epsilon * a.w_bound, a.w_bound)?;
        let attack = Attack::dual(a.epsilon * a.w_bound, a.w_bound);
        let bound = layered_bound(&lp)?.total * a.w_bound;
        match a.adversary {
            AdversaryArg::Greedy => {
                let res = greedy_adversary(&ctl, attack, &cfg)?;
                let traj = res.replay(&mut ctl.clone())?;
                (bound, res.sup_x, Some(traj))
            }
            AdversaryArg::Exhaustive => (bound, exhaustive_worst_case(&ctl, attack, &cfg)?, None),
        }
    } else {
        let p = LoopParams::with_total_delay(a.total_delay, a.rate)?;
        let ctl = make_optimal_controller(&p, a.w_bound)?;
        let attack = Attack::single(a.w_bound);
        let bound = worst_case_bound(&p)?.total * a.w_bound;
        match a.adversary {
            AdversaryArg::Greedy => {
                let res = greedy_adversary(&ctl, attack, &cfg)?;
                let traj = res.replay(&mut ctl.clone())?;
                (bound, res.sup_x, Some(traj))
            }
            AdversaryArg::Exhaustive => (bound, exhaustive_worst_case(&ctl, attack, &cfg)?, None),
        }
    };
    sink.table("simulate.csv", &["sup_x", "bound", "ratio"], &[vec![sup, bound, sup / bound]])?;
    if let Some(t) = witness {
        sink.emit("witness.csv", |w| Ok(write_trajectory_csv(w, &t.records)?))?;
    }
    Ok(sup <= bound + 1e-9)
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[command(subcommand)]
    pub design: Design,
}

#[derive(Debug, Subcommand)]
pub enum Design {
    /// Trials listed in a TOML file.
    Run {
        #[arg(long)]
        trials: PathBuf,
    },
    /// Bump-only, trail-only and combined trials on shared worlds.
    Additivity {
        #[arg(long, default_value_t = 20)]
        subjects: u64,
    },
    /// Delay, rate and coupled sweeps on the combined condition.
    Sweeps {
        #[arg(long, default_value_t = 200)]
        subjects: u64,
    },
}

fn experiment(c: &Common, a: ExperimentArgs) -> Result<bool> {
    let sink = Sink::new(c.out.as_deref())?;
    let seeds = |n: u64| -> Vec<u64> { (1..=n).map(|k| c.seed + k).collect() };
    match a.design {
        Design::Run { trials } => {
            let file = read_trial_file(&trials).with_context(|| format!("reading {}", trials.display()))?;
            let pilot = file.pilot.unwrap_or_default();
            let records = run_campaign(&pilot, &file.trials)?;
            sink.emit("campaign.csv", |w| Ok(write_campaign_csv(w, &records)?))?;
            sink.emit("summary.csv", |w| Ok(write_summary_csv(w, &records)?))?;
        }
        Design::Additivity { subjects } => {
            let triplets = run_additivity_triplets(&PilotModel::default(), &seeds(subjects))?;
            let rep = additivity_campaign(&triplets)?;
            let stats = |s: &dess_core::experiment::AdditivityStats, signed: f64| {
                vec![signed, s.pearson_r, s.t_stat, s.p_value, s.mean_difference]
            };
            sink.table(
                "additivity.csv",
                &["signed", "pearson_r", "t_stat", "p_value", "mean_difference"],
                &[stats(&rep.signed, 1.0), stats(&rep.unsigned, 0.0)],
            )?;
            let scatter: Vec<Vec<f64>> = rep.scatter.iter().map(|(s, b)| vec![*s, *b]).collect();
            sink.table("additivity_scatter.csv", &["bump_plus_trail", "both"], &scatter)?;
        }
        Design::Sweeps { subjects } => {
            let s = sat_sweeps(&PilotModel::default(), &seeds(subjects))?;
            let mut rows = Vec::new();
            // sweep column: 0 delay, 1 rate, 2 coupled
            for p in &s.delay_sweep {
                rows.push(vec![0.0, p.added_delay_ticks as f64, f64::NAN, p.mean_error, p.mean_error - s.baseline, f64::NAN]);
            }
            for p in &s.rate_sweep {
                let r = p.added_rate_bits.map_or(f64::NAN, f64::from);
                rows.push(vec![1.0, 0.0, r, p.mean_error, p.mean_error - s.baseline, f64::NAN]);
            }
            for p in &s.coupled {
                rows.push(vec![
                    2.0,
                    p.delay_ticks as f64,
                    p.rate as f64,
                    p.observed,
                    p.observed - s.baseline,
                    p.predicted,
                ]);
            }
            sink.table(
                "sweeps.csv",
                &["sweep", "added_delay_ticks", "added_rate_bits", "mean_error", "minus_baseline", "predicted"],
                &rows,
            )?;
        }
    }
    Ok(true)
}

#[derive(Debug, Args)]
pub struct FigureArgs {
    /// f5, f6a, f7 or f8
    pub figure: String,
    /// TOML file overriding the caption defaults.
    #[arg(long)]
    pub params: Option<PathBuf>,
}

fn figure(c: &Common, a: FigureArgs) -> Result<bool> {
    let fig: Figure = a.figure.parse()?;
    let params = match &a.params {
        Some(p) => FigureParams::parse(&std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => FigureParams::default(),
    };
    let sink = Sink::new(c.out.as_deref())?;
    for t in figure_data(fig, &params)? {
        sink.emit(&format!("{}.csv", t.name), |w| Ok(t.write_csv(w)?))?;
    }
    Ok(true)
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// A session log (JSON lines).
    pub log: PathBuf,
}

fn replay(c: &Common, a: ReplayArgs) -> Result<bool> {
    let entries = read_log(&a.log).with_context(|| format!("reading {}", a.log.display()))?;
    let rep = replay_log(&entries)?;
    eprintln!("{} trials replayed, {} mismatched ticks", rep.records.len(), rep.mismatches);
    let sink = Sink::new(c.out.as_deref())?;
    sink.emit("campaign.csv", |w| Ok(write_campaign_csv(w, &rep.records)?))?;
    sink.emit("summary.csv", |w| Ok(write_summary_csv(w, &rep.records)?))?;
    Ok(rep.mismatches == 0)
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub store: PathBuf,
    #[arg(long)]
    pub session: String,
    /// raw-log or campaign-csv
    #[arg(long, default_value = "campaign-csv")]
    pub kind: String,
}

fn export(c: &Common, a: ExportArgs) -> Result<bool> {
    let kind: ExportFormat = a.kind.parse()?;
    let store = SessionStore::open(&a.store)?;
    let dir = c.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    let ext = match kind {
        ExportFormat::RawLog => "jsonl",
        ExportFormat::CampaignCsv => "csv",
    };
    let path = dir.join(format!("{}.{ext}", a.session));
    export_session(&store, &a.session, kind, &path)?;
    eprintln!("wrote {}", path.display());
    Ok(true)
}

#[derive(Debug, Args)]
pub struct AcceptArgs {
    #[arg(long, default_value = "fast")]
    pub suite: String,
    /// Run only these criteria.
    #[arg(long, value_delimiter = ',')]
    pub only: Vec<u8>,
}

fn accept(c: &Common, a: AcceptArgs) -> Result<bool> {
    let suite: Suite = a.suite.parse()?;
    let scratch = match &c.out {
        Some(d) => d.join("accept-work"),
        None => std::env::temp_dir().join(format!("dess-accept-{}", std::process::id())),
    };
    let opts = AcceptOptions::new(suite, &scratch);
    let ids: Vec<u8> = if a.only.is_empty() { CRITERIA.to_vec() } else { a.only.clone() };
    let mut report = AcceptanceReport { suite, criteria: Vec::new() };
    for id in ids {
        if !CRITERIA.contains(&id) {
            bail!("no criterion {id}");
        }
        eprintln!("running criterion {id} ({})", criterion_name(id));
        let r = run_criterion(id, &opts);
        println!("{}", r.line());
        for n in &r.notes {
            println!("      {n}");
        }
        report.criteria.push(r);
    }
    if c.out.is_none() {
        let _ = std::fs::remove_dir_all(&scratch);
    }
    let sink = Sink::new(c.out.as_deref())?;
    if sink.dir().is_some() {
        sink.emit("accept.json", |w| {
            w.write_all(report.to_json()?.as_bytes())?;
            Ok(())
        })?;
        sink.emit("accept.csv", |w| {
            let mut out = csv::Writer::from_writer(w);
            out.write_record(["id", "name", "measured", "tolerance", "verdict", "seconds"])?;
            for r in &report.criteria {
                out.write_record([
                    r.id.to_string(),
                    r.name.clone(),
                    r.measured.to_string(),
                    r.tolerance.clone(),
                    if r.passed { "pass".into() } else { "fail".into() },
                    r.seconds.to_string(),
                ])?;
            }
            out.flush()?;
            Ok(())
        })?;
    }
    Ok(report.all_passed())
}
