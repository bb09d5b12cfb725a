use std::path::PathBuf;

use anyhow::{Context, Result};

use crate::fluid_sim::{run as run_sim, sweep_on, Realization, SimOptions, SimOutput, TwoTier};
use crate::gd1::Gd1Config;
use crate::optimizer::{
    algorithm1, expected_overflow_sum, grid_search, linspace, tail_cutoff, Algorithm1Options, GridOptions,
    Objective, OptimizationResult, OverflowMethod,
};
use crate::qle::QleConfig;
use crate::scenario::{InputProcess, Scenario};
use crate::workload::{load_trace, sample_stats, synthetic_request_counts, write_trace, WorkloadModel};

use super::config::{CloudletSpec, Experiment, FigureId, LoadedConfig, MethodName};
use super::output::{fmt_g, write_text, CsvArtifact, Provenance};
use super::svg::{line_chart, Series};

const SWEEP_COLUMNS: [&str; 5] = ["alpha", "avg_loss", "loss_probability", "ub_markov", "stderr"];
const DSWEEP_COLUMNS: [&str; 5] = ["D", "method", "alpha_star", "objective", "loss_probability_at_star"];
const STATS_COLUMNS: [&str; 2] = ["lag", "autocov"];

/// Slack allowed when re-checking `overflow_sum <= C - alpha`.
const C1_TOL: f64 = 1e-12;

/// Files written and the checks that did not pass.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub failures: Vec<String>,
}

struct Ctx<'a> {
    cfg: &'a LoadedConfig,
    dir: PathBuf,
    prov: Provenance,
    svg: bool,
    out: Outcome,
}

impl Ctx<'_> {
    fn opts(&self) -> SimOptions {
        self.cfg.sim_options()
    }

    fn csv(&self, name: &str, columns: &[&str]) -> Result<CsvArtifact> {
        CsvArtifact::create(&self.dir, name, &self.prov, columns)
    }

    fn done(&mut self, a: CsvArtifact) -> Result<()> {
        let p = a.finish()?;
        self.out.files.push(p);
        Ok(())
    }

    fn chart(&mut self, name: &str, title: &str, x: &str, y: &str, series: &[Series]) -> Result<()> {
        if self.svg {
            let p = write_text(&self.dir, name, &line_chart(title, x, y, series))?;
            self.out.files.push(p);
        }
        Ok(())
    }

    fn fail(&mut self, msg: String) {
        log::warn!("{msg}");
        self.out.failures.push(msg);
    }
}

/// Runs the configured experiment and writes its artifacts.
pub fn execute(cfg: &LoadedConfig, svg: bool) -> Result<Outcome> {
    let scenario = cfg.scenario()?;
    cfg.validate(&scenario)?;
    let dir = cfg.config.output_dir.clone();
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut ctx = Ctx {
        cfg,
        dir,
        prov: Provenance {
            config_hash: cfg.hash(),
            seed: cfg.config.seed,
        },
        svg,
        out: Outcome::default(),
    };
    match &cfg.config.experiment {
        Experiment::Sweep {
            alpha_grid,
            deadline,
            epsilon_tail,
            bound_qle,
        } => {
            let s = with_deadline(&scenario, *deadline)?;
            let qle = bound_qle.clone().unwrap_or_else(QleConfig::base);
            let rows = sweep_rows(&s, alpha_grid, &ctx.opts(), *epsilon_tail, &qle)?;
            write_sweep(&mut ctx, "sweep", &rows)?;
        }
        Experiment::Optimize {
            method,
            deadline,
            epsilon_step,
            thresholds,
            grid_points,
            qle,
            gd1,
        } => {
            let s = with_deadline(&scenario, *deadline)?;
            let m = build_method(*method, qle.as_ref(), gd1.as_ref(), &ctx.opts());
            optimize(&mut ctx, &s, &m, *epsilon_step, thresholds.clone(), *grid_points)?;
        }
        Experiment::DSweep {
            deadlines,
            methods,
            epsilon_step,
            grid_points,
            sim_grid_points,
            qle,
            gd1,
        } => {
            let plan = DSweepPlan {
                deadlines: deadlines.clone(),
                methods: methods
                    .iter()
                    .map(|m| build_method(*m, qle.as_ref(), gd1.as_ref(), &ctx.opts()))
                    .collect(),
                epsilon_step: *epsilon_step,
                grid_points: *grid_points,
                sim_grid_points: *sim_grid_points,
            };
            let rows = d_sweep(&mut ctx, &scenario, &plan)?;
            write_dsweep(&mut ctx, "d_sweep", &rows)?;
        }
        Experiment::TraceStats {
            path,
            bucket_s,
            cycles_per_task,
            max_lag,
        } => {
            let model = load_trace(cfg.resolve(path), *bucket_s, *cycles_per_task)?;
            trace_stats(&mut ctx, "trace_stats", &model, *max_lag)?;
        }
        Experiment::Reproduce { figure } => reproduce(&mut ctx, *figure)?,
    }
    Ok(ctx.out)
}

fn with_deadline(s: &Scenario, d: Option<f64>) -> Result<Scenario> {
    Ok(match d {
        Some(d) => s.with_deadline(d)?,
        None => s.clone(),
    })
}

fn build_method(name: MethodName, qle: Option<&QleConfig>, gd1: Option<&Gd1Config>, opts: &SimOptions) -> OverflowMethod {
    match name {
        MethodName::Gd1 => OverflowMethod::Gd1(gd1.copied().unwrap_or_default()),
        MethodName::Qle => OverflowMethod::Qle(qle.cloned().unwrap_or_default()),
        MethodName::Sim => OverflowMethod::Sim(*opts),
    }
}

struct SweepRow {
    alpha: f64,
    sim: SimOutput,
    bound: f64,
}

fn sweep_rows(s: &Scenario, grid: &[f64], opts: &SimOptions, eps_tail: f64, qle: &QleConfig) -> Result<Vec<SweepRow>> {
    let workload = Realization::generate(s, opts.n_slots, opts.seed)?;
    for w in &workload.clamp_warnings {
        log::warn!("{w}");
    }
    let sims = sweep_on(s, grid, &workload, opts.warmup_slots(opts.n_slots))?;
    let tau = tail_cutoff(s, eps_tail, opts)?;
    let obj = Objective::new(s, &OverflowMethod::Qle(qle.clone()))?;
    sims.into_iter()
        .map(|(alpha, sim)| {
            let bound = if alpha < s.budget() {
                obj.markov_bound(alpha, tau)?
            } else if tau <= s.budget() || obj.overflow_sum(alpha)? == 0.0 {
                0.0
            } else {
                f64::INFINITY
            };
            Ok(SweepRow { alpha, sim, bound })
        })
        .collect()
}

fn write_sweep(ctx: &mut Ctx<'_>, stem: &str, rows: &[SweepRow]) -> Result<()> {
    let mut csv = ctx.csv(&format!("{stem}.csv"), &SWEEP_COLUMNS)?;
    for r in rows {
        csv.row([
            fmt_g(r.alpha),
            fmt_g(r.sim.avg_loss),
            fmt_g(r.sim.loss_probability),
            fmt_g(r.bound),
            fmt_g(r.sim.std_err),
        ])?;
    }
    ctx.done(csv)?;
    let series = [
        Series {
            name: "simulated avg loss".into(),
            points: rows.iter().map(|r| (r.alpha, r.sim.avg_loss)).collect(),
        },
        Series {
            name: "Markov bound".into(),
            points: rows.iter().map(|r| (r.alpha, r.bound)).collect(),
        },
    ];
    ctx.chart(&format!("{stem}.svg"), "Average loss", "alpha (Gigacycles/s)", "Gigacycles/slot", &series)
}

/// Re-evaluates constraint C1 at a returned split.
fn check_c1(s: &Scenario, res: &OptimizationResult) -> Result<bool> {
    let alpha = res.alpha_star;
    if alpha >= s.budget() {
        return Ok(false);
    }
    let numer = expected_overflow_sum(s, alpha, &res.method)?;
    Ok(numer <= (s.budget() - alpha) * (1.0 + C1_TOL))
}

fn solve(
    s: &Scenario,
    method: &OverflowMethod,
    epsilon_step: f64,
    thresholds: Option<Vec<f64>>,
    grid_points: usize,
) -> crate::Result<OptimizationResult> {
    match method {
        OverflowMethod::Sim(_) => grid_search(
            s,
            method,
            &linspace(0.0, s.budget(), grid_points, false),
            &GridOptions {
                thresholds,
                ..Default::default()
            },
        ),
        _ => algorithm1(
            s,
            method,
            &Algorithm1Options {
                epsilon_step,
                grid_points,
                thresholds,
            },
        ),
    }
}

fn loss_probability_at(s: &Scenario, alpha: f64, workload: &Realization, opts: &SimOptions) -> Result<f64> {
    let out = run_sim(&TwoTier::from(s), alpha, workload, opts.warmup_slots(opts.n_slots))?;
    Ok(out.loss_probability)
}

fn optimize(
    ctx: &mut Ctx<'_>,
    s: &Scenario,
    method: &OverflowMethod,
    epsilon_step: f64,
    thresholds: Option<Vec<f64>>,
    grid_points: Option<usize>,
) -> Result<()> {
    let points = grid_points.unwrap_or(match method {
        OverflowMethod::Sim(_) => 81,
        _ => 10_000,
    });
    let res = solve(s, method, epsilon_step, thresholds, points)?;
    let opts = ctx.opts();
    let workload = Realization::generate(s, opts.n_slots, opts.seed)?;
    let p_star = loss_probability_at(s, res.alpha_star, &workload, &opts)?;
    if !res.feasible {
        ctx.fail(format!("{}: no feasible split found", method.name()));
    } else if !check_c1(s, &res)? {
        ctx.fail(format!("{}: C1 violated at alpha = {}", method.name(), res.alpha_star));
    }

    let mut csv = ctx.csv(
        "optimize.csv",
        &["method", "D", "alpha_star", "objective", "feasible", "iterations", "loss_probability_at_star"],
    )?;
    csv.row([
        method.name().to_string(),
        fmt_g(s.deadline()),
        fmt_g(res.alpha_star),
        fmt_g(res.objective),
        res.feasible.to_string(),
        res.iterations.len().to_string(),
        fmt_g(p_star),
    ])?;
    ctx.done(csv)?;

    let mut trace = ctx.csv("optimize_trace.csv", &["iteration", "r", "alpha"])?;
    for (k, (r, a)) in res.iterations.iter().enumerate() {
        trace.row([(k + 1).to_string(), fmt_g(*r), fmt_g(*a)])?;
    }
    ctx.done(trace)?;
    let series = [Series {
        name: "alpha".into(),
        points: res
            .iterations
            .iter()
            .enumerate()
            .map(|(k, (_, a))| ((k + 1) as f64, *a))
            .collect(),
    }];
    ctx.chart("optimize_trace.svg", "Iterates", "iteration", "alpha (Gigacycles/s)", &series)
}

struct DSweepPlan {
    deadlines: Vec<f64>,
    methods: Vec<OverflowMethod>,
    epsilon_step: f64,
    grid_points: usize,
    sim_grid_points: usize,
}

struct DSweepRow {
    deadline: f64,
    method: &'static str,
    alpha_star: f64,
    objective: f64,
    loss_probability: f64,
}

fn d_sweep(ctx: &mut Ctx<'_>, base: &Scenario, plan: &DSweepPlan) -> Result<Vec<DSweepRow>> {
    let opts = ctx.opts();
    // The workload does not depend on D, so one realization serves every row.
    let workload = Realization::generate(base, opts.n_slots, opts.seed)?;
    let mut rows = Vec::new();
    for &d in &plan.deadlines {
        let s = base.with_deadline(d)?;
        for m in &plan.methods {
            let points = match m {
                OverflowMethod::Sim(_) => plan.sim_grid_points,
                _ => plan.grid_points,
            };
            let row = match solve(&s, m, plan.epsilon_step, None, points) {
                Ok(res) => {
                    if !res.feasible {
                        ctx.fail(format!("D={d} {}: no feasible split found", m.name()));
                    } else if !check_c1(&s, &res)? {
                        ctx.fail(format!("D={d} {}: C1 violated at alpha = {}", m.name(), res.alpha_star));
                    }
                    DSweepRow {
                        deadline: d,
                        method: m.name(),
                        alpha_star: res.alpha_star,
                        objective: res.objective,
                        loss_probability: loss_probability_at(&s, res.alpha_star, &workload, &opts)?,
                    }
                }
                Err(e) => {
                    ctx.fail(format!("D={d} {}: {e}", m.name()));
                    DSweepRow {
                        deadline: d,
                        method: m.name(),
                        alpha_star: f64::NAN,
                        objective: f64::NAN,
                        loss_probability: f64::NAN,
                    }
                }
            };
            rows.push(row);
        }
    }
    Ok(rows)
}

fn write_dsweep(ctx: &mut Ctx<'_>, stem: &str, rows: &[DSweepRow]) -> Result<()> {
    let mut csv = ctx.csv(&format!("{stem}.csv"), &DSWEEP_COLUMNS)?;
    for r in rows {
        csv.row([
            fmt_g(r.deadline),
            r.method.to_string(),
            fmt_g(r.alpha_star),
            fmt_g(r.objective),
            fmt_g(r.loss_probability),
        ])?;
    }
    ctx.done(csv)?;
    let mut names: Vec<&str> = rows.iter().map(|r| r.method).collect();
    names.dedup();
    names.sort_unstable();
    names.dedup();
    let per = |f: fn(&DSweepRow) -> f64| -> Vec<Series> {
        names
            .iter()
            .map(|n| Series {
                name: n.to_string(),
                points: rows.iter().filter(|r| r.method == *n).map(|r| (r.deadline, f(r))).collect(),
            })
            .collect()
    };
    ctx.chart(
        &format!("{stem}_alpha.svg"),
        "Optimal alpha versus D",
        "D (s)",
        "alpha* (Gigacycles/s)",
        &per(|r| r.alpha_star),
    )?;
    ctx.chart(
        &format!("{stem}_loss.svg"),
        "Loss probability at the optimum versus D",
        "D (s)",
        "loss probability",
        &per(|r| r.loss_probability),
    )
}

fn trace_stats(ctx: &mut Ctx<'_>, stem: &str, model: &WorkloadModel, max_lag: usize) -> Result<()> {
    let WorkloadModel::EmpiricalTrace { samples, .. } = model else {
        anyhow::bail!("trace statistics need an empirical trace");
    };
    let stats = sample_stats(samples, max_lag.min(samples.len() - 1))?;
    let mut csv = ctx.csv(&format!("{stem}.csv"), &STATS_COLUMNS)?;
    for (lag, c) in stats.autocov.iter().enumerate() {
        csv.row([lag.to_string(), fmt_g(*c)])?;
    }
    csv.row(["mean".to_string(), fmt_g(stats.mean)])?;
    ctx.done(csv)?;
    let series = [Series {
        name: "autocovariance".into(),
        points: stats.autocov.iter().enumerate().map(|(l, c)| (l as f64, *c)).collect(),
    }];
    ctx.chart(&format!("{stem}.svg"), "Trace autocovariance", "lag (s)", "(Gigacycles)^2", &series)
}

/// Counts how often a sweep decreases by more than two standard errors.
fn decreases(rows: &[(f64, SimOutput)]) -> usize {
    rows.windows(2)
        .filter(|w| {
            let (a, b) = (&w[0].1, &w[1].1);
            b.avg_loss < a.avg_loss - 2.0 * a.std_err.max(b.std_err)
        })
        .count()
}

fn reproduce(ctx: &mut Ctx<'_>, fig: FigureId) -> Result<()> {
    let opts = ctx.opts();
    match fig {
        FigureId::Fig2 => {
            let s = Scenario::reference(InputProcess::GaussianIid, 0.1);
            let grid = linspace(0.0, 20.0, 80, false);
            let rows = sweep_rows(&s, &grid, &opts, 1e-3, &QleConfig::base())?;
            write_sweep(ctx, "fig2", &rows)?;
        }
        FigureId::Fig3 => {
            let grid = linspace(0.0, 20.0, 41, true);
            let mut csv = ctx.csv("fig3.csv", &["process", "alpha", "avg_loss", "loss_probability", "stderr"])?;
            let mut series = Vec::new();
            for p in InputProcess::ALL {
                let s = Scenario::reference(p, 0.0);
                let workload = Realization::generate(&s, opts.n_slots, opts.seed)?;
                let rows = sweep_on(&s, &grid, &workload, opts.warmup_slots(opts.n_slots))?;
                let bad = decreases(&rows);
                if bad > 0 {
                    log::warn!("fig3 {}: {bad} decreases beyond 2 standard errors", p.name());
                }
                for (a, o) in &rows {
                    csv.row([
                        p.name().to_string(),
                        fmt_g(*a),
                        fmt_g(o.avg_loss),
                        fmt_g(o.loss_probability),
                        fmt_g(o.std_err),
                    ])?;
                }
                series.push(Series {
                    name: p.name().into(),
                    points: rows.iter().map(|(a, o)| (*a, o.loss_probability)).collect(),
                });
            }
            ctx.done(csv)?;
            ctx.chart("fig3.svg", "Bufferless loss probability", "alpha (Gigacycles/s)", "loss probability", &series)?;
        }
        FigureId::Fig4 | FigureId::Fig5 => {
            let s = Scenario::reference(InputProcess::GaussianIid, 0.0);
            let plan = DSweepPlan {
                deadlines: vec![0.0, 0.05, 0.1, 0.15, 0.2],
                methods: vec![
                    OverflowMethod::Sim(opts),
                    OverflowMethod::gd1(),
                    OverflowMethod::Qle(QleConfig::base()),
                ],
                epsilon_step: 0.01,
                grid_points: 10_000,
                sim_grid_points: 81,
            };
            let rows = d_sweep(ctx, &s, &plan)?;
            let stem = if fig == FigureId::Fig4 { "fig4" } else { "fig5" };
            write_dsweep(ctx, stem, &rows)?;
        }
        FigureId::Fig6 => fig6(ctx)?,
    }
    Ok(())
}

/// Per-second request rates and task size of the synthetic stand-in traces.
const FIG6_RATES: [f64; 3] = [40.0, 80.0, 60.0];
const FIG6_CYCLES_PER_TASK: f64 = 0.1;
const FIG6_SECONDS: usize = 3600;

fn fig6(ctx: &mut Ctx<'_>) -> Result<()> {
    let opts = ctx.opts();
    let configured = ctx.cfg.config.scenario.as_ref().filter(|sp| {
        sp.cloudlets.iter().any(|c| matches!(c, CloudletSpec::Trace { .. }))
    });
    let scenario = match configured {
        Some(_) => ctx.cfg.scenario()?,
        None => {
            let mut models = Vec::new();
            for (i, rate) in FIG6_RATES.iter().enumerate() {
                let counts = synthetic_request_counts(*rate, FIG6_SECONDS, opts.seed.wrapping_add(i as u64));
                let path = ctx.dir.join(format!("fig6_trace_{i}.csv"));
                write_trace(&path, &counts)?;
                ctx.out.files.push(path.clone());
                models.push(load_trace(&path, 1, FIG6_CYCLES_PER_TASK)?);
            }
            Scenario::new(20.0, 0.0, models)?
        }
    };
    for (i, m) in scenario.models().iter().enumerate() {
        if matches!(m, WorkloadModel::EmpiricalTrace { .. }) {
            trace_stats(ctx, &format!("fig6_stats_{i}"), m, 256)?;
        }
    }
    let bufferless = scenario.with_deadline(0.0)?;
    let grid = linspace(0.0, bufferless.budget(), 41, true);
    let rows = sweep_rows(&bufferless, &grid, &opts, 1e-3, &QleConfig::base())?;
    let pairs: Vec<(f64, SimOutput)> = rows.iter().map(|r| (r.alpha, r.sim.clone())).collect();
    let bad = decreases(&pairs);
    if bad > 0 {
        log::warn!("fig6 bufferless sweep: {bad} decreases beyond 2 standard errors");
    }
    write_sweep(ctx, "fig6_sweep", &rows)?;

    let plan = DSweepPlan {
        deadlines: vec![0.05, 0.1, 0.2],
        methods: vec![
            OverflowMethod::Sim(opts),
            OverflowMethod::gd1(),
            OverflowMethod::Qle(QleConfig::base()),
        ],
        epsilon_step: 0.01,
        grid_points: 10_000,
        sim_grid_points: 81,
    };
    let rows = d_sweep(ctx, &scenario, &plan)?;
    write_dsweep(ctx, "fig6_dsweep", &rows)
}
