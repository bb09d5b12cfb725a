use rayon::prelude::*;
use serde::Serialize;

use crate::error::{FogError, Result};
use crate::fluid_sim::{sweep, SimOptions};
use crate::scenario::Scenario;

use super::{convexity_range, AlphaRange, Objective, OptimizationResult, OverflowMethod};

/// Upper bound on Algorithm 1 iterations; `r` grows by at least `epsilon_step`
/// per iteration so this is only reached with a vanishing step.
const MAX_ITERATIONS: usize = 1_000_000;
/// Relative gap below which two grid objective values count as tied.
const TIE_RTOL: f64 = 1e-12;

/// `n` evenly spaced points from `lo`, ending at `hi` when `include_hi`,
/// otherwise one step short of it.
pub fn linspace(lo: f64, hi: f64, n: usize, include_hi: bool) -> Vec<f64> {
    match n {
        0 => vec![],
        1 => vec![lo],
        _ => {
            let div = if include_hi { (n - 1) as f64 } else { n as f64 };
            (0..n).map(|k| lo + (hi - lo) * k as f64 / div).collect()
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Algorithm1Options {
    pub epsilon_step: f64,
    /// Points in the deterministic scan that solves each subproblem.
    pub grid_points: usize,
    /// Optional per-cloudlet caps `P_i(alpha) <= TH_i`.
    pub thresholds: Option<Vec<f64>>,
}

impl Default for Algorithm1Options {
    fn default() -> Self {
        Algorithm1Options {
            epsilon_step: 0.01,
            grid_points: 10_000,
            thresholds: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum GridObjective {
    /// `overflow_sum / (C - alpha)`.
    #[default]
    Fractional,
    /// Simulated average loss (simulation method only).
    SimulatedLoss,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct GridOptions {
    pub objective: GridObjective,
    pub thresholds: Option<Vec<f64>>,
}

/// Overflow evaluations on a fixed grid; `None` where the method is invalid.
struct Table {
    alphas: Vec<f64>,
    overflow: Vec<Option<Vec<f64>>>,
}

impl Table {
    fn build(obj: &Objective<'_>, alphas: Vec<f64>) -> Result<Self> {
        let overflow = alphas
            .par_iter()
            .map(|&a| match obj.per_cloudlet_overflow(a) {
                Ok(v) => Ok(Some(v)),
                Err(FogError::Validity { .. }) => Ok(None),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Table { alphas, overflow })
    }

    fn numerator(&self, k: usize) -> Option<f64> {
        self.overflow[k].as_ref().map(|v| v.iter().sum())
    }

    fn within_thresholds(&self, k: usize, means: &[f64], thresholds: Option<&[f64]>) -> bool {
        match (thresholds, &self.overflow[k]) {
            (None, _) => true,
            (Some(th), Some(v)) => v.iter().zip(means).zip(th).all(|((o, m), t)| o / m <= *t),
            (Some(_), None) => false,
        }
    }

    /// Minimizes the numerator subject to `numerator <= (C - alpha) / r` and
    /// the thresholds; ties go to the smaller `alpha`.
    fn solve(&self, budget: f64, means: &[f64], r: f64, thresholds: Option<&[f64]>) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for k in 0..self.alphas.len() {
            let Some(n) = self.numerator(k) else { continue };
            let a = self.alphas[k];
            if n > (budget - a) / r || !self.within_thresholds(k, means, thresholds) {
                continue;
            }
            let better = match best {
                None => true,
                Some((j, bn)) => n < bn || (n == bn && a < self.alphas[j]),
            };
            if better {
                best = Some((k, n));
            }
        }
        best.map(|(k, _)| k)
    }
}

/// Where each method searches: the certified-convex part of the G/D/1
/// validity region, or all of `[0, C)` otherwise.
fn search_range(obj: &Objective<'_>) -> Option<AlphaRange> {
    let s = obj.scenario();
    match obj.method() {
        OverflowMethod::Gd1(_) => {
            let mut r = convexity_range(s);
            r.lo = r.lo.max(s.total_mean());
            (!r.is_empty()).then_some(r)
        }
        _ => Some(AlphaRange {
            lo: 0.0,
            hi: s.budget(),
            hi_open: true,
        }),
    }
}

fn check_thresholds(scenario: &Scenario, thresholds: Option<&[f64]>) -> Result<()> {
    if let Some(th) = thresholds {
        if th.len() != scenario.num_cloudlets() {
            return Err(FogError::param(format!(
                "{} thresholds for {} cloudlets",
                th.len(),
                scenario.num_cloudlets()
            )));
        }
    }
    Ok(())
}

fn search_table(obj: &Objective<'_>, grid_points: usize) -> Result<Option<Table>> {
    if grid_points == 0 {
        return Err(FogError::param("grid_points must be >= 1"));
    }
    search_range(obj)
        .map(|r| Table::build(obj, linspace(r.lo, r.hi, grid_points, !r.hi_open)))
        .transpose()
}

/// Minimizes the overflow sum subject to `overflow_sum <= (C - alpha) / r`
/// (and the optional thresholds) by a deterministic scan. `None` when no
/// grid point is feasible.
pub fn solve_subproblem(
    scenario: &Scenario,
    r: f64,
    method: &OverflowMethod,
    thresholds: Option<&[f64]>,
    grid_points: usize,
) -> Result<Option<f64>> {
    if !(r > 0.0) {
        return Err(FogError::domain(format!("ratio r must be > 0, got {r}")));
    }
    check_thresholds(scenario, thresholds)?;
    let obj = Objective::new(scenario, method)?;
    let Some(table) = search_table(&obj, grid_points)? else {
        return Ok(None);
    };
    Ok(table
        .solve(scenario.budget(), scenario.means(), r, thresholds)
        .map(|k| table.alphas[k]))
}

/// Parametric iteration on the ratio `r = (C - alpha) / overflow_sum`:
/// starting from `r = 1 + eps` and `alpha = C`, solve the subproblem, move to
/// its minimizer and raise `r` past the ratio achieved there, until the
/// subproblem becomes infeasible.
pub fn algorithm1(scenario: &Scenario, method: &OverflowMethod, opts: &Algorithm1Options) -> Result<OptimizationResult> {
    if !(opts.epsilon_step > 0.0) {
        return Err(FogError::param(format!("epsilon_step must be > 0, got {}", opts.epsilon_step)));
    }
    let thresholds = opts.thresholds.as_deref();
    check_thresholds(scenario, thresholds)?;
    let obj = Objective::new(scenario, method)?;
    let budget = scenario.budget();
    let mut result = OptimizationResult {
        alpha_star: budget,
        objective: f64::INFINITY,
        method: method.clone(),
        iterations: Vec::new(),
        feasible: false,
    };
    let Some(table) = search_table(&obj, opts.grid_points)? else {
        return Ok(result);
    };

    let mut r = 1.0 + opts.epsilon_step;
    for _ in 0..MAX_ITERATIONS {
        let Some(k) = table.solve(budget, scenario.means(), r, thresholds) else {
            break;
        };
        let alpha = table.alphas[k];
        let numer = table.numerator(k).expect("feasible point has a numerator");
        result.iterations.push((r, alpha));
        result.alpha_star = alpha;
        result.objective = numer / (budget - alpha);
        result.feasible = true;
        if numer <= 0.0 {
            // Zero overflow cannot be improved on.
            break;
        }
        r = (budget - alpha) / numer + opts.epsilon_step;
    }
    Ok(result)
}

/// Exhaustive search over `grid` among points satisfying
/// `overflow_sum <= C - alpha` and the thresholds. When no point is feasible
/// the best evaluable point is returned with `feasible = false`.
pub fn grid_search(
    scenario: &Scenario,
    method: &OverflowMethod,
    grid: &[f64],
    opts: &GridOptions,
) -> Result<OptimizationResult> {
    if grid.is_empty() {
        return Err(FogError::param("grid must not be empty"));
    }
    let budget = scenario.budget();
    let simulated = opts.objective == GridObjective::SimulatedLoss;
    if simulated && !matches!(method, OverflowMethod::Sim(_)) {
        return Err(FogError::param("simulated-loss objective requires the sim method"));
    }
    for &a in grid {
        let ok = if simulated { (0.0..=budget).contains(&a) } else { (0.0..budget).contains(&a) };
        if !ok {
            return Err(FogError::domain(format!("grid point {a} outside the search domain")));
        }
    }
    let thresholds = opts.thresholds.as_deref();
    check_thresholds(scenario, thresholds)?;
    let obj = Objective::new(scenario, method)?;

    let evaluated: Vec<Option<(f64, f64)>> = grid
        .par_iter()
        .map(|&a| {
            if simulated {
                let out = obj.simulate(a)?;
                return Ok(Some((out.overflow_sum(), out.avg_loss)));
            }
            match obj.overflow_sum(a) {
                Ok(n) => Ok(Some((n, n / (budget - a)))),
                Err(FogError::Validity { .. }) => Ok(None),
                Err(e) => Err(e),
            }
        })
        .collect::<Result<_>>()?;

    let mut best_feasible: Option<(f64, f64)> = None;
    let mut best_any: Option<(f64, f64)> = None;
    let pick = |slot: &mut Option<(f64, f64)>, a: f64, v: f64| {
        if slot.is_none_or(|(ba, bv)| {
            let tie = TIE_RTOL * bv.abs();
            v < bv - tie || (v <= bv + tie && a < ba)
        }) {
            *slot = Some((a, v));
        }
    };
    for (&a, e) in grid.iter().zip(&evaluated) {
        let Some((numer, value)) = *e else { continue };
        pick(&mut best_any, a, value);
        let within = match thresholds {
            None => true,
            Some(th) => obj
                .loss_probabilities(a)?
                .iter()
                .zip(th)
                .all(|(p, t)| p <= t),
        };
        if numer <= budget - a && within {
            pick(&mut best_feasible, a, value);
        }
    }
    let (feasible, (alpha_star, objective)) = match (best_feasible, best_any) {
        (Some(b), _) => (true, b),
        (None, Some(b)) => (false, b),
        (None, None) => (false, (grid.iter().copied().fold(f64::INFINITY, f64::min), f64::INFINITY)),
    };
    Ok(OptimizationResult {
        alpha_star,
        objective,
        method: method.clone(),
        iterations: Vec::new(),
        feasible,
    })
}

/// Numerical evidence for the bufferless optimum: simulated loss on a
/// common-random-number grid over `[0, C]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BufferlessCertificate {
    pub alphas: Vec<f64>,
    pub avg_loss: Vec<f64>,
    pub std_err: Vec<f64>,
    /// Whether the loss never decreases along the grid.
    pub non_decreasing: bool,
}

/// With no shallow buffers the loss is minimized by putting all capacity in
/// the deep cloudlet, so `alpha* = 0`. The certificate re-checks this by simulation.
pub fn optimize_bufferless(
    scenario: &Scenario,
    opts: &SimOptions,
    grid_points: usize,
) -> Result<(OptimizationResult, BufferlessCertificate)> {
    if scenario.deadline() != 0.0 {
        return Err(FogError::domain(format!(
            "bufferless optimum needs deadline 0, got {}",
            scenario.deadline()
        )));
    }
    let alphas = linspace(0.0, scenario.budget(), grid_points.max(2), true);
    let outs = sweep(scenario, &alphas, opts)?;
    let avg_loss: Vec<f64> = outs.iter().map(|(_, o)| o.avg_loss).collect();
    let std_err = outs.iter().map(|(_, o)| o.std_err).collect();
    let non_decreasing = avg_loss
        .windows(2)
        .all(|w| w[1] >= w[0] - 1e-12 * (1.0 + w[0].abs()));
    let at_zero = &outs[0].1;
    let result = OptimizationResult {
        alpha_star: 0.0,
        objective: at_zero.avg_loss,
        method: OverflowMethod::Sim(*opts),
        iterations: Vec::new(),
        feasible: at_zero.overflow_sum() <= scenario.budget(),
    };
    Ok((
        result,
        BufferlessCertificate {
            alphas,
            avg_loss,
            std_err,
            non_decreasing,
        },
    ))
}
