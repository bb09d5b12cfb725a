//! Slotted fluid simulation of the two-tier system.
//!
//! Each shallow cloudlet `i` serves `rho_i * alpha` per slot and holds at most
//! `B_i = rho_i * alpha * D` of backlog. Work that does not fit is forwarded
//! to the bufferless deep cloudlet of capacity `C - alpha`; whatever exceeds
//! that capacity in a slot is lost.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{FogError, Result};
use crate::scenario::Scenario;
use crate::workload::generate;

/// Number of batches used for the batch-means standard error.
const BATCHES: usize = 100;

/// Capacity layout of the system, independent of the workload law.
#[derive(Debug, Clone, PartialEq)]
pub struct TwoTier {
    pub means: Vec<f64>,
    pub rho: Vec<f64>,
    pub budget: f64,
    pub deadline: f64,
}

impl TwoTier {
    /// Builds the layout from per-cloudlet means without the stability check,
    /// so hand-made overload cases can be simulated.
    pub fn new(means: Vec<f64>, budget: f64, deadline: f64) -> Result<Self> {
        let total: f64 = means.iter().sum();
        if means.is_empty() || means.iter().any(|m| *m <= 0.0) {
            return Err(FogError::param("means must be positive"));
        }
        if deadline < 0.0 || budget <= 0.0 {
            return Err(FogError::param("need budget > 0 and deadline >= 0"));
        }
        let rho = means.iter().map(|m| m / total).collect();
        Ok(TwoTier {
            means,
            rho,
            budget,
            deadline,
        })
    }

    pub fn total_mean(&self) -> f64 {
        self.means.iter().sum()
    }
}

impl From<&Scenario> for TwoTier {
    fn from(s: &Scenario) -> Self {
        TwoTier {
            means: s.means().to_vec(),
            rho: s.rho().to_vec(),
            budget: s.budget(),
            deadline: s.deadline(),
        }
    }
}

/// One materialized workload path per cloudlet, shared read-only across `alpha`.
#[derive(Debug, Clone, PartialEq)]
pub struct Realization {
    pub series: Vec<Vec<f64>>,
    pub clamp_warnings: Vec<String>,
}

impl Realization {
    /// Cloudlet `i` draws from stream `seed + i`.
    pub fn generate(scenario: &Scenario, n_slots: usize, seed: u64) -> Result<Self> {
        let generated = scenario
            .models()
            .par_iter()
            .enumerate()
            .map(|(i, m)| generate(m, n_slots, seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let clamp_warnings = generated
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.clamp_warning().map(|w| format!("cloudlet {i}: {w}")))
            .collect();
        Ok(Realization {
            series: generated.into_iter().map(|s| s.samples).collect(),
            clamp_warnings,
        })
    }

    pub fn from_series(series: Vec<Vec<f64>>) -> Result<Self> {
        let n = series.first().map_or(0, Vec::len);
        if n == 0 || series.iter().any(|s| s.len() != n) {
            return Err(FogError::param("series must be non-empty and of equal length"));
        }
        Ok(Realization {
            series,
            clamp_warnings: Vec::new(),
        })
    }

    pub fn n_slots(&self) -> usize {
        self.series[0].len()
    }

    /// Total arriving work per slot.
    pub fn aggregate(&self) -> Vec<f64> {
        let mut total = vec![0.0; self.n_slots()];
        for s in &self.series {
            for (t, x) in total.iter_mut().zip(s) {
                *t += x;
            }
        }
        total
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub n_slots: usize,
    pub seed: u64,
    /// Fraction of leading slots excluded from the averages.
    pub warmup_fraction: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            n_slots: 1_000_000,
            seed: 1,
            warmup_fraction: 0.01,
        }
    }
}

impl SimOptions {
    pub fn new(n_slots: usize, seed: u64) -> Self {
        SimOptions {
            n_slots,
            seed,
            ..Default::default()
        }
    }

    pub fn warmup_slots(&self, n_slots: usize) -> usize {
        ((n_slots as f64 * self.warmup_fraction).floor() as usize).min(n_slots.saturating_sub(1))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimOutput {
    pub alpha: f64,
    /// Time-averaged loss at the deep cloudlet, Gigacycles/slot.
    pub avg_loss: f64,
    /// `avg_loss / sum(mean)`.
    pub loss_probability: f64,
    /// Batch-means standard error of `avg_loss`.
    pub std_err: f64,
    pub per_cloudlet_overflow_mean: Vec<f64>,
    pub per_cloudlet_avg_queue: Vec<f64>,
    /// Largest per-slot work-conservation residual seen.
    pub conservation_residual: f64,
    pub clamp_warnings: Vec<String>,
}

impl SimOutput {
    pub fn overflow_sum(&self) -> f64 {
        self.per_cloudlet_overflow_mean.iter().sum()
    }
}

/// Outcome of one shallow-queue slot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QueueStep {
    pub queue: f64,
    pub served: f64,
    pub overflow: f64,
}

/// Arrivals join the backlog, `service` is drained, and whatever exceeds
/// `buffer` is forwarded.
#[inline]
pub fn step(prev_queue: f64, arrival: f64, service: f64, buffer: f64) -> QueueStep {
    let backlog = prev_queue + arrival;
    let served = backlog.min(service);
    let rest = backlog - served;
    let queue = rest.min(buffer);
    QueueStep {
        queue,
        served,
        overflow: rest - queue,
    }
}

/// Runs the recursion over a materialized workload, discarding `warmup` slots.
pub fn run(system: &TwoTier, alpha: f64, workload: &Realization, warmup: usize) -> Result<SimOutput> {
    if !(0.0..=system.budget).contains(&alpha) {
        return Err(FogError::domain(format!("alpha {alpha} outside [0, {}]", system.budget)));
    }
    let m = system.means.len();
    if workload.series.len() != m {
        return Err(FogError::param(format!("expected {m} workload series, got {}", workload.series.len())));
    }
    let n = workload.n_slots();
    if warmup >= n {
        return Err(FogError::param("warm-up consumes every slot"));
    }
    let service: Vec<f64> = system.rho.iter().map(|r| r * alpha).collect();
    let buffer: Vec<f64> = service.iter().map(|s| s * system.deadline).collect();
    let deep = system.budget - alpha;

    let measured = n - warmup;
    let batches = BATCHES.min(measured);
    let batch_len = measured / batches;
    let mut batch_sums = vec![0.0; batches];

    let mut queue = vec![0.0; m];
    let mut overflow_sum = vec![0.0; m];
    let mut queue_sum = vec![0.0; m];
    let mut loss_sum = 0.0;
    let mut residual: f64 = 0.0;

    for t in 0..n {
        let mut forwarded = 0.0;
        let keep = t >= warmup;
        for i in 0..m {
            let arrival = workload.series[i][t];
            let prev = queue[i];
            let s = step(prev, arrival, service[i], buffer[i]);
            residual = residual.max((arrival - (s.served + (s.queue - prev) + s.overflow)).abs());
            queue[i] = s.queue;
            forwarded += s.overflow;
            if keep {
                overflow_sum[i] += s.overflow;
                queue_sum[i] += s.queue;
            }
        }
        if keep {
            let loss = (forwarded - deep).max(0.0);
            loss_sum += loss;
            let b = ((t - warmup) / batch_len.max(1)).min(batches - 1);
            batch_sums[b] += loss;
        }
    }

    let count = measured as f64;
    let avg_loss = loss_sum / count;
    Ok(SimOutput {
        alpha,
        avg_loss,
        loss_probability: avg_loss / system.total_mean(),
        std_err: batch_std_err(&batch_sums, batch_len, measured),
        per_cloudlet_overflow_mean: overflow_sum.iter().map(|s| s / count).collect(),
        per_cloudlet_avg_queue: queue_sum.iter().map(|s| s / count).collect(),
        conservation_residual: residual,
        clamp_warnings: workload.clamp_warnings.clone(),
    })
}

fn batch_std_err(batch_sums: &[f64], batch_len: usize, measured: usize) -> f64 {
    let k = batch_sums.len();
    if k < 2 {
        return 0.0;
    }
    // The last batch absorbs the remainder slots.
    let lens: Vec<f64> = (0..k)
        .map(|b| if b + 1 == k { (measured - batch_len * (k - 1)) as f64 } else { batch_len as f64 })
        .collect();
    let means: Vec<f64> = batch_sums.iter().zip(&lens).map(|(s, l)| s / l).collect();
    let grand = means.iter().sum::<f64>() / k as f64;
    let var = means.iter().map(|x| (x - grand).powi(2)).sum::<f64>() / (k - 1) as f64;
    (var / k as f64).sqrt()
}

/// Simulates `scenario` at one capacity split.
pub fn simulate(scenario: &Scenario, alpha: f64, opts: &SimOptions) -> Result<SimOutput> {
    scenario.check_alpha(alpha)?;
    let workload = Realization::generate(scenario, opts.n_slots, opts.seed)?;
    run(&scenario.into(), alpha, &workload, opts.warmup_slots(opts.n_slots))
}

/// Simulates every grid point on one shared workload realization.
pub fn sweep(scenario: &Scenario, alpha_grid: &[f64], opts: &SimOptions) -> Result<Vec<(f64, SimOutput)>> {
    for &a in alpha_grid {
        scenario.check_alpha(a)?;
    }
    let workload = Realization::generate(scenario, opts.n_slots, opts.seed)?;
    sweep_on(scenario, alpha_grid, &workload, opts.warmup_slots(opts.n_slots))
}

pub fn sweep_on(
    scenario: &Scenario,
    alpha_grid: &[f64],
    workload: &Realization,
    warmup: usize,
) -> Result<Vec<(f64, SimOutput)>> {
    let system = TwoTier::from(scenario);
    alpha_grid
        .par_iter()
        .map(|&a| run(&system, a, workload, warmup).map(|o| (a, o)))
        .collect()
}
