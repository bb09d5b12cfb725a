//! Objectives and solvers for the capacity split `alpha`.

mod objective;
mod solve;

pub use objective::{expected_overflow_sum, fractional_objective, markov_bound, tail_cutoff, Objective};
pub use solve::{
    algorithm1, grid_search, linspace, optimize_bufferless, solve_subproblem, Algorithm1Options, BufferlessCertificate,
    GridObjective, GridOptions,
};

use serde::{Deserialize, Serialize};

use crate::fluid_sim::SimOptions;
use crate::gd1::Gd1Config;
use crate::qle::QleConfig;
use crate::scenario::Scenario;
use crate::workload::stats_of_model;

/// Lower and upper offsets (in units of sigma_i / rho_i) of the region where
/// the G/D/1 loss probability is convex in the service rate.
pub const CONVEX_LOWER_OFFSET: f64 = 0.07071;
pub const CONVEX_UPPER_OFFSET: f64 = 1.4477;

/// How the expected per-cloudlet overflow `E(lambda + Q - rho alpha (1 + D))+` is obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum OverflowMethod {
    /// `P_i(alpha) * mean_i` from the G/D/1 tail approximation.
    Gd1(Gd1Config),
    /// Stop-loss of the input with the queue replaced by its linear estimate.
    Qle(QleConfig),
    /// Time averages of a fluid simulation.
    Sim(SimOptions),
}

impl OverflowMethod {
    pub fn gd1() -> Self {
        OverflowMethod::Gd1(Gd1Config::default())
    }

    pub fn qle(cfg: QleConfig) -> Self {
        OverflowMethod::Qle(cfg)
    }

    pub fn sim(n_slots: usize, seed: u64) -> Self {
        OverflowMethod::Sim(SimOptions::new(n_slots, seed))
    }

    pub fn name(&self) -> &'static str {
        match self {
            OverflowMethod::Gd1(_) => "gd1",
            OverflowMethod::Qle(_) => "qle",
            OverflowMethod::Sim(_) => "sim",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OptimizationResult {
    pub alpha_star: f64,
    /// Objective at `alpha_star`; infinite when nothing feasible was found.
    pub objective: f64,
    pub method: OverflowMethod,
    /// `(r, alpha)` per accepted Algorithm 1 step; empty for grid searches.
    pub iterations: Vec<(f64, f64)>,
    pub feasible: bool,
}

/// Interval `[lo, hi]` of `alpha`; `hi_open` marks an upper end clipped at the budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AlphaRange {
    pub lo: f64,
    pub hi: f64,
    pub hi_open: bool,
}

impl AlphaRange {
    pub fn is_empty(&self) -> bool {
        self.lo > self.hi || (self.hi_open && self.lo >= self.hi)
    }

    pub fn contains(&self, alpha: f64) -> bool {
        alpha >= self.lo && if self.hi_open { alpha < self.hi } else { alpha <= self.hi }
    }
}

/// Range of `alpha` on which the G/D/1 subproblem is convex, intersected with `[0, C)`.
pub fn convexity_range(scenario: &Scenario) -> AlphaRange {
    let total = scenario.total_mean();
    let sigmas = scenario
        .models()
        .iter()
        .map(|m| stats_of_model(m, 0).map(|s| s.std_dev()).unwrap_or(0.0));
    let (lo_off, hi_off) = sigmas
        .zip(scenario.rho())
        .fold((0.0f64, f64::INFINITY), |(lo, hi), (sigma, rho)| {
            (lo.max(CONVEX_LOWER_OFFSET * sigma / rho), hi.min(CONVEX_UPPER_OFFSET * sigma / rho))
        });
    let lo = (total + lo_off).max(0.0);
    let hi = total + hi_off;
    let budget = scenario.budget();
    if hi >= budget {
        AlphaRange {
            lo,
            hi: budget,
            hi_open: true,
        }
    } else {
        AlphaRange { lo, hi, hi_open: false }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::InputProcess;
    use crate::workload::WorkloadModel;

    #[test]
    fn reference_scenario_range_clips_at_budget() {
        let r = convexity_range(&Scenario::reference(InputProcess::GaussianIid, 0.1));
        // rho = (2/9, 4/9, 1/3): the smallest rho sets the lower offset,
        // the largest the upper one.
        assert!((r.lo - (18.0 + 0.07071 * 4.5)).abs() < 1e-12);
        assert_eq!(r.hi, 20.0);
        assert!(r.hi_open);
        assert!(r.contains(19.99) && !r.contains(20.0) && !r.contains(18.3));
    }

    #[test]
    fn single_cloudlet_range() {
        let s = Scenario::new(20.0, 0.0, vec![WorkloadModel::GaussianIid { mean: 8.0, variance: 1.0 }]).unwrap();
        let r = convexity_range(&s);
        assert!((r.lo - 8.07071).abs() < 1e-12);
        assert!((r.hi - 9.4477).abs() < 1e-12);
        assert!(!r.hi_open);
    }

    #[test]
    fn range_collapses_with_vanishing_variance() {
        let s = Scenario::new(20.0, 0.0, vec![WorkloadModel::GaussianIid { mean: 8.0, variance: 1e-12 }]).unwrap();
        let r = convexity_range(&s);
        assert!((r.lo - 8.0).abs() < 1e-6 && (r.hi - 8.0).abs() < 1e-5);
    }

    #[test]
    fn unequal_spreads_can_empty_the_range() {
        let s = Scenario::new(
            100.0,
            0.0,
            vec![
                WorkloadModel::GaussianIid { mean: 1.0, variance: 100.0 },
                WorkloadModel::GaussianIid { mean: 50.0, variance: 1e-6 },
            ],
        )
        .unwrap();
        assert!(convexity_range(&s).is_empty());
    }
}
