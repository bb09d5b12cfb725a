use crate::error::{FogError, Result};
use crate::fluid_sim::{run, Realization, SimOptions, SimOutput, TwoTier};
use crate::gd1;
use crate::qle::QleEstimator;
use crate::scenario::Scenario;
use crate::workload::{stats_of_model, WorkloadModel, WorkloadStats};

use super::OverflowMethod;

enum Backend<'a> {
    Gd1 { stats: Vec<WorkloadStats>, n_max: usize },
    Qle(QleEstimator<'a>),
    Sim { system: TwoTier, workload: Realization, warmup: usize },
}

/// Evaluates overflow-based objectives for one scenario and method, caching
/// whatever the method needs (moments, marginals or a workload realization).
pub struct Objective<'a> {
    scenario: &'a Scenario,
    method: OverflowMethod,
    backend: Backend<'a>,
}

fn lag_limit(model: &WorkloadModel, max_lag: usize) -> usize {
    match model {
        WorkloadModel::EmpiricalTrace { samples, .. } => max_lag.min(samples.len() - 1),
        _ => max_lag,
    }
}

impl<'a> Objective<'a> {
    pub fn new(scenario: &'a Scenario, method: &OverflowMethod) -> Result<Self> {
        let backend = match method {
            OverflowMethod::Gd1(cfg) => Backend::Gd1 {
                stats: scenario
                    .models()
                    .iter()
                    .map(|m| stats_of_model(m, lag_limit(m, cfg.max_lag)))
                    .collect::<Result<_>>()?,
                n_max: cfg.n_max,
            },
            OverflowMethod::Qle(cfg) => Backend::Qle(QleEstimator::new(scenario, cfg)?),
            OverflowMethod::Sim(opts) => Backend::Sim {
                system: scenario.into(),
                workload: Realization::generate(scenario, opts.n_slots, opts.seed)?,
                warmup: opts.warmup_slots(opts.n_slots),
            },
        };
        Ok(Objective {
            scenario,
            method: method.clone(),
            backend,
        })
    }

    pub fn scenario(&self) -> &Scenario {
        self.scenario
    }

    pub fn method(&self) -> &OverflowMethod {
        &self.method
    }

    /// The shared workload realization of the simulation method.
    pub fn realization(&self) -> Option<&Realization> {
        match &self.backend {
            Backend::Sim { workload, .. } => Some(workload),
            _ => None,
        }
    }

    /// Simulation output at `alpha` (simulation method only).
    pub fn simulate(&self, alpha: f64) -> Result<SimOutput> {
        match &self.backend {
            Backend::Sim { system, workload, warmup } => run(system, alpha, workload, *warmup),
            _ => Err(FogError::param("simulated loss requires the sim method")),
        }
    }

    /// Expected overflow of each shallow cloudlet at `alpha`.
    pub fn per_cloudlet_overflow(&self, alpha: f64) -> Result<Vec<f64>> {
        self.scenario.check_alpha(alpha)?;
        let s = self.scenario;
        match &self.backend {
            Backend::Gd1 { stats, n_max } => stats
                .iter()
                .zip(s.rho())
                .map(|(st, rho)| gd1::expected_overflow(st, *rho, alpha, s.deadline(), *n_max))
                .collect(),
            Backend::Qle(est) => Ok((0..s.num_cloudlets()).map(|i| est.overflow(i, alpha)).collect()),
            Backend::Sim { .. } => Ok(self.simulate(alpha)?.per_cloudlet_overflow_mean),
        }
    }

    /// Per-cloudlet loss probabilities `overflow_i / mean_i`.
    pub fn loss_probabilities(&self, alpha: f64) -> Result<Vec<f64>> {
        Ok(self
            .per_cloudlet_overflow(alpha)?
            .iter()
            .zip(self.scenario.means())
            .map(|(o, m)| o / m)
            .collect())
    }

    pub fn overflow_sum(&self, alpha: f64) -> Result<f64> {
        Ok(self.per_cloudlet_overflow(alpha)?.iter().sum())
    }

    /// `overflow_sum / (C - alpha)`, defined for `alpha < C`.
    pub fn fractional(&self, alpha: f64) -> Result<f64> {
        let deep = self.deep_capacity(alpha)?;
        Ok(self.overflow_sum(alpha)? / deep)
    }

    /// Markov-type bound `(tau - C) * overflow_sum / (C - alpha)` on the
    /// average loss, zero when `tau <= C`.
    pub fn markov_bound(&self, alpha: f64, tau: f64) -> Result<f64> {
        let deep = self.deep_capacity(alpha)?;
        let span = tau - self.scenario.budget();
        if span <= 0.0 {
            return Ok(0.0);
        }
        Ok(span * self.overflow_sum(alpha)? / deep)
    }

    fn deep_capacity(&self, alpha: f64) -> Result<f64> {
        self.scenario.check_alpha(alpha)?;
        let deep = self.scenario.budget() - alpha;
        if deep <= 0.0 {
            return Err(FogError::domain("objective undefined at alpha = C"));
        }
        Ok(deep)
    }
}

pub fn expected_overflow_sum(scenario: &Scenario, alpha: f64, method: &OverflowMethod) -> Result<f64> {
    Objective::new(scenario, method)?.overflow_sum(alpha)
}

pub fn fractional_objective(scenario: &Scenario, alpha: f64, method: &OverflowMethod) -> Result<f64> {
    Objective::new(scenario, method)?.fractional(alpha)
}

/// Integration cutoff `tau`: the `(1 - epsilon_tail)` quantile of the total
/// forwarded load at `alpha = 0` (the total input), from a calibration run.
/// It does not depend on `alpha`.
pub fn tail_cutoff(scenario: &Scenario, epsilon_tail: f64, calibration: &SimOptions) -> Result<f64> {
    if !(epsilon_tail > 0.0 && epsilon_tail < 1.0) {
        return Err(FogError::domain(format!("epsilon_tail must lie in (0, 1), got {epsilon_tail}")));
    }
    let workload = Realization::generate(scenario, calibration.n_slots, calibration.seed)?;
    Ok(upper_quantile(workload.aggregate(), epsilon_tail))
}

/// Empirical `(1 - eps)` quantile (smallest sample with at least that mass at or below it).
pub(crate) fn upper_quantile(mut xs: Vec<f64>, eps: f64) -> f64 {
    let n = xs.len();
    let rank = (((1.0 - eps) * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (_, v, _) = xs.select_nth_unstable_by(rank, f64::total_cmp);
    *v
}

/// Markov bound at `alpha` with `tau` calibrated from `calibration`.
pub fn markov_bound(
    scenario: &Scenario,
    alpha: f64,
    method: &OverflowMethod,
    epsilon_tail: f64,
    calibration: &SimOptions,
) -> Result<f64> {
    let tau = tail_cutoff(scenario, epsilon_tail, calibration)?;
    Objective::new(scenario, method)?.markov_bound(alpha, tau)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qle::QleConfig;
    use crate::scenario::InputProcess;

    #[test]
    fn qle_at_zero_forwards_everything() {
        let s = Scenario::reference(InputProcess::Uniform, 0.1);
        let v = expected_overflow_sum(&s, 0.0, &OverflowMethod::qle(QleConfig::base())).unwrap();
        assert!((v - 18.0).abs() < 1e-12);
    }

    #[test]
    fn gd1_vanishes_at_large_alpha() {
        let s = Scenario::new(
            60.0,
            0.1,
            [4.0, 8.0, 6.0].map(|m| WorkloadModel::GaussianIid { mean: m, variance: 1.0 }).to_vec(),
        )
        .unwrap();
        assert!(expected_overflow_sum(&s, 59.0, &OverflowMethod::gd1()).unwrap() < 1e-12);
        assert!(matches!(
            expected_overflow_sum(&s, 17.0, &OverflowMethod::gd1()),
            Err(FogError::Validity { .. })
        ));
    }

    #[test]
    fn fractional_by_hand() {
        let s = Scenario::new(20.0, 0.1, vec![WorkloadModel::Uniform { low: 7.0, high: 9.0 }]).unwrap();
        let m = OverflowMethod::qle(QleConfig::base());
        let v = fractional_objective(&s, 8.0, &m).unwrap();
        assert!((v - 0.01 / 12.0).abs() < 1e-15);
        assert_eq!(fractional_objective(&s, 9.0, &m).unwrap(), 0.0);
        assert!(matches!(fractional_objective(&s, 20.0, &m), Err(FogError::Domain(_))));
    }

    #[test]
    fn halving_deep_capacity_doubles_objective() {
        let s = Scenario::reference(InputProcess::GaussianIid, 0.1);
        let obj = Objective::new(&s, &OverflowMethod::qle(QleConfig::base())).unwrap();
        let n = obj.overflow_sum(16.0).unwrap();
        assert!((obj.fractional(16.0).unwrap() - n / 4.0).abs() < 1e-15);
    }

    #[test]
    fn quantile_ranks() {
        let xs: Vec<f64> = (1..=100).map(f64::from).collect();
        assert_eq!(upper_quantile(xs.clone(), 0.01), 99.0);
        assert_eq!(upper_quantile(xs.clone(), 0.5), 50.0);
        assert_eq!(upper_quantile(xs, 1e-9), 100.0);
    }

    #[test]
    fn markov_bound_is_zero_without_overflow_or_tail() {
        let s = Scenario::new(20.0, 0.1, vec![WorkloadModel::Uniform { low: 7.0, high: 9.0 }]).unwrap();
        let calib = SimOptions::new(10_000, 1);
        let m = OverflowMethod::qle(QleConfig::base());
        // Total input never exceeds 9 < C, so tau <= C.
        assert_eq!(markov_bound(&s, 5.0, &m, 1e-3, &calib).unwrap(), 0.0);
        assert!(markov_bound(&s, 5.0, &m, 0.0, &calib).is_err());
    }

    #[test]
    fn fixed_tau_preserves_argmin() {
        let s = Scenario::reference(InputProcess::GaussianIid, 0.1);
        let obj = Objective::new(&s, &OverflowMethod::qle(QleConfig::base())).unwrap();
        let tau = tail_cutoff(&s, 1e-3, &SimOptions::new(100_000, 2)).unwrap();
        assert!(tau > 20.0);
        let grid: Vec<f64> = (0..80).map(|k| 0.25 * k as f64).collect();
        let argmin = |f: &dyn Fn(f64) -> f64| {
            grid.iter().copied().fold((f64::NAN, f64::INFINITY), |(ba, bv), a| {
                let v = f(a);
                if v < bv { (a, v) } else { (ba, bv) }
            }).0
        };
        let a1 = argmin(&|a| obj.fractional(a).unwrap());
        let a2 = argmin(&|a| obj.markov_bound(a, tau).unwrap());
        assert_eq!(a1, a2);
    }
}
