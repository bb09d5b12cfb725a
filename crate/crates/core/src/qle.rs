//! Queue-length estimation: replace the shallow backlog by a piecewise-linear
//! estimate of its average and take the stop-loss of the marginal input.

use serde::{Deserialize, Serialize};

use crate::error::{FogError, Result};
use crate::scenario::Scenario;
use crate::stoploss::{stop_loss_unchecked, ScalarDistribution};
use crate::workload::stats_of_model;

/// Shift `kappa_i` of the adjusted estimate. Defaults to one standard
/// deviation of the cloudlet's input; use [`QleConfig::base`] for no shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QleConfig {
    #[serde(default = "default_coeff")]
    pub kappa_coeff: f64,
    /// Per-cloudlet kappa in Gigacycles/s, overriding `kappa_coeff * sigma_i`.
    #[serde(default)]
    pub kappa_override: Option<Vec<f64>>,
}

fn default_coeff() -> f64 {
    1.0
}

impl Default for QleConfig {
    fn default() -> Self {
        QleConfig {
            kappa_coeff: default_coeff(),
            kappa_override: None,
        }
    }
}

impl QleConfig {
    /// No adjustment (kappa = 0).
    pub fn base() -> Self {
        QleConfig {
            kappa_coeff: 0.0,
            kappa_override: None,
        }
    }

    pub fn kappas(&self, scenario: &Scenario) -> Result<Vec<f64>> {
        if !(self.kappa_coeff >= 0.0) {
            return Err(FogError::param(format!("kappa_coeff must be >= 0, got {}", self.kappa_coeff)));
        }
        if let Some(k) = &self.kappa_override {
            if k.len() != scenario.num_cloudlets() {
                return Err(FogError::param(format!(
                    "kappa_override has {} entries for {} cloudlets",
                    k.len(),
                    scenario.num_cloudlets()
                )));
            }
            return Ok(k.clone());
        }
        scenario
            .models()
            .iter()
            .map(|m| Ok(self.kappa_coeff * stats_of_model(m, 0)?.std_dev()))
            .collect()
    }
}

/// Average-queue-length estimate of cloudlet `i` (no variance adjustment).
pub fn e_aql(scenario: &Scenario, i: usize, alpha: f64) -> f64 {
    e_aql_shifted(scenario, i, alpha, 0.0)
}

/// The estimate with thresholds moved right by `kappa_i` and `alpha`
/// replaced by `alpha - kappa_i` in the linear pieces.
pub fn e_aql_adjusted(scenario: &Scenario, i: usize, alpha: f64, cfg: &QleConfig) -> Result<f64> {
    let kappa = cfg.kappas(scenario)?[i];
    Ok(e_aql_shifted(scenario, i, alpha, kappa))
}

fn e_aql_shifted(scenario: &Scenario, i: usize, alpha: f64, kappa: f64) -> f64 {
    let total = scenario.total_mean();
    let rho = scenario.rho()[i];
    let d = scenario.deadline();
    let upper = total + kappa;
    let lower = total / (1.0 + d) + kappa;
    if alpha >= upper {
        0.0
    } else if alpha >= lower {
        -rho * (alpha - kappa) + rho * total
    } else {
        rho * (alpha - kappa) * d
    }
}

/// Cached per-cloudlet data for repeated evaluation of `g_i`.
#[derive(Debug, Clone)]
pub struct QleEstimator<'a> {
    scenario: &'a Scenario,
    marginals: Vec<ScalarDistribution>,
    kappas: Vec<f64>,
}

impl<'a> QleEstimator<'a> {
    pub fn new(scenario: &'a Scenario, cfg: &QleConfig) -> Result<Self> {
        let marginals: Vec<ScalarDistribution> = scenario.models().iter().map(|m| m.marginal()).collect();
        for d in &marginals {
            d.validate()?;
        }
        Ok(QleEstimator {
            scenario,
            marginals,
            kappas: cfg.kappas(scenario)?,
        })
    }

    pub fn kappas(&self) -> &[f64] {
        &self.kappas
    }

    pub fn threshold(&self, i: usize, alpha: f64) -> f64 {
        let s = self.scenario;
        s.rho()[i] * alpha * (1.0 + s.deadline()) - e_aql_shifted(s, i, alpha, self.kappas[i])
    }

    /// `g_i(alpha) = E(lambda_i + e_AQL_i - rho_i alpha (1 + D))+`.
    pub fn overflow(&self, i: usize, alpha: f64) -> f64 {
        stop_loss_unchecked(&self.marginals[i], self.threshold(i, alpha))
    }

    pub fn overflow_sum(&self, alpha: f64) -> f64 {
        (0..self.marginals.len()).map(|i| self.overflow(i, alpha)).sum()
    }
}

/// Expected overflow of cloudlet `i` under the queue-length estimate.
pub fn g(scenario: &Scenario, i: usize, alpha: f64, cfg: &QleConfig) -> Result<f64> {
    if i >= scenario.num_cloudlets() {
        return Err(FogError::param(format!("cloudlet index {i} out of range")));
    }
    Ok(QleEstimator::new(scenario, cfg)?.overflow(i, alpha))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::InputProcess;
    use crate::workload::WorkloadModel;

    fn single(model: WorkloadModel, budget: f64, d: f64) -> Scenario {
        Scenario::new(budget, d, vec![model]).unwrap()
    }

    fn flat10(d: f64) -> Scenario {
        single(WorkloadModel::Uniform { low: 9.0, high: 11.0 }, 20.0, d)
    }

    #[test]
    fn branches_by_hand() {
        let s = flat10(0.1);
        assert_eq!(e_aql(&s, 0, 10.0), 0.0);
        assert!((e_aql(&s, 0, 9.5) - 0.5).abs() < 1e-15);
        let knot: f64 = 10.0 / 1.1;
        let mid = -knot + 10.0;
        let low = knot * 0.1;
        assert!((mid - low).abs() < 1e-12);
        assert!((e_aql(&s, 0, knot) - 0.909_090_909_090_909).abs() < 1e-12);
        assert!((e_aql(&s, 0, 5.0) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn adjusted_branches() {
        let s = flat10(0.1);
        let k1 = QleConfig {
            kappa_coeff: 0.0,
            kappa_override: Some(vec![1.0]),
        };
        assert!((e_aql_adjusted(&s, 0, 10.5, &k1).unwrap() - 0.5).abs() < 1e-15);
        assert_eq!(e_aql_adjusted(&s, 0, 11.0, &k1).unwrap(), 0.0);
        for k in 0..=200 {
            let a = 0.1 * k as f64;
            assert_eq!(e_aql_adjusted(&s, 0, a, &QleConfig::base()).unwrap(), e_aql(&s, 0, a));
        }
    }

    #[test]
    fn default_kappa_is_one_sigma() {
        let s = Scenario::reference(InputProcess::GaussianAr1, 0.1);
        let k = QleConfig::default().kappas(&s).unwrap();
        assert!(k.iter().all(|x| (x - 1.0).abs() < 1e-15));
        let bad = QleConfig {
            kappa_coeff: 0.0,
            kappa_override: Some(vec![1.0]),
        };
        assert!(bad.kappas(&s).is_err());
    }

    #[test]
    fn continuous_at_knots() {
        for d in [0.05, 0.1, 0.5, 2.0] {
            let s = Scenario::reference(InputProcess::Uniform, d);
            for kappa in [0.0, 0.7] {
                for i in 0..3 {
                    for knot in [18.0 / (1.0 + d) + kappa, 18.0 + kappa] {
                        let l = e_aql_shifted(&s, i, knot - 1e-9, kappa);
                        let r = e_aql_shifted(&s, i, knot, kappa);
                        assert!((l - r).abs() < 1e-8, "d={d} kappa={kappa} i={i}");
                    }
                }
            }
        }
    }

    #[test]
    fn uniform_overflow_by_hand() {
        let s = single(WorkloadModel::Uniform { low: 7.0, high: 9.0 }, 20.0, 0.1);
        let cfg = QleConfig::base();
        assert_eq!(g(&s, 0, 8.5, &cfg).unwrap(), 0.0);
        assert!((g(&s, 0, 8.0, &cfg).unwrap() - 0.01).abs() < 1e-14);
        // No shallow capacity: everything is forwarded.
        assert_eq!(g(&s, 0, 0.0, &cfg).unwrap(), 8.0);
    }

    #[test]
    fn zero_capacity_forwards_mean() {
        let s = Scenario::reference(InputProcess::GaussianIid, 0.1);
        let est = QleEstimator::new(&s, &QleConfig::base()).unwrap();
        for i in 0..3 {
            // E(X)+ exceeds the mean by E(-X)+, below 1e-5 for these means.
            assert!((est.overflow(i, 0.0) - s.means()[i]).abs() < 1e-5);
        }
    }

    #[test]
    fn non_increasing_for_every_deadline() {
        for process in [InputProcess::GaussianIid, InputProcess::Uniform] {
            for d in [0.0, 0.05, 0.1, 0.2, 1.0] {
                let s = Scenario::reference(process, d);
                for cfg in [QleConfig::base(), QleConfig::default()] {
                    let est = QleEstimator::new(&s, &cfg).unwrap();
                    for i in 0..3 {
                        let mut prev = f64::INFINITY;
                        for k in 0..2001 {
                            let v = est.overflow(i, 20.0 * k as f64 / 2001.0);
                            assert!(v - prev <= 1e-9);
                            prev = v;
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn convex_without_deadline() {
        let s = Scenario::reference(InputProcess::GaussianIid, 0.0);
        let est = QleEstimator::new(&s, &QleConfig::base()).unwrap();
        let h = 20.0 / 2001.0;
        for i in 0..3 {
            for k in 1..2000 {
                let a = h * k as f64;
                let d2 = est.overflow(i, a - h) + est.overflow(i, a + h) - 2.0 * est.overflow(i, a);
                assert!(d2 >= -1e-9);
            }
        }
    }

    #[test]
    fn lower_knot_is_a_concave_kink_when_deadline_positive() {
        // The threshold rho*a*(1+D) - e_AQL has slope rho below the lower knot
        // and rho*(2+D) above it, so g' jumps by -rho*(1+D)*P(X > t).
        let d = 0.1;
        let s = Scenario::reference(InputProcess::GaussianIid, d);
        let est = QleEstimator::new(&s, &QleConfig::base()).unwrap();
        let knot = 18.0 / (1.0 + d);
        let h = 1e-4;
        for i in 0..3 {
            let d2 = est.overflow(i, knot - h) + est.overflow(i, knot + h) - 2.0 * est.overflow(i, knot);
            let rho = s.rho()[i];
            let t = est.threshold(i, knot);
            let tail = crate::stoploss::std_upper_tail(t - s.means()[i]);
            let predicted = -rho * (1.0 + d) * tail * h;
            assert!(d2 < 0.0);
            assert!((d2 - predicted).abs() < 1e-3 * predicted.abs(), "{d2} vs {predicted}");
        }
    }
}
