//! Per-slot workload processes for a single shallow cloudlet.
//!
//! All quantities are in Gigacycles per slot. A slot is one second, so a
//! capacity in Gigacycles/s is also the per-slot service amount.

mod trace;

pub use trace::{load_trace, synthetic_request_counts, write_trace};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{FogError, Result};
use crate::stoploss::ScalarDistribution;

/// Fraction of clamped Gaussian samples above which a warning is attached.
pub const CLAMP_WARN_FRACTION: f64 = 1e-6;

/// How the `variance` of an AR(1) model is interpreted.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ar1Convention {
    /// `variance` is the stationary variance: C(l) = variance * phi^l.
    #[default]
    Stationary,
    /// `variance` is the innovation variance: C(l) = variance * phi^l / (1 - phi^2).
    Innovation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum WorkloadModel {
    GaussianIid {
        mean: f64,
        variance: f64,
    },
    GaussianAr1 {
        mean: f64,
        variance: f64,
        phi: f64,
        #[serde(default)]
        convention: Ar1Convention,
    },
    Uniform {
        low: f64,
        high: f64,
    },
    EmpiricalTrace {
        samples: Vec<f64>,
        cycles_per_task: f64,
    },
}

impl WorkloadModel {
    /// Uniform law with the given mean and variance (half-width sqrt(3 * variance)).
    pub fn uniform_matched(mean: f64, variance: f64) -> Self {
        let half = (3.0 * variance).sqrt();
        WorkloadModel::Uniform {
            low: mean - half,
            high: mean + half,
        }
    }

    pub fn ar1(mean: f64, variance: f64, phi: f64) -> Self {
        WorkloadModel::GaussianAr1 {
            mean,
            variance,
            phi,
            convention: Ar1Convention::Stationary,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            WorkloadModel::GaussianIid { mean, variance } => {
                finite(&[mean, variance])?;
                if variance <= 0.0 {
                    return Err(FogError::param(format!("variance must be > 0, got {variance}")));
                }
            }
            WorkloadModel::GaussianAr1 {
                mean,
                variance,
                phi,
                ..
            } => {
                finite(&[mean, variance, phi])?;
                if variance <= 0.0 {
                    return Err(FogError::param(format!("variance must be > 0, got {variance}")));
                }
                if phi.abs() >= 1.0 {
                    return Err(FogError::param(format!("|phi| must be < 1, got {phi}")));
                }
            }
            WorkloadModel::Uniform { low, high } => {
                finite(&[low, high])?;
                // low == high is accepted as a point mass (constant input).
                if low > high {
                    return Err(FogError::param(format!("uniform low {low} > high {high}")));
                }
            }
            WorkloadModel::EmpiricalTrace {
                ref samples,
                cycles_per_task,
            } => {
                if samples.len() < 2 {
                    return Err(FogError::param("trace needs at least 2 samples"));
                }
                if let Some(x) = samples.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    return Err(FogError::param(format!("trace sample {x} is negative or not finite")));
                }
                if !(cycles_per_task > 0.0 && cycles_per_task.is_finite()) {
                    return Err(FogError::param("cycles_per_task must be > 0"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match *self {
            WorkloadModel::GaussianIid { mean, .. } | WorkloadModel::GaussianAr1 { mean, .. } => mean,
            WorkloadModel::Uniform { low, high } => 0.5 * (low + high),
            WorkloadModel::EmpiricalTrace { ref samples, .. } => {
                samples.iter().sum::<f64>() / samples.len() as f64
            }
        }
    }

    /// Marginal law of a single slot's workload.
    pub fn marginal(&self) -> ScalarDistribution {
        match *self {
            WorkloadModel::GaussianIid { mean, variance } => ScalarDistribution::Gaussian { mean, variance },
            WorkloadModel::GaussianAr1 {
                mean,
                variance,
                phi,
                convention,
            } => ScalarDistribution::Gaussian {
                mean,
                variance: stationary_variance(variance, phi, convention),
            },
            WorkloadModel::Uniform { low, high } => ScalarDistribution::Uniform { low, high },
            WorkloadModel::EmpiricalTrace { ref samples, .. } => ScalarDistribution::Empirical {
                samples: samples.clone(),
            },
        }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(
            self,
            WorkloadModel::GaussianIid { .. } | WorkloadModel::GaussianAr1 { .. }
        )
    }
}

fn finite(xs: &[f64]) -> Result<()> {
    match xs.iter().find(|x| !x.is_finite()) {
        Some(x) => Err(FogError::param(format!("non-finite parameter {x}"))),
        None => Ok(()),
    }
}

fn stationary_variance(variance: f64, phi: f64, convention: Ar1Convention) -> f64 {
    match convention {
        Ar1Convention::Stationary => variance,
        Ar1Convention::Innovation => variance / (1.0 - phi * phi),
    }
}

/// Moments of a workload process: mean, variance and autocovariance C(0..=L).
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadStats {
    pub mean: f64,
    pub variance: f64,
    pub autocov: Vec<f64>,
}

impl WorkloadStats {
    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }

    /// C(l), taken as zero beyond the stored lags.
    pub fn autocov_at(&self, lag: usize) -> f64 {
        self.autocov.get(lag).copied().unwrap_or(0.0)
    }
}

/// Analytic moments for parametric models, sample moments for traces.
pub fn stats_of_model(model: &WorkloadModel, max_lag: usize) -> Result<WorkloadStats> {
    model.validate()?;
    let stats = match *model {
        WorkloadModel::GaussianIid { mean, variance } => {
            let mut autocov = vec![0.0; max_lag + 1];
            autocov[0] = variance;
            WorkloadStats {
                mean,
                variance,
                autocov,
            }
        }
        WorkloadModel::GaussianAr1 {
            mean,
            variance,
            phi,
            convention,
        } => {
            let c0 = stationary_variance(variance, phi, convention);
            let autocov = (0..=max_lag)
                .scan(c0, |c, _| {
                    let cur = *c;
                    *c *= phi;
                    Some(cur)
                })
                .collect();
            WorkloadStats {
                mean,
                variance: c0,
                autocov,
            }
        }
        WorkloadModel::Uniform { low, high } => {
            let variance = (high - low).powi(2) / 12.0;
            let mut autocov = vec![0.0; max_lag + 1];
            autocov[0] = variance;
            WorkloadStats {
                mean: 0.5 * (low + high),
                variance,
                autocov,
            }
        }
        WorkloadModel::EmpiricalTrace { ref samples, .. } => sample_stats(samples, max_lag)?,
    };
    Ok(stats)
}

/// Sample mean and autocovariance with the 1/(N - l) normalization.
pub fn sample_stats(samples: &[f64], max_lag: usize) -> Result<WorkloadStats> {
    let n = samples.len();
    if max_lag >= n {
        return Err(FogError::Range { lag: max_lag, len: n });
    }
    let mean = samples.iter().sum::<f64>() / n as f64;
    let centered: Vec<f64> = samples.iter().map(|x| x - mean).collect();
    let autocov: Vec<f64> = (0..=max_lag)
        .map(|l| {
            let s: f64 = centered[..n - l]
                .iter()
                .zip(&centered[l..])
                .map(|(a, b)| a * b)
                .sum();
            s / (n - l) as f64
        })
        .collect();
    Ok(WorkloadStats {
        mean,
        variance: autocov[0],
        autocov,
    })
}

/// A generated workload series plus the number of samples clamped at zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WorkloadSeries {
    pub samples: Vec<f64>,
    pub clamped: usize,
}

impl WorkloadSeries {
    pub fn clamped_fraction(&self) -> f64 {
        self.clamped as f64 / self.samples.len() as f64
    }

    /// Warning text when more than [`CLAMP_WARN_FRACTION`] of the samples were negative.
    pub fn clamp_warning(&self) -> Option<String> {
        (self.clamped_fraction() > CLAMP_WARN_FRACTION).then(|| {
            format!(
                "{} of {} samples were negative and clamped to 0 (fraction {:.3e})",
                self.clamped,
                self.samples.len(),
                self.clamped_fraction()
            )
        })
    }
}

/// Draws `n_slots` slots of workload. Deterministic in `(model, n_slots, seed)`.
pub fn generate(model: &WorkloadModel, n_slots: usize, seed: u64) -> Result<WorkloadSeries> {
    model.validate()?;
    if n_slots == 0 {
        return Err(FogError::param("n_slots must be >= 1"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut clamped = 0usize;
    let mut clamp = |x: f64| {
        if x < 0.0 {
            clamped += 1;
            0.0
        } else {
            x
        }
    };
    let samples: Vec<f64> = match *model {
        WorkloadModel::GaussianIid { mean, variance } => {
            let sd = variance.sqrt();
            (0..n_slots)
                .map(|_| {
                    let z: f64 = rng.sample(StandardNormal);
                    clamp(mean + sd * z)
                })
                .collect()
        }
        WorkloadModel::GaussianAr1 {
            mean,
            variance,
            phi,
            convention,
        } => {
            let c0 = stationary_variance(variance, phi, convention);
            let innovation_sd = ((1.0 - phi * phi) * c0).sqrt();
            // Warm start from the stationary law.
            let z: f64 = rng.sample(StandardNormal);
            let mut dev = c0.sqrt() * z;
            let mut out = Vec::with_capacity(n_slots);
            out.push(clamp(mean + dev));
            for _ in 1..n_slots {
                let z: f64 = rng.sample(StandardNormal);
                dev = phi * dev + innovation_sd * z;
                out.push(clamp(mean + dev));
            }
            out
        }
        WorkloadModel::Uniform { low, high } => (0..n_slots)
            .map(|_| low + (high - low) * rng.random::<f64>())
            .collect(),
        WorkloadModel::EmpiricalTrace { ref samples, .. } => {
            samples.iter().copied().cycle().take(n_slots).collect()
        }
    };
    Ok(WorkloadSeries { samples, clamped })
}
