//! Stop-loss expectations `E(X - t)+` for the marginal workload laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{FogError, Result};

pub(crate) const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;

/// Standard normal density.
pub(crate) fn std_pdf(z: f64) -> f64 {
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// Standard normal upper tail `P(Z > z)`.
pub(crate) fn std_upper_tail(z: f64) -> f64 {
    0.5 * erfc(z / std::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ScalarDistribution {
    Gaussian { mean: f64, variance: f64 },
    Uniform { low: f64, high: f64 },
    Empirical { samples: Vec<f64> },
}

impl ScalarDistribution {
    pub fn validate(&self) -> Result<()> {
        match self {
            ScalarDistribution::Gaussian { mean, variance } => {
                if !(mean.is_finite() && variance.is_finite() && *variance > 0.0) {
                    return Err(FogError::param(format!("gaussian needs finite mean and variance > 0, got ({mean}, {variance})")));
                }
            }
            ScalarDistribution::Uniform { low, high } => {
                if !(low.is_finite() && high.is_finite() && low <= high) {
                    return Err(FogError::param(format!("uniform needs low <= high, got ({low}, {high})")));
                }
            }
            ScalarDistribution::Empirical { samples } => {
                if samples.is_empty() || samples.iter().any(|x| !x.is_finite()) {
                    return Err(FogError::param("empirical distribution needs finite samples"));
                }
            }
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        match self {
            ScalarDistribution::Gaussian { mean, .. } => *mean,
            ScalarDistribution::Uniform { low, high } => 0.5 * (low + high),
            ScalarDistribution::Empirical { samples } => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            ScalarDistribution::Gaussian { mean, variance } => {
                let z: f64 = rng.sample(StandardNormal);
                mean + variance.sqrt() * z
            }
            ScalarDistribution::Uniform { low, high } => low + (high - low) * rng.random::<f64>(),
            ScalarDistribution::Empirical { samples } => samples[rng.random_range(0..samples.len())],
        }
    }
}

/// `E(X - t)+`: closed form for Gaussian and uniform, plug-in mean for empirical.
pub fn stop_loss(dist: &ScalarDistribution, t: f64) -> Result<f64> {
    dist.validate()?;
    Ok(stop_loss_unchecked(dist, t))
}

pub(crate) fn stop_loss_unchecked(dist: &ScalarDistribution, t: f64) -> f64 {
    match dist {
        ScalarDistribution::Gaussian { mean, variance } => {
            let sd = variance.sqrt();
            let z = (t - mean) / sd;
            (mean - t) * std_upper_tail(z) + sd * std_pdf(z)
        }
        ScalarDistribution::Uniform { low, high } => {
            if t >= *high {
                0.0
            } else if t <= *low {
                0.5 * (low + high) - t
            } else {
                (high - t).powi(2) / (2.0 * (high - low))
            }
        }
        ScalarDistribution::Empirical { samples } => {
            samples.iter().map(|x| (x - t).max(0.0)).sum::<f64>() / samples.len() as f64
        }
    }
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_err: f64,
}

/// Bufferless average loss `E((sum_i max(X_i, rho_i * alpha) - C)+)` by Monte
/// Carlo. Stream `i` is seeded with `seed + i`, so calls sharing a seed use
/// the same draws at every `alpha`.
pub fn max_mix_loss_mc(
    dists: &[ScalarDistribution],
    rho: &[f64],
    alpha: f64,
    budget: f64,
    n_samples: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n_samples == 0 {
        return Err(FogError::domain("n_samples must be > 0"));
    }
    if dists.len() != rho.len() || dists.is_empty() {
        return Err(FogError::param("need one weight per distribution"));
    }
    if !(0.0..=budget).contains(&alpha) {
        return Err(FogError::domain(format!("alpha {alpha} outside [0, {budget}]")));
    }
    for d in dists {
        d.validate()?;
    }
    let mut totals = vec![0.0; n_samples];
    for (i, (d, r)) in dists.iter().zip(rho).enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(i as u64));
        let floor = r * alpha;
        for slot in totals.iter_mut() {
            *slot += d.sample(&mut rng).max(floor);
        }
    }
    let n = n_samples as f64;
    let losses = totals.iter().map(|s| (s - budget).max(0.0));
    let (sum, sum_sq) = losses.fold((0.0, 0.0), |(a, b), x| (a + x, b + x * x));
    let mean = sum / n;
    let var = if n_samples > 1 {
        ((sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
    } else {
        0.0
    };
    Ok(McEstimate {
        mean,
        std_err: (var / n).sqrt(),
    })
}
