//! Finite-buffer loss probability of a shallow queue from the tail of the
//! matching infinite-buffer G/D/1 queue:
//!
//! `P(alpha) = gamma(alpha) * exp(-min_n M_n(alpha) / 2)`
//!
//! valid while the service `rho_i * alpha` is at least the mean input.

use serde::{Deserialize, Serialize};

use crate::error::{FogError, Result};
use crate::stoploss::{std_pdf, std_upper_tail, INV_SQRT_2PI};
use crate::workload::WorkloadStats;

/// Relative slack when testing `service >= mean`, so `rho_i * sum(mean)`
/// rounding below `mean_i` still counts as the boundary.
const VALIDITY_TOL: f64 = 1e-12;

/// Consecutive increases of `M_n` after which the scan stops.
const RISING_RUN: usize = 50;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Gd1Config {
    /// Largest `n` scanned for the exponent minimum.
    pub n_max: usize,
    /// Autocovariance lags computed per cloudlet; higher lags count as zero.
    pub max_lag: usize,
}

impl Default for Gd1Config {
    fn default() -> Self {
        Gd1Config {
            n_max: 10_000,
            max_lag: 256,
        }
    }
}

fn check_validity(stats: &WorkloadStats, service: f64) -> Result<f64> {
    if service < stats.mean * (1.0 - VALIDITY_TOL) {
        return Err(FogError::Validity {
            service,
            mean: stats.mean,
        });
    }
    if !(stats.variance > 0.0) {
        return Err(FogError::Model { n: 1, value: stats.variance });
    }
    Ok((service - stats.mean).max(0.0))
}

/// `1 - z R(z)` where `R` is the Mills ratio `Q(z) / phi(z)`, for `z >= 0`.
fn mills_complement(z: f64) -> f64 {
    let mills = if z < 5.0 {
        std_upper_tail(z) / std_pdf(z)
    } else {
        // R(z) = 1 / (z + 1 / (z + 2 / (z + 3 / ...)))
        let mut tail = z;
        for k in (1..=80).rev() {
            tail = z + k as f64 / tail;
        }
        1.0 / tail
    };
    1.0 - z * mills
}

/// Tail prefactor `gamma`.
///
/// The integral `int_s^inf (r - s) exp(-(r - m)^2 / 2 s^2) dr` equals
/// `sqrt(2 pi) sigma * E(X - s)+` for `X ~ N(m, sigma^2)`; combined with the
/// `exp((s - m)^2 / 2 sigma^2)` factor this is `sigma * (1 - z R(z)) / (m sqrt(2 pi))`.
pub fn gamma(stats: &WorkloadStats, service: f64) -> Result<f64> {
    let drift = check_validity(stats, service)?;
    let sigma = stats.std_dev();
    let z = drift / sigma;
    Ok(sigma * mills_complement(z) * INV_SQRT_2PI / stats.mean)
}

/// Minimum of `M_n` over `1..=n_max` and the `n` attaining it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExponentMin {
    pub value: f64,
    pub n: usize,
}

/// `min_n (buffer + n (service - mean))^2 / Var(sum of n consecutive inputs)`.
pub fn min_exponent(stats: &WorkloadStats, service: f64, buffer: f64, n_max: usize) -> Result<ExponentMin> {
    let drift = check_validity(stats, service)?;
    if n_max == 0 {
        return Err(FogError::param("n_max must be >= 1"));
    }
    let c0 = stats.autocov_at(0);
    let mut var = 0.0;
    // sum_{l=1}^{n-1} C(l)
    let mut cov_sum = 0.0;
    let mut best = ExponentMin {
        value: f64::INFINITY,
        n: 0,
    };
    let mut prev = f64::INFINITY;
    let mut rising = 0;
    for n in 1..=n_max {
        if n > 1 {
            cov_sum += stats.autocov_at(n - 1);
        }
        var += c0 + 2.0 * cov_sum;
        if !(var > 0.0) {
            return Err(FogError::Model { n, value: var });
        }
        let m = (buffer + n as f64 * drift).powi(2) / var;
        if m < best.value {
            best = ExponentMin { value: m, n };
        }
        rising = if m > prev { rising + 1 } else { 0 };
        if rising >= RISING_RUN {
            break;
        }
        prev = m;
    }
    Ok(best)
}

/// Loss probability of shallow cloudlet `i` with service `rho_i * alpha` and
/// buffer `rho_i * alpha * deadline`, clamped to 1.
pub fn loss_probability(stats: &WorkloadStats, rho_i: f64, alpha: f64, deadline: f64, n_max: usize) -> Result<f64> {
    let service = rho_i * alpha;
    let g = gamma(stats, service)?;
    let exponent = min_exponent(stats, service, service * deadline, n_max)?;
    Ok((g * (-0.5 * exponent.value).exp()).min(1.0))
}

/// Expected per-slot overflow `P_i(alpha) * mean_i`.
pub fn expected_overflow(stats: &WorkloadStats, rho_i: f64, alpha: f64, deadline: f64, n_max: usize) -> Result<f64> {
    Ok(loss_probability(stats, rho_i, alpha, deadline, n_max)? * stats.mean)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::workload::{stats_of_model, WorkloadModel};

    fn iid(mean: f64, variance: f64) -> WorkloadStats {
        stats_of_model(&WorkloadModel::GaussianIid { mean, variance }, 64).unwrap()
    }

    /// Direct evaluation of the defining integral.
    fn gamma_quadrature(mean: f64, sigma: f64, s: f64) -> f64 {
        let pref = ((s - mean).powi(2) / (2.0 * sigma * sigma)).exp() / (mean * (2.0 * std::f64::consts::PI).sqrt() * sigma);
        let f = |r: f64| (r - s) * (-(r - mean).powi(2) / (2.0 * sigma * sigma)).exp();
        pref * integrate(f, s, s + 40.0 * sigma, 1e-15)
    }

    #[test]
    fn gamma_matches_quadrature() {
        for (mean, sigma, s) in [(8.0, 1.0, 8.0), (8.0, 1.0, 9.0), (4.0, 1.0, 4.35), (6.0, 0.5, 7.1), (8.0, 1.0, 12.0)] {
            let closed = gamma(&iid(mean, sigma * sigma), s).unwrap();
            let quad = gamma_quadrature(mean, sigma, s);
            assert!(((closed - quad) / quad).abs() < 1e-8, "({mean},{sigma},{s}): {closed} vs {quad}");
        }
        let at_mean = gamma(&iid(8.0, 1.0), 8.0).unwrap();
        assert!((at_mean - INV_SQRT_2PI / 8.0).abs() < 1e-16);
    }

    #[test]
    fn gamma_translation_only_changes_prefactor() {
        let a = gamma(&iid(8.0, 1.0), 9.0).unwrap() * 8.0;
        let b = gamma(&iid(13.0, 1.0), 14.0).unwrap() * 13.0;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn mills_branches_agree() {
        let below = mills_complement(5.0 - 1e-9);
        let above = mills_complement(5.0);
        assert!(((below - above) / above).abs() < 1e-7, "{below} {above}");
        assert!(mills_complement(40.0) > 0.0);
    }

    #[test]
    fn exponent_iid_bufferless_is_squared_z() {
        let e = min_exponent(&iid(8.0, 1.0), 9.5, 0.0, 10_000).unwrap();
        assert_eq!(e.n, 1);
        assert!((e.value - 2.25).abs() < 1e-15);
    }

    #[test]
    fn exponent_iid_with_buffer() {
        // M_n = (2 + n)^2 / n, minimized at n = 2.
        let e = min_exponent(&iid(8.0, 1.0), 9.0, 2.0, 10_000).unwrap();
        assert_eq!(e.n, 2);
        assert!((e.value - 8.0).abs() < 1e-14);
    }

    #[test]
    fn exponent_without_drift_runs_to_n_max() {
        let e = min_exponent(&iid(8.0, 1.0), 8.0, 3.0, 500).unwrap();
        assert_eq!(e.n, 500);
        assert!((e.value - 9.0 / 500.0).abs() < 1e-15);
    }

    #[test]
    fn exponent_rejects_bad_autocovariance() {
        let stats = WorkloadStats {
            mean: 1.0,
            variance: 1.0,
            autocov: vec![1.0, -0.9],
        };
        assert!(matches!(min_exponent(&stats, 2.0, 0.0, 10), Err(FogError::Model { n: 3, .. })));
    }

    #[test]
    fn below_mean_is_invalid() {
        assert!(matches!(loss_probability(&iid(8.0, 1.0), 1.0, 7.9, 0.1, 100), Err(FogError::Validity { .. })));
        // Rounding at the boundary is tolerated.
        let rho = 8.0 / 18.0;
        assert!(loss_probability(&iid(8.0, 1.0), rho, 18.0, 0.1, 100).is_ok());
    }

    #[test]
    fn probability_vanishes_and_is_monotone() {
        let stats = stats_of_model(&WorkloadModel::ar1(8.0, 1.0, 0.3), 256).unwrap();
        let mut prev = 1.0;
        for k in 0..=200 {
            let alpha = 8.0 + 0.05 * k as f64;
            let p = loss_probability(&stats, 1.0, alpha, 0.1, 10_000).unwrap();
            assert!((0.0..=1.0).contains(&p));
            assert!(p <= prev + 1e-15, "alpha={alpha}");
            prev = p;
        }
        assert!(loss_probability(&stats, 1.0, 30.0, 0.1, 10_000).unwrap() < 1e-30);
    }

    #[test]
    fn bufferless_iid_equals_exact_stop_loss_ratio() {
        use crate::stoploss::{stop_loss, ScalarDistribution};
        let d = ScalarDistribution::Gaussian { mean: 8.0, variance: 1.0 };
        for s in [8.0, 8.5, 9.0, 10.0] {
            let p = loss_probability(&iid(8.0, 1.0), 1.0, s, 0.0, 100).unwrap();
            assert!((p - stop_loss(&d, s).unwrap() / 8.0).abs() < 1e-14);
        }
    }

    #[test]
    fn doubling_n_max_is_stable() {
        let stats = stats_of_model(&WorkloadModel::ar1(6.0, 1.0, 0.3), 256).unwrap();
        for s in [6.01, 6.1, 6.5, 7.0] {
            let a = min_exponent(&stats, s, s * 0.1, 10_000).unwrap().value;
            let b = min_exponent(&stats, s, s * 0.1, 20_000).unwrap().value;
            assert!((a - b).abs() < 1e-12);
        }
    }
}
