use serde::{Deserialize, Serialize};

use crate::error::{FogError, Result};
use crate::workload::WorkloadModel;

/// Slack allowed on the stability condition sum(mean) <= C.
const STABILITY_TOL: f64 = 1e-9;

/// A planning instance: M shallow cloudlets sharing budget `C` with one deep cloudlet.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    budget: f64,
    deadline: f64,
    models: Vec<WorkloadModel>,
    means: Vec<f64>,
    rho: Vec<f64>,
}

impl Scenario {
    pub fn new(budget: f64, deadline: f64, models: Vec<WorkloadModel>) -> Result<Self> {
        if models.is_empty() {
            return Err(FogError::param("scenario needs at least one cloudlet"));
        }
        if !(budget.is_finite() && budget > 0.0) {
            return Err(FogError::param(format!("budget must be > 0, got {budget}")));
        }
        if !(deadline.is_finite() && deadline >= 0.0) {
            return Err(FogError::param(format!("deadline must be >= 0, got {deadline}")));
        }
        for m in &models {
            m.validate()?;
        }
        let means: Vec<f64> = models.iter().map(WorkloadModel::mean).collect();
        if let Some((i, m)) = means.iter().enumerate().find(|(_, m)| **m <= 0.0) {
            return Err(FogError::param(format!("cloudlet {i} has non-positive mean {m}")));
        }
        let total: f64 = means.iter().sum();
        if total > budget * (1.0 + STABILITY_TOL) {
            return Err(FogError::param(format!(
                "unstable scenario: total mean workload {total} exceeds budget {budget}"
            )));
        }
        let rho = means.iter().map(|m| m / total).collect();
        Ok(Scenario {
            budget,
            deadline,
            models,
            means,
            rho,
        })
    }

    /// The three-cloudlet setup used throughout the experiments: C = 20,
    /// means (4, 8, 6) Gigacycles, unit variance.
    pub fn reference(process: InputProcess, deadline: f64) -> Self {
        let models = [4.0, 8.0, 6.0]
            .into_iter()
            .map(|mean| process.model(mean, 1.0))
            .collect();
        Scenario::new(20.0, deadline, models).expect("reference scenario is valid")
    }

    pub fn with_deadline(&self, deadline: f64) -> Result<Self> {
        Scenario::new(self.budget, deadline, self.models.clone())
    }

    pub fn budget(&self) -> f64 {
        self.budget
    }

    pub fn deadline(&self) -> f64 {
        self.deadline
    }

    pub fn models(&self) -> &[WorkloadModel] {
        &self.models
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn num_cloudlets(&self) -> usize {
        self.models.len()
    }

    pub fn total_mean(&self) -> f64 {
        self.means.iter().sum()
    }

    pub(crate) fn check_alpha(&self, alpha: f64) -> Result<()> {
        if !(0.0..=self.budget).contains(&alpha) {
            return Err(FogError::domain(format!("alpha {alpha} outside [0, {}]", self.budget)));
        }
        Ok(())
    }
}

/// Input processes of the synthetic experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputProcess {
    GaussianIid,
    GaussianAr1,
    Uniform,
}

impl InputProcess {
    pub const ALL: [InputProcess; 3] = [InputProcess::GaussianAr1, InputProcess::GaussianIid, InputProcess::Uniform];

    /// AR(1) uses phi = 0.3; uniform is matched to mean and variance.
    pub fn model(self, mean: f64, variance: f64) -> WorkloadModel {
        match self {
            InputProcess::GaussianIid => WorkloadModel::GaussianIid { mean, variance },
            InputProcess::GaussianAr1 => WorkloadModel::ar1(mean, variance, 0.3),
            InputProcess::Uniform => WorkloadModel::uniform_matched(mean, variance),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            InputProcess::GaussianIid => "gaussian_iid",
            InputProcess::GaussianAr1 => "gaussian_ar1",
            InputProcess::Uniform => "uniform",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn weights_normalize() {
        let s = Scenario::reference(InputProcess::Uniform, 0.1);
        assert!((s.rho().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((s.rho()[0] - 4.0 / 18.0).abs() < 1e-15);
        assert_eq!(s.total_mean(), 18.0);
    }

    #[test]
    fn rejects_unstable_and_bad_input() {
        let m = |mean| WorkloadModel::GaussianIid { mean, variance: 1.0 };
        assert!(Scenario::new(10.0, 0.0, vec![m(6.0), m(6.0)]).is_err());
        assert!(Scenario::new(10.0, -1.0, vec![m(1.0)]).is_err());
        assert!(Scenario::new(10.0, 0.0, vec![]).is_err());
        assert!(Scenario::new(10.0, 0.0, vec![m(-1.0)]).is_err());
        assert!(Scenario::new(12.0, 0.0, vec![m(6.0), m(6.0)]).is_ok());
    }
}
