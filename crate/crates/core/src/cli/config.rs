//! JSON run configuration.
//!
//! Units: capacities and workloads in Gigacycles (per 1 s slot), deadlines in
//! seconds, horizons in slots.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::fluid_sim::SimOptions;
use crate::gd1::Gd1Config;
use crate::qle::QleConfig;
use crate::scenario::{InputProcess, Scenario};
use crate::workload::{load_trace, Ar1Convention, WorkloadModel};

pub const DEFAULT_SLOTS: usize = 1_000_000;

fn default_slots() -> usize {
    DEFAULT_SLOTS
}

fn default_seed() -> u64 {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn one() -> f64 {
    1.0
}

fn one_u64() -> u64 {
    1
}

fn default_eps_tail() -> f64 {
    1e-3
}

fn default_eps_step() -> f64 {
    0.01
}

fn default_grid_points() -> usize {
    10_000
}

fn default_sim_grid() -> usize {
    81
}

fn default_max_lag() -> usize {
    256
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Defaults to the reference scenario (C = 20, means 4/8/6, Gaussian i.i.d., variance 1).
    #[serde(default)]
    pub scenario: Option<ScenarioSpec>,
    pub experiment: Experiment,
    #[serde(default = "default_slots")]
    pub n_slots: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub budget: f64,
    #[serde(default)]
    pub deadline: f64,
    pub cloudlets: Vec<CloudletSpec>,
}

/// One shallow cloudlet's workload; `trace` paths are relative to the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum CloudletSpec {
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
    Trace {
        path: PathBuf,
        #[serde(default = "one_u64")]
        bucket_s: u64,
        #[serde(default = "one")]
        cycles_per_task: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodName {
    Gd1,
    Qle,
    Sim,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FigureId {
    Fig2,
    Fig3,
    Fig4,
    Fig5,
    Fig6,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Experiment {
    Sweep {
        alpha_grid: Vec<f64>,
        /// Overrides the scenario deadline.
        #[serde(rename = "D", default)]
        deadline: Option<f64>,
        #[serde(default = "default_eps_tail")]
        epsilon_tail: f64,
        /// Estimator inside the Markov bound column.
        #[serde(default)]
        bound_qle: Option<QleConfig>,
    },
    Optimize {
        method: MethodName,
        #[serde(rename = "D", default)]
        deadline: Option<f64>,
        #[serde(default = "default_eps_step")]
        epsilon_step: f64,
        #[serde(default)]
        thresholds: Option<Vec<f64>>,
        /// Scan size; defaults to 10^4 for the analytic methods and 81 for `sim`.
        #[serde(default)]
        grid_points: Option<usize>,
        #[serde(default)]
        qle: Option<QleConfig>,
        #[serde(default)]
        gd1: Option<Gd1Config>,
    },
    DSweep {
        #[serde(rename = "D_list")]
        deadlines: Vec<f64>,
        methods: Vec<MethodName>,
        #[serde(default = "default_eps_step")]
        epsilon_step: f64,
        #[serde(default = "default_grid_points")]
        grid_points: usize,
        /// Grid size on `[0, C)` for the simulation method.
        #[serde(default = "default_sim_grid")]
        sim_grid_points: usize,
        #[serde(default)]
        qle: Option<QleConfig>,
        #[serde(default)]
        gd1: Option<Gd1Config>,
    },
    TraceStats {
        path: PathBuf,
        #[serde(default = "one_u64")]
        bucket_s: u64,
        #[serde(default = "one")]
        cycles_per_task: f64,
        #[serde(default = "default_max_lag")]
        max_lag: usize,
    },
    Reproduce {
        figure: FigureId,
    },
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Sweep { .. } => "sweep",
            Experiment::Optimize { .. } => "optimize",
            Experiment::DSweep { .. } => "d_sweep",
            Experiment::TraceStats { .. } => "trace_stats",
            Experiment::Reproduce { .. } => "reproduce",
        }
    }
}

/// Configuration problem, anchored to a line of the config file when possible.
#[derive(Debug)]
pub struct ConfigError {
    pub path: PathBuf,
    pub line: Option<usize>,
    pub column: Option<usize>,
    pub msg: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.path.display())?;
        if let Some(l) = self.line {
            write!(f, ":{l}")?;
            if let Some(c) = self.column {
                write!(f, ":{c}")?;
            }
        }
        write!(f, ": {}", self.msg)
    }
}

impl std::error::Error for ConfigError {}

/// Parsed configuration together with its source text.
#[derive(Debug, Clone)]
pub struct LoadedConfig {
    pub path: PathBuf,
    pub text: String,
    pub config: RunConfig,
}

impl LoadedConfig {
    pub fn read(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: None,
            column: None,
            msg: e.to_string(),
        })?;
        Self::parse(path, text)
    }

    pub fn parse(path: &Path, text: String) -> Result<Self, ConfigError> {
        let config: RunConfig = serde_json::from_str(&text).map_err(|e| ConfigError {
            path: path.to_path_buf(),
            line: Some(e.line()),
            column: Some(e.column()),
            msg: e.to_string(),
        })?;
        Ok(LoadedConfig {
            path: path.to_path_buf(),
            text,
            config,
        })
    }

    /// Error pointing at the first occurrence of `"key"` in the source.
    pub fn error_at(&self, key: &str, msg: impl Into<String>) -> ConfigError {
        let needle = format!("\"{key}\"");
        let line = self
            .text
            .lines()
            .position(|l| l.contains(&needle))
            .map(|i| i + 1);
        ConfigError {
            path: self.path.clone(),
            line,
            column: None,
            msg: msg.into(),
        }
    }

    fn base_dir(&self) -> PathBuf {
        self.path.parent().map(Path::to_path_buf).unwrap_or_default()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir().join(p)
        }
    }

    /// Builds the scenario, loading any trace files.
    pub fn scenario(&self) -> Result<Scenario, ConfigError> {
        let Some(spec) = &self.config.scenario else {
            return Ok(Scenario::reference(InputProcess::GaussianIid, 0.0));
        };
        if !(spec.budget.is_finite() && spec.budget > 0.0) {
            return Err(self.error_at("budget", format!("budget must be finite and > 0, got {}", spec.budget)));
        }
        if !(spec.deadline.is_finite() && spec.deadline >= 0.0) {
            return Err(self.error_at("deadline", format!("deadline must be finite and >= 0, got {}", spec.deadline)));
        }
        if spec.cloudlets.is_empty() {
            return Err(self.error_at("cloudlets", "at least one cloudlet is required"));
        }
        let mut models = Vec::with_capacity(spec.cloudlets.len());
        for c in &spec.cloudlets {
            let m = match c {
                CloudletSpec::GaussianIid { mean, variance } => WorkloadModel::GaussianIid {
                    mean: *mean,
                    variance: *variance,
                },
                CloudletSpec::GaussianAr1 {
                    mean,
                    variance,
                    phi,
                    convention,
                } => WorkloadModel::GaussianAr1 {
                    mean: *mean,
                    variance: *variance,
                    phi: *phi,
                    convention: *convention,
                },
                CloudletSpec::Uniform { low, high } => WorkloadModel::Uniform { low: *low, high: *high },
                CloudletSpec::Trace {
                    path,
                    bucket_s,
                    cycles_per_task,
                } => load_trace(self.resolve(path), *bucket_s, *cycles_per_task)
                    .map_err(|e| self.error_at("path", e.to_string()))?,
            };
            models.push(m);
        }
        Scenario::new(spec.budget, spec.deadline, models).map_err(|e| self.error_at("scenario", e.to_string()))
    }

    /// Checks value ranges that serde cannot express.
    pub fn validate(&self, scenario: &Scenario) -> Result<(), ConfigError> {
        let c = &self.config;
        if c.n_slots == 0 {
            return Err(self.error_at("n_slots", "n_slots must be >= 1"));
        }
        let budget = scenario.budget();
        let check_d = |key: &str, d: f64| {
            if d.is_finite() && d >= 0.0 {
                Ok(())
            } else {
                Err(self.error_at(key, format!("deadline must be finite and >= 0, got {d}")))
            }
        };
        match &c.experiment {
            Experiment::Sweep {
                alpha_grid,
                deadline,
                epsilon_tail,
                ..
            } => {
                if alpha_grid.is_empty() {
                    return Err(self.error_at("alpha_grid", "alpha_grid must not be empty"));
                }
                if let Some(a) = alpha_grid.iter().find(|a| !(0.0..=budget).contains(*a)) {
                    return Err(self.error_at("alpha_grid", format!("grid value {a} outside [0, {budget}]")));
                }
                if let Some(d) = deadline {
                    check_d("D", *d)?;
                }
                if !(*epsilon_tail > 0.0 && *epsilon_tail < 1.0) {
                    return Err(self.error_at("epsilon_tail", "epsilon_tail must lie in (0, 1)"));
                }
            }
            Experiment::Optimize {
                deadline,
                epsilon_step,
                thresholds,
                grid_points,
                ..
            } => {
                if let Some(d) = deadline {
                    check_d("D", *d)?;
                }
                if !(*epsilon_step > 0.0) {
                    return Err(self.error_at("epsilon_step", "epsilon_step must be > 0"));
                }
                if grid_points.is_some_and(|g| g < 2) {
                    return Err(self.error_at("grid_points", "grid_points must be >= 2"));
                }
                if let Some(th) = thresholds {
                    if th.len() != scenario.num_cloudlets() {
                        return Err(self.error_at(
                            "thresholds",
                            format!("expected {} thresholds, got {}", scenario.num_cloudlets(), th.len()),
                        ));
                    }
                }
            }
            Experiment::DSweep {
                deadlines,
                methods,
                epsilon_step,
                grid_points,
                sim_grid_points,
                ..
            } => {
                if deadlines.is_empty() {
                    return Err(self.error_at("D_list", "D_list must not be empty"));
                }
                for d in deadlines {
                    check_d("D_list", *d)?;
                }
                if methods.is_empty() {
                    return Err(self.error_at("methods", "methods must not be empty"));
                }
                if !(*epsilon_step > 0.0) {
                    return Err(self.error_at("epsilon_step", "epsilon_step must be > 0"));
                }
                if *grid_points < 2 || *sim_grid_points < 1 {
                    return Err(self.error_at("grid_points", "grid sizes must be positive"));
                }
            }
            Experiment::TraceStats { path, bucket_s, .. } => {
                if !self.resolve(path).exists() {
                    return Err(self.error_at("path", format!("trace file {} not found", path.display())));
                }
                if *bucket_s == 0 {
                    return Err(self.error_at("bucket_s", "bucket_s must be >= 1"));
                }
            }
            Experiment::Reproduce { .. } => {}
        }
        Ok(())
    }

    /// SHA-256 of the effective configuration (after command-line overrides),
    /// excluding the output directory.
    pub fn hash(&self) -> String {
        let mut effective = self.config.clone();
        effective.output_dir = PathBuf::new();
        let canonical = serde_json::to_vec(&effective).expect("config serializes");
        let digest = Sha256::digest(&canonical);
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn sim_options(&self) -> SimOptions {
        SimOptions::new(self.config.n_slots, self.config.seed)
    }
}
