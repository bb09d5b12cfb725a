//! Capacity provisioning for two-tier edge computing.
//!
//! A budget `C` is split between `M` shallow cloudlets (together `alpha`,
//! shared in proportion to their mean load) and one deep cloudlet
//! (`C - alpha`). This crate simulates the resulting fluid queues, estimates
//! the expected overflow analytically, and searches for the split that
//! minimizes the average lost workload.

pub mod cli;
pub mod error;
pub mod fluid_sim;
pub mod gd1;
pub mod optimizer;
pub mod qle;
pub mod quadrature;
pub mod scenario;
pub mod stoploss;
pub mod workload;

pub use error::{FogError, Result};
pub use fluid_sim::{simulate, sweep, Realization, SimOptions, SimOutput, TwoTier};
pub use optimizer::{OptimizationResult, OverflowMethod};
pub use qle::QleConfig;
pub use scenario::{InputProcess, Scenario};
pub use stoploss::{stop_loss, ScalarDistribution};
pub use workload::{WorkloadModel, WorkloadStats};
