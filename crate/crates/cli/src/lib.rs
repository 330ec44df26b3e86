//! Config-driven experiment runner for `fpp-lab-core`.
//!
//! An [`ExperimentConfig`] names one experiment kind; [`run`] produces an
//! [`ExperimentReport`] of per-`n` aggregates, per-replica rows, plot-ready
//! tables and named pass/fail verdicts, and [`emit`] writes it to disk.

pub mod config;
pub mod emit;
pub mod report;
pub mod run;
pub mod selftest;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, Thresholds};
pub use emit::{emit, EmitError, Format};
pub use report::{ExperimentReport, Verdict};
pub use run::{run, RunError, RunOptions};

/// Environment variable that overrides every node and vertex budget.
pub const BUDGET_VAR: &str = "FPP_LAB_BUDGET";
