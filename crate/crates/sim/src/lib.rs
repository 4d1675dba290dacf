//! Desk-scale closed-loop simulator for the risk-aware local planner.
//!
//! A kinematic vehicle follows the planner's commands exactly while scripted
//! spheres and boxes move through a bounded world. A limited field-of-view
//! sensor feeds surface points with true velocities into a particle field.
//! Runs are pure functions of (scenario, method, seed).

pub mod bench;
pub mod error;
pub mod generate;
pub mod metrics;
pub mod runner;
pub mod scenario;
pub mod sensor;
pub mod world;

pub use bench::{bench, BenchConfig, BenchReport};
pub use error::{SimError, SimResult};
pub use generate::{fusion_trial, random_global, PathConfig};
pub use metrics::{comparison_table, LatencyStats, MethodSummary, RunMetrics};
pub use runner::{run, Method, RunOptions, RunOutput, TraceRow};
pub use scenario::Scenario;
pub use world::{ground_truth_collision, World};
