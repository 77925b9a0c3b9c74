//! Reference trajectories, the closed-loop trial runner and the
//! MAE/STD/RMSE reporting.
//!
//! Trajectories are specified in a task frame anchored at the
//! straight-configuration tool tip: task +Y runs along the robot axis into
//! the workspace (toward the base), task X is the robot x axis and task Z
//! the robot y axis. Desired poses handed to controllers are expressed in
//! the robot base frame; per-axis metrics are reported in task axes.

mod metrics;
mod report;
mod runner;
mod trajectories;

pub use metrics::{compute_metrics, MetricsReport};
pub use report::{
    benchmark_json, error_log_csv, task_table_csv, validate_benchmark_json, BenchmarkReport,
    LatencyEntry,
};
pub use runner::{run_trials, LoggedRun, TrialOptions};
pub use trajectories::{
    lissajous, nested_rectangle, orientation_cone, ConePoint, ReferenceTrajectory,
};
