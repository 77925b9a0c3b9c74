//! Per-axis MAE/STD and aggregate RMSE over logged runs.
//!
//! Errors are pooled over all scored samples of all trials. Per-axis
//! statistics are reported in task axes (X transverse, Y along the
//! workspace axis, Z the remaining transverse direction); STD is the
//! population standard deviation of the signed errors. The aggregate RMSE
//! is the root of the mean squared per-axis error with the three axes
//! averaged inside the mean.

use crate::kinematics::pose_error;
use crate::{Error, Result};

use super::runner::LoggedRun;

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MetricsReport {
    pub controller: String,
    pub trajectory: String,
    pub trials: usize,
    pub samples_scored: usize,
    /// Task-axis order: pos X, pos Y, pos Z (mm), ori X, ori Y, ori Z (deg).
    pub mae: [f64; 6],
    pub std: [f64; 6],
    pub rmse_pos: f64,
    pub rmse_ori: f64,
    /// Wall-clock mean control-step time; non-deterministic, excluded from
    /// reproducibility comparisons.
    pub latency_ms: f64,
    pub degraded_trials: usize,
}

/// Robot-frame pose error (desired - measured) remapped to task axes:
/// positions (x_r, z_r, y_r), orientations about the matching axes.
pub(crate) fn task_error(desired: &crate::kinematics::Pose, measured: &crate::kinematics::Pose) -> [f64; 6] {
    let e = pose_error(desired, measured);
    [e[0], e[2], e[1], e[3], e[5], e[4]]
}

pub fn compute_metrics(runs: &[LoggedRun]) -> Result<MetricsReport> {
    if runs.is_empty() {
        return Err(Error::invalid_argument("no runs to score"));
    }
    let controller = runs[0].controller.clone();
    let trajectory = runs[0].trajectory.clone();

    let mut errors: Vec<[f64; 6]> = Vec::new();
    let mut latency_sum = 0.0;
    let mut degraded = 0;
    for run in runs {
        if run.controller != controller || run.trajectory != trajectory {
            return Err(Error::invalid_argument(
                "runs mix controllers or trajectories",
            ));
        }
        for sample in &run.samples[run.metrics_start.min(run.samples.len())..] {
            errors.push(task_error(&sample.desired_pose, &sample.measured_pose));
        }
        latency_sum += run.mean_latency_ms;
        if run.degraded {
            degraded += 1;
        }
    }
    if errors.is_empty() {
        return Err(Error::invalid_argument("runs contain no scored samples"));
    }

    let n = errors.len() as f64;
    let mut mae = [0.0; 6];
    let mut mean = [0.0; 6];
    for e in &errors {
        for a in 0..6 {
            mae[a] += e[a].abs();
            mean[a] += e[a];
        }
    }
    for a in 0..6 {
        mae[a] /= n;
        mean[a] /= n;
    }
    let mut var = [0.0; 6];
    for e in &errors {
        for a in 0..6 {
            let d = e[a] - mean[a];
            var[a] += d * d;
        }
    }
    let mut std = [0.0; 6];
    for a in 0..6 {
        std[a] = (var[a] / n).sqrt();
    }

    let mut pos_sq = 0.0;
    let mut ori_sq = 0.0;
    for e in &errors {
        pos_sq += (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 3.0;
        ori_sq += (e[3] * e[3] + e[4] * e[4] + e[5] * e[5]) / 3.0;
    }

    Ok(MetricsReport {
        controller,
        trajectory,
        trials: runs.len(),
        samples_scored: errors.len(),
        mae,
        std,
        rmse_pos: (pos_sq / n).sqrt(),
        rmse_ori: (ori_sq / n).sqrt(),
        latency_ms: latency_sum / runs.len() as f64,
        degraded_trials: degraded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::TrajectorySample;
    use crate::kinematics::Pose;
    use crate::plant::ActuatorCommand;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn run_from_errors(errors: &[[f64; 6]]) -> LoggedRun {
        // Build samples whose desired-minus-measured equals the given
        // task-axis error rows.
        let samples = errors
            .iter()
            .enumerate()
            .map(|(k, e)| {
                let desired = Pose::new(Vector3::new(1.0, 2.0, 70.0), Vector3::new(5.0, -3.0, 8.0));
                let measured = Pose::new(
                    desired.position - Vector3::new(e[0], e[2], e[1]),
                    desired.orientation - Vector3::new(e[3], e[5], e[4]),
                );
                TrajectorySample {
                    t: k as f64 * 0.2,
                    desired_pose: desired,
                    measured_pose: measured,
                    command: ActuatorCommand::zeros(6),
                }
            })
            .collect();
        LoggedRun {
            controller: "test".into(),
            trajectory: "test".into(),
            trial: 0,
            samples,
            metrics_start: 0,
            degraded: false,
            mean_latency_ms: 1.0,
        }
    }

    #[test]
    fn constant_error_closed_form() {
        let run = run_from_errors(&[[1.0, 0.0, 0.0, 0.0, 0.0, 0.0]; 8]);
        let m = compute_metrics(&[run]).unwrap();
        assert_relative_eq!(m.mae[0], 1.0, epsilon = 1e-12);
        assert_relative_eq!(m.std[0], 0.0, epsilon = 1e-12);
        assert_relative_eq!(m.rmse_pos, (1.0f64 / 3.0).sqrt(), epsilon = 1e-12);
        assert_relative_eq!(m.rmse_pos, 0.57735, epsilon = 1e-5);
        assert_relative_eq!(m.rmse_ori, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_error_all_zero() {
        let run = run_from_errors(&[[0.0; 6]; 5]);
        let m = compute_metrics(&[run]).unwrap();
        assert_eq!(m.mae, [0.0; 6]);
        assert_eq!(m.std, [0.0; 6]);
        assert_eq!(m.rmse_pos, 0.0);
        assert_eq!(m.rmse_ori, 0.0);
    }

    #[test]
    fn matches_spreadsheet_oracle() {
        // Brute-force oracle over a hand-built 4-sample log.
        let errors = [
            [0.5, -0.3, 0.2, 1.0, -2.0, 0.5],
            [-0.1, 0.4, -0.6, 0.0, 1.5, -1.0],
            [0.9, 0.0, 0.3, -0.7, 0.2, 2.0],
            [-0.4, -0.8, 0.1, 0.3, -0.9, -0.2],
        ];
        let run = run_from_errors(&errors);
        let m = compute_metrics(&[run]).unwrap();
        for a in 0..6 {
            let vals: Vec<f64> = errors.iter().map(|e| e[a]).collect();
            let n = vals.len() as f64;
            let mae = vals.iter().map(|v| v.abs()).sum::<f64>() / n;
            let mean = vals.iter().sum::<f64>() / n;
            let std =
                (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
            assert_relative_eq!(m.mae[a], mae, epsilon = 1e-12);
            assert_relative_eq!(m.std[a], std, epsilon = 1e-12);
        }
        let rmse_pos = (errors
            .iter()
            .map(|e| (e[0] * e[0] + e[1] * e[1] + e[2] * e[2]) / 3.0)
            .sum::<f64>()
            / 4.0)
            .sqrt();
        assert_relative_eq!(m.rmse_pos, rmse_pos, epsilon = 1e-12);
    }

    #[test]
    fn rmse_invariant_under_axis_relabeling() {
        let errors = [[0.5, -0.3, 0.2, 1.0, -2.0, 0.5], [0.1, 0.2, 0.3, 0.4, 0.5, 0.6]];
        let permuted: Vec<[f64; 6]> = errors
            .iter()
            .map(|e| [e[2], e[0], e[1], e[5], e[3], e[4]])
            .collect();
        let a = compute_metrics(&[run_from_errors(&errors)]).unwrap();
        let b = compute_metrics(&[run_from_errors(&permuted)]).unwrap();
        assert_relative_eq!(a.rmse_pos, b.rmse_pos, epsilon = 1e-12);
        assert_relative_eq!(a.rmse_ori, b.rmse_ori, epsilon = 1e-12);
    }

    #[test]
    fn empty_runs_rejected() {
        assert!(compute_metrics(&[]).is_err());
    }
}
