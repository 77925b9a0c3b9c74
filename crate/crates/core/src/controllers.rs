//! Five pose controllers behind one interface: resolved-rate Jacobian
//! control, receding-horizon MPC, a feedforward error network and the two
//! recurrent (LSTM/GRU) inverse-kinematics networks.
//!
//! Model-based controllers estimate the configuration by inverting the
//! ideal, hysteresis-free tendon map from their own commanded counts; the
//! transmission lag and drift are exactly the model error the learning
//! controllers get to exploit.
//!
//! Controllers that bend the robot actuate in tendon/count space through
//! the smooth bending-vector Jacobian, which stays regular at the straight
//! configuration where the (theta, delta) parameterization is singular.

use std::time::Instant;

use nalgebra::{DMatrix, DVector, Vector6};

use crate::kinematics::{pose_error, ConfigSpace, Pose, SegmentGeometry};
use crate::plant::{tendon_to_config, ActuatorCommand, PlantConfig, TENDON_CHANNELS};
use crate::{Error, Result};

mod fnn;
mod jacobian;
mod mpc;
mod rnn;

pub use fnn::FnnController;
pub use jacobian::{JacobianConfig, JacobianController};
pub use mpc::{MpcConfig, MpcController};
pub use rnn::RnnController;

/// Absolute and per-step command limits shared by every controller.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlLimits {
    pub count_limit: f64,
    /// Maximum change per control tick, counts.
    pub rate_limit: f64,
}

impl Default for ControlLimits {
    fn default() -> Self {
        ControlLimits {
            count_limit: 50_000.0,
            rate_limit: 2_500.0,
        }
    }
}

impl ControlLimits {
    /// Clamp a proposed command against the previous one; returns the
    /// clamped command and whether any limit was hit.
    pub fn apply(&self, previous: &[f64], proposed: &[f64]) -> (Vec<f64>, bool) {
        let mut saturated = false;
        let out = previous
            .iter()
            .zip(proposed.iter())
            .map(|(prev, want)| {
                let step = (want - prev).clamp(-self.rate_limit, self.rate_limit);
                let v = (prev + step).clamp(-self.count_limit, self.count_limit);
                if (v - want).abs() > 1e-9 {
                    saturated = true;
                }
                v
            })
            .collect();
        (out, saturated)
    }
}

/// Wall-clock accumulator for the control-step computation.
#[derive(Debug, Clone, Copy, Default)]
pub struct ControllerTiming {
    pub total_ms: f64,
    pub steps: usize,
}

impl ControllerTiming {
    pub fn mean_ms(&self) -> f64 {
        if self.steps == 0 {
            0.0
        } else {
            self.total_ms / self.steps as f64
        }
    }
}

/// One control tick's result.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub command: ActuatorCommand,
    /// A rate or absolute command limit was hit.
    pub saturated: bool,
    /// The solver refused the step (ill-conditioned or non-finite).
    pub singular: bool,
    /// The history window was zero-padded (trial start).
    pub padded: bool,
}

impl ControlOutput {
    fn new(command: Vec<f64>) -> Self {
        ControlOutput {
            command: ActuatorCommand { counts: command },
            saturated: false,
            singular: false,
            padded: false,
        }
    }
}

/// Common interface: given the upcoming reference poses (element 0 is the
/// current desired pose) and the latest measured pose, produce the next
/// absolute motor-count command. Controllers are deterministic functions
/// of their explicit state.
pub trait Controller {
    fn name(&self) -> &'static str;

    /// Clear histories and adopt the plant's current motor counts.
    fn reset(&mut self, initial_command: &ActuatorCommand);

    /// The control law itself; use [`Controller::step`] to get timing.
    fn compute(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput>;

    fn timing(&self) -> ControllerTiming;
    fn timing_mut(&mut self) -> &mut ControllerTiming;

    fn step(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput> {
        let t0 = Instant::now();
        let out = self.compute(reference, measured);
        let elapsed = t0.elapsed().as_secs_f64() * 1e3;
        let timing = self.timing_mut();
        timing.total_ms += elapsed;
        timing.steps += 1;
        out
    }
}

/// Tracking-error weights: position in mm^-2, orientation specified per
/// degree^2 and converted to the internal radian error units.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorWeights {
    pub position: f64,
    pub orientation_per_deg2: f64,
}

impl Default for ErrorWeights {
    fn default() -> Self {
        ErrorWeights {
            position: 1.0,
            orientation_per_deg2: 0.1,
        }
    }
}

impl ErrorWeights {
    /// Diagonal of Q over the internal (mm, rad) error vector.
    pub fn diagonal(&self) -> Vector6<f64> {
        let deg_per_rad = 180.0 / std::f64::consts::PI;
        let ori = self.orientation_per_deg2 * deg_per_rad * deg_per_rad;
        Vector6::new(
            self.position,
            self.position,
            self.position,
            ori,
            ori,
            ori,
        )
    }
}

/// Pose error in internal units: position mm, orientation radians.
pub(crate) fn error_internal(desired: &Pose, measured: &Pose) -> Vector6<f64> {
    let e = pose_error(desired, measured);
    Vector6::new(
        e[0],
        e[1],
        e[2],
        e[3].to_radians(),
        e[4].to_radians(),
        e[5].to_radians(),
    )
}

/// Ideal (hysteresis-free) configuration estimate from commanded counts.
pub(crate) fn q_est_from_counts(counts: &[f64], cfg: &PlantConfig) -> ConfigSpace {
    let mut d = [0.0; TENDON_CHANNELS];
    for (i, slot) in d.iter_mut().enumerate() {
        *slot = counts.get(i).copied().unwrap_or(0.0) * cfg.screw_gain;
    }
    let base_rotation = counts.get(4).copied().unwrap_or(0.0) * cfg.base_rotation_gain;
    let base_translation = counts.get(5).copied().unwrap_or(0.0) * cfg.base_translation_gain;
    tendon_to_config(&d, cfg, base_rotation, base_translation).0
}

/// Count channels the model-based controllers actuate: the four tendon
/// pairs plus base translation. Tracking a transverse position while the
/// tool stays parallel to the workspace axis takes five degrees of
/// freedom, and the hardware's translation stage supplies the fifth. Base
/// rotation stays frozen.
pub(crate) const ACTUATED: [usize; 5] = [0, 1, 2, 3, 5];

/// Jacobian of the tool pose with respect to the actuated motor-count
/// channels, at the ideal configuration estimate. Rows: (mm, rad) per
/// count. The distal channel pair acts in a frame rotated 45 degrees
/// relative to its bending vector, so those two columns mix accordingly;
/// the last column is the base translation axis.
pub(crate) fn jacobian_counts(
    q_est: &ConfigSpace,
    geometry: &SegmentGeometry,
    cfg: &PlantConfig,
) -> DMatrix<f64> {
    let (w1, w2) = crate::kinematics::bending_vectors(q_est);
    let jw = crate::kinematics::jacobian_bending(&w1, &w2, q_est, geometry);
    let scale = cfg.screw_gain / cfg.disk_radius;
    let (sin45, cos45) = std::f64::consts::FRAC_PI_4.sin_cos();
    let mut j = DMatrix::zeros(6, ACTUATED.len());
    for r in 0..6 {
        j[(r, 0)] = jw[(r, 0)] * scale;
        j[(r, 1)] = jw[(r, 1)] * scale;
        j[(r, 2)] = (jw[(r, 2)] * cos45 + jw[(r, 3)] * sin45) * scale;
        j[(r, 3)] = (-jw[(r, 2)] * sin45 + jw[(r, 3)] * cos45) * scale;
    }
    // Base translation moves the whole chain along the base z axis.
    j[(2, 4)] = cfg.base_translation_gain;
    j
}

/// Per-channel equilibration scales: the weighted column norms. Damping
/// and input penalties act on these normalized channels, so a slow axis
/// (the fine-pitch translation stage) is not drowned by the damping term.
pub(crate) fn column_scales(j: &DMatrix<f64>, q_diag: &Vector6<f64>) -> Vec<f64> {
    (0..j.ncols())
        .map(|c| {
            let norm_sq: f64 = (0..6).map(|r| q_diag[r] * j[(r, c)] * j[(r, c)]).sum();
            let n = norm_sq.sqrt();
            if n > 1e-12 {
                n
            } else {
                1.0
            }
        })
        .collect()
}

/// Stack the weighted Jacobian and error and solve the damped normal
/// equations `(J^T Q J + damping^2 S^2) du = J^T Q e` with S the column
/// equilibration scales.
pub(crate) fn weighted_damped_step(
    j: &DMatrix<f64>,
    e: &Vector6<f64>,
    q_diag: &Vector6<f64>,
    damping: f64,
) -> Result<DVector<f64>> {
    let m = j.ncols();
    let scales = column_scales(j, q_diag);
    let mut h = DMatrix::zeros(m, m);
    let mut g = DVector::zeros(m);
    for r in 0..6 {
        for a in 0..m {
            g[a] += j[(r, a)] * q_diag[r] * e[r];
            for b in 0..m {
                h[(a, b)] += j[(r, a)] * q_diag[r] * j[(r, b)];
            }
        }
    }
    for a in 0..m {
        h[(a, a)] += damping * damping * scales[a] * scales[a];
    }
    let chol = h
        .cholesky()
        .ok_or_else(|| Error::numerical("normal equations not positive definite"))?;
    let du: DVector<f64> = chol.solve(&g);
    if du.iter().any(|x| !x.is_finite()) {
        return Err(Error::numerical("non-finite control step"));
    }
    Ok(du)
}

/// Mean wall-clock control-step time over at least 100 trials, in ms.
/// The controller is exercised on a stationary synthetic reference.
pub fn measure_inference_latency(
    controller: &mut dyn Controller,
    trials: usize,
) -> Result<f64> {
    if trials < 100 {
        return Err(Error::invalid_argument("need at least 100 latency trials"));
    }
    controller.reset(&ActuatorCommand::zeros(6));
    *controller.timing_mut() = ControllerTiming::default();
    let desired = Pose::new(
        nalgebra::Vector3::new(3.0, -2.0, 76.0),
        nalgebra::Vector3::new(4.0, -3.0, 1.0),
    );
    let measured = Pose::new(
        nalgebra::Vector3::new(2.5, -1.5, 76.5),
        nalgebra::Vector3::new(3.0, -2.0, 0.5),
    );
    let reference = vec![desired; 8];
    for _ in 0..trials {
        controller.step(&reference, &measured)?;
    }
    Ok(controller.timing().mean_ms())
}
