//! Receding-horizon control with a linearized prediction model: the
//! predicted pose walk is `X(k+i) = X(k) + J * sum of du`, the cost sums
//! weighted squared tracking errors plus an input-change penalty, and only
//! the first increment of each solve is applied.

use nalgebra::{DMatrix, DVector};

use super::{
    error_internal, jacobian_counts, q_est_from_counts, ControlLimits, ControlOutput, Controller,
    ControllerTiming, ErrorWeights, ACTUATED,
};
use crate::kinematics::{Pose, SegmentGeometry};
use crate::plant::{ActuatorCommand, PlantConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    /// Prediction horizon in control ticks.
    pub horizon: usize,
    pub weights: ErrorWeights,
    /// Input-change penalty (diagonal of P), per squared count.
    pub input_penalty: f64,
    /// Per-tick input-change bound in counts.
    pub du_limit: f64,
    /// Number of sequential re-linearizations per tick.
    pub iterations: usize,
}

impl Default for MpcConfig {
    fn default() -> Self {
        MpcConfig {
            horizon: 5,
            weights: ErrorWeights::default(),
            input_penalty: 1e-4,
            du_limit: 2_500.0,
            iterations: 2,
        }
    }
}

pub struct MpcController {
    cfg: MpcConfig,
    limits: ControlLimits,
    plant_cfg: PlantConfig,
    geometry: SegmentGeometry,
    command: Vec<f64>,
    timing: ControllerTiming,
}

impl MpcController {
    pub fn new(
        cfg: MpcConfig,
        limits: ControlLimits,
        plant_cfg: PlantConfig,
        geometry: SegmentGeometry,
    ) -> Self {
        MpcController {
            cfg,
            limits,
            plant_cfg,
            geometry,
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
        }
    }

    /// Solve the block least-squares problem for the whole horizon with a
    /// frozen Jacobian; returns the stacked increments.
    fn solve_horizon(
        &self,
        j: &DMatrix<f64>,
        errors: &[nalgebra::Vector6<f64>],
    ) -> Result<DVector<f64>> {
        let n = errors.len();
        let m = ACTUATED.len();
        let q_diag = self.cfg.weights.diagonal();
        // Predicted error at step i: e_i - J * sum_{k <= i} du_k. Stack A
        // with block (i, k) = J for k <= i, weighted rows.
        let mut a = DMatrix::zeros(6 * n, m * n);
        let mut b = DVector::zeros(6 * n);
        for i in 0..n {
            for r in 0..6 {
                let w = q_diag[r].sqrt();
                b[6 * i + r] = w * errors[i][r];
                for k in 0..=i {
                    for c in 0..m {
                        a[(6 * i + r, m * k + c)] = w * j[(r, c)];
                    }
                }
            }
        }
        let scales = super::column_scales(j, &q_diag);
        let mut h = &a.transpose() * &a;
        for d in 0..m * n {
            let sc = scales[d % m];
            h[(d, d)] += self.cfg.input_penalty * sc * sc;
        }
        let g = a.transpose() * b;
        let chol = h
            .cholesky()
            .ok_or_else(|| Error::numerical("MPC normal equations not positive definite"))?;
        let du: DVector<f64> = chol.solve(&g);
        if du.iter().any(|x| !x.is_finite()) {
            return Err(Error::numerical("non-finite MPC solution"));
        }
        Ok(du)
    }
}

impl Controller for MpcController {
    fn name(&self) -> &'static str {
        "mpc"
    }

    fn reset(&mut self, initial_command: &ActuatorCommand) {
        self.command = initial_command.counts.clone();
        self.command.resize(6, 0.0);
        self.timing = ControllerTiming::default();
    }

    fn compute(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput> {
        if reference.is_empty() {
            return Err(Error::invalid_argument("empty reference"));
        }
        let n = self.cfg.horizon.max(1);
        // Pad the preview by repeating the last reference pose.
        let horizon: Vec<&Pose> = (0..n)
            .map(|i| reference.get(i).unwrap_or_else(|| reference.last().expect("non-empty")))
            .collect();
        let errors: Vec<nalgebra::Vector6<f64>> = horizon
            .iter()
            .map(|r| error_internal(r, measured))
            .collect();
        if errors
            .iter()
            .any(|e| e.iter().any(|x| !x.is_finite()))
        {
            let mut out = ControlOutput::new(self.command.clone());
            out.singular = true;
            return Ok(out);
        }

        let mut q_lin = q_est_from_counts(&self.command, &self.plant_cfg);
        let mut first = [0.0; ACTUATED.len()];
        let mut solver_failed = false;
        for _ in 0..self.cfg.iterations.max(1) {
            let j = jacobian_counts(&q_lin, &self.geometry, &self.plant_cfg);
            match self.solve_horizon(&j, &errors) {
                Ok(du) => {
                    for c in 0..ACTUATED.len() {
                        first[c] = du[c].clamp(-self.cfg.du_limit, self.cfg.du_limit);
                    }
                    // Re-linearize at the configuration after the first
                    // step.
                    let mut trial = self.command.clone();
                    for (c, slot) in ACTUATED.iter().enumerate() {
                        trial[*slot] += first[c];
                    }
                    q_lin = q_est_from_counts(&trial, &self.plant_cfg);
                }
                Err(_) => {
                    solver_failed = true;
                    first = [0.0; ACTUATED.len()];
                    break;
                }
            }
        }

        let mut proposed = self.command.clone();
        for (c, slot) in ACTUATED.iter().enumerate() {
            proposed[*slot] += first[c];
        }
        let (clamped, saturated) = self.limits.apply(&self.command, &proposed);
        self.command = clamped;
        let mut out = ControlOutput::new(self.command.clone());
        out.saturated = saturated;
        out.singular = solver_failed;
        Ok(out)
    }

    fn timing(&self) -> ControllerTiming {
        self.timing
    }

    fn timing_mut(&mut self) -> &mut ControllerTiming {
        &mut self.timing
    }
}
