//! Resolved-rate control: weighted damped-least-squares inverse of the
//! count-space Jacobian.


use super::{
    error_internal, jacobian_counts, q_est_from_counts, weighted_damped_step, ControlLimits,
    ControlOutput, Controller, ControllerTiming, ErrorWeights, ACTUATED,
};
use crate::kinematics::{Pose, SegmentGeometry};
use crate::plant::{ActuatorCommand, PlantConfig};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct JacobianConfig {
    /// Damped-least-squares factor.
    pub damping: f64,
    /// Step gain on the resolved increment.
    pub gain: f64,
    pub weights: ErrorWeights,
    /// Condition-number guard on the weighted Jacobian.
    pub max_condition: f64,
}

impl Default for JacobianConfig {
    fn default() -> Self {
        JacobianConfig {
            damping: 0.01,
            gain: 1.0,
            weights: ErrorWeights::default(),
            max_condition: 1e8,
        }
    }
}

pub struct JacobianController {
    cfg: JacobianConfig,
    limits: ControlLimits,
    plant_cfg: PlantConfig,
    geometry: SegmentGeometry,
    command: Vec<f64>,
    timing: ControllerTiming,
}

impl JacobianController {
    pub fn new(
        cfg: JacobianConfig,
        limits: ControlLimits,
        plant_cfg: PlantConfig,
        geometry: SegmentGeometry,
    ) -> Self {
        JacobianController {
            cfg,
            limits,
            plant_cfg,
            geometry,
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
        }
    }

    pub fn command(&self) -> &[f64] {
        &self.command
    }
}

impl Controller for JacobianController {
    fn name(&self) -> &'static str {
        "jacobian"
    }

    fn reset(&mut self, initial_command: &ActuatorCommand) {
        self.command = initial_command.counts.clone();
        self.command.resize(6, 0.0);
        self.timing = ControllerTiming::default();
    }

    fn compute(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput> {
        let desired = reference
            .first()
            .ok_or_else(|| Error::invalid_argument("empty reference"))?;
        let e = error_internal(desired, measured);
        let q_est = q_est_from_counts(&self.command, &self.plant_cfg);
        let j = jacobian_counts(&q_est, &self.geometry, &self.plant_cfg);

        // Condition guard on the weighted Jacobian.
        let q_diag = self.cfg.weights.diagonal();
        let mut weighted = j.clone();
        for r in 0..6 {
            let w = q_diag[r].sqrt();
            for c in 0..weighted.ncols() {
                weighted[(r, c)] *= w;
            }
        }
        let svd = weighted.svd(false, false);
        let smax = svd.singular_values.max();
        let smin = svd.singular_values.min();
        if !smax.is_finite() || !e.iter().all(|x| x.is_finite()) || smin <= 0.0 || smax / smin > self.cfg.max_condition
        {
            let mut out = ControlOutput::new(self.command.clone());
            out.singular = true;
            return Ok(out);
        }

        let du = weighted_damped_step(&j, &e, &q_diag, self.cfg.damping)?;
        let mut proposed = self.command.clone();
        for (slot, d) in ACTUATED.iter().zip(du.iter()) {
            proposed[*slot] += self.cfg.gain * d;
        }
        let (clamped, saturated) = self.limits.apply(&self.command, &proposed);
        self.command = clamped;
        let mut out = ControlOutput::new(self.command.clone());
        out.saturated = saturated;
        Ok(out)
    }

    fn timing(&self) -> ControllerTiming {
        self.timing
    }

    fn timing_mut(&mut self) -> &mut ControllerTiming {
        &mut self.timing
    }
}
