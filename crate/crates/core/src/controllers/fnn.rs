//! Feedforward error-window controller: a dense network maps the stacked
//! recent tip errors to the four tendon-count increments.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::{ControlLimits, ControlOutput, Controller, ControllerTiming};
use crate::kinematics::{pose_error, Pose};
use crate::nn::{infer, Arch, ModelParams};
use crate::plant::{ActuatorCommand, TENDON_CHANNELS};
use crate::{Error, Result};

pub struct FnnController {
    model: Option<ModelParams>,
    limits: ControlLimits,
    /// Most-recent-first measured poses, capacity = error window length.
    pose_history: VecDeque<Pose>,
    command: Vec<f64>,
    timing: ControllerTiming,
}

impl FnnController {
    pub fn new(model: ModelParams, limits: ControlLimits) -> Self {
        FnnController {
            model: Some(model),
            limits,
            pose_history: VecDeque::new(),
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
        }
    }

    /// A controller shell awaiting weights; stepping it is an error.
    pub fn unloaded(limits: ControlLimits) -> Self {
        FnnController {
            model: None,
            limits,
            pose_history: VecDeque::new(),
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
        }
    }

    pub fn set_model(&mut self, model: ModelParams) {
        self.model = Some(model);
    }

    fn window_len(model: &ModelParams) -> usize {
        model.input_size / 6
    }
}

impl Controller for FnnController {
    fn name(&self) -> &'static str {
        "fnn"
    }

    fn reset(&mut self, initial_command: &ActuatorCommand) {
        self.command = initial_command.counts.clone();
        self.command.resize(6, 0.0);
        self.pose_history.clear();
        self.timing = ControllerTiming::default();
    }

    fn compute(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput> {
        let desired = reference
            .first()
            .ok_or_else(|| Error::invalid_argument("empty reference"))?;
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::invalid_state("FNN controller has no model loaded"))?;
        if model.arch != Arch::Fnn {
            return Err(Error::invalid_argument("FNN controller needs an fnn model"));
        }
        let n = Self::window_len(model);

        self.pose_history.push_front(*measured);
        self.pose_history.truncate(n);

        // Stack errors toward the current desired pose, most recent first;
        // missing history entries stay zero.
        let mut stacked = DVector::zeros(6 * n);
        let mut padded = false;
        for j in 0..n {
            match self.pose_history.get(j) {
                Some(pose) => {
                    let e = pose_error(desired, pose);
                    for d in 0..6 {
                        stacked[6 * j + d] = e[d];
                    }
                }
                None => padded = true,
            }
        }

        let increment = infer(model, &[stacked])?;
        if increment.len() != TENDON_CHANNELS {
            return Err(Error::shape_mismatch(format!(
                "FNN model outputs {} channels, expected {TENDON_CHANNELS}",
                increment.len()
            )));
        }
        let mut proposed = self.command.clone();
        for c in 0..TENDON_CHANNELS {
            proposed[c] += increment[c];
        }
        let (clamped, saturated) = self.limits.apply(&self.command, &proposed);
        self.command = clamped;
        let mut out = ControlOutput::new(self.command.clone());
        out.saturated = saturated;
        out.padded = padded;
        Ok(out)
    }

    fn timing(&self) -> ControllerTiming {
        self.timing
    }

    fn timing_mut(&mut self) -> &mut ControllerTiming {
        &mut self.timing
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::Vector3;

    fn some_pose() -> Pose {
        Pose::new(Vector3::new(1.0, -2.0, 78.0), Vector3::new(3.0, 1.0, -2.0))
    }

    #[test]
    fn unloaded_model_is_invalid_state() {
        let mut c = FnnController::unloaded(ControlLimits::default());
        let p = some_pose();
        match c.step(&[p], &p) {
            Err(Error::InvalidState(_)) => {}
            other => panic!("expected invalid state, got {other:?}"),
        }
    }

    #[test]
    fn zero_errors_zero_bias_gives_zero_increment() {
        let model = ModelParams::zeros(Arch::Fnn, 2, 8, 30, 4, 1);
        let mut c = FnnController::new(model, ControlLimits::default());
        c.reset(&ActuatorCommand::zeros(6));
        let p = some_pose();
        let out = c.step(&[p], &p).unwrap();
        assert_eq!(out.command.counts, vec![0.0; 6]);
        assert!(out.padded);
        // After N steps the window is full.
        for _ in 0..5 {
            c.step(&[p], &p).unwrap();
        }
        let out = c.step(&[p], &p).unwrap();
        assert!(!out.padded);
    }

    #[test]
    fn known_toy_net_matches_dense_oracle() {
        // Single dense layer plus linear head evaluated by hand.
        let mut model = ModelParams::zeros(Arch::Fnn, 1, 2, 6, 4, 1);
        if let crate::nn::Layer::Dense(d) = &mut model.layers[0] {
            d.w[(0, 0)] = 0.5; // reads the x error
            d.w[(1, 2)] = -0.25; // reads the z error
        }
        model.head.w[(0, 0)] = 2.0;
        model.head.w[(1, 1)] = 4.0;
        model.head.b[2] = 1.5;

        let mut c = FnnController::new(model, ControlLimits::default());
        c.reset(&ActuatorCommand::zeros(6));
        let measured = some_pose();
        let mut desired = measured;
        desired.position.x += 2.0;
        desired.position.z -= 1.0;
        let out = c.step(&[desired], &measured).unwrap();
        // Window has one real entry: e = (2, 0, -1, 0, 0, 0).
        let h0 = (0.5f64 * 2.0).tanh();
        let h1 = (-0.25f64 * -1.0).tanh();
        assert_relative_eq!(out.command.counts[0], 2.0 * h0, epsilon = 1e-12);
        assert_relative_eq!(out.command.counts[1], 4.0 * h1, epsilon = 1e-12);
        assert_relative_eq!(out.command.counts[2], 1.5, epsilon = 1e-12);
        assert_relative_eq!(out.command.counts[3], 0.0, epsilon = 1e-12);
        // Base channels stay frozen.
        assert_eq!(out.command.counts[4], 0.0);
        assert_eq!(out.command.counts[5], 0.0);
    }
}
