//! Recurrent inverse-kinematics controller: the trained GRU or LSTM maps a
//! window of (pose, previous command) step vectors to the next absolute
//! six-channel motor command. At run time the current step's pose slot
//! carries the desired pose; past steps carry measured poses, as in
//! training.

use std::collections::VecDeque;

use nalgebra::DVector;

use super::{ControlLimits, ControlOutput, Controller, ControllerTiming};
use crate::kinematics::Pose;
use crate::nn::{infer, Arch, ModelParams};
use crate::plant::ActuatorCommand;
use crate::{Error, Result};

/// One past window step: the measured pose at that tick and the command
/// that was already executed when the pose was measured.
#[derive(Debug, Clone)]
struct HistoryEntry {
    pose: Pose,
    prev_command: Vec<f64>,
}

pub struct RnnController {
    model: Option<ModelParams>,
    limits: ControlLimits,
    history: VecDeque<HistoryEntry>,
    command: Vec<f64>,
    timing: ControllerTiming,
    name: &'static str,
}

impl RnnController {
    pub fn new(model: ModelParams, limits: ControlLimits) -> Self {
        let name = match model.arch {
            Arch::Gru => "gru",
            Arch::Lstm => "lstm",
            Arch::Fnn => "fnn-as-rnn",
        };
        RnnController {
            model: Some(model),
            limits,
            history: VecDeque::new(),
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
            name,
        }
    }

    pub fn unloaded(limits: ControlLimits, name: &'static str) -> Self {
        RnnController {
            model: None,
            limits,
            history: VecDeque::new(),
            command: vec![0.0; 6],
            timing: ControllerTiming::default(),
            name,
        }
    }

    pub fn set_model(&mut self, model: ModelParams) -> Result<()> {
        if model.arch == Arch::Fnn {
            return Err(Error::invalid_argument(
                "recurrent controller needs a gru or lstm model",
            ));
        }
        self.model = Some(model);
        Ok(())
    }

    fn step_vector(pose: &Pose, prev_command: &[f64]) -> DVector<f64> {
        let mut v = DVector::zeros(12);
        let p = pose.to_vector();
        for i in 0..6 {
            v[i] = p[i];
            v[6 + i] = prev_command.get(i).copied().unwrap_or(0.0);
        }
        v
    }
}

impl Controller for RnnController {
    fn name(&self) -> &'static str {
        self.name
    }

    fn reset(&mut self, initial_command: &ActuatorCommand) {
        self.command = initial_command.counts.clone();
        self.command.resize(6, 0.0);
        self.history.clear();
        self.timing = ControllerTiming::default();
    }

    fn compute(&mut self, reference: &[Pose], measured: &Pose) -> Result<ControlOutput> {
        let desired = reference
            .first()
            .ok_or_else(|| Error::invalid_argument("empty reference"))?;
        let model = self
            .model
            .as_ref()
            .ok_or_else(|| Error::invalid_state("recurrent controller has no model loaded"))?;
        if model.arch == Arch::Fnn {
            return Err(Error::invalid_argument(
                "recurrent controller needs a gru or lstm model",
            ));
        }
        let t_len = model.seq_len;

        // Record the new measurement against the command that produced it.
        self.history.push_back(HistoryEntry {
            pose: *measured,
            prev_command: self.command.clone(),
        });
        while self.history.len() > t_len.saturating_sub(1) {
            self.history.pop_front();
        }

        // Build the window: oldest history first, current step last. If
        // the history is short, repeat the oldest measured pose with zero
        // commands.
        let mut window = Vec::with_capacity(t_len);
        let mut padded = false;
        let missing = t_len.saturating_sub(1).saturating_sub(self.history.len());
        if missing > 0 {
            padded = true;
            let oldest = self
                .history
                .front()
                .map(|h| h.pose)
                .unwrap_or(*measured);
            for _ in 0..missing {
                window.push(Self::step_vector(&oldest, &[0.0; 6]));
            }
        }
        for entry in &self.history {
            window.push(Self::step_vector(&entry.pose, &entry.prev_command));
        }
        window.push(Self::step_vector(desired, &self.command));

        let absolute = infer(model, &window)?;
        if absolute.len() != 6 {
            return Err(Error::shape_mismatch(format!(
                "recurrent model outputs {} channels, expected 6",
                absolute.len()
            )));
        }
        let proposed: Vec<f64> = absolute.iter().copied().collect();
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
