//! TOML run configuration: one file drives the whole pipeline. Unknown
//! keys are rejected; every field has the library default; the hash of the
//! canonical serialization is embedded in every output file.

use std::path::Path;

use crate::controllers::{ControlLimits, ErrorWeights, JacobianConfig, MpcConfig};
use crate::datagen::sha256_hex;
use crate::kinematics::SegmentGeometry;
use crate::nn::TrainConfig;
use crate::plant::{Plant, PlantConfig, SensorSpec};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControllerSection {
    pub jacobian: JacobianConfig,
    pub mpc: MpcConfig,
    /// FNN error-window length N.
    pub fnn_window: usize,
    pub weights: ErrorWeights,
}

impl Default for ControllerSection {
    fn default() -> Self {
        ControllerSection {
            jacobian: JacobianConfig::default(),
            mpc: MpcConfig::default(),
            fnn_window: 5,
            weights: ErrorWeights::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub early_stop_patience: usize,
    /// Stacked layer count and hidden width of the recurrent nets.
    pub layers: usize,
    pub hidden: usize,
    /// Recurrent window length.
    pub window: usize,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            beta1: t.beta1,
            beta2: t.beta2,
            epsilon: t.epsilon,
            max_epochs: t.max_epochs,
            early_stop_patience: t.early_stop_patience,
            layers: 4,
            hidden: 128,
            window: 5,
        }
    }
}

impl TrainSection {
    pub fn schedule(&self) -> TrainConfig {
        TrainConfig {
            batch_size: self.batch_size,
            learning_rate: self.learning_rate,
            beta1: self.beta1,
            beta2: self.beta2,
            epsilon: self.epsilon,
            max_epochs: self.max_epochs,
            early_stop_patience: self.early_stop_patience,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BenchmarkSection {
    pub trials: usize,
    pub jitter_position_mm: f64,
    pub jitter_orientation_deg: f64,
}

impl Default for BenchmarkSection {
    fn default() -> Self {
        BenchmarkSection {
            trials: 5,
            jitter_position_mm: 0.5,
            jitter_orientation_deg: 0.3,
        }
    }
}

/// The full run configuration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub geometry: SegmentGeometry,
    pub plant: PlantConfig,
    pub sensor: SensorSpec,
    pub limits: ControlLimits,
    pub controller: ControllerSection,
    pub train: TrainSection,
    pub benchmark: BenchmarkSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            geometry: SegmentGeometry::default(),
            plant: PlantConfig::default(),
            sensor: SensorSpec::default(),
            limits: ControlLimits::default(),
            controller: ControllerSection::default(),
            train: TrainSection::default(),
            benchmark: BenchmarkSection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Hash of the canonical serialization; embedded in output files.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("config serializes");
        sha256_hex(canonical.as_bytes())
    }

    pub fn build_plant(&self, seed: u64) -> Plant {
        Plant::new(self.geometry, self.plant, self.sensor, seed)
    }
}
