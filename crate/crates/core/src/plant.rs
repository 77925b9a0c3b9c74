//! Simulated robot plant: motor counts pass through a lead-screw gain into
//! a tendon-sheath transmission with hysteresis and load-dependent drift,
//! then through the antagonistic tendon map into configuration space, and
//! finally through the kinematic chain to a noisy pose sensor.
//!
//! The transmission model is a per-tendon Bouc-Wen lag plus a saturating
//! drift term and a load-dependent stroke loss:
//!
//! ```text
//! dz = (dx / scale) * (1 - |z|^n * (gamma + beta * sign(dx * z)))
//! effective = s(load) * (x - lag(load) * z) - drift
//! ```
//!
//! `s`, `lag` and the drift saturation are affine in the external load. The
//! default coefficients come from the staged grid search in
//! [`calibration`], which fits the cyclic-loading statistics (drift,
//! normalized loop area, stroke) at 0, 50 and 100 g.

use nalgebra::Vector3;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::kinematics::{forward_kinematics, ConfigSpace, Pose, SegmentGeometry, THETA_MAX};
use crate::seed::rng_from_seed;
use crate::{Error, Result};

pub mod calibration;

/// Number of tendon channels (two antagonistic pairs per segment).
pub const TENDON_CHANNELS: usize = 4;

/// Motor rotation counts for the drive channels. Channels 0..3 are the
/// tendon pairs, channel 4 the base rotation, channel 5 the base
/// translation.
#[derive(Debug, Clone, PartialEq)]
pub struct ActuatorCommand {
    pub counts: Vec<f64>,
}

impl ActuatorCommand {
    pub fn zeros(m: usize) -> Self {
        ActuatorCommand {
            counts: vec![0.0; m],
        }
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }
}

impl Default for ActuatorCommand {
    fn default() -> Self {
        ActuatorCommand::zeros(6)
    }
}

/// Pose sensor specification.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorSpec {
    /// Total position RMSE in mm (isotropic Gaussian, sigma = rmse/sqrt(3)).
    pub position_rmse: f64,
    /// Total orientation RMSE in degrees.
    pub orientation_rmse: f64,
    /// Sample rate in Hz.
    pub rate: f64,
}

impl Default for SensorSpec {
    fn default() -> Self {
        SensorSpec {
            position_rmse: 0.48,
            orientation_rmse: 0.3,
            rate: 5.0,
        }
    }
}

impl SensorSpec {
    pub fn noiseless(rate: f64) -> Self {
        SensorSpec {
            position_rmse: 0.0,
            orientation_rmse: 0.0,
            rate,
        }
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.rate
    }
}

/// Tendon-sheath transmission parameters.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HysteresisParams {
    /// Bouc-Wen displacement scale (mm) controlling how fast the lag state
    /// saturates after a motion reversal.
    pub bw_scale: f64,
    /// Bouc-Wen shape parameters; beta + gamma = 1 bounds |z| by 1.
    pub bw_beta: f64,
    pub bw_gamma: f64,
    /// Bouc-Wen exponent n.
    pub bw_exponent: f64,
    /// Lag amplitude (mm) at zero load.
    pub lag_mm: f64,
    /// Relative lag increase per gram of load.
    pub lag_per_gram: f64,
    /// Stroke scale denominator coefficient: s(L) = s0 / (1 + c*L).
    pub stroke_scale: f64,
    pub stroke_loss_per_gram: f64,
    /// Drift saturation (mm) at zero load and its load coefficient.
    pub drift_sat_mm: f64,
    pub drift_per_gram: f64,
    /// Drift approach rate per mm of commanded path length.
    pub drift_path_rate: f64,
    /// Fraction of single-tendon drift surviving in a pair differential.
    /// The two tendons of an antagonistic pair drift almost equally, so
    /// most of the drift cancels at the channel level; the
    /// characterization rig measures one tendon and uses 1.0.
    pub pair_drift_fraction: f64,
}

impl Default for HysteresisParams {
    fn default() -> Self {
        // Fitted by calibration::fit_default_params (staged grid search
        // against the cyclic-loading reference statistics).
        HysteresisParams {
            bw_scale: 0.02,
            bw_beta: 0.5,
            bw_gamma: 0.5,
            bw_exponent: 2.0,
            lag_mm: 0.0925,
            lag_per_gram: 0.00275,
            stroke_scale: 0.95,
            stroke_loss_per_gram: 0.003875,
            drift_sat_mm: 2.1,
            drift_per_gram: 0.00125,
            drift_path_rate: 0.012,
            pair_drift_fraction: 0.15,
        }
    }
}

impl HysteresisParams {
    /// Pass-through transmission: no lag, no drift, unit stroke.
    pub fn disabled() -> Self {
        HysteresisParams {
            lag_mm: 0.0,
            lag_per_gram: 0.0,
            stroke_scale: 1.0,
            stroke_loss_per_gram: 0.0,
            drift_sat_mm: 0.0,
            drift_per_gram: 0.0,
            ..Default::default()
        }
    }

    fn lag(&self, load_g: f64) -> f64 {
        self.lag_mm * (1.0 + self.lag_per_gram * load_g)
    }

    fn stroke(&self, load_g: f64) -> f64 {
        self.stroke_scale / (1.0 + self.stroke_loss_per_gram * load_g)
    }

    fn drift_sat(&self, load_g: f64) -> f64 {
        self.drift_sat_mm * (1.0 + self.drift_per_gram * load_g)
    }
}

/// Internal transmission state, one entry per tendon channel.
#[derive(Debug, Clone, PartialEq)]
pub struct HysteresisState {
    /// Bouc-Wen internal state, |z| <= 1.
    pub z: [f64; TENDON_CHANNELS],
    /// Last commanded displacement (mm).
    pub last_commanded: [f64; TENDON_CHANNELS],
    /// Accumulated drift (mm), non-decreasing.
    pub drift: [f64; TENDON_CHANNELS],
    /// External load in grams.
    pub load_g: f64,
}

impl HysteresisState {
    pub fn new(load_g: f64) -> Self {
        HysteresisState {
            z: [0.0; TENDON_CHANNELS],
            last_commanded: [0.0; TENDON_CHANNELS],
            drift: [0.0; TENDON_CHANNELS],
            load_g,
        }
    }
}

/// Advance the transmission by one tick. Returns the effective tendon
/// displacement. Deterministic; `dt` is bookkeeping only (the model is
/// rate-independent).
pub fn hysteresis_step(
    params: &HysteresisParams,
    state: &mut HysteresisState,
    commanded: &[f64; TENDON_CHANNELS],
    dt: f64,
) -> Result<[f64; TENDON_CHANNELS]> {
    if dt <= 0.0 {
        return Err(Error::invalid_argument("dt must be positive"));
    }
    let lag = params.lag(state.load_g);
    let s = params.stroke(state.load_g);
    let d_sat = params.drift_sat(state.load_g);
    let mut effective = [0.0; TENDON_CHANNELS];
    for i in 0..TENDON_CHANNELS {
        let dx = commanded[i] - state.last_commanded[i];
        // Substep so the Bouc-Wen integration stays stable for large moves.
        let nsub = (dx.abs() / (0.1 * params.bw_scale)).ceil().max(1.0) as usize;
        let step = dx / nsub as f64;
        for _ in 0..nsub {
            let z = state.z[i];
            let sgn = if step * z >= 0.0 { 1.0 } else { -1.0 };
            let dz = (step / params.bw_scale)
                * (1.0
                    - z.abs().powf(params.bw_exponent) * (params.bw_gamma + params.bw_beta * sgn));
            state.z[i] = (z + dz).clamp(-1.0, 1.0);
            let d = state.drift[i];
            state.drift[i] = d + (d_sat - d).max(0.0) * params.drift_path_rate * step.abs();
        }
        state.last_commanded[i] = commanded[i];
        effective[i] =
            s * (commanded[i] - lag * state.z[i]) - params.pair_drift_fraction * state.drift[i];
    }
    Ok(effective)
}

/// Plant-side gains and limits.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlantConfig {
    /// Lead-screw gain: tendon mm per motor count.
    pub screw_gain: f64,
    /// Base rotation gain: rad per count.
    pub base_rotation_gain: f64,
    /// Base translation gain: mm per count.
    pub base_translation_gain: f64,
    /// Tendon guide-disk radius (mm) of the antagonistic map.
    pub disk_radius: f64,
    /// Absolute motor count limit.
    pub count_limit: f64,
    /// External load in grams.
    pub load_g: f64,
    pub hysteresis: HysteresisParams,
}

impl Default for PlantConfig {
    fn default() -> Self {
        PlantConfig {
            screw_gain: 1e-3,
            base_rotation_gain: 1e-4,
            base_translation_gain: 1e-3,
            disk_radius: 2.5,
            count_limit: 50_000.0,
            load_g: 0.0,
            hysteresis: HysteresisParams::default(),
        }
    }
}

impl PlantConfig {
    /// Exact noise-free kinematic chain: transmission pass-through.
    pub fn ideal() -> Self {
        PlantConfig {
            hysteresis: HysteresisParams::disabled(),
            ..Default::default()
        }
    }
}

/// Convert motor counts to commanded tendon displacements (mm).
/// Out-of-limit counts are clamped and flagged.
pub fn counts_to_tendon_displacement(
    cmd: &ActuatorCommand,
    cfg: &PlantConfig,
) -> ([f64; TENDON_CHANNELS], bool) {
    let mut out = [0.0; TENDON_CHANNELS];
    let mut saturated = false;
    for i in 0..TENDON_CHANNELS {
        let c = cmd.counts.get(i).copied().unwrap_or(0.0);
        let clamped = c.clamp(-cfg.count_limit, cfg.count_limit);
        if clamped != c {
            saturated = true;
        }
        out[i] = cfg.screw_gain * clamped;
    }
    (out, saturated)
}

/// Antagonistic tendon map: channels (0,1) drive the proximal segment in
/// its own frame, channels (2,3) drive the distal segment in a frame
/// rotated by 45 degrees. Bend angles beyond the workspace bound are
/// clamped and flagged.
pub fn tendon_to_config(
    effective: &[f64; TENDON_CHANNELS],
    cfg: &PlantConfig,
    base_rotation: f64,
    base_translation: f64,
) -> (ConfigSpace, bool) {
    let r = cfg.disk_radius;
    let mut clamped = false;
    let mut polar = |x: f64, y: f64, offset: f64| -> (f64, f64) {
        let theta = (x * x + y * y).sqrt() / r;
        let delta = if theta > 0.0 {
            normalize_angle(y.atan2(x) + offset)
        } else {
            0.0
        };
        if theta > THETA_MAX {
            clamped = true;
            (THETA_MAX, delta)
        } else {
            (theta, delta)
        }
    };
    let (theta1, delta1) = polar(effective[0], effective[1], 0.0);
    let (theta2, delta2) = polar(effective[2], effective[3], std::f64::consts::FRAC_PI_4);
    (
        ConfigSpace {
            theta1,
            delta1,
            theta2,
            delta2,
            base_rotation,
            base_translation,
        },
        clamped,
    )
}

/// Exact inverse of [`tendon_to_config`] for in-range configurations.
pub fn config_to_tendon(q: &ConfigSpace, cfg: &PlantConfig) -> [f64; TENDON_CHANNELS] {
    let r = cfg.disk_radius;
    let a1 = q.delta1;
    let a2 = q.delta2 - std::f64::consts::FRAC_PI_4;
    [
        r * q.theta1 * a1.cos(),
        r * q.theta1 * a1.sin(),
        r * q.theta2 * a2.cos(),
        r * q.theta2 * a2.sin(),
    ]
}

fn normalize_angle(a: f64) -> f64 {
    let mut x = a % std::f64::consts::TAU;
    if x <= -std::f64::consts::PI {
        x += std::f64::consts::TAU;
    } else if x > std::f64::consts::PI {
        x -= std::f64::consts::TAU;
    }
    x
}

/// One plant tick's outputs.
#[derive(Debug, Clone)]
pub struct PlantStepResult {
    pub true_pose: Pose,
    pub measured_pose: Pose,
    pub true_config: ConfigSpace,
    /// Motor counts hit the absolute limit.
    pub saturated: bool,
    /// A bend angle hit the workspace bound.
    pub clamped: bool,
}

/// The simulated robot. Owns its transmission state and sensor RNG; one
/// instance per trial, single writer.
#[derive(Debug, Clone)]
pub struct Plant {
    pub geometry: SegmentGeometry,
    pub config: PlantConfig,
    pub sensor: SensorSpec,
    state: HysteresisState,
    rng: ChaCha8Rng,
}

impl Plant {
    pub fn new(geometry: SegmentGeometry, config: PlantConfig, sensor: SensorSpec, seed: u64) -> Self {
        Plant {
            geometry,
            config,
            sensor,
            state: HysteresisState::new(config.load_g),
            rng: rng_from_seed(seed),
        }
    }

    /// Auto-zero: fresh transmission state and sensor stream.
    pub fn reset(&mut self, seed: u64) {
        self.state = HysteresisState::new(self.config.load_g);
        self.rng = rng_from_seed(seed);
    }

    pub fn hysteresis_state(&self) -> &HysteresisState {
        &self.state
    }

    /// Snapshot of the transmission state, for trial rollbacks that should
    /// not rewind the sensor noise stream.
    pub fn transmission_checkpoint(&self) -> HysteresisState {
        self.state.clone()
    }

    pub fn restore_transmission(&mut self, state: HysteresisState) {
        self.state = state;
    }

    /// Advance one control tick with the given motor counts.
    pub fn step(&mut self, cmd: &ActuatorCommand) -> Result<PlantStepResult> {
        let (commanded, saturated) = counts_to_tendon_displacement(cmd, &self.config);
        let effective = hysteresis_step(
            &self.config.hysteresis,
            &mut self.state,
            &commanded,
            self.sensor.dt(),
        )?;
        let base_rotation = cmd.counts.get(4).copied().unwrap_or(0.0) * self.config.base_rotation_gain;
        let base_translation =
            cmd.counts.get(5).copied().unwrap_or(0.0) * self.config.base_translation_gain;
        let (config, clamped) =
            tendon_to_config(&effective, &self.config, base_rotation, base_translation);
        let true_pose = forward_kinematics(&config, &self.geometry)?;
        let measured_pose = self.sense(&true_pose);
        Ok(PlantStepResult {
            true_pose,
            measured_pose,
            true_config: config,
            saturated,
            clamped,
        })
    }

    fn sense(&mut self, truth: &Pose) -> Pose {
        let sp = self.sensor.position_rmse / 3f64.sqrt();
        let so = self.sensor.orientation_rmse / 3f64.sqrt();
        if sp == 0.0 && so == 0.0 {
            return *truth;
        }
        let npos = Normal::new(0.0, sp.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let nori = Normal::new(0.0, so.max(f64::MIN_POSITIVE)).expect("valid sigma");
        let position = truth.position + Vector3::from_fn(|_, _| npos.sample(&mut self.rng));
        let orientation = truth.orientation + Vector3::from_fn(|_, _| nori.sample(&mut self.rng));
        Pose::new(position, orientation)
    }
}

/// Statistics of a cyclic-loading characterization run.
#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct CharacterizationResult {
    pub load_g: f64,
    pub mean_drift_mm: f64,
    pub norm_area: f64,
    pub mean_stroke_mm: f64,
    pub cycles: usize,
    pub amplitude_mm: f64,
}

/// Full-stroke commanded amplitude used for characterization (mm).
pub const CHARACTERIZATION_AMPLITUDE: f64 = 14.0;
const CHARACTERIZATION_STEPS_PER_CYCLE: usize = 400;

/// Run cyclic actuation (0 -> A -> 0 triangles on one tendon channel) on
/// the transmission and report drift, normalized loop area and stroke.
pub fn characterize_hysteresis(
    params: &HysteresisParams,
    load_g: f64,
    cycles: usize,
) -> Result<CharacterizationResult> {
    if cycles < 1 {
        return Err(Error::invalid_argument("need at least one cycle"));
    }
    let amplitude = CHARACTERIZATION_AMPLITUDE;
    // The rig pulls on one bare tendon, so the full drift applies.
    let params = &HysteresisParams {
        pair_drift_fraction: 1.0,
        ..*params
    };
    let mut state = HysteresisState::new(load_g);
    let n = CHARACTERIZATION_STEPS_PER_CYCLE;
    let dt = 0.2;

    let mut drifts = Vec::with_capacity(cycles);
    let mut areas = Vec::with_capacity(cycles);
    let mut strokes = Vec::with_capacity(cycles);
    let mut last_endpoint = {
        let eff = hysteresis_step(params, &mut state, &[0.0; TENDON_CHANNELS], dt)?;
        eff[0]
    };

    for _ in 0..cycles {
        let mut xs = Vec::with_capacity(n);
        let mut ys = Vec::with_capacity(n);
        for k in 1..=n {
            let phase = k as f64 / n as f64;
            let x = if phase <= 0.5 {
                amplitude * (2.0 * phase)
            } else {
                amplitude * (2.0 - 2.0 * phase)
            };
            let mut commanded = [0.0; TENDON_CHANNELS];
            commanded[0] = x;
            let eff = hysteresis_step(params, &mut state, &commanded, dt)?;
            xs.push(x);
            ys.push(eff[0]);
        }
        let y_max = ys.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let y_min = ys.iter().cloned().fold(f64::INFINITY, f64::min);
        strokes.push(y_max - y_min);
        // Enclosed loop area: remove the within-cycle drift trend first so
        // the loop closes (drift is reported separately), then shoelace.
        let shift = ys.last().expect("samples") - last_endpoint;
        let m = ys.len();
        let closed: Vec<f64> = ys
            .iter()
            .enumerate()
            .map(|(k, y)| y - shift * (k + 1) as f64 / m as f64)
            .collect();
        let mut area = 0.0;
        for i in 0..m {
            let j = (i + 1) % m;
            area += xs[i] * closed[j] - xs[j] * closed[i];
        }
        areas.push(area.abs() / 2.0);
        let endpoint = *ys.last().expect("cycle has samples");
        drifts.push((endpoint - last_endpoint).abs());
        last_endpoint = endpoint;
    }

    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let mean_stroke = mean(&strokes);
    let norm_area = if mean_stroke > 0.0 {
        mean(&areas) / (mean_stroke * amplitude)
    } else {
        0.0
    };
    Ok(CharacterizationResult {
        load_g,
        mean_drift_mm: mean(&drifts),
        norm_area,
        mean_stroke_mm: mean_stroke,
        cycles,
        amplitude_mm: amplitude,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics;
    use approx::assert_relative_eq;
    use rand::Rng;

    #[test]
    fn zero_counts_zero_displacement() {
        let cfg = PlantConfig::default();
        let (d, sat) = counts_to_tendon_displacement(&ActuatorCommand::zeros(6), &cfg);
        assert_eq!(d, [0.0; 4]);
        assert!(!sat);
    }

    #[test]
    fn screw_gain_is_linear() {
        let cfg = PlantConfig::default();
        let mut cmd = ActuatorCommand::zeros(6);
        cmd.counts[0] = 1000.0;
        let (d, sat) = counts_to_tendon_displacement(&cmd, &cfg);
        assert_relative_eq!(d[0], 1.0, epsilon = 1e-12);
        assert_eq!(&d[1..], &[0.0; 3]);
        assert!(!sat);

        let mut rng = crate::seed::rng_from_seed(3);
        for _ in 0..50 {
            let counts: Vec<f64> = (0..6).map(|_| rng.gen_range(-40_000.0..40_000.0)).collect();
            let (d, _) = counts_to_tendon_displacement(&ActuatorCommand { counts: counts.clone() }, &cfg);
            for i in 0..4 {
                assert_relative_eq!(d[i], counts[i] * cfg.screw_gain, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn out_of_limit_counts_flagged() {
        let cfg = PlantConfig::default();
        let mut cmd = ActuatorCommand::zeros(6);
        cmd.counts[2] = 60_000.0;
        let (d, sat) = counts_to_tendon_displacement(&cmd, &cfg);
        assert!(sat);
        assert_relative_eq!(d[2], 50.0, epsilon = 1e-12);
    }

    #[test]
    fn disabled_transmission_is_identity() {
        let params = HysteresisParams::disabled();
        let mut state = HysteresisState::new(0.0);
        let mut rng = crate::seed::rng_from_seed(9);
        for _ in 0..100 {
            let cmd = [
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
                rng.gen_range(-5.0..5.0),
            ];
            let eff = hysteresis_step(&params, &mut state, &cmd, 0.2).unwrap();
            for i in 0..4 {
                assert_relative_eq!(eff[i], cmd[i], epsilon = 1e-12);
            }
        }
        assert_eq!(state.drift, [0.0; 4]);
    }

    #[test]
    fn bouc_wen_state_stays_bounded() {
        let params = HysteresisParams::default();
        let mut state = HysteresisState::new(100.0);
        let mut rng = crate::seed::rng_from_seed(13);
        for _ in 0..500 {
            let cmd = [
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
                rng.gen_range(-10.0..10.0),
            ];
            hysteresis_step(&params, &mut state, &cmd, 0.2).unwrap();
            for z in state.z {
                assert!(z.abs() <= 1.0 + 1e-12);
            }
            for d in state.drift {
                assert!(d >= 0.0);
            }
        }
    }

    #[test]
    fn drift_is_monotone_under_cycling() {
        let params = HysteresisParams::default();
        let mut state = HysteresisState::new(0.0);
        let mut prev = 0.0;
        for k in 0..2000 {
            let phase = (k as f64 / 100.0) % 2.0;
            let x = if phase <= 1.0 { 10.0 * phase } else { 10.0 * (2.0 - phase) };
            hysteresis_step(&params, &mut state, &[x, 0.0, 0.0, 0.0], 0.2).unwrap();
            assert!(state.drift[0] >= prev - 1e-12);
            prev = state.drift[0];
        }
    }

    #[test]
    fn loop_endpoints_converge() {
        // Non-divergent loops: per-cycle endpoint shifts contract over 20
        // cycles.
        let params = HysteresisParams::default();
        let mut state = HysteresisState::new(50.0);
        let n = 200;
        let mut endpoints = Vec::new();
        for _ in 0..20 {
            let mut last = 0.0;
            for k in 1..=n {
                let phase = k as f64 / n as f64;
                let x = if phase <= 0.5 {
                    CHARACTERIZATION_AMPLITUDE * 2.0 * phase
                } else {
                    CHARACTERIZATION_AMPLITUDE * (2.0 - 2.0 * phase)
                };
                let eff = hysteresis_step(&params, &mut state, &[x, 0.0, 0.0, 0.0], 0.2).unwrap();
                last = eff[0];
            }
            endpoints.push(last);
        }
        let shifts: Vec<f64> = endpoints.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        let early = shifts[0];
        let late = shifts[shifts.len() - 1];
        assert!(late < 0.2 * early, "shifts {early} -> {late} did not contract");
    }

    #[test]
    fn tendon_config_round_trip() {
        let cfg = PlantConfig::default();
        let mut rng = crate::seed::rng_from_seed(21);
        for _ in 0..100 {
            let q = ConfigSpace {
                theta1: rng.gen_range(0.01..THETA_MAX),
                delta1: rng.gen_range(-3.1..3.1),
                theta2: rng.gen_range(0.01..THETA_MAX),
                delta2: rng.gen_range(-3.1..3.1),
                base_rotation: 0.0,
                base_translation: 0.0,
            };
            let d = config_to_tendon(&q, &cfg);
            let (back, clamped) = tendon_to_config(&d, &cfg, 0.0, 0.0);
            assert!(!clamped);
            assert_relative_eq!(back.theta1, q.theta1, epsilon = 1e-9);
            assert_relative_eq!(back.theta2, q.theta2, epsilon = 1e-9);
            assert_relative_eq!(
                kinematics::wrap_angle_deg((back.delta1 - q.delta1).to_degrees()),
                0.0,
                epsilon = 1e-9
            );
            assert_relative_eq!(
                kinematics::wrap_angle_deg((back.delta2 - q.delta2).to_degrees()),
                0.0,
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn single_pair_actuation_directions() {
        let cfg = PlantConfig::default();
        let (q, _) = tendon_to_config(&[1.0, 0.0, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta1, 0.0, epsilon = 1e-12);
        let (q, _) = tendon_to_config(&[0.0, 1.0, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta1, std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        let (q, _) = tendon_to_config(&[-1.0, 0.0, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta1, std::f64::consts::PI, epsilon = 1e-12);
        let (q, _) = tendon_to_config(&[0.0, -1.0, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta1, -std::f64::consts::FRAC_PI_2, epsilon = 1e-12);
        // Distal frame is rotated 45 degrees.
        let (q, _) = tendon_to_config(&[0.0, 0.0, 1.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta2, std::f64::consts::FRAC_PI_4, epsilon = 1e-12);
        // atan2 oracle for the differential map.
        let (q, _) = tendon_to_config(&[0.6, -0.8, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert_relative_eq!(q.delta1, (-0.8f64).atan2(0.6), epsilon = 1e-12);
        assert_relative_eq!(q.theta1, 1.0 / cfg.disk_radius, epsilon = 1e-12);
    }

    #[test]
    fn theta_clamp_flagged() {
        let cfg = PlantConfig::default();
        let (q, clamped) = tendon_to_config(&[10.0, 0.0, 0.0, 0.0], &cfg, 0.0, 0.0);
        assert!(clamped);
        assert_relative_eq!(q.theta1, THETA_MAX, epsilon = 1e-12);
    }

    #[test]
    fn ideal_plant_is_kinematic_chain() {
        let g = SegmentGeometry::default();
        let mut plant = Plant::new(g, PlantConfig::ideal(), SensorSpec::noiseless(5.0), 0);
        let res = plant.step(&ActuatorCommand::zeros(6)).unwrap();
        assert_relative_eq!(res.true_pose.position, Vector3::new(0.0, 0.0, 81.0), epsilon = 1e-12);
        assert_eq!(res.true_pose, res.measured_pose);

        let mut rng = crate::seed::rng_from_seed(31);
        for _ in 0..20 {
            let counts: Vec<f64> = (0..6).map(|_| rng.gen_range(-3000.0..3000.0)).collect();
            let cmd = ActuatorCommand { counts };
            let res = plant.step(&cmd).unwrap();
            let (d, _) = counts_to_tendon_displacement(&cmd, &plant.config);
            let (q, _) = tendon_to_config(
                &d,
                &plant.config,
                cmd.counts[4] * plant.config.base_rotation_gain,
                cmd.counts[5] * plant.config.base_translation_gain,
            );
            let oracle = forward_kinematics(&q, &g).unwrap();
            assert_relative_eq!(res.true_pose.position, oracle.position, epsilon = 1e-9);
        }
    }

    #[test]
    fn same_seed_bit_identical() {
        let g = SegmentGeometry::default();
        let run = |seed: u64| {
            let mut plant = Plant::new(g, PlantConfig::default(), SensorSpec::default(), seed);
            let mut out = Vec::new();
            let mut rng = crate::seed::rng_from_seed(777);
            for _ in 0..50 {
                let counts: Vec<f64> = (0..6).map(|_| rng.gen_range(-2000.0..2000.0)).collect();
                let res = plant.step(&ActuatorCommand { counts }).unwrap();
                out.push(res.measured_pose);
            }
            out
        };
        let a = run(42);
        let b = run(42);
        assert_eq!(a, b);
    }

    #[test]
    fn sensor_rmse_matches_defaults() {
        let g = SegmentGeometry::default();
        let mut plant = Plant::new(g, PlantConfig::ideal(), SensorSpec::default(), 11);
        let cmd = ActuatorCommand::zeros(6);
        let truth = forward_kinematics(&ConfigSpace::default(), &g).unwrap();
        let n = 10_000;
        let mut pos_sq = 0.0;
        let mut ori_sq = 0.0;
        for _ in 0..n {
            let res = plant.step(&cmd).unwrap();
            pos_sq += (res.measured_pose.position - truth.position).norm_squared();
            ori_sq += (res.measured_pose.orientation - truth.orientation).norm_squared();
        }
        let pos_rmse = (pos_sq / n as f64).sqrt();
        let ori_rmse = (ori_sq / n as f64).sqrt();
        assert!((pos_rmse - 0.48).abs() < 0.48 * 0.05, "pos rmse {pos_rmse}");
        assert!((ori_rmse - 0.3).abs() < 0.3 * 0.05, "ori rmse {ori_rmse}");
    }

    #[test]
    fn disabled_characterization_is_clean() {
        let params = HysteresisParams::disabled();
        let res = characterize_hysteresis(&params, 0.0, 3).unwrap();
        assert_relative_eq!(res.mean_drift_mm, 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.norm_area, 0.0, epsilon = 1e-9);
        assert_relative_eq!(res.mean_stroke_mm, CHARACTERIZATION_AMPLITUDE, epsilon = 1e-9);
    }

    #[test]
    fn characterization_matches_reference_stats() {
        for (load, drift, area, stroke) in calibration::REFERENCE_ROWS {
            let res = characterize_hysteresis(&HysteresisParams::default(), load, 3).unwrap();
            let tol = 0.20;
            assert!(
                (res.mean_drift_mm - drift).abs() <= tol * drift,
                "load {load}: drift {} vs {drift}",
                res.mean_drift_mm
            );
            assert!(
                (res.norm_area - area).abs() <= tol * area,
                "load {load}: area {} vs {area}",
                res.norm_area
            );
            assert!(
                (res.mean_stroke_mm - stroke).abs() <= tol * stroke,
                "load {load}: stroke {} vs {stroke}",
                res.mean_stroke_mm
            );
        }
    }

    #[test]
    fn load_ordering_is_monotone() {
        let mut prev: Option<CharacterizationResult> = None;
        for load in [0.0, 50.0, 100.0] {
            let res = characterize_hysteresis(&HysteresisParams::default(), load, 3).unwrap();
            if let Some(p) = prev {
                assert!(res.mean_drift_mm >= p.mean_drift_mm);
                assert!(res.norm_area >= p.norm_area);
                assert!(res.mean_stroke_mm <= p.mean_stroke_mm);
            }
            prev = Some(res);
        }
    }
}
