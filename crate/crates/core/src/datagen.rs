//! Monte Carlo training-data acquisition on the simulated plant, contiguous
//! dataset splitting, window construction and checksummed persistence.

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Vector3};
use rand::Rng;
use sha2::{Digest, Sha256};

use crate::kinematics::{ConfigSpace, Pose, THETA_MAX};
use crate::nn::WindowSet;
use crate::plant::{config_to_tendon, ActuatorCommand, Plant, TENDON_CHANNELS};
use crate::seed::{derive, rng_from_seed};
use crate::{Error, Result};

/// Dome-shaped workspace the training data is confined to, in the robot
/// base frame: transverse radius about the straight axis and axial depth
/// measured down from the straight-configuration tip.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Workspace {
    pub radius_mm: f64,
    pub height_mm: f64,
    /// Straight-configuration tip height (apex of the dome).
    pub apex_mm: f64,
    /// Allowance above the apex for sensor noise: the straight pose sits
    /// exactly on the dome boundary, so measured positions need headroom.
    pub apex_margin_mm: f64,
}

impl Workspace {
    pub fn new(apex_mm: f64) -> Self {
        Workspace {
            radius_mm: 30.0,
            height_mm: 45.0,
            apex_mm,
            apex_margin_mm: 2.0,
        }
    }

    pub fn contains(&self, position: &Vector3<f64>) -> bool {
        let transverse = (position.x * position.x + position.y * position.y).sqrt();
        let depth = self.apex_mm - position.z;
        transverse <= self.radius_mm
            && depth >= -self.apex_margin_mm
            && depth <= self.height_mm
    }
}

/// One logged tick: timestamp, desired pose, measured pose and the command
/// applied at that tick.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub desired_pose: Pose,
    pub measured_pose: Pose,
    pub command: ActuatorCommand,
}

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DatasetMeta {
    pub seed: u64,
    pub rate_hz: f64,
    pub duration_s: f64,
    pub rejected_excursions: usize,
}

/// An ordered collection of samples with contiguous split boundaries.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TrajectorySample>,
    /// Samples `[0, train_end)` are training data.
    pub train_end: usize,
    /// Samples `[train_end, val_end)` are validation, the rest test.
    pub val_end: usize,
    pub workspace: Workspace,
    pub meta: DatasetMeta,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn train(&self) -> &[TrajectorySample] {
        &self.samples[..self.train_end]
    }

    pub fn val(&self) -> &[TrajectorySample] {
        &self.samples[self.train_end..self.val_end]
    }

    pub fn test(&self) -> &[TrajectorySample] {
        &self.samples[self.val_end..]
    }
}

const MAX_REDRAWS_PER_EXCURSION: usize = 60;

/// Draw a random in-dome knot configuration and return it as motor counts.
/// Bending alone reaches only the upper half of the dome, so knots also
/// exercise the base translation (and a little base rotation), matching
/// the six-channel command vector.
fn random_knot_counts(plant: &Plant, workspace: &Workspace, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        // Stratify by depth: bending alone only reaches the upper dome, so
        // pick a target depth first and make up the difference with base
        // translation.
        let target_depth = rng.gen_range(0.0..workspace.height_mm - 2.0);
        let delta1 = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
        // Square-root biasing favors larger bends, spreading knots toward
        // the transverse rim.
        let theta1 = THETA_MAX * 0.95 * rng.gen_range(0.0f64..1.0).sqrt();
        // Mixture over the second segment: aligned bends reach the far
        // transverse rim, opposed bends produce the near-axial tool
        // orientations the tracking tasks live on, the rest is free.
        let style = rng.gen_range(0.0..1.0);
        let (theta2, delta2) = if style < 0.3 {
            (
                THETA_MAX * 0.95 * rng.gen_range(0.0f64..1.0).sqrt(),
                delta1 + rng.gen_range(-0.3..0.3),
            )
        } else if style < 0.6 {
            (
                (theta1 * rng.gen_range(0.7..1.3)).min(THETA_MAX * 0.95),
                delta1 + std::f64::consts::PI + rng.gen_range(-0.3..0.3),
            )
        } else {
            (
                THETA_MAX * 0.95 * rng.gen_range(0.0f64..1.0).sqrt(),
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
            )
        };
        let mut q = ConfigSpace {
            theta1,
            delta1,
            theta2,
            delta2,
            base_rotation: rng.gen_range(-0.4..0.4),
            base_translation: 0.0,
        };
        let bend_only = crate::kinematics::forward_kinematics(&q, &plant.geometry)
            .expect("valid config");
        let bend_depth = workspace.apex_mm - bend_only.position.z;
        q.base_translation = (bend_depth - target_depth).clamp(-36.0, 0.0);
        let pose = crate::kinematics::forward_kinematics(&q, &plant.geometry).expect("valid config");
        // Keep a noise margin so measured positions stay inside too.
        let shrunk = Workspace {
            radius_mm: workspace.radius_mm - 2.0,
            height_mm: workspace.height_mm - 2.0,
            apex_mm: workspace.apex_mm,
            apex_margin_mm: 0.0,
        };
        if shrunk.contains(&pose.position) {
            let d = config_to_tendon(&q, &plant.config);
            let mut counts = vec![0.0; 6];
            for i in 0..TENDON_CHANNELS {
                counts[i] = d[i] / plant.config.screw_gain;
            }
            counts[4] = q.base_rotation / plant.config.base_rotation_gain;
            counts[5] = q.base_translation / plant.config.base_translation_gain;
            return counts;
        }
    }
}

fn smoothstep(t: f64) -> f64 {
    t * t * (3.0 - 2.0 * t)
}

/// Execute random smooth command excursions on the plant at the given rate
/// and record every tick. Excursions whose measured tip leaves the dome are
/// rolled back and redrawn (counted in metadata). The desired pose of each
/// sample is the measured pose itself: collection is open-loop.
pub fn monte_carlo_collect(
    duration_s: f64,
    rate_hz: f64,
    plant: &mut Plant,
    seed: u64,
) -> Result<Dataset> {
    if duration_s <= 0.0 || rate_hz <= 0.0 {
        return Err(Error::invalid_argument("duration and rate must be positive"));
    }
    let total: usize = (duration_s * rate_hz).round() as usize;
    let dt = 1.0 / rate_hz;
    let workspace = Workspace::new(plant.geometry.straight_reach());
    // True poses must stay strictly interior so that sensor noise cannot
    // wedge the walk against the dome boundary.
    let interior = Workspace {
        radius_mm: workspace.radius_mm - 1.0,
        height_mm: workspace.height_mm - 1.0,
        apex_mm: workspace.apex_mm,
        apex_margin_mm: 0.5,
    };
    let mut rng = rng_from_seed(derive(seed, 0xDA7A));
    plant.reset(derive(seed, 0x5E50));

    let mut samples: Vec<TrajectorySample> = Vec::with_capacity(total);
    let mut rejected = 0usize;
    let mut current = vec![0.0; 6];

    while samples.len() < total {
        let knot_interval = rng.gen_range(2.0..10.0);
        let steps = ((knot_interval * rate_hz).round() as usize).max(1);
        let steps = steps.min(total - samples.len());

        let mut accepted = false;
        for attempt in 0..=MAX_REDRAWS_PER_EXCURSION {
            let target = if attempt < MAX_REDRAWS_PER_EXCURSION {
                random_knot_counts(plant, &workspace, &mut rng)
            } else {
                // Steer back to the straight configuration as a fallback.
                vec![0.0; 6]
            };
            let checkpoint = plant.transmission_checkpoint();
            let mut excursion = Vec::with_capacity(steps);
            let mut ok = true;
            for k in 1..=steps {
                let s = smoothstep(k as f64 / steps as f64);
                let counts: Vec<f64> = current
                    .iter()
                    .zip(target.iter())
                    .map(|(a, b)| a + (b - a) * s)
                    .collect();
                let cmd = ActuatorCommand { counts };
                let res = plant.step(&cmd)?;
                if !interior.contains(&res.true_pose.position)
                    || !workspace.contains(&res.measured_pose.position)
                {
                    ok = false;
                    break;
                }
                let t = (samples.len() + excursion.len()) as f64 * dt;
                excursion.push(TrajectorySample {
                    t,
                    desired_pose: res.measured_pose,
                    measured_pose: res.measured_pose,
                    command: cmd,
                });
            }
            if ok {
                samples.extend(excursion);
                current = target;
                accepted = true;
                break;
            }
            plant.restore_transmission(checkpoint);
            rejected += 1;
        }
        if !accepted {
            return Err(Error::numerical(
                "could not draw an in-workspace excursion".to_string(),
            ));
        }
    }

    let mut dataset = Dataset {
        samples,
        train_end: 0,
        val_end: 0,
        workspace,
        meta: DatasetMeta {
            seed,
            rate_hz,
            duration_s,
            rejected_excursions: rejected,
        },
    };
    split(&mut dataset, (7, 2, 1))?;
    Ok(dataset)
}

/// Contiguous time-ordered split; no shuffling, so windows cannot leak
/// across split boundaries.
pub fn split(dataset: &mut Dataset, ratios: (usize, usize, usize)) -> Result<()> {
    let (a, b, c) = ratios;
    let denom = a + b + c;
    if denom == 0 {
        return Err(Error::invalid_argument("split ratios must not all be zero"));
    }
    let n = dataset.len();
    dataset.train_end = n * a / denom;
    dataset.val_end = n * (a + b) / denom;
    if dataset.train_end == 0 || dataset.val_end == dataset.train_end || dataset.val_end == n {
        return Err(Error::invalid_argument(format!(
            "dataset of {n} samples is too small for a {a}:{b}:{c} split"
        )));
    }
    Ok(())
}

fn pose12(sample: &TrajectorySample, prev_command: &[f64]) -> DVector<f64> {
    let mut v = DVector::zeros(12);
    let p = sample.measured_pose.to_vector();
    for i in 0..6 {
        v[i] = p[i];
        v[6 + i] = prev_command.get(i).copied().unwrap_or(0.0);
    }
    v
}

/// Sliding recurrent windows per split: step `i` carries
/// `[measured_pose(i), command(i-1)]`, the target is the command at the
/// window end. The first window of each split zero-pads `command(-1)`.
/// Windows never cross split boundaries.
pub fn build_windows(dataset: &Dataset, t_len: usize) -> Result<(WindowSet, WindowSet, WindowSet)> {
    if t_len < 1 {
        return Err(Error::invalid_argument("window length must be at least 1"));
    }
    let build = |segment: &[TrajectorySample]| -> WindowSet {
        let mut set = WindowSet::default();
        if segment.len() < t_len {
            return set;
        }
        for start in 0..=(segment.len() - t_len) {
            let mut window = Vec::with_capacity(t_len);
            for j in 0..t_len {
                let idx = start + j;
                let prev = if idx == 0 {
                    vec![0.0; 6]
                } else {
                    segment[idx - 1].command.counts.clone()
                };
                window.push(pose12(&segment[idx], &prev));
            }
            let target =
                DVector::from_vec(segment[start + t_len - 1].command.counts.clone());
            set.push(window, target);
        }
        set
    };
    Ok((build(dataset.train()), build(dataset.val()), build(dataset.test())))
}

/// Error-history windows for the feedforward controller: the input stacks
/// `N` pose differences toward the next achieved pose (most recent first)
/// and the target is the 4-channel command increment applied at the window
/// end.
pub fn build_error_windows(
    dataset: &Dataset,
    n_len: usize,
) -> Result<(WindowSet, WindowSet, WindowSet)> {
    if n_len < 1 {
        return Err(Error::invalid_argument("error window length must be at least 1"));
    }
    let build = |segment: &[TrajectorySample]| -> WindowSet {
        let mut set = WindowSet::default();
        // k indexes the command tick; poses k-n_len+1..=k and k+1 must exist
        // and u(k-1) must exist.
        let lo = n_len.max(2) - 1;
        if segment.len() < lo + 2 {
            return set;
        }
        for k in lo..segment.len() - 1 {
            let achieved = segment[k + 1].measured_pose;
            let mut stacked = DVector::zeros(6 * n_len);
            for j in 0..n_len {
                let e = crate::kinematics::pose_error(&achieved, &segment[k - j].measured_pose);
                for d in 0..6 {
                    stacked[6 * j + d] = e[d];
                }
            }
            let du: Vec<f64> = (0..TENDON_CHANNELS)
                .map(|c| segment[k].command.counts[c] - segment[k - 1].command.counts[c])
                .collect();
            set.push(vec![stacked], DVector::from_vec(du));
        }
        set
    };
    Ok((build(dataset.train()), build(dataset.val()), build(dataset.test())))
}

const DATASET_FORMAT_VERSION: u32 = 1;
const CSV_HEADER: &str = "t,dx,dy,dz,dox,doy,doz,mx,my,mz,mox,moy,moz,u1,u2,u3,u4,u5,u6";

#[derive(serde::Serialize, serde::Deserialize)]
struct Sidecar {
    version: u32,
    meta: DatasetMeta,
    workspace: Workspace,
    train_end: usize,
    val_end: usize,
    sample_count: usize,
    /// SHA-256 of the CSV bytes.
    checksum: String,
    /// SHA-256 of the plant configuration the data was collected on.
    plant_config_hash: String,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(bytes);
    let out = h.finalize();
    out.iter().map(|b| format!("{b:02x}")).collect()
}

fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn dataset_to_csv(dataset: &Dataset) -> String {
    let mut out = String::with_capacity(dataset.len() * 160);
    out.push_str(CSV_HEADER);
    out.push('\n');
    for s in &dataset.samples {
        let d = s.desired_pose.to_vector();
        let m = s.measured_pose.to_vector();
        out.push_str(&format!("{}", s.t));
        for v in d.iter().chain(m.iter()) {
            out.push_str(&format!(",{v}"));
        }
        for c in 0..6 {
            let v = s.command.counts.get(c).copied().unwrap_or(0.0);
            out.push_str(&format!(",{v}"));
        }
        out.push('\n');
    }
    out
}

/// Write the dataset as a CSV plus a JSON sidecar carrying seed, split
/// indices, plant-config hash and a checksum of the CSV bytes.
pub fn save(dataset: &Dataset, csv_path: &Path, plant_config_hash: &str) -> Result<()> {
    let csv = dataset_to_csv(dataset);
    let sidecar = Sidecar {
        version: DATASET_FORMAT_VERSION,
        meta: dataset.meta,
        workspace: dataset.workspace,
        train_end: dataset.train_end,
        val_end: dataset.val_end,
        sample_count: dataset.len(),
        checksum: sha256_hex(csv.as_bytes()),
        plant_config_hash: plant_config_hash.to_string(),
    };
    std::fs::write(csv_path, csv)?;
    std::fs::write(
        sidecar_path(csv_path),
        serde_json::to_string_pretty(&sidecar).expect("sidecar serializes"),
    )?;
    Ok(())
}

/// Load a dataset, verifying the sidecar version and CSV checksum before
/// parsing. A truncated or edited CSV fails the checksum and no partial
/// dataset is returned.
pub fn load(csv_path: &Path) -> Result<Dataset> {
    let sidecar_text = std::fs::read_to_string(sidecar_path(csv_path))?;
    let sidecar: Sidecar =
        serde_json::from_str(&sidecar_text).map_err(|e| Error::Parse(format!("sidecar: {e}")))?;
    if sidecar.version != DATASET_FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: DATASET_FORMAT_VERSION,
            found: sidecar.version,
        });
    }
    let csv = std::fs::read_to_string(csv_path)?;
    let checksum = sha256_hex(csv.as_bytes());
    if checksum != sidecar.checksum {
        return Err(Error::Checksum(format!(
            "dataset CSV checksum {checksum} does not match sidecar {}",
            sidecar.checksum
        )));
    }

    let mut lines = csv.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        _ => return Err(Error::Parse("missing or unexpected CSV header".into())),
    }
    let mut samples = Vec::with_capacity(sidecar.sample_count);
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.parse::<f64>()
                    .map_err(|e| Error::Parse(format!("line {}: {e}", lineno + 2)))
            })
            .collect::<Result<_>>()?;
        if fields.len() != 19 {
            return Err(Error::Parse(format!(
                "line {}: expected 19 fields, found {}",
                lineno + 2,
                fields.len()
            )));
        }
        let pose = |o: usize| {
            Pose::new(
                Vector3::new(fields[o], fields[o + 1], fields[o + 2]),
                Vector3::new(fields[o + 3], fields[o + 4], fields[o + 5]),
            )
        };
        samples.push(TrajectorySample {
            t: fields[0],
            desired_pose: pose(1),
            measured_pose: pose(7),
            command: ActuatorCommand {
                counts: fields[13..19].to_vec(),
            },
        });
    }
    if samples.len() != sidecar.sample_count {
        return Err(Error::Parse(format!(
            "expected {} samples, found {}",
            sidecar.sample_count,
            samples.len()
        )));
    }
    Ok(Dataset {
        samples,
        train_end: sidecar.train_end,
        val_end: sidecar.val_end,
        workspace: sidecar.workspace,
        meta: sidecar.meta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::SegmentGeometry;
    use crate::plant::{PlantConfig, SensorSpec};

    fn test_plant(seed: u64) -> Plant {
        Plant::new(
            SegmentGeometry::default(),
            PlantConfig::default(),
            SensorSpec::default(),
            seed,
        )
    }

    fn small_dataset(duration: f64, seed: u64) -> Dataset {
        let mut plant = test_plant(seed);
        monte_carlo_collect(duration, 5.0, &mut plant, seed).unwrap()
    }

    #[test]
    fn sample_count_matches_duration() {
        let ds = small_dataset(60.0, 1);
        assert_eq!(ds.len(), 300);

        let mut plant = test_plant(2);
        let tiny = monte_carlo_collect(1.0, 5.0, &mut plant, 2).unwrap();
        assert_eq!(tiny.len(), 5);
    }

    #[test]
    fn timestamps_are_uniform() {
        let ds = small_dataset(20.0, 3);
        for (k, s) in ds.samples.iter().enumerate() {
            approx::assert_relative_eq!(s.t, k as f64 * 0.2, epsilon = 1e-12);
        }
    }

    #[test]
    fn all_measured_positions_inside_dome() {
        let ds = small_dataset(120.0, 5);
        for s in &ds.samples {
            assert!(
                ds.workspace.contains(&s.measured_pose.position),
                "sample at {} outside dome: {:?}",
                s.t,
                s.measured_pose.position
            );
        }
    }

    #[test]
    fn split_ratios() {
        let mut ds = small_dataset(60.0, 7);
        split(&mut ds, (7, 2, 1)).unwrap();
        assert_eq!(ds.train().len(), 210);
        assert_eq!(ds.val().len(), 60);
        assert_eq!(ds.test().len(), 30);

        // 10 samples -> 7/2/1.
        ds.samples.truncate(10);
        split(&mut ds, (7, 2, 1)).unwrap();
        assert_eq!(ds.train().len(), 7);
        assert_eq!(ds.val().len(), 2);
        assert_eq!(ds.test().len(), 1);
    }

    #[test]
    fn window_counts_and_shapes() {
        let ds = small_dataset(60.0, 9);
        let (train, val, test) = build_windows(&ds, 5).unwrap();
        assert_eq!(train.len(), ds.train().len() - 4);
        assert_eq!(val.len(), ds.val().len() - 4);
        assert_eq!(test.len(), ds.test().len() - 4);
        assert_eq!(train.inputs[0].len(), 5);
        assert_eq!(train.inputs[0][0].len(), 12);
        assert_eq!(train.targets[0].len(), 6);
    }

    #[test]
    fn window_content_matches_index_oracle() {
        let ds = small_dataset(30.0, 11);
        let (train, _, _) = build_windows(&ds, 5).unwrap();
        // Window 3 step 2 is sample 5 with command 4.
        let start = 3;
        let j = 2;
        let w = &train.inputs[start][j];
        let sample = &ds.train()[start + j];
        let prev = &ds.train()[start + j - 1];
        let pv = sample.measured_pose.to_vector();
        for d in 0..6 {
            approx::assert_relative_eq!(w[d], pv[d], epsilon = 1e-12);
            approx::assert_relative_eq!(w[6 + d], prev.command.counts[d], epsilon = 1e-12);
        }
        // First window of the split zero-pads command(-1).
        let w0 = &train.inputs[0][0];
        for d in 0..6 {
            approx::assert_relative_eq!(w0[6 + d], 0.0, epsilon = 1e-12);
        }
        let target = &train.targets[start];
        for d in 0..6 {
            approx::assert_relative_eq!(
                target[d],
                ds.train()[start + 4].command.counts[d],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn windows_never_cross_split_boundaries() {
        // Windows are built per split segment, so the training windows can
        // reference at most train_end - 1 and the number of windows per
        // split confirms no spill-over.
        let ds = small_dataset(60.0, 13);
        let (train, val, test) = build_windows(&ds, 5).unwrap();
        assert_eq!(train.len() + 4, ds.train().len());
        assert_eq!(val.len() + 4, ds.val().len());
        assert_eq!(test.len() + 4, ds.test().len());
    }

    #[test]
    fn error_windows_shapes() {
        let ds = small_dataset(30.0, 15);
        let (train, _, _) = build_error_windows(&ds, 5).unwrap();
        assert!(!train.is_empty());
        assert_eq!(train.inputs[0][0].len(), 30);
        assert_eq!(train.targets[0].len(), 4);
        // Target is the command increment at the window end.
        let k = 5; // first valid index for N = 5 is lo = 4, so row 1 is k = 5
        let row = 1;
        let seg = ds.train();
        for c in 0..4 {
            approx::assert_relative_eq!(
                train.targets[row][c],
                seg[k].command.counts[c] - seg[k - 1].command.counts[c],
                epsilon = 1e-12
            );
        }
    }

    #[test]
    fn reproducibility_same_seed_same_bytes() {
        let a = small_dataset(30.0, 17);
        let b = small_dataset(30.0, 17);
        assert_eq!(dataset_to_csv(&a), dataset_to_csv(&b));
        let c = small_dataset(30.0, 18);
        assert_ne!(dataset_to_csv(&a), dataset_to_csv(&c));
    }

    #[test]
    fn save_load_round_trip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = small_dataset(30.0, 19);
        save(&ds, &path, "test-hash").unwrap();
        let back = load(&path).unwrap();
        assert_eq!(ds, back);
    }

    #[test]
    fn truncated_file_fails_checksum() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data.csv");
        let ds = small_dataset(30.0, 21);
        save(&ds, &path, "h").unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        std::fs::write(&path, &text[..text.len() - 40]).unwrap();
        match load(&path) {
            Err(Error::Checksum(_)) => {}
            other => panic!("expected checksum error, got {other:?}"),
        }
    }

    #[test]
    fn dome_voxel_coverage() {
        // Full-duration collection; the dome fills up with knot count.
        let ds = small_dataset(4080.0, 23);
        assert_eq!(ds.len(), 20_400);
        assert_eq!(ds.train().len(), 14_280);
        assert_eq!(ds.val().len(), 4_080);
        assert_eq!(ds.test().len(), 2_040);
        let ws = ds.workspace;
        let vox = 5.0;
        let nx = (2.0 * ws.radius_mm / vox).ceil() as i64;
        let nz = (ws.height_mm / vox).ceil() as i64;
        let mut in_dome = std::collections::BTreeSet::new();
        for ix in -nx..=nx {
            for iy in -nx..=nx {
                for iz in 0..=nz {
                    let center = Vector3::new(
                        (ix as f64 + 0.5) * vox,
                        (iy as f64 + 0.5) * vox,
                        ws.apex_mm - (iz as f64 + 0.5) * vox,
                    );
                    if ws.contains(&center) {
                        in_dome.insert((ix, iy, iz));
                    }
                }
            }
        }
        let mut hit = std::collections::BTreeSet::new();
        for s in &ds.samples {
            let p = s.measured_pose.position;
            let key = (
                (p.x / vox).floor() as i64,
                (p.y / vox).floor() as i64,
                ((ws.apex_mm - p.z) / vox).floor() as i64,
            );
            hit.insert(key);
        }
        let covered = hit.intersection(&in_dome).count();
        let frac = covered as f64 / in_dome.len() as f64;
        assert!(
            frac >= 0.60,
            "coverage {frac:.3} ({covered}/{})",
            in_dome.len()
        );
    }
}
