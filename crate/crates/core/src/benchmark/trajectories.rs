//! Reference trajectory generators for the tracking and orientation tasks.

use nalgebra::{Matrix3, Rotation3, Vector3};

use crate::kinematics::{euler_deg_from_rotation, Pose, SegmentGeometry};
use crate::{Error, Result};

/// Control rate the references are sampled at.
pub const RATE_HZ: f64 = 5.0;
/// Translation speed along straight path segments, mm/s.
pub const PATH_SPEED: f64 = 2.0;

/// A timed desired-pose sequence plus scoring metadata.
#[derive(Debug, Clone)]
pub struct ReferenceTrajectory {
    pub name: String,
    /// (time s, desired pose in the robot base frame).
    pub samples: Vec<(f64, Pose)>,
    /// Samples before this index are approach/settling and are excluded
    /// from metrics.
    pub metrics_start: usize,
    /// Geometry parameters for the report metadata.
    pub params: Vec<(String, f64)>,
}

impl ReferenceTrajectory {
    pub fn poses(&self) -> Vec<Pose> {
        self.samples.iter().map(|(_, p)| *p).collect()
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Task-frame point (x right, y into the workspace along the axis, z up in
/// the robot's y direction) to a robot-frame position.
fn task_to_robot(task: &Vector3<f64>, g: &SegmentGeometry) -> Vector3<f64> {
    Vector3::new(task.x, task.z, g.straight_reach() - task.y)
}

fn axial_pose(task: &Vector3<f64>, g: &SegmentGeometry) -> Pose {
    Pose::new(task_to_robot(task, g), Vector3::zeros())
}

/// Append samples along a straight task-space segment at the path speed,
/// excluding the start point, including the end point.
fn append_segment(
    samples: &mut Vec<(f64, Pose)>,
    from: &Vector3<f64>,
    to: &Vector3<f64>,
    g: &SegmentGeometry,
) {
    let dist = (to - from).norm();
    let ticks = ((dist / PATH_SPEED) * RATE_HZ).ceil().max(1.0) as usize;
    for k in 1..=ticks {
        let s = k as f64 / ticks as f64;
        let p = from + (to - from) * s;
        let t = samples.len() as f64 / RATE_HZ;
        samples.push((t, axial_pose(&p, g)));
    }
}

/// Concentric rectangles in the plane 15 mm into the workspace: the tool
/// first translates 15 mm along task +Y, then traces loops grown by 5 mm
/// per side per lap until the outermost measures 40 mm x 30 mm, keeping
/// its orientation along the workspace axis throughout.
pub fn nested_rectangle(g: &SegmentGeometry) -> ReferenceTrajectory {
    let mut samples = vec![(0.0, axial_pose(&Vector3::zeros(), g))];
    let plane_y = 15.0;
    let center = Vector3::new(0.0, plane_y, 0.0);
    append_segment(&mut samples, &Vector3::zeros(), &center, g);

    let loops: [(f64, f64); 3] = [(20.0, 10.0), (30.0, 20.0), (40.0, 30.0)];
    let mut cursor = center;
    for (w, h) in loops {
        let corners = [
            Vector3::new(-w / 2.0, plane_y, -h / 2.0),
            Vector3::new(w / 2.0, plane_y, -h / 2.0),
            Vector3::new(w / 2.0, plane_y, h / 2.0),
            Vector3::new(-w / 2.0, plane_y, h / 2.0),
        ];
        append_segment(&mut samples, &cursor, &corners[0], g);
        for i in 0..4 {
            append_segment(&mut samples, &corners[i], &corners[(i + 1) % 4], g);
        }
        cursor = corners[0];
    }

    ReferenceTrajectory {
        name: "nested_rectangle".into(),
        samples,
        metrics_start: 0,
        params: vec![
            ("plane_offset_mm".into(), plane_y),
            ("outer_width_mm".into(), 40.0),
            ("outer_height_mm".into(), 30.0),
            ("side_growth_mm".into(), 5.0),
            ("speed_mm_per_s".into(), PATH_SPEED),
        ],
    }
}

/// Two 15 mm-amplitude loops, one spanning task Z then one spanning task
/// X, starting 6 mm into the workspace. Each loop is time-warped so its
/// endpoint velocity vanishes, making the loop transition C1.
pub fn lissajous(g: &SegmentGeometry) -> ReferenceTrajectory {
    let loop_seconds = 40.0;
    let ticks = (loop_seconds * RATE_HZ) as usize;
    let mut samples = Vec::with_capacity(2 * ticks + 1);
    let start = Vector3::new(0.0, 6.0, 0.0);
    samples.push((0.0, axial_pose(&start, g)));

    let warp = |u: f64| u - (std::f64::consts::TAU * u).sin() / std::f64::consts::TAU;
    let push = |samples: &mut Vec<(f64, Pose)>, vertical: bool| {
        for k in 1..=ticks {
            let u = k as f64 / ticks as f64;
            let phi = std::f64::consts::TAU * warp(u);
            let along = 6.0 + 7.5 * (1.0 - phi.cos());
            let swing = 15.0 * phi.sin();
            let p = if vertical {
                Vector3::new(0.0, along, swing)
            } else {
                Vector3::new(swing, along, 0.0)
            };
            let t = samples.len() as f64 / RATE_HZ;
            samples.push((t, axial_pose(&p, g)));
        }
    };
    push(&mut samples, true);
    push(&mut samples, false);

    ReferenceTrajectory {
        name: "lissajous".into(),
        samples,
        metrics_start: 0,
        params: vec![
            ("amplitude_mm".into(), 15.0),
            ("start_offset_mm".into(), 6.0),
            ("loop_seconds".into(), loop_seconds),
        ],
    }
}

/// The four fixed tip points of the orientation task, in task coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConePoint {
    P1,
    P2,
    P3,
    P4,
}

impl ConePoint {
    pub const ALL: [ConePoint; 4] = [ConePoint::P1, ConePoint::P2, ConePoint::P3, ConePoint::P4];

    pub fn label(&self) -> &'static str {
        match self {
            ConePoint::P1 => "P1",
            ConePoint::P2 => "P2",
            ConePoint::P3 => "P3",
            ConePoint::P4 => "P4",
        }
    }

    pub fn task_position(&self) -> Vector3<f64> {
        match self {
            ConePoint::P1 => Vector3::new(-6.0, 8.0, 0.0),
            ConePoint::P2 => Vector3::new(0.0, 8.0, -6.0),
            ConePoint::P3 => Vector3::new(6.0, 8.0, 0.0),
            ConePoint::P4 => Vector3::new(0.0, 8.0, 6.0),
        }
    }
}

impl std::str::FromStr for ConePoint {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "P1" => Ok(ConePoint::P1),
            "P2" => Ok(ConePoint::P2),
            "P3" => Ok(ConePoint::P3),
            "P4" => Ok(ConePoint::P4),
            other => Err(Error::invalid_argument(format!("unknown cone point '{other}'"))),
        }
    }
}

pub const CONE_TILT_DEG: f64 = 30.0;
pub const CONE_WAYPOINTS: usize = 12;
pub const CONE_DWELL_TICKS: usize = 10;
const CONE_APPROACH_SECONDS: f64 = 6.0;

/// Tool-axis rotation for sweep angle psi: tilt by the cone half-angle
/// inside the plane selected by psi, with no roll about the tool axis.
fn cone_rotation(psi: f64) -> Matrix3<f64> {
    let tilt = CONE_TILT_DEG.to_radians();
    (Rotation3::from_axis_angle(&Vector3::z_axis(), psi)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), tilt)
        * Rotation3::from_axis_angle(&Vector3::z_axis(), -psi))
    .into_inner()
}

/// Orientation sweep at a fixed tip point: the tool axis holds a constant
/// tilt from the workspace axis and steps around it in 30-degree
/// increments, dwelling at each of the 12 waypoints. The approach from the
/// home pose is logged but excluded from metrics.
pub fn orientation_cone(point: ConePoint, g: &SegmentGeometry) -> ReferenceTrajectory {
    let position = task_to_robot(&point.task_position(), g);
    let home = axial_pose(&Vector3::zeros(), g);
    let mut samples = vec![(0.0, home)];

    // Approach: blend position and tilt from home to the first waypoint.
    let approach_ticks = (CONE_APPROACH_SECONDS * RATE_HZ) as usize;
    for k in 1..=approach_ticks {
        let s = {
            let u = k as f64 / approach_ticks as f64;
            u * u * (3.0 - 2.0 * u)
        };
        let p = home.position + (position - home.position) * s;
        let tilt = CONE_TILT_DEG.to_radians() * s;
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), tilt).into_inner();
        let t = samples.len() as f64 / RATE_HZ;
        samples.push((t, Pose::new(p, euler_deg_from_rotation(&r))));
    }
    let metrics_start = samples.len();

    for j in 0..CONE_WAYPOINTS {
        let psi = std::f64::consts::TAU * j as f64 / CONE_WAYPOINTS as f64;
        let orientation = euler_deg_from_rotation(&cone_rotation(psi));
        for _ in 0..CONE_DWELL_TICKS {
            let t = samples.len() as f64 / RATE_HZ;
            samples.push((t, Pose::new(position, orientation)));
        }
    }

    ReferenceTrajectory {
        name: format!("cone_{}", point.label().to_ascii_lowercase()),
        samples,
        metrics_start,
        params: vec![
            ("tilt_deg".into(), CONE_TILT_DEG),
            ("waypoints".into(), CONE_WAYPOINTS as f64),
            ("dwell_ticks".into(), CONE_DWELL_TICKS as f64),
            ("task_x".into(), point.task_position().x),
            ("task_y".into(), point.task_position().y),
            ("task_z".into(), point.task_position().z),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn task_of(pose: &Pose, g: &SegmentGeometry) -> Vector3<f64> {
        Vector3::new(
            pose.position.x,
            g.straight_reach() - pose.position.z,
            pose.position.y,
        )
    }

    #[test]
    fn rectangle_outer_extents() {
        let g = SegmentGeometry::default();
        let traj = nested_rectangle(&g);
        let tasks: Vec<Vector3<f64>> = traj.samples.iter().map(|(_, p)| task_of(p, &g)).collect();
        let max_x = tasks.iter().map(|p| p.x.abs()).fold(0.0, f64::max);
        let max_z = tasks.iter().map(|p| p.z.abs()).fold(0.0, f64::max);
        assert_relative_eq!(max_x, 20.0, epsilon = 1e-9);
        assert_relative_eq!(max_z, 15.0, epsilon = 1e-9);
        // All waypoints share the axial orientation.
        for (_, p) in &traj.samples {
            assert_relative_eq!(p.orientation.norm(), 0.0, epsilon = 1e-12);
        }
        // The approach plane sits 15 mm into the workspace.
        let plane_samples = tasks.iter().filter(|p| (p.y - 15.0).abs() < 1e-9).count();
        assert!(plane_samples > tasks.len() / 2);
    }

    #[test]
    fn rectangle_perimeters_match_growth_rule() {
        // Loop k has perimeter 2 (w + h) with 5 mm growth per side per lap.
        let dims = [(20.0, 10.0), (30.0, 20.0), (40.0, 30.0)];
        for window in dims.windows(2) {
            assert_relative_eq!(window[1].0 - window[0].0, 10.0, epsilon = 1e-12);
            assert_relative_eq!(window[1].1 - window[0].1, 10.0, epsilon = 1e-12);
        }
        let perimeters: Vec<f64> = dims.iter().map(|(w, h)| 2.0 * (w + h)).collect();
        assert_eq!(perimeters, vec![60.0, 100.0, 140.0]);
        // Tick counts along each loop follow the arithmetic at 2 mm/s.
        let g = SegmentGeometry::default();
        let traj = nested_rectangle(&g);
        let expected_loop_ticks: f64 = perimeters.iter().map(|p| p / PATH_SPEED * RATE_HZ).sum();
        // Plus: initial dwell sample, 15 mm approach, and 3 center/corner
        // connectors.
        assert!(traj.len() as f64 > expected_loop_ticks);
    }

    #[test]
    fn lissajous_amplitudes_and_start() {
        let g = SegmentGeometry::default();
        let traj = lissajous(&g);
        let tasks: Vec<Vector3<f64>> = traj.samples.iter().map(|(_, p)| task_of(p, &g)).collect();
        let max_x = tasks.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let max_z = tasks.iter().map(|p| p.z).fold(f64::NEG_INFINITY, f64::max);
        assert_relative_eq!(max_x, 15.0, epsilon = 0.01);
        assert_relative_eq!(max_z, 15.0, epsilon = 0.01);
        assert_relative_eq!(tasks[0].y, 6.0, epsilon = 1e-9);
        assert_relative_eq!(tasks[0].x, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn lissajous_transition_is_smooth() {
        let g = SegmentGeometry::default();
        let traj = lissajous(&g);
        let dt = 1.0 / RATE_HZ;
        let mut max_jump: f64 = 0.0;
        for w in traj.samples.windows(3) {
            let v1 = (w[1].1.position - w[0].1.position) / dt;
            let v2 = (w[2].1.position - w[1].1.position) / dt;
            max_jump = max_jump.max((v2 - v1).norm());
        }
        assert!(max_jump < 1.0, "velocity jump {max_jump} mm/s");
    }

    #[test]
    fn cone_waypoints_hold_tilt_and_position() {
        let g = SegmentGeometry::default();
        for point in ConePoint::ALL {
            let traj = orientation_cone(point, &g);
            let scored = &traj.samples[traj.metrics_start..];
            assert_eq!(scored.len(), CONE_WAYPOINTS * CONE_DWELL_TICKS);
            let expected_pos = task_to_robot(&point.task_position(), &g);
            let mut distinct_axes = Vec::new();
            for (_, pose) in scored {
                assert_relative_eq!(pose.position, expected_pos, epsilon = 1e-9);
                let axis = pose.rotation() * Vector3::z();
                // Dot-product oracle: constant angle to the workspace axis.
                assert_relative_eq!(
                    axis.dot(&Vector3::z()),
                    CONE_TILT_DEG.to_radians().cos(),
                    epsilon = 1e-9
                );
                if !distinct_axes
                    .iter()
                    .any(|a: &Vector3<f64>| (a - axis).norm() < 1e-9)
                {
                    distinct_axes.push(axis);
                }
            }
            assert_eq!(distinct_axes.len(), CONE_WAYPOINTS);
            // The swept axes are uniformly spaced around the cone.
            for (j, axis) in distinct_axes.iter().enumerate() {
                let psi = std::f64::consts::TAU * j as f64 / CONE_WAYPOINTS as f64;
                let tilt = CONE_TILT_DEG.to_radians();
                let expected =
                    Vector3::new(tilt.sin() * psi.cos(), tilt.sin() * psi.sin(), tilt.cos());
                assert_relative_eq!(axis.dot(&expected), 1.0, epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn five_hz_spacing() {
        let g = SegmentGeometry::default();
        for traj in [
            nested_rectangle(&g),
            lissajous(&g),
            orientation_cone(ConePoint::P2, &g),
        ] {
            for (k, (t, _)) in traj.samples.iter().enumerate() {
                assert_relative_eq!(*t, k as f64 * 0.2, epsilon = 1e-9);
            }
        }
    }
}
