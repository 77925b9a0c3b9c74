//! Constant-curvature kinematics of the two-segment bending section with a
//! rigid mid link and a fixed forceps tool frame.
//!
//! Conventions fixed here and used everywhere else in the crate:
//!
//! * Each segment bends as a circular arc of angle `theta` inside a bending
//!   plane at angle `delta` about the local z axis. The tip translation is
//!   `(L/theta) * [cos(delta)(1-cos(theta)), sin(delta)(1-cos(theta)), sin(theta)]`
//!   and the rotation is `Rz(delta) * Ry(theta) * Rz(-delta)`.
//! * The robot extends along +z in its base frame; the straight
//!   configuration stacks proximal segment, rigid mid link, distal segment
//!   and tool along z.
//! * Orientations are reported as extrinsic X-Y-Z Euler angles
//!   (roll-pitch-yaw, `R = Rz(yaw) Ry(pitch) Rx(roll)`) in degrees,
//!   canonicalized to `(-180, 180]`.

use nalgebra::{Matrix3, Matrix6, Matrix6x4, Rotation3, Vector2, Vector3, Vector6};

use crate::{Error, Result};

/// Per-segment bend limit (rad). Keeps the composed workspace inside the
/// training dome.
pub const THETA_MAX: f64 = std::f64::consts::FRAC_PI_2;

/// Below this bend angle the positional arc functions switch to series.
const SERIES_EPS_POS: f64 = 1e-6;
/// Below this bend angle the Jacobian arc derivatives switch to series.
const SERIES_EPS_JAC: f64 = 1e-4;

/// Link lengths of the bending section and tool, in mm.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentGeometry {
    pub length_proximal: f64,
    pub length_mid: f64,
    pub length_distal: f64,
    pub tool_length: f64,
}

impl Default for SegmentGeometry {
    fn default() -> Self {
        SegmentGeometry {
            length_proximal: 18.0,
            length_mid: 10.0,
            length_distal: 18.0,
            tool_length: 35.0,
        }
    }
}

impl SegmentGeometry {
    pub fn validate(&self) -> Result<()> {
        let lens = [
            self.length_proximal,
            self.length_mid,
            self.length_distal,
            self.tool_length,
        ];
        if lens.iter().any(|l| !l.is_finite() || *l <= 0.0) {
            return Err(Error::invalid_argument("segment lengths must be positive"));
        }
        Ok(())
    }

    /// Tip distance from the base in the straight configuration.
    pub fn straight_reach(&self) -> f64 {
        self.length_proximal + self.length_mid + self.length_distal + self.tool_length
    }
}

/// Generalized coordinates: two bending segments plus base rotation (rad)
/// and base translation (mm).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ConfigSpace {
    pub theta1: f64,
    pub delta1: f64,
    pub theta2: f64,
    pub delta2: f64,
    pub base_rotation: f64,
    pub base_translation: f64,
}

impl ConfigSpace {
    pub fn from_vector(v: &Vector6<f64>) -> Self {
        ConfigSpace {
            theta1: v[0],
            delta1: v[1],
            theta2: v[2],
            delta2: v[3],
            base_rotation: v[4],
            base_translation: v[5],
        }
    }

    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.theta1,
            self.delta1,
            self.theta2,
            self.delta2,
            self.base_rotation,
            self.base_translation,
        )
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.to_vector();
        if v.iter().any(|x| !x.is_finite()) {
            return Err(Error::invalid_argument("non-finite configuration"));
        }
        if self.theta1 < 0.0 || self.theta1 > THETA_MAX || self.theta2 < 0.0 || self.theta2 > THETA_MAX
        {
            return Err(Error::invalid_argument(format!(
                "bend angles must lie in [0, {THETA_MAX}]"
            )));
        }
        Ok(())
    }
}

/// 6-DoF tip pose: position in mm, extrinsic X-Y-Z Euler angles in degrees.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: Vector3<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: Vector3<f64>) -> Self {
        Pose {
            position,
            orientation: orientation.map(wrap_angle_deg),
        }
    }

    pub fn identity() -> Self {
        Pose {
            position: Vector3::zeros(),
            orientation: Vector3::zeros(),
        }
    }

    /// Stack position (mm) and orientation (deg) into one 6-vector.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(
            self.position.x,
            self.position.y,
            self.position.z,
            self.orientation.x,
            self.orientation.y,
            self.orientation.z,
        )
    }

    pub fn from_vector(v: &Vector6<f64>) -> Self {
        Pose::new(
            Vector3::new(v[0], v[1], v[2]),
            Vector3::new(v[3], v[4], v[5]),
        )
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        rotation_from_euler_deg(&self.orientation)
    }
}

/// Rigid transform with an orthonormal rotation and a translation in mm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomogeneousTransform {
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl HomogeneousTransform {
    pub fn identity() -> Self {
        HomogeneousTransform {
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    pub fn from_translation(t: Vector3<f64>) -> Self {
        HomogeneousTransform {
            rotation: Matrix3::identity(),
            translation: t,
        }
    }

    pub fn compose(&self, other: &HomogeneousTransform) -> HomogeneousTransform {
        HomogeneousTransform {
            rotation: self.rotation * other.rotation,
            translation: self.translation + self.rotation * other.translation,
        }
    }

    pub fn transform_point(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.translation + self.rotation * p
    }

    /// Orthonormality defect `max(|R^T R - I|, |det R - 1|)`.
    pub fn orthonormality_error(&self) -> f64 {
        let defect = (self.rotation.transpose() * self.rotation - Matrix3::identity()).abs();
        let det = (self.rotation.determinant() - 1.0).abs();
        defect.max().max(det)
    }

    pub fn to_pose(&self) -> Pose {
        Pose::new(self.translation, euler_deg_from_rotation(&self.rotation))
    }
}

// Arc helper functions. f = (1-cos t)/t, g = sin t / t and their
// derivatives; F = (1-cos t)/t^2, and the even ratios used by the smooth
// bending-vector parameterization. Series branches avoid 0/0 near t = 0.

fn arc_f(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_POS {
        t / 2.0 - t.powi(3) / 24.0 + t.powi(5) / 720.0
    } else {
        (1.0 - t.cos()) / t
    }
}

fn arc_g(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_POS {
        1.0 - t * t / 6.0 + t.powi(4) / 120.0
    } else {
        t.sin() / t
    }
}

fn arc_f_prime(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        0.5 - t * t / 8.0 + t.powi(4) / 144.0
    } else {
        t.sin() / t - (1.0 - t.cos()) / (t * t)
    }
}

fn arc_g_prime(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        -t / 3.0 + t.powi(3) / 30.0
    } else {
        t.cos() / t - t.sin() / (t * t)
    }
}

/// F(t) = (1 - cos t) / t^2, even and smooth.
fn arc_ff(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        0.5 - t * t / 24.0 + t.powi(4) / 720.0
    } else {
        (1.0 - t.cos()) / (t * t)
    }
}

/// G(t) = sin t / t (same as `arc_g` but with the wider Jacobian cutoff).
fn arc_gg(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        1.0 - t * t / 6.0 + t.powi(4) / 120.0
    } else {
        t.sin() / t
    }
}

/// S_F(t) = F'(t)/t, even and smooth.
fn arc_sf(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        -1.0 / 12.0 + t * t / 180.0
    } else {
        t.sin() / t.powi(3) - 2.0 * (1.0 - t.cos()) / t.powi(4)
    }
}

/// S_G(t) = G'(t)/t, even and smooth.
fn arc_sg(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        -1.0 / 3.0 + t * t / 30.0
    } else {
        t.cos() / (t * t) - t.sin() / t.powi(3)
    }
}

/// H(t) = (t - sin t)/t^3, the second left-Jacobian coefficient.
fn arc_h(t: f64) -> f64 {
    if t.abs() < SERIES_EPS_JAC {
        1.0 / 6.0 - t * t / 120.0 + t.powi(4) / 5040.0
    } else {
        (t - t.sin()) / t.powi(3)
    }
}

fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

fn rot_z(a: f64) -> Matrix3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a).into_inner()
}

/// Transform across one bending segment under the constant-curvature
/// convention: bending plane at `delta` about the base z axis, arc of
/// angle `theta`, arc length `length`.
pub fn segment_transform(theta: f64, delta: f64, length: f64) -> Result<HomogeneousTransform> {
    if !theta.is_finite() || !delta.is_finite() || !length.is_finite() {
        return Err(Error::invalid_argument("non-finite segment parameters"));
    }
    if length <= 0.0 {
        return Err(Error::invalid_argument("segment length must be positive"));
    }
    if theta < 0.0 {
        return Err(Error::invalid_argument("bend angle must be non-negative"));
    }
    Ok(segment_transform_unchecked(theta, delta, length))
}

fn segment_transform_unchecked(theta: f64, delta: f64, length: f64) -> HomogeneousTransform {
    let (sd, cd) = delta.sin_cos();
    let f = arc_f(theta);
    let g = arc_g(theta);
    let translation = Vector3::new(length * cd * f, length * sd * f, length * g);
    let rotation = rot_z(delta)
        * Rotation3::from_axis_angle(&Vector3::y_axis(), theta).into_inner()
        * rot_z(-delta);
    HomogeneousTransform {
        rotation,
        translation,
    }
}

/// Same segment transform parameterized by the bending vector
/// `w = (theta cos delta, theta sin delta)`, which is smooth through the
/// straight configuration.
pub fn segment_transform_bending(w: &Vector2<f64>, length: f64) -> HomogeneousTransform {
    let theta = w.norm();
    let v = Vector3::new(-w.y, w.x, 0.0);
    let k = skew(&v);
    let rotation = Matrix3::identity() + arc_gg(theta) * k + arc_ff(theta) * (k * k);
    let ff = arc_ff(theta);
    let translation = Vector3::new(length * w.x * ff, length * w.y * ff, length * arc_gg(theta));
    HomogeneousTransform {
        rotation,
        translation,
    }
}

/// One factor of the kinematic chain together with the spatial angular and
/// linear velocity induced by each of its parameters (expressed in the
/// factor's own base frame).
struct ChainFactor {
    transform: HomogeneousTransform,
    partials: Vec<(Vector3<f64>, Vector3<f64>)>,
}

fn base_factor(q: &ConfigSpace) -> ChainFactor {
    // Rz(phi) * Trans(0, 0, t) collapses to rotation Rz(phi) with
    // translation (0, 0, t).
    ChainFactor {
        transform: HomogeneousTransform {
            rotation: rot_z(q.base_rotation),
            translation: Vector3::new(0.0, 0.0, q.base_translation),
        },
        partials: vec![
            (Vector3::z(), Vector3::zeros()),
            (Vector3::zeros(), Vector3::z()),
        ],
    }
}

fn segment_factor(theta: f64, delta: f64, length: f64) -> ChainFactor {
    let transform = segment_transform_unchecked(theta, delta, length);
    let (sd, cd) = delta.sin_cos();
    let bend_axis = Vector3::new(-sd, cd, 0.0);
    let omega_theta = bend_axis;
    let v_theta = Vector3::new(
        length * cd * arc_f_prime(theta),
        length * sd * arc_f_prime(theta),
        length * arc_g_prime(theta),
    );
    let omega_delta = Vector3::z() - transform.rotation * Vector3::z();
    let v_delta = Vector3::new(-sd, cd, 0.0) * (length * arc_f(theta));
    ChainFactor {
        transform,
        partials: vec![(omega_theta, v_theta), (omega_delta, v_delta)],
    }
}

fn segment_factor_bending(w: &Vector2<f64>, length: f64) -> ChainFactor {
    let transform = segment_transform_bending(w, length);
    let theta = w.norm();
    let v = Vector3::new(-w.y, w.x, 0.0);
    let k = skew(&v);
    // Left Jacobian of SO(3): maps d(rotation vector) to spatial angular
    // velocity.
    let jl = Matrix3::identity() + arc_ff(theta) * k + arc_h(theta) * (k * k);
    let omega_a = jl * Vector3::new(0.0, 1.0, 0.0);
    let omega_b = jl * Vector3::new(-1.0, 0.0, 0.0);
    let ff = arc_ff(theta);
    let sf = arc_sf(theta);
    let sg = arc_sg(theta);
    let v_a = Vector3::new(
        length * (ff + w.x * w.x * sf),
        length * w.x * w.y * sf,
        length * w.x * sg,
    );
    let v_b = Vector3::new(
        length * w.x * w.y * sf,
        length * (ff + w.y * w.y * sf),
        length * w.y * sg,
    );
    ChainFactor {
        transform,
        partials: vec![(omega_a, v_a), (omega_b, v_b)],
    }
}

fn fixed_factor(t: HomogeneousTransform) -> ChainFactor {
    ChainFactor {
        transform: t,
        partials: Vec::new(),
    }
}

/// Compose a chain and return the tool transform plus one 6-row column
/// (linear on top, angular below) per chain parameter, in chain order.
fn chain_transform_and_jacobian(
    factors: &[ChainFactor],
) -> (HomogeneousTransform, Vec<Vector6<f64>>) {
    let n = factors.len();
    // Suffix translations: p_post[i] is the translation of the product of
    // factors i+1..n expressed in factor i's tip frame.
    let mut p_post = vec![Vector3::zeros(); n];
    let mut acc = HomogeneousTransform::identity();
    for i in (0..n).rev() {
        p_post[i] = acc.translation;
        acc = factors[i].transform.compose(&acc);
    }
    let total = acc;

    let mut columns = Vec::new();
    let mut pre = HomogeneousTransform::identity();
    for (i, factor) in factors.iter().enumerate() {
        for (omega, v) in &factor.partials {
            let lever = factor.transform.rotation * p_post[i];
            let lin = pre.rotation * (v + omega.cross(&lever));
            let ang = pre.rotation * omega;
            columns.push(Vector6::new(lin.x, lin.y, lin.z, ang.x, ang.y, ang.z));
        }
        pre = pre.compose(&factor.transform);
    }
    (total, columns)
}

fn chain_q(q: &ConfigSpace, g: &SegmentGeometry) -> Vec<ChainFactor> {
    vec![
        base_factor(q),
        segment_factor(q.theta1, q.delta1, g.length_proximal),
        fixed_factor(HomogeneousTransform::from_translation(Vector3::new(
            0.0,
            0.0,
            g.length_mid,
        ))),
        segment_factor(q.theta2, q.delta2, g.length_distal),
        fixed_factor(HomogeneousTransform::from_translation(Vector3::new(
            0.0,
            0.0,
            g.tool_length,
        ))),
    ]
}

/// Tool-frame transform in the base frame.
pub fn fk_transform(q: &ConfigSpace, g: &SegmentGeometry) -> Result<HomogeneousTransform> {
    q.validate()?;
    g.validate()?;
    let (t, _) = chain_transform_and_jacobian(&chain_q(q, g));
    Ok(t)
}

/// Tool-frame pose (mm, degrees) in the base frame.
pub fn forward_kinematics(q: &ConfigSpace, g: &SegmentGeometry) -> Result<Pose> {
    Ok(fk_transform(q, g)?.to_pose())
}

/// Geometric Jacobian of the tool frame. Rows are linear velocity (mm/s)
/// over angular velocity (rad/s); columns are ordered
/// `(theta1, delta1, theta2, delta2, base_rotation, base_translation)`.
pub fn jacobian(q: &ConfigSpace, g: &SegmentGeometry) -> Result<Matrix6<f64>> {
    q.validate()?;
    g.validate()?;
    let (_, cols) = chain_transform_and_jacobian(&chain_q(q, g));
    // Chain order puts the two base columns first; the public column order
    // puts them last.
    let order = [2usize, 3, 4, 5, 0, 1];
    let mut j = Matrix6::zeros();
    for (target, source) in order.iter().enumerate() {
        j.set_column(target, &cols[*source]);
    }
    Ok(j)
}

/// Geometric Jacobian with respect to the two bending vectors
/// `(w1x, w1y, w2x, w2y)`, smooth through straight configurations. Base
/// rotation and translation are held fixed. Used by the model-based
/// controllers, which actuate in tendon space.
pub fn jacobian_bending(
    w1: &Vector2<f64>,
    w2: &Vector2<f64>,
    q_base: &ConfigSpace,
    g: &SegmentGeometry,
) -> Matrix6x4<f64> {
    let factors = vec![
        fixed_factor(HomogeneousTransform {
            rotation: rot_z(q_base.base_rotation),
            translation: Vector3::new(0.0, 0.0, q_base.base_translation),
        }),
        segment_factor_bending(w1, g.length_proximal),
        fixed_factor(HomogeneousTransform::from_translation(Vector3::new(
            0.0,
            0.0,
            g.length_mid,
        ))),
        segment_factor_bending(w2, g.length_distal),
        fixed_factor(HomogeneousTransform::from_translation(Vector3::new(
            0.0,
            0.0,
            g.tool_length,
        ))),
    ];
    let (_, cols) = chain_transform_and_jacobian(&factors);
    let mut j = Matrix6x4::zeros();
    for (i, col) in cols.iter().enumerate() {
        j.set_column(i, col);
    }
    j
}

/// Convert a bending configuration to the smooth bending vectors.
pub fn bending_vectors(q: &ConfigSpace) -> (Vector2<f64>, Vector2<f64>) {
    (
        Vector2::new(q.theta1 * q.delta1.cos(), q.theta1 * q.delta1.sin()),
        Vector2::new(q.theta2 * q.delta2.cos(), q.theta2 * q.delta2.sin()),
    )
}

/// Inverse of [`bending_vectors`].
pub fn config_from_bending(
    w1: &Vector2<f64>,
    w2: &Vector2<f64>,
    base_rotation: f64,
    base_translation: f64,
) -> ConfigSpace {
    let polar = |w: &Vector2<f64>| {
        let theta = w.norm();
        let delta = if theta > 0.0 { w.y.atan2(w.x) } else { 0.0 };
        (theta, delta)
    };
    let (theta1, delta1) = polar(w1);
    let (theta2, delta2) = polar(w2);
    ConfigSpace {
        theta1,
        delta1,
        theta2,
        delta2,
        base_rotation,
        base_translation,
    }
}

/// Wrap an angle in degrees to `(-180, 180]`.
pub fn wrap_angle_deg(a: f64) -> f64 {
    let mut x = a % 360.0;
    if x <= -180.0 {
        x += 360.0;
    } else if x > 180.0 {
        x -= 360.0;
    }
    x
}

/// Rotation matrix from extrinsic X-Y-Z Euler angles in degrees.
pub fn rotation_from_euler_deg(euler: &Vector3<f64>) -> Matrix3<f64> {
    let r = Rotation3::from_euler_angles(
        euler.x.to_radians(),
        euler.y.to_radians(),
        euler.z.to_radians(),
    );
    r.into_inner()
}

/// Extrinsic X-Y-Z Euler angles in degrees from a rotation matrix,
/// canonicalized to `(-180, 180]`.
pub fn euler_deg_from_rotation(r: &Matrix3<f64>) -> Vector3<f64> {
    let rot = Rotation3::from_matrix_unchecked(*r);
    let (roll, pitch, yaw) = rot.euler_angles();
    Vector3::new(
        wrap_angle_deg(roll.to_degrees()),
        wrap_angle_deg(pitch.to_degrees()),
        wrap_angle_deg(yaw.to_degrees()),
    )
}

/// Tracking error `desired - actual`: position in mm, per-axis Euler angle
/// difference in degrees wrapped to `(-180, 180]`.
pub fn pose_error(desired: &Pose, actual: &Pose) -> Vector6<f64> {
    let dp = desired.position - actual.position;
    let de = (desired.orientation - actual.orientation).map(wrap_angle_deg);
    Vector6::new(dp.x, dp.y, dp.z, de.x, de.y, de.z)
}
