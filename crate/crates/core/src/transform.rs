//! Rigid transforms and the Euler conventions used by task files and URDF.

use nalgebra::{Isometry3, Matrix3, Rotation3, Translation3, UnitQuaternion, Vector3};

/// Proper rigid motion: unit-quaternion rotation plus translation.
pub type RigidTransform = Isometry3<f64>;

pub fn rot_x(angle: f64) -> RigidTransform {
    Isometry3::from_parts(
        Translation3::identity(),
        UnitQuaternion::from_axis_angle(&Vector3::x_axis(), angle),
    )
}

pub fn rot_y(angle: f64) -> RigidTransform {
    Isometry3::from_parts(
        Translation3::identity(),
        UnitQuaternion::from_axis_angle(&Vector3::y_axis(), angle),
    )
}

pub fn rot_z(angle: f64) -> RigidTransform {
    Isometry3::from_parts(
        Translation3::identity(),
        UnitQuaternion::from_axis_angle(&Vector3::z_axis(), angle),
    )
}

pub fn trans_z(length: f64) -> RigidTransform {
    Isometry3::translation(0.0, 0.0, length)
}

/// Intrinsic X-Y-Z Euler angles in radians: `R = Rx(a) * Ry(b) * Rz(c)`.
pub fn quat_from_euler_xyz(a: f64, b: f64, c: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::x_axis(), a)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), b)
        * UnitQuaternion::from_axis_angle(&Vector3::z_axis(), c)
}

/// Fixed-axis roll/pitch/yaw as used by URDF: `R = Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn rotation_from_rpy(roll: f64, pitch: f64, yaw: f64) -> UnitQuaternion<f64> {
    UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw)
        * UnitQuaternion::from_axis_angle(&Vector3::y_axis(), pitch)
        * UnitQuaternion::from_axis_angle(&Vector3::x_axis(), roll)
}

/// Extracts URDF roll/pitch/yaw from a rotation matrix.
///
/// Pitch uses `atan2` against the column norm so it stays accurate close to
/// ±90°. At the gimbal-degenerate pose (pitch = ±90°) roll is fixed to zero
/// and the whole residual rotation is assigned to yaw.
pub fn rpy_from_matrix(m: &Matrix3<f64>) -> [f64; 3] {
    let cos_pitch = libm::sqrt(m[(0, 0)] * m[(0, 0)] + m[(1, 0)] * m[(1, 0)]);
    let pitch = libm::atan2(-m[(2, 0)], cos_pitch);
    if cos_pitch < 1e-9 {
        // R = Rz(y) Ry(±pi/2): columns collapse, yaw absorbs roll.
        let yaw = libm::atan2(-m[(0, 1)], m[(1, 1)]);
        [0.0, pitch, yaw]
    } else {
        let roll = libm::atan2(m[(2, 1)], m[(2, 2)]);
        let yaw = libm::atan2(m[(1, 0)], m[(0, 0)]);
        [roll, pitch, yaw]
    }
}

pub fn rpy_from_quat(q: &UnitQuaternion<f64>) -> [f64; 3] {
    rpy_from_matrix(q.to_rotation_matrix().matrix())
}

/// Rotation vector (axis * angle) taking `from` onto `to`, expressed in the
/// world frame: `log(R_to * R_from^T)`.
pub fn rotation_error(to: &UnitQuaternion<f64>, from: &UnitQuaternion<f64>) -> Vector3<f64> {
    (to * from.inverse()).scaled_axis()
}

/// Homogeneous 4x4 matrix of a rigid transform, row-major.
pub fn to_homogeneous(t: &RigidTransform) -> [[f64; 4]; 4] {
    let r = t.rotation.to_rotation_matrix();
    let m = r.matrix();
    let p = t.translation.vector;
    [
        [m[(0, 0)], m[(0, 1)], m[(0, 2)], p.x],
        [m[(1, 0)], m[(1, 1)], m[(1, 2)], p.y],
        [m[(2, 0)], m[(2, 1)], m[(2, 2)], p.z],
        [0.0, 0.0, 0.0, 1.0],
    ]
}

/// Rigid transform from a translation and a rotation matrix. The matrix is
/// re-orthonormalized.
pub fn from_parts(translation: Vector3<f64>, rotation: &Matrix3<f64>) -> RigidTransform {
    let rot = Rotation3::from_matrix(rotation);
    Isometry3::from_parts(
        Translation3::from(translation),
        UnitQuaternion::from_rotation_matrix(&rot),
    )
}
