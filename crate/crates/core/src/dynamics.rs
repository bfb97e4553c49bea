//! Recursive Newton-Euler inverse dynamics, gravity torques, the rms-torque
//! objective and torque-limit checks.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::KinematicChain;
use crate::kinematics::{forward_kinematics, KinematicsError};

pub const STANDARD_GRAVITY: Vector3<f64> = Vector3::new(0.0, 0.0, -9.81);

/// Point mass rigidly attached to the end effector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Payload {
    /// kg
    pub mass: f64,
    /// Position in the end-effector frame (m).
    #[serde(default = "Vector3::zeros")]
    pub offset: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsState {
    pub q: Vec<f64>,
    pub qdot: Vec<f64>,
    pub qddot: Vec<f64>,
    /// m/s²
    pub gravity: Vector3<f64>,
    pub payload: Option<Payload>,
}

impl DynamicsState {
    /// Static configuration under standard gravity.
    pub fn at_rest(q: &[f64]) -> Self {
        DynamicsState {
            q: q.to_vec(),
            qdot: vec![0.0; q.len()],
            qddot: vec![0.0; q.len()],
            gravity: STANDARD_GRAVITY,
            payload: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum DynamicsError {
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error("objective needs at least one task location")]
    NoTaskLocations,
}

/// Joint torques (N·m) for the given motion, by the recursive Newton-Euler
/// algorithm in world coordinates. The payload wrench acts on the last body.
pub fn inverse_dynamics(chain: &KinematicChain, state: &DynamicsState) -> Result<Vec<f64>, DynamicsError> {
    let n = chain.dof();
    for v in [&state.qdot, &state.qddot] {
        if v.len() != n {
            return Err(KinematicsError::DimensionMismatch {
                expected: n,
                got: v.len(),
            }
            .into());
        }
    }
    let poses = forward_kinematics(chain, &state.q)?;

    let mut origins = Vec::with_capacity(n);
    let mut axes = Vec::with_capacity(n);
    let mut forces = Vec::with_capacity(n);
    let mut moments = Vec::with_capacity(n);
    let mut centers = Vec::with_capacity(n);

    // Base: at rest, accelerating upward against gravity.
    let mut omega = Vector3::zeros();
    let mut alpha = Vector3::zeros();
    let mut accel = -state.gravity;
    let mut prev_origin = chain.base_pose.translation.vector;

    for k in 0..n {
        let frame = &poses.bodies[k];
        let origin = frame.translation.vector;
        let z = frame.rotation * Vector3::z();
        let r = origin - prev_origin;
        // Joint origin is rigid with the previous body.
        accel += alpha.cross(&r) + omega.cross(&omega.cross(&r));
        let spin = z * state.qdot[k];
        alpha += z * state.qddot[k] + omega.cross(&spin);
        omega += spin;

        let body = &chain.bodies[k];
        let rot = frame.rotation.to_rotation_matrix();
        let c = rot * body.center_of_mass;
        let inertia: Matrix3<f64> = rot.matrix() * body.inertia * rot.matrix().transpose();
        let accel_c = accel + alpha.cross(&c) + omega.cross(&omega.cross(&c));
        forces.push(accel_c * body.mass);
        moments.push(inertia * alpha + omega.cross(&(inertia * omega)));
        centers.push(c);
        origins.push(origin);
        axes.push(z);
        prev_origin = origin;
    }

    // Payload as a point mass on the last body.
    let mut f_next = Vector3::zeros();
    let mut n_next = Vector3::zeros();
    if let Some(p) = state.payload {
        let point = poses.end_effector * nalgebra::Point3::from(p.offset);
        let r = point.coords - origins[n - 1];
        let a_p = accel + alpha.cross(&r) + omega.cross(&omega.cross(&r));
        let f = a_p * p.mass;
        f_next = f;
        n_next = r.cross(&f);
    }

    let mut tau = vec![0.0; n];
    for k in (0..n).rev() {
        let f = forces[k] + f_next;
        // moments about origin k
        let moment = moments[k] + centers[k].cross(&forces[k]) + n_next;
        tau[k] = axes[k].dot(&moment);
        if k > 0 {
            let shift = origins[k] - origins[k - 1];
            n_next = moment + shift.cross(&f);
        }
        f_next = f;
    }
    Ok(tau)
}

/// Static holding torques: [`inverse_dynamics`] at zero velocity and acceleration.
pub fn gravity_torque(
    chain: &KinematicChain,
    q: &[f64],
    gravity: Vector3<f64>,
    payload: Option<Payload>,
) -> Result<Vec<f64>, DynamicsError> {
    let state = DynamicsState {
        q: q.to_vec(),
        qdot: vec![0.0; q.len()],
        qddot: vec![0.0; q.len()],
        gravity,
        payload,
    };
    inverse_dynamics(chain, &state)
}

/// Sum over joints of the rms torque over task locations.
///
/// `torques[j][i]` is the torque of joint `i` at task location `j`.
pub fn rms_torque_sum(torques: &[Vec<f64>]) -> Result<f64, DynamicsError> {
    let first = torques.first().ok_or(DynamicsError::NoTaskLocations)?;
    let count = torques.len() as f64;
    Ok((0..first.len())
        .map(|i| libm::sqrt(torques.iter().map(|t| t[i] * t[i]).sum::<f64>() / count))
        .sum())
}

/// Objective value for a chain and one IK solution per task location,
/// using static gravity torques.
pub fn objective(
    chain: &KinematicChain,
    solutions: &[Vec<f64>],
    gravity: Vector3<f64>,
    payload: Option<Payload>,
) -> Result<f64, DynamicsError> {
    let table = solutions
        .iter()
        .map(|q| gravity_torque(chain, q, gravity, payload))
        .collect::<Result<Vec<_>, _>>()?;
    rms_torque_sum(&table)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorqueViolation {
    pub joint: usize,
    /// Task location or waypoint index.
    pub sample: usize,
    pub torque: f64,
    pub limit: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TorqueLimitReport {
    /// `limit_i - max_j |τ_ij|` per joint.
    pub margins: Vec<f64>,
    pub violations: Vec<TorqueViolation>,
}

impl TorqueLimitReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }

    /// Σ over all samples and joints of the amount above the limit.
    pub fn total_excess(&self) -> f64 {
        self.violations.iter().map(|v| v.torque.abs() - v.limit).sum()
    }
}

/// Compares every sample against the chain's nominal effort limits.
pub fn check_torque_limits(chain: &KinematicChain, torques: &[Vec<f64>]) -> Result<TorqueLimitReport, DynamicsError> {
    let limits = chain.effort_limits();
    let mut margins = limits.clone();
    let mut violations = Vec::new();
    for (j, row) in torques.iter().enumerate() {
        if row.len() != limits.len() {
            return Err(KinematicsError::DimensionMismatch {
                expected: limits.len(),
                got: row.len(),
            }
            .into());
        }
        for (i, (&t, &limit)) in row.iter().zip(&limits).enumerate() {
            margins[i] = margins[i].min(limit - t.abs());
            if t.abs() > limit {
                violations.push(TorqueViolation {
                    joint: i,
                    sample: j,
                    torque: t,
                    limit,
                });
            }
        }
    }
    Ok(TorqueLimitReport { margins, violations })
}
