//! Forward kinematics, the geometric Jacobian and damped least-squares IK.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix6, UnitQuaternion, Vector3, Vector6};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::KinematicChain;
use crate::transform::{rot_z, rotation_error, RigidTransform};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum KinematicsError {
    #[error("expected {expected} joint values, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

fn check_dim(chain: &KinematicChain, q: &[f64]) -> Result<(), KinematicsError> {
    if q.len() != chain.dof() {
        return Err(KinematicsError::DimensionMismatch {
            expected: chain.dof(),
            got: q.len(),
        });
    }
    Ok(())
}

/// World poses of every joint (body) frame and of the end effector.
#[derive(Debug, Clone, PartialEq)]
pub struct ChainPoses {
    pub bodies: Vec<RigidTransform>,
    pub end_effector: RigidTransform,
}

pub fn forward_kinematics(chain: &KinematicChain, q: &[f64]) -> Result<ChainPoses, KinematicsError> {
    check_dim(chain, q)?;
    let mut pose = chain.base_pose;
    let bodies = chain
        .joints
        .iter()
        .zip(q)
        .map(|(joint, &angle)| {
            pose = pose * joint.pre_transform * rot_z(angle);
            pose
        })
        .collect();
    Ok(ChainPoses {
        bodies,
        end_effector: pose * chain.tool,
    })
}

/// Jacobian columns `(z_i × (p_e - p_i), z_i)` from precomputed poses.
fn jacobian_columns(poses: &ChainPoses) -> Vec<Vector6<f64>> {
    let pe = poses.end_effector.translation.vector;
    poses
        .bodies
        .iter()
        .map(|frame| {
            let z = frame.rotation * Vector3::z();
            let lin = z.cross(&(pe - frame.translation.vector));
            Vector6::new(lin.x, lin.y, lin.z, z.x, z.y, z.z)
        })
        .collect()
}

/// 6×n geometric Jacobian in the world frame at the end-effector point;
/// rows 0-2 linear, rows 3-5 angular.
pub fn jacobian(chain: &KinematicChain, q: &[f64]) -> Result<nalgebra::DMatrix<f64>, KinematicsError> {
    let poses = forward_kinematics(chain, q)?;
    let cols = jacobian_columns(&poses);
    Ok(nalgebra::DMatrix::from_fn(6, cols.len(), |r, c| cols[c][r]))
}

/// Desired end-effector pose. Without an orientation only position is matched.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TargetPose {
    pub position: Vector3<f64>,
    pub orientation: Option<UnitQuaternion<f64>>,
}

impl TargetPose {
    pub fn position(position: Vector3<f64>) -> Self {
        TargetPose {
            position,
            orientation: None,
        }
    }

    pub fn pose(pose: &RigidTransform) -> Self {
        TargetPose {
            position: pose.translation.vector,
            orientation: Some(pose.rotation),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IkSettings {
    /// Number of starting points, the zero configuration included.
    pub seeds: usize,
    /// m
    pub pos_tol: f64,
    /// rad
    pub ori_tol: f64,
    pub max_iterations: usize,
    pub initial_damping: f64,
}

impl Default for IkSettings {
    fn default() -> Self {
        IkSettings {
            seeds: 20,
            pos_tol: 1e-3,
            ori_tol: 1e-2,
            max_iterations: 300,
            initial_damping: 1e-3,
        }
    }
}

/// A joint vector with its residuals against the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSolution {
    pub q: Vec<f64>,
    /// m
    pub position_residual: f64,
    /// rad; `None` for position-only targets.
    pub orientation_residual: Option<f64>,
}

impl IkSolution {
    pub fn satisfies(&self, settings: &IkSettings) -> bool {
        self.position_residual <= settings.pos_tol
            && self.orientation_residual.is_none_or(|r| r <= settings.ori_tol)
    }

    /// Amount by which the residuals exceed their tolerances.
    pub fn excess(&self, settings: &IkSettings) -> f64 {
        (self.position_residual - settings.pos_tol).max(0.0)
            + self
                .orientation_residual
                .map_or(0.0, |r| (r - settings.ori_tol).max(0.0))
    }
}

/// No seed reached the tolerances; carries the best attempt.
#[derive(Debug, Clone, PartialEq, Error, Serialize, Deserialize)]
#[error("IK did not converge after {seeds_tried} seeds (best position residual {:.3e} m)", best.position_residual)]
pub struct IkFailure {
    pub best: IkSolution,
    pub seeds_tried: usize,
}

/// Residuals at or below this stop the restart loop early: further seeds
/// cannot meaningfully improve on them.
const CONVERGED: f64 = 1e-9;

/// Brings an angle into the joint range: wraps when the range covers a full
/// turn, clamps otherwise.
pub fn limit_angle(angle: f64, (lo, hi): (f64, f64)) -> f64 {
    if hi - lo >= 2.0 * PI - 1e-12 {
        let span = 2.0 * PI;
        let mut a = angle;
        if a < lo || a > hi {
            a = lo + (a - lo) - span * libm::floor((a - lo) / span);
            if a > hi {
                a -= span;
            }
        }
        a
    } else {
        angle.clamp(lo, hi)
    }
}

struct Residual {
    error: Vector6<f64>,
    norm: f64,
    position: f64,
    orientation: Option<f64>,
}

fn residual(chain: &KinematicChain, q: &[f64], target: &TargetPose) -> (Residual, ChainPoses) {
    let poses = forward_kinematics(chain, q).expect("dimension checked by caller");
    let dp = target.position - poses.end_effector.translation.vector;
    let (error, orientation) = match &target.orientation {
        Some(rot) => {
            let dr = rotation_error(rot, &poses.end_effector.rotation);
            (Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z), Some(dr.norm()))
        }
        None => (Vector6::new(dp.x, dp.y, dp.z, 0.0, 0.0, 0.0), None),
    };
    (
        Residual {
            norm: error.norm(),
            error,
            position: dp.norm(),
            orientation,
        },
        poses,
    )
}

/// Levenberg-style damped least squares from one starting point.
fn descend(chain: &KinematicChain, target: &TargetPose, start: Vec<f64>, settings: &IkSettings) -> (Vec<f64>, Residual) {
    let n = chain.dof();
    let use_orientation = target.orientation.is_some();
    let mut q = start;
    let (mut res, mut poses) = residual(chain, &q, target);
    let mut damping = settings.initial_damping;
    for _ in 0..settings.max_iterations {
        if res.norm <= 1e-12 {
            break;
        }
        let cols = jacobian_columns(&poses);
        let mut jac = Matrix6::<f64>::zeros();
        for (c, col) in cols.iter().enumerate() {
            let rows = if use_orientation { 6 } else { 3 };
            for r in 0..rows {
                jac[(r, c)] = col[r];
            }
        }
        let a = jac * jac.transpose() + Matrix6::identity() * damping;
        let step = match a.cholesky() {
            Some(ch) => jac.transpose() * ch.solve(&res.error),
            None => {
                damping *= 10.0;
                continue;
            }
        };
        let trial: Vec<f64> = (0..n)
            .map(|i| limit_angle(q[i] + step[i], chain.joints[i].limits))
            .collect();
        let (trial_res, trial_poses) = residual(chain, &trial, target);
        if trial_res.norm < res.norm {
            let gain = res.norm - trial_res.norm;
            q = trial;
            res = trial_res;
            poses = trial_poses;
            damping = (damping * 0.1).max(1e-12);
            if gain <= 1e-12 * res.norm.max(1e-12) {
                break;
            }
        } else {
            damping *= 10.0;
            if damping > 1e8 {
                break;
            }
        }
    }
    (q, res)
}

/// Numerical IK with random restarts.
///
/// Seed 0 is the zero configuration (limited into range); the rest are drawn
/// uniformly within the joint limits from a ChaCha stream seeded with
/// `rng_seed`. The attempt with the smallest residual is returned; it is an
/// `Ok` only when it meets both tolerances.
pub fn solve_ik(
    chain: &KinematicChain,
    target: &TargetPose,
    settings: &IkSettings,
    rng_seed: u64,
) -> Result<IkSolution, IkFailure> {
    solve_ik_from(chain, target, settings, rng_seed, None)
}

/// Like [`solve_ik`], with an optional caller-supplied first seed tried
/// before the zero configuration.
///
/// # Panics
///
/// If `initial` does not have one value per joint.
pub fn solve_ik_from(
    chain: &KinematicChain,
    target: &TargetPose,
    settings: &IkSettings,
    rng_seed: u64,
    initial: Option<&[f64]>,
) -> Result<IkSolution, IkFailure> {
    restarts(chain, target, settings, rng_seed, initial, None::<fn(&[f64]) -> f64>)
}

/// IK with restarts that prefers, among attempts meeting the tolerances, the
/// one with the lowest `score` (ties go to the smaller residual). Stops at
/// the first in-tolerance attempt scoring zero.
///
/// Used by the search to pick collision-free, torque-feasible solutions
/// when a target admits several.
pub fn solve_ik_scored(
    chain: &KinematicChain,
    target: &TargetPose,
    settings: &IkSettings,
    rng_seed: u64,
    score: impl FnMut(&[f64]) -> f64,
) -> Result<IkSolution, IkFailure> {
    restarts(chain, target, settings, rng_seed, None, Some(score))
}

fn restarts(
    chain: &KinematicChain,
    target: &TargetPose,
    settings: &IkSettings,
    rng_seed: u64,
    initial: Option<&[f64]>,
    mut score: Option<impl FnMut(&[f64]) -> f64>,
) -> Result<IkSolution, IkFailure> {
    if let Some(q0) = initial {
        assert_eq!(q0.len(), chain.dof(), "initial seed dimension");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let zero_index = usize::from(initial.is_some());
    let total = settings.seeds.max(1) + zero_index;
    // (in tolerance, score, q, residual)
    let mut best: Option<(bool, f64, Vec<f64>, Residual)> = None;
    let mut tried = 0;
    for s in 0..total {
        let start: Vec<f64> = match initial {
            Some(q0) if s == 0 => q0.to_vec(),
            _ if s == zero_index => chain.joints.iter().map(|j| limit_angle(0.0, j.limits)).collect(),
            _ => chain
                .joints
                .iter()
                .map(|j| rng.random_range(j.limits.0..=j.limits.1))
                .collect(),
        };
        let (q, res) = descend(chain, target, start, settings);
        tried += 1;
        let ok = res.position <= settings.pos_tol && res.orientation.is_none_or(|r| r <= settings.ori_tol);
        let value = match (&mut score, ok) {
            (Some(f), true) => f(&q),
            _ => 0.0,
        };
        let better = match &best {
            None => true,
            Some((b_ok, b_value, _, b_res)) => match (ok, *b_ok) {
                (true, false) => true,
                (false, true) => false,
                (true, true) if score.is_some() => {
                    value < *b_value || (value == *b_value && res.norm < b_res.norm)
                }
                _ => res.norm < b_res.norm,
            },
        };
        if better {
            best = Some((ok, value, q, res));
        }
        let done = match &best {
            Some((true, v, _, _)) if score.is_some() => *v <= 0.0,
            Some((_, _, _, b)) => score.is_none() && b.norm <= CONVERGED,
            None => false,
        };
        if done {
            break;
        }
    }
    let (_, _, q, res) = best.expect("at least one seed");
    let solution = IkSolution {
        q,
        position_residual: res.position,
        orientation_residual: res.orientation,
    };
    if solution.satisfies(settings) {
        Ok(solution)
    } else {
        Err(IkFailure {
            best: solution,
            seeds_tried: tried,
        })
    }
}
