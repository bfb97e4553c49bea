//! Task specification: task-space locations and the settings shared by
//! evaluation and verification.

use alloc::vec::Vec;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::dynamics::{Payload, STANDARD_GRAVITY};
use crate::kinematics::{IkSettings, TargetPose};
use crate::transform::RigidTransform;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskSpec {
    pub tsls: Vec<TargetPose>,
    pub base_pose: RigidTransform,
    pub payload: Option<Payload>,
    /// Reach tolerances and solver budget.
    pub ik: IkSettings,
    pub gravity: Vector3<f64>,
}

impl TaskSpec {
    pub fn new(tsls: Vec<TargetPose>) -> Self {
        TaskSpec {
            tsls,
            base_pose: RigidTransform::identity(),
            payload: None,
            ik: IkSettings::default(),
            gravity: STANDARD_GRAVITY,
        }
    }
}
