//! Synthesis core for modular reconfigurable manipulators.
//!
//! The crate is `no_std` (it needs `alloc`) and holds every algorithmic
//! piece of the pipeline: the module catalog and assembly rules, genome
//! decoding and chain construction, kinematics, recursive Newton-Euler
//! dynamics, primitive distance queries, the genetic search and the
//! RRT-connect planner. File formats, URDF and the command line live in the
//! `modsynth` crate.

#![no_std]
#![forbid(unsafe_code)]

// Transcendental functions are called through `libm` explicitly, never as
// f64 methods: those resolve to the platform library whenever std is in the
// graph, and results would then depend on how the crate was built.

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod collision;
pub mod composition;
pub mod dynamics;
pub mod kinematics;
pub mod library;
pub mod planner;
pub mod synthesis;
pub mod task;
pub mod transform;

pub use collision::{chain_clearance, collision_constraint, distance, Primitive, Scene, Shape};
pub use composition::{build_chain, decode, encode, Composition, Genome, KinematicChain};
pub use dynamics::{gravity_torque, inverse_dynamics, DynamicsState};
pub use kinematics::{forward_kinematics, jacobian, solve_ik, IkSettings, TargetPose};
pub use library::{
    torque_limit, validate_assembly, LibraryConfig, LinkType, ModularUnit, UnitKind, Variant,
};
pub use synthesis::{evaluate, synthesize, GaSettings, SynthesisResult};
pub use task::TaskSpec;
pub use transform::RigidTransform;

/// Maximum number of joint modules in a composition.
pub const MAX_DOF: usize = 6;
/// Minimum number of joint modules in a composition.
pub const MIN_DOF: usize = 2;
