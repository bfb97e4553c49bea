//! Task files: TSLs, obstacles and solver settings.
//!
//! ```json
//! {
//!   "format_version": 1,
//!   "name": "case1a",
//!   "tsls": [ { "position": [0.1, 0.6, 0.5] },
//!             { "position": [0.3, 0.0, 0.55], "orientation_deg": [0, 90, 0] } ],
//!   "obstacles": [ { "name": "b1", "kind": "box", "size": [0.1, 0.1, 0.1], "position": [0.3, 0.3, 0.3] },
//!                  { "kind": "sphere", "radius": 0.05, "position": [0, 0.4, 0.2] },
//!                  { "kind": "cylinder", "radius": 0.05, "length": 0.3, "position": [...],
//!                    "orientation_deg": [90, 0, 0] },
//!                  { "kind": "capsule", "radius": 0.05, "length": 0.3, "position": [...] } ],
//!   "safety_margin": 0.01,
//!   "tolerances": { "pos_tol": 0.001, "ori_tol": 0.01 },
//!   "payload": { "mass": 0.2, "offset": [0, 0, 0.05] },
//!   "mode": "full",
//!   "ga": { "population": 60, "rng_seed": 7 },
//!   "planner": { "step": 0.1 },
//!   "library": "library.json"
//! }
//! ```
//!
//! Orientations are intrinsic X-Y-Z Euler angles in degrees. Cylinder and
//! capsule axes run along the local z axis. `library` is resolved relative to
//! the task file.

use std::path::{Path, PathBuf};

use modsynth_core::collision::{Obstacle, Scene, Shape};
use modsynth_core::dynamics::{Payload, STANDARD_GRAVITY};
use modsynth_core::kinematics::{IkSettings, TargetPose};
use modsynth_core::planner::PlannerSettings;
use modsynth_core::synthesis::{GaSettings, SearchMode};
use modsynth_core::transform::quat_from_euler_xyz;
use modsynth_core::{Primitive, RigidTransform, TaskSpec};
use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{check_version, from_json, read, FileError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PoseDoc {
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_deg: Option<[f64; 3]>,
}

impl PoseDoc {
    fn rotation(&self) -> Option<UnitQuaternion<f64>> {
        self.orientation_deg
            .map(|[a, b, c]| quat_from_euler_xyz(a.to_radians(), b.to_radians(), c.to_radians()))
    }

    fn transform(&self) -> RigidTransform {
        let [x, y, z] = self.position;
        Isometry3::from_parts(Translation3::new(x, y, z), self.rotation().unwrap_or_else(UnitQuaternion::identity))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ShapeDoc {
    /// Full edge lengths (m).
    Box { size: [f64; 3] },
    Sphere { radius: f64 },
    Cylinder { radius: f64, length: f64 },
    Capsule { radius: f64, length: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstacleDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub shape: ShapeDoc,
    pub position: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub orientation_deg: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// m
    #[serde(default = "default_pos_tol")]
    pub pos_tol: f64,
    /// rad
    #[serde(default = "default_ori_tol")]
    pub ori_tol: f64,
}

fn default_pos_tol() -> f64 {
    IkSettings::default().pos_tol
}

fn default_ori_tol() -> f64 {
    IkSettings::default().ori_tol
}

fn default_margin() -> f64 {
    0.01
}

/// The task file as written on disk.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskDocument {
    pub format_version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub library: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub base: Option<PoseDoc>,
    pub tsls: Vec<PoseDoc>,
    #[serde(default)]
    pub obstacles: Vec<ObstacleDoc>,
    #[serde(default = "default_margin")]
    pub safety_margin: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerances: Option<Tolerances>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Payload>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gravity: Option<[f64; 3]>,
    #[serde(default)]
    pub mode: SearchMode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ga: Option<GaSettings>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub planner: Option<PlannerSettings>,
}

/// A task file with everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedTask {
    pub document: TaskDocument,
    pub task: TaskSpec,
    pub scene: Scene,
    /// GA settings from the file (or defaults) with the file's mode applied.
    pub ga: GaSettings,
    pub planner: PlannerSettings,
    /// `library` resolved against the task file's directory.
    pub library_path: Option<PathBuf>,
}

impl TaskDocument {
    /// Validates the document and builds the in-memory task and scene.
    pub fn resolve(&self, origin: &Path) -> Result<LoadedTask, FileError> {
        check_version(origin, self.format_version)?;
        let bad = |field: String, reason: &str| Err(FileError::schema(origin, field, reason));
        if self.tsls.is_empty() {
            return bad("tsls".into(), "at least one TSL is required");
        }
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        for (i, t) in self.tsls.iter().enumerate() {
            if !finite(&t.position) || !t.orientation_deg.is_none_or(|o| finite(&o)) {
                return bad(format!("tsls[{i}]"), "values must be finite");
            }
        }
        let tol = self.tolerances.unwrap_or(Tolerances {
            pos_tol: default_pos_tol(),
            ori_tol: default_ori_tol(),
        });
        if !(tol.pos_tol > 0.0) {
            return bad("tolerances.pos_tol".into(), "must be positive");
        }
        if !(tol.ori_tol > 0.0) {
            return bad("tolerances.ori_tol".into(), "must be positive");
        }
        if !(self.safety_margin >= 0.0) {
            return bad("safety_margin".into(), "must be non-negative");
        }
        if let Some(p) = &self.payload {
            if !(p.mass >= 0.0) {
                return bad("payload.mass".into(), "must be non-negative");
            }
        }

        let mut obstacles = Vec::with_capacity(self.obstacles.len());
        for (i, o) in self.obstacles.iter().enumerate() {
            let field = |f: &str| format!("obstacles[{i}].{f}");
            let positive = |x: f64| x > 0.0 && x.is_finite();
            let shape = match o.shape {
                ShapeDoc::Box { size } => {
                    if !size.iter().all(|&s| positive(s)) {
                        return bad(field("size"), "must be positive");
                    }
                    Shape::Box {
                        half_extents: Vector3::from(size) * 0.5,
                    }
                }
                ShapeDoc::Sphere { radius } => {
                    if !positive(radius) {
                        return bad(field("radius"), "must be positive");
                    }
                    Shape::Sphere { radius }
                }
                ShapeDoc::Cylinder { radius, length } | ShapeDoc::Capsule { radius, length } => {
                    if !positive(radius) {
                        return bad(field("radius"), "must be positive");
                    }
                    if !positive(length) {
                        return bad(field("length"), "must be positive");
                    }
                    if matches!(o.shape, ShapeDoc::Cylinder { .. }) {
                        Shape::Cylinder { radius, length }
                    } else {
                        Shape::Capsule { radius, length }
                    }
                }
            };
            let pose = PoseDoc {
                position: o.position,
                orientation_deg: o.orientation_deg,
            };
            let name = o.name.clone().unwrap_or_else(|| format!("obstacle_{i}"));
            if obstacles.iter().any(|x: &Obstacle| x.name == name) {
                return bad(field("name"), "duplicate obstacle name");
            }
            obstacles.push(Obstacle {
                name,
                primitive: Primitive::new(shape, pose.transform()),
            });
        }
        let scene = Scene::new(obstacles, self.safety_margin)
            .map_err(|e| FileError::schema(origin, "obstacles", e.to_string()))?;

        let task = TaskSpec {
            tsls: self
                .tsls
                .iter()
                .map(|t| TargetPose {
                    position: Vector3::from(t.position),
                    orientation: t.rotation(),
                })
                .collect(),
            base_pose: self.base.as_ref().map_or_else(RigidTransform::identity, PoseDoc::transform),
            payload: self.payload,
            ik: IkSettings {
                pos_tol: tol.pos_tol,
                ori_tol: tol.ori_tol,
                ..IkSettings::default()
            },
            gravity: self.gravity.map_or(STANDARD_GRAVITY, Vector3::from),
        };
        let ga = GaSettings {
            mode: self.mode,
            ..self.ga.unwrap_or_default()
        };
        ga.validate()
            .map_err(|e| FileError::schema(origin, "ga", e.to_string()))?;
        let library_path = self.library.as_ref().map(|p| match origin.parent() {
            Some(dir) if p.is_relative() => dir.join(p),
            _ => p.clone(),
        });
        Ok(LoadedTask {
            document: self.clone(),
            task,
            scene,
            ga,
            planner: self.planner.unwrap_or_default(),
            library_path,
        })
    }
}

pub fn parse_task(text: &str, origin: &Path) -> Result<LoadedTask, FileError> {
    let doc: TaskDocument = from_json(origin, text)?;
    doc.resolve(origin)
}

pub fn load_task(path: &Path) -> Result<LoadedTask, FileError> {
    parse_task(&read(path)?, path)
}

/// Canonical JSON text of a task document.
pub fn save_task(document: &TaskDocument) -> String {
    let mut s = serde_json::to_string_pretty(document).expect("task serializes");
    s.push('\n');
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedTask, FileError> {
        parse_task(text, Path::new("task.json"))
    }

    #[test]
    fn minimal_task_gets_defaults() {
        let t = parse(r#"{"format_version": 1, "tsls": [{"position": [0.1, 0.6, 0.5]}]}"#).unwrap();
        assert_eq!(t.task.tsls.len(), 1);
        assert!(t.task.tsls[0].orientation.is_none());
        assert_eq!(t.scene.safety_margin, 0.01);
        assert_eq!(t.task.ik.pos_tol, 1e-3);
        assert_eq!(t.ga, GaSettings::default());
    }

    #[test]
    fn euler_orientation_is_converted() {
        let t = parse(r#"{"format_version": 1, "tsls": [{"position": [0, 0, 0], "orientation_deg": [0, 90, 0]}]}"#)
            .unwrap();
        let z = t.task.tsls[0].orientation.unwrap() * Vector3::z();
        assert!((z - Vector3::x()).norm() < 1e-12);
    }

    #[test]
    fn unknown_obstacle_kind_is_a_schema_error() {
        let err = parse(
            r#"{"format_version": 1, "tsls": [{"position": [0, 0, 1]}],
                "obstacles": [{"kind": "torus", "radius": 1, "position": [0, 0, 0]}]}"#,
        )
        .unwrap_err();
        assert!(err.field().unwrap().starts_with("obstacles[0]"), "{err}");
        assert!(err.to_string().contains("torus"));
    }

    #[test]
    fn bad_values_name_their_field() {
        let err = parse(
            r#"{"format_version": 1, "tsls": [{"position": [0, 0, 1]}],
                "obstacles": [{"kind": "sphere", "radius": -1, "position": [0, 0, 0]}]}"#,
        )
        .unwrap_err();
        assert_eq!(err.field(), Some("obstacles[0].radius"));
        let err = parse(r#"{"format_version": 1, "tsls": []}"#).unwrap_err();
        assert_eq!(err.field(), Some("tsls"));
        let err = parse(r#"{"format_version": 1, "tsls": [{"position": [0, 1]}]}"#).unwrap_err();
        assert!(matches!(err, FileError::Parse { line: 1, .. }), "{err}");
    }

    #[test]
    fn conventional_mode_reaches_the_settings() {
        let t = parse(r#"{"format_version": 1, "mode": "conventional_only", "tsls": [{"position": [0, 0, 1]}]}"#)
            .unwrap();
        assert_eq!(t.ga.mode, SearchMode::ConventionalOnly);
    }
}
