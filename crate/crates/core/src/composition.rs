//! Genomes, compositions and their lowering to kinematic chains.
//!
//! # Frame convention
//!
//! Every module contributes a fixed transform expressed in the frame of the
//! previous joint (or the base for the first module):
//!
//! ```text
//!   input port (twist-1 frame)
//!     └─ Rx(skew)        port choice: Ip1 → 0°, Ip2 → 90°
//!        └─ Tz(offset)   to the twist-2 pivot
//!           └─ Ry(α)     intersecting twist
//!              └─ Tz(body)  to the joint frame (axis = local z, at Op)
//! ```
//!
//! A unit of kind 3 or 4 carries a link after its moving joint frame:
//! `Tz(length) · Rx(90°) · Ry(bend)`. The link is folded into the next
//! module's fixed transform, or into the tool transform for the last module.
//!
//! Body `k` is everything rigid with joint frame `k`: the upper casing of
//! module `k` (pivot to joint frame, along the joint axis), its link, and the
//! twist-unit offset of module `k + 1`. The first module's offset is fixed to
//! the base.

use alloc::vec::Vec;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::Primitive;
use crate::library::{
    AssemblyRule, LibraryConfig, LinkType, ModularUnit, Twist, UnitKind, ValidationReport, Variant,
    TWIST_LATTICE_DEG,
};
use crate::transform::{rot_x, rot_y, trans_z, RigidTransform};
use crate::{MAX_DOF, MIN_DOF};

/// Genes of one segment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegmentGenes {
    /// 0 = Heavy, 1 = Light.
    pub variant: u8,
    /// Modular unit kind, 1..=4.
    pub kind: u8,
    /// Index into the twist lattice, 0..=9.
    pub twist: u8,
    /// Link type index, 0..=3; read only for kinds 3 and 4.
    pub link: u8,
}

impl Default for SegmentGenes {
    fn default() -> Self {
        SegmentGenes {
            variant: 0,
            kind: 1,
            twist: 0,
            link: 0,
        }
    }
}

/// Number of genes in the flat representation: one DoF gene plus four per segment.
pub const GENOME_LENGTH: usize = 1 + 4 * MAX_DOF;

/// Fixed-length chromosome. Segments past `dof` are carried but inert.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Genome {
    pub dof: u8,
    pub segments: [SegmentGenes; MAX_DOF],
}

/// Inclusive gene ranges of the flat representation.
pub fn gene_range(position: usize) -> (u8, u8) {
    if position == 0 {
        return (MIN_DOF as u8, MAX_DOF as u8);
    }
    match (position - 1) % 4 {
        0 => (0, 1),
        1 => (1, 4),
        2 => (0, (TWIST_LATTICE_DEG.len() - 1) as u8),
        _ => (0, 3),
    }
}

impl Genome {
    pub fn to_genes(&self) -> [u8; GENOME_LENGTH] {
        let mut g = [0u8; GENOME_LENGTH];
        g[0] = self.dof;
        for (i, s) in self.segments.iter().enumerate() {
            g[1 + 4 * i] = s.variant;
            g[2 + 4 * i] = s.kind;
            g[3 + 4 * i] = s.twist;
            g[4 + 4 * i] = s.link;
        }
        g
    }

    pub fn from_genes(g: &[u8; GENOME_LENGTH]) -> Genome {
        let mut segments = [SegmentGenes::default(); MAX_DOF];
        for (i, s) in segments.iter_mut().enumerate() {
            *s = SegmentGenes {
                variant: g[1 + 4 * i],
                kind: g[2 + 4 * i],
                twist: g[3 + 4 * i],
                link: g[4 + 4 * i],
            };
        }
        Genome { dof: g[0], segments }
    }

    /// Whether every gene lies in its alphabet.
    pub fn is_well_formed(&self) -> bool {
        self.to_genes()
            .iter()
            .enumerate()
            .all(|(i, &g)| {
                let (lo, hi) = gene_range(i);
                (lo..=hi).contains(&g)
            })
    }

    pub fn active(&self) -> &[SegmentGenes] {
        &self.segments[..(self.dof as usize).min(MAX_DOF)]
    }
}

/// A decoded composition: the unit sequence and the base placement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Composition {
    pub units: Vec<ModularUnit>,
    #[serde(default = "RigidTransform::identity")]
    pub base_pose: RigidTransform,
}

impl Composition {
    pub fn new(units: Vec<ModularUnit>) -> Self {
        Composition {
            units,
            base_pose: RigidTransform::identity(),
        }
    }

    pub fn dof(&self) -> usize {
        self.units.len()
    }

    /// Sequence in the `H1-H4(-45,S2)-H3(45,C2)` notation.
    pub fn notation(&self) -> alloc::string::String {
        use core::fmt::Write;
        let mut s = alloc::string::String::new();
        for (i, u) in self.units.iter().enumerate() {
            if i > 0 {
                s.push('-');
            }
            let _ = write!(s, "{u}");
        }
        s
    }
}

/// Why a genome does not decode to an assemblable composition.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Error)]
#[error("infeasible assembly: {report:?}")]
pub struct Infeasible {
    pub report: ValidationReport,
}

impl Infeasible {
    pub fn violates(&self, rule: AssemblyRule) -> bool {
        self.report.violates(rule)
    }
}

/// Maps a genome to a composition.
///
/// With `repair` on, rules R1-R3 are enforced by rewriting variants (first
/// module Heavy, last Light when there are four or more, Light after any
/// Light); R4 is never repaired. Without repair any violation is reported.
/// The epsilon limits come from `library`.
pub fn decode(genome: &Genome, repair: bool, library: &LibraryConfig) -> Result<Composition, Infeasible> {
    let malformed = || Infeasible {
        report: ValidationReport::default(),
    };
    if !genome.is_well_formed() {
        return Err(malformed());
    }
    let mut units: Vec<ModularUnit> = genome
        .active()
        .iter()
        .map(|s| {
            let variant = if s.variant == 0 { Variant::Heavy } else { Variant::Light };
            let kind = UnitKind::from_index(s.kind).expect("checked alphabet");
            let link = kind
                .has_link()
                .then(|| LinkType::from_index(s.link).expect("checked alphabet"));
            ModularUnit {
                variant,
                kind,
                twist: Twist::from_index(s.twist).expect("checked alphabet"),
                link,
            }
        })
        .collect();
    if repair {
        let n = units.len();
        units[0].variant = Variant::Heavy;
        if n >= 4 {
            units[n - 1].variant = Variant::Light;
        }
        let mut seen_light = false;
        for u in units.iter_mut() {
            if seen_light {
                u.variant = Variant::Light;
            }
            seen_light |= u.variant == Variant::Light;
        }
    }
    let report = library
        .validate_assembly(&units)
        .map_err(|_| malformed())?;
    if report.ok() {
        Ok(Composition::new(units))
    } else {
        Err(Infeasible { report })
    }
}

/// Inverse of [`decode`] on valid compositions; inactive segments are reset
/// to [`SegmentGenes::default`].
pub fn encode(composition: &Composition) -> Genome {
    let mut segments = [SegmentGenes::default(); MAX_DOF];
    for (s, u) in segments.iter_mut().zip(composition.units.iter()) {
        *s = SegmentGenes {
            variant: match u.variant {
                Variant::Heavy => 0,
                Variant::Light => 1,
            },
            kind: u.kind.index(),
            twist: u.twist.index(),
            link: u.link.map_or(0, LinkType::index),
        };
    }
    Genome {
        dof: composition.units.len() as u8,
        segments,
    }
}

/// A revolute joint: fixed transform from the previous frame, then a rotation
/// about local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Joint {
    pub pre_transform: RigidTransform,
    pub variant: Variant,
    /// (lower, upper) in radians.
    pub limits: (f64, f64),
    /// N·m
    pub effort_limit: f64,
    /// rad/s
    pub velocity_limit: f64,
}

impl Joint {
    /// Joint axis in its own frame.
    pub fn axis(&self) -> Vector3<f64> {
        Vector3::z()
    }
}

/// Rigid body attached to a joint frame, with lumped inertial data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Body {
    /// Collision geometry in the body (joint) frame.
    pub shapes: Vec<Primitive>,
    /// kg
    pub mass: f64,
    /// Center of mass in the body frame.
    pub center_of_mass: Vector3<f64>,
    /// Inertia about the center of mass, body-frame axes.
    pub inertia: Matrix3<f64>,
}

impl Body {
    pub fn empty() -> Self {
        Body {
            shapes: Vec::new(),
            mass: 0.0,
            center_of_mass: Vector3::zeros(),
            inertia: Matrix3::zeros(),
        }
    }

    /// Merges a rigid mass element given by its own mass, center and central
    /// inertia (all in the body frame).
    pub fn add_mass(&mut self, mass: f64, center: Vector3<f64>, inertia: Matrix3<f64>) {
        let total = self.mass + mass;
        if total <= 0.0 {
            return;
        }
        let com = (self.center_of_mass * self.mass + center * mass) / total;
        let shift = |m: f64, c: Vector3<f64>| {
            let d = c - com;
            (Matrix3::identity() * d.norm_squared() - d * d.transpose()) * m
        };
        self.inertia = self.inertia + shift(self.mass, self.center_of_mass) + inertia + shift(mass, center);
        self.mass = total;
        self.center_of_mass = com;
    }
}

/// Serial chain of revolute joints with per-body geometry and inertia.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KinematicChain {
    pub base_pose: RigidTransform,
    /// Geometry fixed to the base frame.
    pub base_shapes: Vec<Primitive>,
    pub joints: Vec<Joint>,
    pub bodies: Vec<Body>,
    /// End-effector frame relative to the last joint frame.
    pub tool: RigidTransform,
}

impl KinematicChain {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn joint_limits(&self) -> Vec<(f64, f64)> {
        self.joints.iter().map(|j| j.limits).collect()
    }

    pub fn effort_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.effort_limit).collect()
    }

    pub fn velocity_limits(&self) -> Vec<f64> {
        self.joints.iter().map(|j| j.velocity_limit).collect()
    }

    pub fn total_mass(&self) -> f64 {
        self.bodies.iter().map(|b| b.mass).sum()
    }

    pub fn within_limits(&self, q: &[f64]) -> bool {
        q.len() == self.dof()
            && q
                .iter()
                .zip(self.joints.iter())
                .all(|(&a, j)| a >= j.limits.0 && a <= j.limits.1)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ChainError {
    #[error("composition has {0} units, expected 2 to 6")]
    Length(usize),
    #[error("unit {index} has a link mismatch for its kind")]
    LinkMismatch { index: usize },
}

/// Transform contributed by a link mounted on a joint's output port.
pub fn link_transform(link: LinkType, library: &LibraryConfig) -> RigidTransform {
    let spec = library.link(link);
    trans_z(spec.length) * rot_x(core::f64::consts::FRAC_PI_2) * rot_y(spec.bend_angle.to_radians())
}

/// Solid cylinder of length `l` and radius `r` along local z: central inertia.
fn cylinder_inertia(mass: f64, radius: f64, length: f64) -> Matrix3<f64> {
    let transverse = mass * (3.0 * radius * radius + length * length) / 12.0;
    Matrix3::from_diagonal(&Vector3::new(transverse, transverse, 0.5 * mass * radius * radius))
}

/// Adds a uniform solid cylinder between two body-frame points.
fn add_rod(body: &mut Body, mass: f64, radius: f64, a: Vector3<f64>, b: Vector3<f64>) {
    let axis = b - a;
    let length = axis.norm();
    let local = cylinder_inertia(mass, radius, length);
    let rotation = nalgebra::Rotation3::rotation_between(&Vector3::z(), &axis)
        .unwrap_or_else(|| nalgebra::Rotation3::from_axis_angle(&Vector3::x_axis(), core::f64::consts::PI));
    let r = rotation.matrix();
    body.add_mass(mass, (a + b) * 0.5, r * local * r.transpose());
}

/// Collision capsules and mass elements of a link, in the frame of the joint
/// carrying it.
fn add_link(body: &mut Body, link: LinkType, library: &LibraryConfig) {
    let spec = library.link(link);
    let radius = spec.radius + library.geometry.collision_padding;
    let start = Vector3::zeros();
    let end = Vector3::new(0.0, 0.0, spec.length);
    if link.is_curved() {
        // Two chords of a circular arc; the arc bulges toward the output port.
        let bend = spec.bend_angle.to_radians();
        let out = Vector3::new(libm::sin(bend), -libm::cos(bend), 0.0);
        let half_angle = core::f64::consts::FRAC_PI_4;
        let arc_radius = spec.length / (2.0 * libm::sin(half_angle));
        let sagitta = arc_radius * (1.0 - libm::cos(half_angle));
        let mid = end * 0.5 + out * sagitta;
        body.shapes.push(Primitive::capsule_between(start, mid, radius));
        body.shapes.push(Primitive::capsule_between(mid, end, radius));
        add_rod(body, 0.5 * spec.mass, spec.radius, start, mid);
        add_rod(body, 0.5 * spec.mass, spec.radius, mid, end);
    } else {
        body.shapes.push(Primitive::capsule_between(start, end, radius));
        add_rod(body, spec.mass, spec.radius, start, end);
    }
}

/// Lowers a composition to a kinematic chain using the library geometry.
pub fn build_chain(composition: &Composition, library: &LibraryConfig) -> Result<KinematicChain, ChainError> {
    let n = composition.units.len();
    if !(MIN_DOF..=MAX_DOF).contains(&n) {
        return Err(ChainError::Length(n));
    }
    let geo = &library.geometry;
    let mut joints = Vec::with_capacity(n);
    let mut bodies: Vec<Body> = Vec::with_capacity(n);
    let mut base_shapes = Vec::new();
    // Transform from the previous joint frame (or base) to this module's input port.
    let mut port = RigidTransform::identity();
    for (k, unit) in composition.units.iter().enumerate() {
        if unit.kind.has_link() != unit.link.is_some() {
            return Err(ChainError::LinkMismatch { index: k });
        }
        let v = unit.variant;
        let offset = *geo.twist_unit_offset.get(v);
        let body_length = *geo.body_length.get(v);
        let radius = *geo.body_radius.get(v);
        let collision_radius = radius + geo.collision_padding;
        let port_frame = port * rot_x(unit.kind.skew_deg().to_radians());
        let offset_capsule = Primitive::capsule_between(Vector3::zeros(), Vector3::new(0.0, 0.0, offset), collision_radius)
            .transformed(&port_frame);
        match bodies.last_mut() {
            Some(prev) => prev.shapes.push(offset_capsule),
            None => base_shapes.push(offset_capsule),
        }
        let pre = port_frame * trans_z(offset) * rot_y(unit.twist.radians()) * trans_z(body_length);
        let actuator = library.actuator(v);
        let limit = *geo.joint_limit.get(v);
        joints.push(Joint {
            pre_transform: pre,
            variant: v,
            limits: (-limit, limit),
            effort_limit: actuator.nominal_torque,
            velocity_limit: actuator.velocity_limit(),
        });
        let mut body = Body::empty();
        let casing_start = Vector3::new(0.0, 0.0, -body_length);
        body.shapes.push(Primitive::capsule_between(casing_start, Vector3::zeros(), collision_radius));
        add_rod(&mut body, actuator.mass, radius, casing_start, Vector3::zeros());
        port = match unit.link {
            Some(link) => {
                add_link(&mut body, link, library);
                link_transform(link, library)
            }
            None => RigidTransform::identity(),
        };
        bodies.push(body);
    }
    Ok(KinematicChain {
        base_pose: composition.base_pose,
        base_shapes,
        joints,
        bodies,
        tool: port,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library::{ModularUnit, ZERO_TWIST_INDEX};
    use alloc::vec;

    fn u(v: char, k: u8, t: i16, l: Option<LinkType>) -> ModularUnit {
        ModularUnit::parse(v, k, t, l)
    }

    fn genome_of(units: &[(u8, u8, u8, u8)]) -> Genome {
        let mut segments = [SegmentGenes::default(); MAX_DOF];
        for (s, &(variant, kind, twist, link)) in segments.iter_mut().zip(units) {
            *s = SegmentGenes {
                variant,
                kind,
                twist,
                link,
            };
        }
        Genome {
            dof: units.len() as u8,
            segments,
        }
    }

    #[test]
    fn decodes_case_ia_composition() {
        // twist lattice: index 0 = -45°, index 6 = 45°; links S2 = 1, C2 = 3
        let g = genome_of(&[(0, 1, ZERO_TWIST_INDEX, 2), (0, 4, 0, 1), (0, 3, 6, 3)]);
        let lib = LibraryConfig::default();
        let c = decode(&g, false, &lib).unwrap();
        assert_eq!(
            c.units,
            vec![
                u('H', 1, 0, None),
                u('H', 4, -45, Some(LinkType::S2)),
                u('H', 3, 45, Some(LinkType::C2))
            ]
        );
        assert_eq!(c.notation(), "H1-H4(-45,S2)-H3(45,C2)");
    }

    #[test]
    fn repair_forces_heavy_first() {
        let g = genome_of(&[(1, 1, 3, 0), (1, 2, 3, 0)]);
        let lib = LibraryConfig::default();
        assert!(decode(&g, false, &lib).unwrap_err().violates(AssemblyRule::R1));
        let c = decode(&g, true, &lib).unwrap();
        assert_eq!(c.units[0].variant, Variant::Heavy);
        assert_eq!(c.units[1].variant, Variant::Light);
    }

    #[test]
    fn repair_does_not_fix_epsilon() {
        let g = genome_of(&[(0, 1, 3, 0), (0, 2, 3, 0), (0, 2, 3, 0), (0, 2, 3, 0), (0, 1, 3, 0)]);
        let err = decode(&g, true, &LibraryConfig::default()).unwrap_err();
        assert!(err.violates(AssemblyRule::R4));
    }

    #[test]
    fn link_gene_ignored_without_link() {
        let lib = LibraryConfig::default();
        let a = decode(&genome_of(&[(0, 1, 3, 0), (0, 2, 3, 0)]), false, &lib).unwrap();
        let b = decode(&genome_of(&[(0, 1, 3, 3), (0, 2, 3, 2)]), false, &lib).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn encode_round_trips() {
        let lib = LibraryConfig::default();
        let c = Composition::new(vec![
            u('H', 1, 0, None),
            u('H', 2, 15, None),
            u('L', 2, 0, None),
            u('L', 1, -45, None),
            u('L', 2, 60, None),
        ]);
        assert_eq!(decode(&encode(&c), false, &lib).unwrap(), c);
        let mut g = encode(&c);
        g.segments[5] = SegmentGenes {
            variant: 1,
            kind: 4,
            twist: 9,
            link: 3,
        };
        assert_eq!(decode(&g, false, &lib).unwrap(), c);
    }

    #[test]
    fn straight_stack_transforms_are_pure_translations() {
        let lib = LibraryConfig::default();
        let c = Composition::new(vec![u('H', 1, 0, None), u('H', 1, 0, None), u('L', 1, 0, None)]);
        let chain = build_chain(&c, &lib).unwrap();
        for j in &chain.joints {
            assert!(j.pre_transform.rotation.angle() < 1e-15);
            let t = j.pre_transform.translation.vector;
            assert!(t.x.abs() < 1e-15 && t.y.abs() < 1e-15 && t.z > 0.0);
        }
    }

    #[test]
    fn case_ia_chain_limits() {
        let lib = LibraryConfig::default();
        let c = Composition::new(vec![
            u('H', 1, 0, None),
            u('H', 4, -45, Some(LinkType::S2)),
            u('H', 3, 45, Some(LinkType::C2)),
        ]);
        let chain = build_chain(&c, &lib).unwrap();
        assert_eq!(chain.dof(), 3);
        assert_eq!(chain.bodies.len(), 3);
        assert_eq!(chain.effort_limits(), vec![12.0, 12.0, 12.0]);
        let expected = 3.0 * 0.57 + 2.0 * 0.08;
        assert!((chain.total_mass() - expected).abs() < 1e-12);
    }

    #[test]
    fn inertia_tensors_are_spd() {
        let lib = LibraryConfig::default();
        let c = Composition::new(vec![
            u('H', 3, 90, Some(LinkType::C1)),
            u('H', 4, -45, Some(LinkType::S2)),
            u('L', 4, 60, Some(LinkType::C2)),
        ]);
        let chain = build_chain(&c, &lib).unwrap();
        for b in &chain.bodies {
            let i = b.inertia;
            assert!((i - i.transpose()).norm() < 1e-15);
            let eig = i.symmetric_eigenvalues();
            assert!(eig.iter().all(|&e| e > 0.0), "{eig:?}");
        }
    }
}
