//! Primitive shapes, signed distance queries and chain clearance.
//!
//! Sphere, capsule and box pairs (except box-box) use closed-form or
//! one-dimensional convex minimization. Every other pair goes through GJK on
//! support functions; when those shapes overlap, the penetration depth is a
//! sampled estimate and the returned negative distance is only a bound.

use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{Matrix3, Point3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::composition::KinematicChain;
use crate::kinematics::{forward_kinematics, KinematicsError};
use crate::transform::RigidTransform;

/// Local geometry of a primitive. Cylinders and capsules are centered on the
/// origin with their axis along local z.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { half_extents: Vector3<f64> },
    Sphere { radius: f64 },
    Cylinder { radius: f64, length: f64 },
    /// `length` is the length of the inner segment, excluding the caps.
    Capsule { radius: f64, length: f64 },
}

impl Shape {
    fn rank(&self) -> u8 {
        match self {
            Shape::Sphere { .. } => 0,
            Shape::Capsule { .. } => 1,
            Shape::Box { .. } => 2,
            Shape::Cylinder { .. } => 3,
        }
    }

    pub fn is_valid(&self) -> bool {
        let pos = |x: f64| x > 0.0 && x.is_finite();
        match *self {
            Shape::Box { half_extents: h } => pos(h.x) && pos(h.y) && pos(h.z),
            Shape::Sphere { radius } => pos(radius),
            Shape::Cylinder { radius, length } | Shape::Capsule { radius, length } => {
                pos(radius) && pos(length)
            }
        }
    }

    fn bounding_radius(&self) -> f64 {
        match *self {
            Shape::Box { half_extents } => half_extents.norm(),
            Shape::Sphere { radius } => radius,
            Shape::Cylinder { radius, length } => libm::sqrt(radius * radius + 0.25 * length * length),
            Shape::Capsule { radius, length } => 0.5 * length + radius,
        }
    }
}

/// A shape placed in some frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Primitive {
    pub shape: Shape,
    pub pose: RigidTransform,
}

impl Primitive {
    pub fn new(shape: Shape, pose: RigidTransform) -> Self {
        Primitive { shape, pose }
    }

    pub fn sphere(center: Vector3<f64>, radius: f64) -> Self {
        Primitive::new(Shape::Sphere { radius }, RigidTransform::translation(center.x, center.y, center.z))
    }

    /// Axis-aligned box from its center and full size.
    pub fn cuboid(center: Vector3<f64>, size: Vector3<f64>) -> Self {
        Primitive::new(
            Shape::Box {
                half_extents: size * 0.5,
            },
            RigidTransform::translation(center.x, center.y, center.z),
        )
    }

    /// Capsule whose inner segment runs from `a` to `b`. Returns a sphere when
    /// the endpoints coincide.
    pub fn capsule_between(a: Vector3<f64>, b: Vector3<f64>, radius: f64) -> Self {
        let axis = b - a;
        let length = axis.norm();
        let center = (a + b) * 0.5;
        if length < 1e-12 {
            return Primitive::sphere(center, radius);
        }
        let rotation = nalgebra::UnitQuaternion::rotation_between(&Vector3::z(), &axis)
            .unwrap_or_else(|| {
                // axis is antiparallel to z
                nalgebra::UnitQuaternion::from_axis_angle(&Vector3::x_axis(), core::f64::consts::PI)
            });
        Primitive::new(
            Shape::Capsule { radius, length },
            nalgebra::Isometry3::from_parts(center.into(), rotation),
        )
    }

    pub fn transformed(&self, frame: &RigidTransform) -> Self {
        Primitive {
            shape: self.shape,
            pose: frame * self.pose,
        }
    }

    pub fn center(&self) -> Vector3<f64> {
        self.pose.translation.vector
    }

    fn axis(&self) -> Vector3<f64> {
        self.pose.rotation * Vector3::z()
    }

    /// Inner segment endpoints of a capsule or cylinder axis.
    fn segment(&self, length: f64) -> (Vector3<f64>, Vector3<f64>) {
        let half = self.axis() * (0.5 * length);
        (self.center() - half, self.center() + half)
    }

    /// Support point of the shape (without sphere/capsule radii when
    /// `core_only`) in world direction `d`.
    fn support(&self, d: &Vector3<f64>, core_only: bool) -> Vector3<f64> {
        let local = self.pose.rotation.inverse() * d;
        let p = match self.shape {
            Shape::Box { half_extents: h } => {
                Vector3::new(signum(local.x) * h.x, signum(local.y) * h.y, signum(local.z) * h.z)
            }
            Shape::Sphere { radius } => {
                if core_only {
                    Vector3::zeros()
                } else {
                    unit_or_zero(&local) * radius
                }
            }
            Shape::Capsule { radius, length } => {
                let tip = Vector3::new(0.0, 0.0, signum(local.z) * 0.5 * length);
                if core_only {
                    tip
                } else {
                    tip + unit_or_zero(&local) * radius
                }
            }
            Shape::Cylinder { radius, length } => {
                let radial = Vector3::new(local.x, local.y, 0.0);
                let rn = radial.norm();
                let r = if rn > 0.0 { radial * (radius / rn) } else { Vector3::zeros() };
                r + Vector3::new(0.0, 0.0, signum(local.z) * 0.5 * length)
            }
        };
        self.pose.rotation * p + self.center()
    }

    fn core_margin(&self) -> f64 {
        match self.shape {
            Shape::Sphere { radius } | Shape::Capsule { radius, .. } => radius,
            _ => 0.0,
        }
    }
}

fn signum(x: f64) -> f64 {
    if x < 0.0 {
        -1.0
    } else {
        1.0
    }
}

fn unit_or_zero(v: &Vector3<f64>) -> Vector3<f64> {
    let n = v.norm();
    if n > 0.0 {
        v / n
    } else {
        Vector3::zeros()
    }
}

/// Signed distance between two primitives (negative when they overlap).
///
/// The result is bitwise symmetric in its arguments.
pub fn distance(a: &Primitive, b: &Primitive) -> f64 {
    let (a, b) = if canonical_order(a, b) == Ordering::Greater {
        (b, a)
    } else {
        (a, b)
    };
    match (a.shape, b.shape) {
        (Shape::Sphere { radius: ra }, Shape::Sphere { radius: rb }) => {
            (a.center() - b.center()).norm() - ra - rb
        }
        (Shape::Sphere { radius: ra }, Shape::Capsule { radius: rb, length }) => {
            let (p, q) = b.segment(length);
            (a.center() - closest_on_segment(&a.center(), &p, &q)).norm() - ra - rb
        }
        (Shape::Capsule { radius: ra, length: la }, Shape::Capsule { radius: rb, length: lb }) => {
            let (p1, q1) = a.segment(la);
            let (p2, q2) = b.segment(lb);
            segment_segment_distance(&p1, &q1, &p2, &q2) - ra - rb
        }
        (Shape::Sphere { radius }, Shape::Box { half_extents }) => {
            box_signed_distance(b, &half_extents, &a.center()) - radius
        }
        (Shape::Capsule { radius, length }, Shape::Box { half_extents }) => {
            let (p, q) = a.segment(length);
            segment_box_distance(b, &half_extents, &p, &q) - radius
        }
        _ => gjk_signed_distance(a, b),
    }
}

fn canonical_order(a: &Primitive, b: &Primitive) -> Ordering {
    a.shape.rank().cmp(&b.shape.rank()).then_with(|| {
        let key = |p: &Primitive| {
            let t = p.pose.translation.vector;
            let r = p.pose.rotation.coords;
            [t.x, t.y, t.z, r.x, r.y, r.z, r.w]
        };
        let (ka, kb) = (key(a), key(b));
        for (x, y) in ka.iter().zip(kb.iter()) {
            match x.total_cmp(y) {
                Ordering::Equal => continue,
                o => return o,
            }
        }
        shape_key(&a.shape)
            .iter()
            .zip(shape_key(&b.shape).iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| *o != Ordering::Equal)
            .unwrap_or(Ordering::Equal)
    })
}

fn shape_key(s: &Shape) -> [f64; 3] {
    match *s {
        Shape::Box { half_extents: h } => [h.x, h.y, h.z],
        Shape::Sphere { radius } => [radius, 0.0, 0.0],
        Shape::Cylinder { radius, length } | Shape::Capsule { radius, length } => [radius, length, 0.0],
    }
}

/// Closest point to `x` on segment `[p, q]`.
pub fn closest_on_segment(x: &Vector3<f64>, p: &Vector3<f64>, q: &Vector3<f64>) -> Vector3<f64> {
    let d = q - p;
    let len2 = d.norm_squared();
    if len2 <= 0.0 {
        return *p;
    }
    let t = ((x - p).dot(&d) / len2).clamp(0.0, 1.0);
    p + d * t
}

/// Minimum distance between segments `[p1, q1]` and `[p2, q2]`.
pub fn segment_segment_distance(
    p1: &Vector3<f64>,
    q1: &Vector3<f64>,
    p2: &Vector3<f64>,
    q2: &Vector3<f64>,
) -> f64 {
    let d1 = q1 - p1;
    let d2 = q2 - p2;
    let r = p1 - p2;
    let a = d1.dot(&d1);
    let e = d2.dot(&d2);
    let f = d2.dot(&r);
    let eps = 1e-15;
    let (s, t);
    if a <= eps && e <= eps {
        return r.norm();
    }
    if a <= eps {
        s = 0.0;
        t = (f / e).clamp(0.0, 1.0);
    } else {
        let c = d1.dot(&r);
        if e <= eps {
            t = 0.0;
            s = (-c / a).clamp(0.0, 1.0);
        } else {
            let b = d1.dot(&d2);
            let denom = a * e - b * b;
            let mut s0 = if denom > eps * a * e {
                ((b * f - c * e) / denom).clamp(0.0, 1.0)
            } else {
                0.0
            };
            let mut t0 = (b * s0 + f) / e;
            if t0 < 0.0 {
                t0 = 0.0;
                s0 = (-c / a).clamp(0.0, 1.0);
            } else if t0 > 1.0 {
                t0 = 1.0;
                s0 = ((b - c) / a).clamp(0.0, 1.0);
            }
            s = s0;
            t = t0;
        }
    }
    ((p1 + d1 * s) - (p2 + d2 * t)).norm()
}

/// Signed distance from a world point to a posed box.
fn box_signed_distance(bx: &Primitive, half: &Vector3<f64>, x: &Vector3<f64>) -> f64 {
    let local = bx.pose.inverse_transform_point(&Point3::from(*x)).coords;
    let q = local.abs() - half;
    let outside = Vector3::new(q.x.max(0.0), q.y.max(0.0), q.z.max(0.0)).norm();
    let inside = q.x.max(q.y).max(q.z).min(0.0);
    outside + inside
}

/// Minimum of the box signed distance along a segment. The box SDF is convex,
/// so its restriction to the segment is unimodal and golden-section search
/// converges to the true minimum.
fn segment_box_distance(bx: &Primitive, half: &Vector3<f64>, p: &Vector3<f64>, q: &Vector3<f64>) -> f64 {
    let f = |t: f64| box_signed_distance(bx, half, &(p + (q - p) * t));
    let inv_phi = 0.5 * (libm::sqrt(5.0) - 1.0);
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = f(x2);
        }
        if hi - lo < 1e-14 {
            break;
        }
    }
    f(0.0).min(f(1.0)).min(f1).min(f2)
}

const GJK_TOLERANCE: f64 = 1e-10;

fn gjk_signed_distance(a: &Primitive, b: &Primitive) -> f64 {
    let margin = a.core_margin() + b.core_margin();
    let support = |d: &Vector3<f64>| a.support(d, true) - b.support(&(-d), true);
    match gjk_distance(&support, b.center() - a.center()) {
        Some(d) => d - margin,
        None => -penetration_estimate(a, b) - margin,
    }
}

/// Distance from the origin to the Minkowski difference given by `support`,
/// or `None` when the origin is inside it.
fn gjk_distance<F: Fn(&Vector3<f64>) -> Vector3<f64>>(support: &F, initial: Vector3<f64>) -> Option<f64> {
    let start = if initial.norm_squared() > 0.0 { -initial } else { Vector3::x() };
    let mut simplex: Vec<Vector3<f64>> = Vec::with_capacity(4);
    simplex.push(support(&start));
    let mut v = simplex[0];
    for _ in 0..128 {
        let vv = v.norm_squared();
        if vv <= 1e-24 {
            return None;
        }
        let w = support(&(-v));
        if vv - v.dot(&w) <= GJK_TOLERANCE * vv.max(1e-6) {
            return Some(libm::sqrt(vv));
        }
        if simplex.iter().any(|s| (s - w).norm_squared() <= 1e-24) {
            return Some(libm::sqrt(vv));
        }
        simplex.push(w);
        match closest_on_simplex(&simplex) {
            None => return None,
            Some((point, kept)) => {
                if point.norm_squared() >= vv {
                    // no progress
                    return Some(libm::sqrt(vv));
                }
                v = point;
                simplex = kept;
            }
        }
    }
    Some(v.norm())
}

/// Closest point to the origin of the convex hull of `pts` (up to four points)
/// and the minimal supporting subset. `None` if the origin is enclosed by a
/// tetrahedron.
fn closest_on_simplex(pts: &[Vector3<f64>]) -> Option<(Vector3<f64>, Vec<Vector3<f64>>)> {
    let n = pts.len();
    if n == 4 {
        if let Some(bary) = barycentric(pts) {
            if bary.iter().all(|&l| l >= 0.0) {
                return None;
            }
        }
    }
    let mut best: Option<(f64, Vector3<f64>, u8)> = None;
    for mask in 1u8..(1 << n) {
        let subset: Vec<Vector3<f64>> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]).collect();
        if subset.len() == 4 {
            continue;
        }
        if let Some(p) = affine_projection(&subset) {
            let d = p.norm_squared();
            if best.is_none_or(|(bd, _, _)| d < bd) {
                best = Some((d, p, mask));
            }
        }
    }
    best.map(|(_, p, mask)| {
        let kept = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| pts[i]).collect();
        (p, kept)
    })
}

/// Projection of the origin onto the affine hull of `pts`, if it lies
/// strictly inside their convex hull.
fn affine_projection(pts: &[Vector3<f64>]) -> Option<Vector3<f64>> {
    match pts.len() {
        1 => Some(pts[0]),
        2 => {
            let d = pts[1] - pts[0];
            let l2 = d.norm_squared();
            if l2 <= 1e-30 {
                return None;
            }
            let t = -pts[0].dot(&d) / l2;
            (t > 0.0 && t < 1.0).then(|| pts[0] + d * t)
        }
        3 => {
            let e1 = pts[1] - pts[0];
            let e2 = pts[2] - pts[0];
            let (a, b, c) = (e1.dot(&e1), e1.dot(&e2), e2.dot(&e2));
            let (d, e) = (-pts[0].dot(&e1), -pts[0].dot(&e2));
            let det = a * c - b * b;
            if det <= 1e-30 * a.max(c) * a.max(c) {
                return None;
            }
            let s = (c * d - b * e) / det;
            let t = (a * e - b * d) / det;
            (s > 0.0 && t > 0.0 && s + t < 1.0).then(|| pts[0] + e1 * s + e2 * t)
        }
        _ => None,
    }
}

fn barycentric(pts: &[Vector3<f64>]) -> Option<[f64; 4]> {
    let m = Matrix3::from_columns(&[pts[1] - pts[0], pts[2] - pts[0], pts[3] - pts[0]]);
    let inv = m.try_inverse()?;
    let l = inv * (-pts[0]);
    Some([1.0 - l.x - l.y - l.z, l.x, l.y, l.z])
}

/// Smallest sampled support of the Minkowski difference of the two cores:
/// an over-estimate of the true penetration depth.
fn penetration_estimate(a: &Primitive, b: &Primitive) -> f64 {
    let h = |d: &Vector3<f64>| {
        let sa = a.support(d, true);
        let sb = b.support(&(-d), true);
        (sa - sb).dot(d)
    };
    let mut best = f64::INFINITY;
    let mut consider = |d: Vector3<f64>| {
        best = best.min(h(&d));
    };
    for p in [a, b] {
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            let w = p.pose.rotation * axis;
            consider(w);
            consider(-w);
        }
    }
    const SAMPLES: usize = 96;
    let golden = core::f64::consts::PI * (3.0 - libm::sqrt(5.0));
    for i in 0..SAMPLES {
        let z = 1.0 - 2.0 * (i as f64 + 0.5) / SAMPLES as f64;
        let r = libm::sqrt(1.0 - z * z);
        let phi = golden * i as f64;
        consider(Vector3::new(r * libm::cos(phi), r * libm::sin(phi), z));
    }
    best.max(0.0)
}

/// A named obstacle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Obstacle {
    pub name: String,
    pub primitive: Primitive,
}

/// Obstacles plus the safety margin used by the collision constraint.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Scene {
    pub obstacles: Vec<Obstacle>,
    /// Safety margin δ (m).
    pub safety_margin: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SceneError {
    #[error("obstacle name `{0}` is used more than once")]
    DuplicateName(String),
    #[error("obstacle `{0}` has a non-positive dimension")]
    BadDimension(String),
    #[error("safety margin must be non-negative")]
    NegativeMargin,
}

impl Scene {
    pub fn new(obstacles: Vec<Obstacle>, safety_margin: f64) -> Result<Scene, SceneError> {
        if !(safety_margin >= 0.0) {
            return Err(SceneError::NegativeMargin);
        }
        for (i, o) in obstacles.iter().enumerate() {
            if !o.primitive.shape.is_valid() {
                return Err(SceneError::BadDimension(o.name.clone()));
            }
            if obstacles[..i].iter().any(|p| p.name == o.name) {
                return Err(SceneError::DuplicateName(o.name.clone()));
            }
        }
        Ok(Scene {
            obstacles,
            safety_margin,
        })
    }

    pub fn empty(safety_margin: f64) -> Scene {
        Scene {
            obstacles: Vec::new(),
            safety_margin,
        }
    }
}

/// Which geometry a clearance value refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum BodyRef {
    /// Geometry fixed to the base.
    Base,
    /// Moving body `k` (0-based joint index).
    Body(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ClearancePair {
    Obstacle { body: BodyRef, obstacle: usize },
    SelfCollision { first: BodyRef, second: BodyRef },
}

/// Global minimum distance over all checked pairs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Clearance {
    /// `f64::INFINITY` when there is nothing to check.
    pub distance: f64,
    pub pair: Option<ClearancePair>,
}

/// Minimum signed distance between the posed chain and the scene, including
/// self-collision between bodies that do not share a joint.
pub fn chain_clearance(
    chain: &KinematicChain,
    q: &[f64],
    scene: &Scene,
) -> Result<Clearance, KinematicsError> {
    let poses = forward_kinematics(chain, q)?;
    let mut groups: Vec<(BodyRef, Vec<Primitive>)> = Vec::with_capacity(chain.dof() + 1);
    groups.push((
        BodyRef::Base,
        chain.base_shapes.iter().map(|p| p.transformed(&chain.base_pose)).collect(),
    ));
    for (k, body) in chain.bodies.iter().enumerate() {
        groups.push((
            BodyRef::Body(k),
            body.shapes.iter().map(|p| p.transformed(&poses.bodies[k])).collect(),
        ));
    }
    let mut best = Clearance {
        distance: f64::INFINITY,
        pair: None,
    };
    let mut consider = |x: &Primitive, y: &Primitive, pair: ClearancePair| {
        let lower = (x.center() - y.center()).norm() - x.shape.bounding_radius() - y.shape.bounding_radius();
        if lower >= best.distance {
            return;
        }
        let d = distance(x, y);
        if d < best.distance {
            best = Clearance {
                distance: d,
                pair: Some(pair),
            };
        }
    };
    for (body, shapes) in &groups {
        for (oi, obstacle) in scene.obstacles.iter().enumerate() {
            for s in shapes {
                consider(s, &obstacle.primitive, ClearancePair::Obstacle { body: *body, obstacle: oi });
            }
        }
    }
    // Group index g holds the base (0) or body g-1; groups two apart share no joint.
    for i in 0..groups.len() {
        for j in (i + 2)..groups.len() {
            for x in &groups[i].1 {
                for y in &groups[j].1 {
                    consider(
                        x,
                        y,
                        ClearancePair::SelfCollision {
                            first: groups[i].0,
                            second: groups[j].0,
                        },
                    );
                }
            }
        }
    }
    Ok(best)
}

/// Collision constraint residual `max(0, δ - clearance)`; zero when satisfied.
pub fn collision_constraint(chain: &KinematicChain, q: &[f64], scene: &Scene) -> Result<f64, KinematicsError> {
    let c = chain_clearance(chain, q, scene)?;
    Ok(constraint_from_clearance(c.distance, scene.safety_margin))
}

pub fn constraint_from_clearance(clearance: f64, safety_margin: f64) -> f64 {
    (safety_margin - clearance).max(0.0)
}
