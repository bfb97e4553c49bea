//! Independent reference computations for the acceptance suite.
//!
//! Nothing here calls into the kinematics, dynamics or collision code under
//! test. Transforms are plain row-major 4×4 arrays.

#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, PI};

use modsynth_core::collision::{Primitive, Shape};
use modsynth_core::synthesis::{random_genome, SearchMode};
use modsynth_core::{decode, Composition, KinematicChain, LibraryConfig};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub type M4 = [[f64; 4]; 4];
pub type V3 = [f64; 3];

pub fn identity() -> M4 {
    let mut m = [[0.0; 4]; 4];
    for (i, row) in m.iter_mut().enumerate() {
        row[i] = 1.0;
    }
    m
}

pub fn mul(a: &M4, b: &M4) -> M4 {
    let mut m = [[0.0; 4]; 4];
    for i in 0..4 {
        for j in 0..4 {
            m[i][j] = (0..4).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    m
}

pub fn rx(t: f64) -> M4 {
    let (s, c) = t.sin_cos();
    [[1.0, 0.0, 0.0, 0.0], [0.0, c, -s, 0.0], [0.0, s, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

pub fn ry(t: f64) -> M4 {
    let (s, c) = t.sin_cos();
    [[c, 0.0, s, 0.0], [0.0, 1.0, 0.0, 0.0], [-s, 0.0, c, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

pub fn rz(t: f64) -> M4 {
    let (s, c) = t.sin_cos();
    [[c, -s, 0.0, 0.0], [s, c, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]]
}

pub fn tz(d: f64) -> M4 {
    let mut m = identity();
    m[2][3] = d;
    m
}

pub fn apply(m: &M4, p: &V3) -> V3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i][0] * p[0] + m[i][1] * p[1] + m[i][2] * p[2] + m[i][3];
    }
    out
}

pub fn column(m: &M4, j: usize) -> V3 {
    [m[0][j], m[1][j], m[2][j]]
}

pub fn sub(a: &V3, b: &V3) -> V3 {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

pub fn dot(a: &V3, b: &V3) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

pub fn cross(a: &V3, b: &V3) -> V3 {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub fn norm(a: &V3) -> f64 {
    dot(a, a).sqrt()
}

/// Joint frames and end-effector frame of a composition mounted at the world
/// origin, composed one elementary transform at a time:
/// port · Rx(skew) · Tz(offset) · Ry(twist) · Tz(body) · Rz(q), with the
/// next port given by the link as Tz(length) · Rx(90°) · Ry(bend).
pub fn fk(composition: &Composition, library: &LibraryConfig, q: &[f64]) -> (Vec<M4>, M4) {
    let g = &library.geometry;
    let mut frame = identity();
    let mut frames = Vec::new();
    for (unit, &angle) in composition.units.iter().zip(q) {
        let v = unit.variant;
        let skew = if matches!(unit.kind.index(), 2 | 4) { FRAC_PI_2 } else { 0.0 };
        for m in [
            rx(skew),
            tz(*g.twist_unit_offset.get(v)),
            ry(f64::from(unit.twist.degrees()) * PI / 180.0),
            tz(*g.body_length.get(v)),
            rz(angle),
        ] {
            frame = mul(&frame, &m);
        }
        frames.push(frame);
        if let Some(link) = unit.link {
            let spec = library.link(link);
            for m in [tz(spec.length), rx(FRAC_PI_2), ry(spec.bend_angle * PI / 180.0)] {
                frame = mul(&frame, &m);
            }
        }
    }
    (frames, frame)
}

pub fn random_composition(rng: &mut ChaCha8Rng, library: &LibraryConfig) -> Composition {
    loop {
        if let Ok(c) = decode(&random_genome(rng, SearchMode::Full), true, library) {
            return c;
        }
    }
}

pub fn random_q(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-PI..PI)).collect()
}

/// Rotation part times a vector.
fn rotate(m: &M4, v: &V3) -> V3 {
    let mut out = [0.0; 3];
    for (i, o) in out.iter_mut().enumerate() {
        *o = m[i][0] * v[0] + m[i][1] * v[1] + m[i][2] * v[2];
    }
    out
}

/// Body-frame inertial data of the chain, with frames from [`fk`].
pub struct Inertial<'a> {
    pub composition: &'a Composition,
    pub library: &'a LibraryConfig,
    pub chain: &'a KinematicChain,
    pub gravity: V3,
}

impl Inertial<'_> {
    fn frames(&self, q: &[f64]) -> Vec<M4> {
        fk(self.composition, self.library, q).0
    }

    /// Gravitational potential energy, Σ −m g·c.
    pub fn potential(&self, q: &[f64]) -> f64 {
        self.frames(q)
            .iter()
            .zip(&self.chain.bodies)
            .map(|(f, b)| {
                let c = apply(f, &[b.center_of_mass.x, b.center_of_mass.y, b.center_of_mass.z]);
                -b.mass * dot(&self.gravity, &c)
            })
            .sum()
    }

    /// Joint-space mass matrix from the point and rotational velocities of
    /// every body, using each joint's world axis and origin.
    pub fn mass_matrix(&self, q: &[f64]) -> Vec<Vec<f64>> {
        let n = q.len();
        let frames = self.frames(q);
        let mut m = vec![vec![0.0; n]; n];
        for (k, (f, b)) in frames.iter().zip(&self.chain.bodies).enumerate() {
            let c = apply(f, &[b.center_of_mass.x, b.center_of_mass.y, b.center_of_mass.z]);
            let lin: Vec<V3> = (0..n)
                .map(|j| if j <= k { cross(&column(&frames[j], 2), &sub(&c, &column(&frames[j], 3))) } else { [0.0; 3] })
                .collect();
            let ang: Vec<V3> = (0..n).map(|j| if j <= k { column(&frames[j], 2) } else { [0.0; 3] }).collect();
            // World inertia R I Rᵀ applied to a world vector.
            let inertia = |w: &V3| {
                let local = [dot(&column(f, 0), w), dot(&column(f, 1), w), dot(&column(f, 2), w)];
                let i = b.inertia;
                let il = [
                    i[(0, 0)] * local[0] + i[(0, 1)] * local[1] + i[(0, 2)] * local[2],
                    i[(1, 0)] * local[0] + i[(1, 1)] * local[1] + i[(1, 2)] * local[2],
                    i[(2, 0)] * local[0] + i[(2, 1)] * local[1] + i[(2, 2)] * local[2],
                ];
                rotate(f, &il)
            };
            for a in 0..n {
                for c2 in 0..n {
                    m[a][c2] += b.mass * dot(&lin[a], &lin[c2]) + dot(&ang[a], &inertia(&ang[c2]));
                }
            }
        }
        m
    }

    fn kinetic(&self, q: &[f64], qdot: &[f64]) -> f64 {
        let m = self.mass_matrix(q);
        let n = q.len();
        0.5 * (0..n).map(|i| (0..n).map(|j| qdot[i] * m[i][j] * qdot[j]).sum::<f64>()).sum::<f64>()
    }

    /// ∂V/∂q by central differences: the torque that holds the chain still.
    pub fn potential_gradient(&self, q: &[f64], h: f64) -> Vec<f64> {
        (0..q.len())
            .map(|i| {
                let (mut a, mut b) = (q.to_vec(), q.to_vec());
                a[i] += h;
                b[i] -= h;
                (self.potential(&a) - self.potential(&b)) / (2.0 * h)
            })
            .collect()
    }

    /// τ = d/dt ∂T/∂q̇ − ∂(T − V)/∂q with every derivative of T taken
    /// numerically: d/dt ∂T/∂q̇ = M q̈ + Ṁ q̇, Ṁ = Σ_j ∂M/∂q_j q̇_j.
    pub fn euler_lagrange(&self, q: &[f64], qdot: &[f64], qddot: &[f64], h: f64) -> Vec<f64> {
        let n = q.len();
        let m = self.mass_matrix(q);
        let mut mdot = vec![vec![0.0; n]; n];
        let mut dt_dq = vec![0.0; n];
        for j in 0..n {
            let (mut a, mut b) = (q.to_vec(), q.to_vec());
            a[j] += h;
            b[j] -= h;
            let (ma, mb) = (self.mass_matrix(&a), self.mass_matrix(&b));
            for r in 0..n {
                for c in 0..n {
                    mdot[r][c] += (ma[r][c] - mb[r][c]) / (2.0 * h) * qdot[j];
                }
            }
            dt_dq[j] = (self.kinetic(&a, qdot) - self.kinetic(&b, qdot)) / (2.0 * h);
        }
        let dv = self.potential_gradient(q, h);
        (0..n)
            .map(|i| {
                let inertial: f64 = (0..n).map(|j| m[i][j] * qddot[j] + mdot[i][j] * qdot[j]).sum();
                inertial - dt_dq[i] + dv[i]
            })
            .collect()
    }
}

/// Signed distance from a world point to a primitive.
pub fn point_distance(p: &Primitive, x: &V3) -> f64 {
    let local = p.pose.inverse_transform_point(&nalgebra::Point3::new(x[0], x[1], x[2]));
    let (lx, ly, lz) = (local.x, local.y, local.z);
    match p.shape {
        Shape::Sphere { radius } => (lx * lx + ly * ly + lz * lz).sqrt() - radius,
        Shape::Box { half_extents: h } => {
            let d = [lx.abs() - h.x, ly.abs() - h.y, lz.abs() - h.z];
            let outside = d.map(|v| v.max(0.0));
            norm(&outside) + d[0].max(d[1]).max(d[2]).min(0.0)
        }
        Shape::Capsule { radius, length } => {
            let z = lz.clamp(-0.5 * length, 0.5 * length);
            (lx * lx + ly * ly + (lz - z) * (lz - z)).sqrt() - radius
        }
        Shape::Cylinder { radius, length } => {
            let d = [(lx * lx + ly * ly).sqrt() - radius, lz.abs() - 0.5 * length];
            let outside = (d[0].max(0.0).powi(2) + d[1].max(0.0).powi(2)).sqrt();
            outside + d[0].max(d[1]).min(0.0)
        }
    }
}

/// A point of the solid primitive for parameters in the unit cube; the map
/// is onto.
fn solid_point(p: &Primitive, u: &V3) -> V3 {
    let local = match p.shape {
        Shape::Box { half_extents: h } => [h.x * (2.0 * u[0] - 1.0), h.y * (2.0 * u[1] - 1.0), h.z * (2.0 * u[2] - 1.0)],
        Shape::Sphere { radius } => ball(radius * u[2], u[0], u[1], 0.0),
        Shape::Cylinder { radius, length } => {
            let (s, c) = (2.0 * PI * u[0]).sin_cos();
            [radius * u[2] * c, radius * u[2] * s, length * (u[1] - 0.5)]
        }
        // Segment point plus a ball offset at full radius.
        Shape::Capsule { radius, length } => ball(radius, u[0], u[1], length * (u[2] - 0.5)),
    };
    let w = p.pose * nalgebra::Point3::new(local[0], local[1], local[2]);
    [w.x, w.y, w.z]
}

fn ball(r: f64, u: f64, v: f64, z: f64) -> V3 {
    let (st, ct) = (2.0 * PI * u).sin_cos();
    let (sp, cp) = (PI * v).sin_cos();
    [r * sp * ct, r * sp * st, z + r * cp]
}

/// Minimum over the solid `a` of the signed distance to `b`: a grid over the
/// parameter cube followed by compass search from the best grid cells. Equal
/// to the separation distance for disjoint convex shapes.
pub fn sampled_distance(a: &Primitive, b: &Primitive) -> f64 {
    let f = |u: &V3| point_distance(b, &solid_point(a, u));
    const GRID: usize = 12;
    let mut cells: Vec<(f64, V3)> = Vec::with_capacity(GRID * GRID * GRID);
    for i in 0..GRID {
        for j in 0..GRID {
            for k in 0..GRID {
                let u = [i, j, k].map(|t| t as f64 / (GRID - 1) as f64);
                cells.push((f(&u), u));
            }
        }
    }
    cells.sort_by(|x, y| x.0.total_cmp(&y.0));
    let mut best = f64::INFINITY;
    for &(mut value, mut u) in cells.iter().take(8) {
        let mut step = 0.5 / GRID as f64;
        while step > 1e-10 {
            let mut improved = false;
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let mut c = u;
                    c[axis] = (c[axis] + sign * step).clamp(0.0, 1.0);
                    let v = f(&c);
                    if v < value {
                        value = v;
                        u = c;
                        improved = true;
                    }
                }
            }
            if !improved {
                step *= 0.5;
            }
        }
        best = best.min(value);
    }
    best
}
