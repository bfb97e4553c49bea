//! RRT-connect in joint space, shortcut smoothing, and torque verification
//! along a time-parameterized path.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::Vector3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{collision_constraint, Scene};
use crate::composition::KinematicChain;
use crate::dynamics::{check_torque_limits, inverse_dynamics, DynamicsState, Payload, TorqueLimitReport};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlannerSettings {
    /// Tree extension step (rad, Euclidean in joint space).
    pub step: f64,
    /// Largest max-norm gap between validated states (rad).
    pub check_resolution: f64,
    pub max_iterations: usize,
    pub rng_seed: u64,
    pub shortcut_attempts: usize,
}

impl Default for PlannerSettings {
    fn default() -> Self {
        PlannerSettings {
            step: 0.1,
            check_resolution: 0.02,
            max_iterations: 20_000,
            rng_seed: 0,
            shortcut_attempts: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Vec<f64>>,
    pub check_resolution: f64,
}

impl Path {
    /// Σ Euclidean joint-space segment lengths.
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).fold(0.0, |acc, w| acc + dist(&w[0], &w[1]))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Endpoint {
    #[error("start")]
    Start,
    #[error("goal")]
    Goal,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("{0} configuration has {1} values, chain has {2} joints")]
    Dimension(Endpoint, usize, usize),
    #[error("{0} configuration is outside the joint limits")]
    OutOfLimits(Endpoint),
    #[error("{0} configuration is in collision (violation {1:.4} m)")]
    InCollision(Endpoint, f64),
    #[error("no path after {iterations} iterations (trees of {start_tree} and {goal_tree} nodes)")]
    Exhausted {
        iterations: usize,
        start_tree: usize,
        goal_tree: usize,
    },
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    libm::sqrt(a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>())
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + (y - x) * t).collect()
}

/// Points strictly after `a` up to and including `b`, no more than
/// `resolution` apart in max-norm.
fn interpolate(a: &[f64], b: &[f64], resolution: f64) -> Vec<Vec<f64>> {
    let steps = libm::ceil(max_gap(a, b) / resolution).max(1.0) as usize;
    (1..=steps)
        .map(|i| if i == steps { b.to_vec() } else { lerp(a, b, i as f64 / steps as f64) })
        .collect()
}

struct Checker<'a> {
    chain: &'a KinematicChain,
    scene: &'a Scene,
    resolution: f64,
}

impl Checker<'_> {
    fn state_ok(&self, q: &[f64]) -> bool {
        self.chain.within_limits(q) && collision_constraint(self.chain, q, self.scene).is_ok_and(|c| c == 0.0)
    }

    /// Checks the motion from a valid `a` to `b`, `b` included.
    fn edge_ok(&self, a: &[f64], b: &[f64]) -> bool {
        interpolate(a, b, self.resolution).iter().all(|q| self.state_ok(q))
    }
}

struct Tree {
    nodes: Vec<Vec<f64>>,
    parents: Vec<usize>,
}

impl Tree {
    fn new(root: Vec<f64>) -> Tree {
        Tree {
            nodes: vec![root],
            parents: vec![0],
        }
    }

    fn nearest(&self, q: &[f64]) -> usize {
        let mut best = (0, f64::INFINITY);
        for (i, n) in self.nodes.iter().enumerate() {
            let d = dist(n, q);
            if d < best.1 {
                best = (i, d);
            }
        }
        best.0
    }

    fn push(&mut self, q: Vec<f64>, parent: usize) -> usize {
        self.nodes.push(q);
        self.parents.push(parent);
        self.nodes.len() - 1
    }

    /// Root-to-node configurations.
    fn branch(&self, mut i: usize) -> Vec<Vec<f64>> {
        let mut out = vec![self.nodes[i].clone()];
        while i != 0 {
            i = self.parents[i];
            out.push(self.nodes[i].clone());
        }
        out.reverse();
        out
    }
}

enum Extend {
    Trapped,
    Advanced(usize),
    Reached(usize),
}

fn extend(tree: &mut Tree, target: &[f64], step: f64, checker: &Checker<'_>) -> Extend {
    let near = tree.nearest(target);
    let from = &tree.nodes[near];
    let d = dist(from, target);
    let (q, reached) = if d <= step {
        (target.to_vec(), true)
    } else {
        (lerp(from, target, step / d), false)
    };
    if !checker.edge_ok(from, &q) {
        return Extend::Trapped;
    }
    let i = tree.push(q, near);
    if reached {
        Extend::Reached(i)
    } else {
        Extend::Advanced(i)
    }
}

fn connect(tree: &mut Tree, target: &[f64], step: f64, checker: &Checker<'_>) -> Extend {
    loop {
        match extend(tree, target, step, checker) {
            Extend::Advanced(_) => continue,
            other => return other,
        }
    }
}

fn densify(waypoints: &[Vec<f64>], resolution: f64) -> Vec<Vec<f64>> {
    let mut out = vec![waypoints[0].clone()];
    for w in waypoints.windows(2) {
        out.extend(interpolate(&w[0], &w[1], resolution));
    }
    out
}

fn check_endpoint(checker: &Checker<'_>, q: &[f64], which: Endpoint) -> Result<(), PlanError> {
    let n = checker.chain.dof();
    if q.len() != n {
        return Err(PlanError::Dimension(which, q.len(), n));
    }
    if !checker.chain.within_limits(q) {
        return Err(PlanError::OutOfLimits(which));
    }
    let c = collision_constraint(checker.chain, q, checker.scene).expect("dimension checked");
    if c > 0.0 {
        return Err(PlanError::InCollision(which, c));
    }
    Ok(())
}

/// Bidirectional RRT with the greedy connect heuristic. The returned path is
/// densified to `check_resolution` and starts and ends exactly at the given
/// configurations.
pub fn plan(
    chain: &KinematicChain,
    scene: &Scene,
    q_start: &[f64],
    q_goal: &[f64],
    settings: &PlannerSettings,
) -> Result<Path, PlanError> {
    let checker = Checker {
        chain,
        scene,
        resolution: settings.check_resolution,
    };
    check_endpoint(&checker, q_start, Endpoint::Start)?;
    check_endpoint(&checker, q_goal, Endpoint::Goal)?;
    let finish = |waypoints: Vec<Vec<f64>>| Path {
        waypoints: densify(&waypoints, settings.check_resolution),
        check_resolution: settings.check_resolution,
    };
    if q_start == q_goal {
        return Ok(Path {
            waypoints: vec![q_start.to_vec()],
            check_resolution: settings.check_resolution,
        });
    }
    if checker.edge_ok(q_start, q_goal) {
        return Ok(finish(vec![q_start.to_vec(), q_goal.to_vec()]));
    }

    let limits = chain.joint_limits();
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    let mut a = Tree::new(q_start.to_vec());
    let mut b = Tree::new(q_goal.to_vec());
    // Whether `a` is currently the start tree.
    let mut a_is_start = true;
    for _ in 0..settings.max_iterations {
        let sample: Vec<f64> = limits.iter().map(|&(lo, hi)| rng.random_range(lo..=hi)).collect();
        let new = match extend(&mut a, &sample, settings.step, &checker) {
            Extend::Trapped => None,
            Extend::Advanced(i) | Extend::Reached(i) => Some(i),
        };
        if let Some(i) = new {
            let target = a.nodes[i].clone();
            if let Extend::Reached(j) = connect(&mut b, &target, settings.step, &checker) {
                let (start_tree, ia, goal_tree, ib) = if a_is_start { (&a, i, &b, j) } else { (&b, j, &a, i) };
                let mut waypoints = start_tree.branch(ia);
                let mut tail = goal_tree.branch(ib);
                tail.reverse();
                // Both branches end at the shared node.
                waypoints.extend(tail.into_iter().skip(1));
                return Ok(finish(waypoints));
            }
        }
        core::mem::swap(&mut a, &mut b);
        a_is_start = !a_is_start;
    }
    let (s, g) = if a_is_start { (&a, &b) } else { (&b, &a) };
    Err(PlanError::Exhausted {
        iterations: settings.max_iterations,
        start_tree: s.nodes.len(),
        goal_tree: g.nodes.len(),
    })
}

/// Whether every waypoint and every motion between consecutive waypoints is
/// within limits and collision free.
pub fn path_is_valid(chain: &KinematicChain, scene: &Scene, path: &Path) -> bool {
    let checker = Checker {
        chain,
        scene,
        resolution: path.check_resolution,
    };
    path.waypoints.first().is_some_and(|q| checker.state_ok(q))
        && path.waypoints.windows(2).all(|w| checker.edge_ok(&w[0], &w[1]))
}

/// Random-pair shortcutting. A pair of waypoints is joined directly when the
/// straight motion is valid and shorter than the stretch it replaces.
pub fn shortcut(path: &Path, chain: &KinematicChain, scene: &Scene, attempts: usize, rng_seed: u64) -> Path {
    let checker = Checker {
        chain,
        scene,
        resolution: path.check_resolution,
    };
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut w = path.waypoints.clone();
    for _ in 0..attempts {
        if w.len() < 3 {
            break;
        }
        let i = rng.random_range(0..w.len() - 2);
        let j = rng.random_range(i + 2..w.len());
        let current: f64 = w[i..=j].windows(2).map(|p| dist(&p[0], &p[1])).sum();
        if dist(&w[i], &w[j]) >= current - 1e-12 || !checker.edge_ok(&w[i], &w[j]) {
            continue;
        }
        let bridge = interpolate(&w[i], &w[j], path.check_resolution);
        w.splice(i + 1..=j, bridge);
    }
    Path {
        waypoints: w,
        check_resolution: path.check_resolution,
    }
}

/// Time scaling for torque verification.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Timing {
    /// Fraction of each joint's rated velocity used as its cap.
    pub velocity_scale: f64,
    /// Duration of the acceleration and deceleration ramps (s).
    pub ramp_time: f64,
    pub gravity: Vector3<f64>,
    pub payload: Option<Payload>,
}

impl Default for Timing {
    fn default() -> Self {
        Timing {
            velocity_scale: 1.0,
            ramp_time: 0.5,
            gravity: crate::dynamics::STANDARD_GRAVITY,
            payload: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathTorques {
    /// Time at each waypoint (s).
    pub times: Vec<f64>,
    /// `torques[k][i]`: torque of joint `i` at waypoint `k`.
    pub torques: Vec<Vec<f64>>,
    pub report: TorqueLimitReport,
}

/// Trapezoidal speed profile over arc length: accelerate for `ramp` seconds
/// to `v`, cruise, decelerate. Returns (speed, acceleration) at arc length `s`
/// of a path of length `total`.
fn trapezoid(s: f64, total: f64, v: f64, ramp: f64) -> (f64, f64) {
    let mut accel = v / ramp;
    let mut peak = v;
    // Too short to reach cruise speed: triangular profile.
    if v * ramp > total {
        peak = libm::sqrt(accel * total);
        accel = peak * peak / total;
    }
    let ramp_len = peak * peak / (2.0 * accel);
    if s < ramp_len {
        (libm::sqrt(2.0 * accel * s), accel)
    } else if s > total - ramp_len {
        (libm::sqrt(2.0 * accel * (total - s).max(0.0)), -accel)
    } else {
        (peak, 0.0)
    }
}

/// Inverse dynamics at every waypoint under a trapezoidal profile in path
/// arc length whose cruise speed keeps each joint within
/// `velocity_scale` × its rated velocity.
pub fn verify_path_torques(chain: &KinematicChain, path: &Path, timing: &Timing) -> PathTorques {
    let w = &path.waypoints;
    let n = chain.dof();
    let m = w.len();
    let mut s = vec![0.0; m];
    for k in 1..m {
        s[k] = s[k - 1] + dist(&w[k - 1], &w[k]);
    }
    let total = s[m - 1];

    // Path tangent and curvature by finite differences in arc length.
    let mut d1 = vec![vec![0.0; n]; m];
    let mut d2 = vec![vec![0.0; n]; m];
    if total > 0.0 {
        for k in 0..m {
            let (a, b) = (k.saturating_sub(1), (k + 1).min(m - 1));
            let h = s[b] - s[a];
            for i in 0..n {
                d1[k][i] = if h > 0.0 { (w[b][i] - w[a][i]) / h } else { 0.0 };
            }
            if k > 0 && k + 1 < m {
                let (h0, h1) = (s[k] - s[k - 1], s[k + 1] - s[k]);
                if h0 > 0.0 && h1 > 0.0 {
                    for i in 0..n {
                        let f0 = (w[k][i] - w[k - 1][i]) / h0;
                        let f1 = (w[k + 1][i] - w[k][i]) / h1;
                        d2[k][i] = 2.0 * (f1 - f0) / (h0 + h1);
                    }
                }
            }
        }
    }

    let limits = chain.velocity_limits();
    let mut v = f64::INFINITY;
    for t in &d1 {
        for (i, &x) in t.iter().enumerate() {
            if x.abs() > 1e-12 {
                v = v.min(timing.velocity_scale * limits[i] / x.abs());
            }
        }
    }

    let mut times = vec![0.0; m];
    let mut torques = Vec::with_capacity(m);
    for k in 0..m {
        let (speed, accel) = if total > 0.0 { trapezoid(s[k], total, v, timing.ramp_time) } else { (0.0, 0.0) };
        if k > 0 {
            // Segment duration from the mean of its end speeds.
            let (prev, _) = trapezoid(s[k - 1], total, v, timing.ramp_time);
            let mean = 0.5 * (prev + speed);
            times[k] = times[k - 1] + if mean > 0.0 { (s[k] - s[k - 1]) / mean } else { 0.0 };
        }
        let state = DynamicsState {
            q: w[k].clone(),
            qdot: d1[k].iter().map(|x| x * speed).collect(),
            qddot: (0..n).map(|i| d2[k][i] * speed * speed + d1[k][i] * accel).collect(),
            gravity: timing.gravity,
            payload: timing.payload,
        };
        torques.push(inverse_dynamics(chain, &state).expect("waypoint dimension"));
    }
    let report = check_torque_limits(chain, &torques).expect("waypoint dimension");
    PathTorques { times, torques, report }
}
