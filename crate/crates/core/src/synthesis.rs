//! Genetic search over genomes with static penalties, plus an independent
//! verification pass for its results.

use alloc::collections::BTreeMap;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::collision::{collision_constraint, Scene};
use crate::composition::{build_chain, decode, encode, gene_range, Composition, Genome, KinematicChain, GENOME_LENGTH};
use crate::dynamics::{check_torque_limits, gravity_torque, rms_torque_sum, TorqueLimitReport};
use crate::kinematics::{forward_kinematics, solve_ik_scored, IkSettings, IkSolution};
use crate::library::{LibraryConfig, ValidationReport, ZERO_TWIST_INDEX};
use crate::task::TaskSpec;
use crate::transform::rotation_error;

/// Which twist settings the search may use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchMode {
    /// The full twist lattice.
    #[default]
    Full,
    /// Every twist at 0°; only the port choice orients the axes.
    ConventionalOnly,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PenaltyWeights {
    /// per m of reach residual above tolerance
    pub reach: f64,
    /// per m of collision violation
    pub collide: f64,
    /// per N·m above the nominal limit
    pub torque: f64,
    /// flat value of an unassemblable genome
    pub assembly: f64,
}

impl Default for PenaltyWeights {
    fn default() -> Self {
        PenaltyWeights {
            reach: 1e3,
            collide: 1e3,
            torque: 1e2,
            assembly: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaSettings {
    pub population: usize,
    pub generations: usize,
    pub tournament_size: usize,
    pub crossover_rate: f64,
    /// Per-gene reset probability.
    pub mutation_rate: f64,
    pub elitism: usize,
    pub rng_seed: u64,
    pub penalty_weights: PenaltyWeights,
    pub ik_seeds: usize,
    pub stall_generations: usize,
    pub mode: SearchMode,
}

impl Default for GaSettings {
    fn default() -> Self {
        GaSettings {
            population: 60,
            generations: 120,
            tournament_size: 3,
            crossover_rate: 0.9,
            mutation_rate: 0.08,
            elitism: 2,
            rng_seed: 0,
            penalty_weights: PenaltyWeights::default(),
            ik_seeds: 20,
            stall_generations: 30,
            mode: SearchMode::Full,
        }
    }
}

impl GaSettings {
    pub fn validate(&self) -> Result<(), SynthesisError> {
        let bad = |what| Err(SynthesisError::InvalidSettings(what));
        if self.population < 2 {
            return bad("population must be at least 2");
        }
        if self.generations < 1 || self.tournament_size < 1 || self.ik_seeds < 1 || self.stall_generations < 1 {
            return bad("counts must be at least 1");
        }
        if self.elitism >= self.population {
            return bad("elitism must be smaller than the population");
        }
        if !(0.0..=1.0).contains(&self.crossover_rate) || !(0.0..=1.0).contains(&self.mutation_rate) {
            return bad("rates must lie in [0, 1]");
        }
        let w = self.penalty_weights;
        if [w.reach, w.collide, w.torque, w.assembly].iter().any(|&x| !(x > 0.0)) {
            return bad("penalty weights must be positive");
        }
        Ok(())
    }
}

/// The settings with twist genes pinned to 0°.
pub fn conventional_mode(settings: &GaSettings) -> GaSettings {
    GaSettings {
        mode: SearchMode::ConventionalOnly,
        ..*settings
    }
}

/// Inclusive alphabet of a flat gene position under `mode`.
pub fn alphabet(position: usize, mode: SearchMode) -> (u8, u8) {
    let is_twist = position > 0 && (position - 1) % 4 == 2;
    if is_twist && mode == SearchMode::ConventionalOnly {
        (ZERO_TWIST_INDEX, ZERO_TWIST_INDEX)
    } else {
        gene_range(position)
    }
}

/// Projects a genome onto the alphabet of `mode`.
pub fn restrict(genome: &Genome, mode: SearchMode) -> Genome {
    let mut g = *genome;
    if mode == SearchMode::ConventionalOnly {
        for s in g.segments.iter_mut() {
            s.twist = ZERO_TWIST_INDEX;
        }
    }
    g
}

pub fn random_genome(rng: &mut impl Rng, mode: SearchMode) -> Genome {
    let mut genes = [0u8; GENOME_LENGTH];
    for (i, g) in genes.iter_mut().enumerate() {
        let (lo, hi) = alphabet(i, mode);
        *g = rng.random_range(lo..=hi);
    }
    Genome::from_genes(&genes)
}

/// Everything a fitness evaluation reads.
#[derive(Debug, Clone, Copy)]
pub struct Problem<'a> {
    pub task: &'a TaskSpec,
    pub scene: &'a Scene,
    pub library: &'a LibraryConfig,
    pub settings: &'a GaSettings,
}

/// Unweighted constraint residuals of one candidate.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ConstraintReport {
    /// Per TSL: reach residual above tolerance (m + rad).
    pub reach_excess: Vec<f64>,
    /// Per TSL: `max(0, δ - clearance)` at the IK solution (m).
    pub collision: Vec<f64>,
    pub torque: TorqueLimitReport,
}

impl ConstraintReport {
    pub fn total_reach(&self) -> f64 {
        self.reach_excess.iter().sum()
    }

    pub fn total_collision(&self) -> f64 {
        self.collision.iter().sum()
    }

    pub fn satisfied(&self) -> bool {
        self.total_reach() == 0.0 && self.total_collision() == 0.0 && self.torque.ok()
    }
}

/// Penalized fitness of one genome with its diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub fitness: f64,
    /// `Some` when the genome does not decode to an assemblable composition.
    pub assembly: Option<ValidationReport>,
    pub composition: Option<Composition>,
    /// rms-torque objective; 0 for unassemblable genomes.
    pub objective: f64,
    pub constraints: ConstraintReport,
    pub solutions: Vec<IkSolution>,
    /// `torques[j][i]`: gravity torque of joint `i` at TSL `j`.
    pub torques: Vec<Vec<f64>>,
    pub ik_calls: usize,
}

impl Evaluation {
    pub fn feasible(&self) -> bool {
        self.assembly.is_none() && self.constraints.satisfied()
    }
}

/// IK seed stream for one TSL, independent of the genome.
pub fn tsl_seed(rng_seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = rng_seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn torque_excess(chain: &KinematicChain, torques: &[f64]) -> f64 {
    torques
        .iter()
        .zip(chain.joints.iter())
        .map(|(t, j)| (t.abs() - j.effort_limit).max(0.0))
        .sum()
}

/// One IK solution per TSL. Among in-tolerance attempts the one with the
/// smallest weighted collision and torque penalty is kept; otherwise the
/// attempt with the smallest residual.
fn solve_tsls(chain: &KinematicChain, task: &TaskSpec, scene: &Scene, settings: &GaSettings) -> Vec<IkSolution> {
    let weights = settings.penalty_weights;
    let ik = IkSettings {
        seeds: settings.ik_seeds,
        ..task.ik
    };
    task.tsls
        .iter()
        .enumerate()
        .map(|(j, target)| {
            let score = |q: &[f64]| {
                let c = collision_constraint(chain, q, scene).expect("dimension");
                let t = gravity_torque(chain, q, task.gravity, task.payload).expect("dimension");
                weights.collide * c + weights.torque * torque_excess(chain, &t)
            };
            solve_ik_scored(chain, target, &ik, tsl_seed(settings.rng_seed, j), score).unwrap_or_else(|f| f.best)
        })
        .collect()
}

/// Penalized fitness of `genome`.
///
/// Unassemblable genomes score exactly `w_assembly` without any IK.
pub fn evaluate(genome: &Genome, problem: &Problem<'_>) -> Evaluation {
    let Problem {
        task,
        scene,
        library,
        settings,
    } = *problem;
    let weights = settings.penalty_weights;
    let unassemblable = |report| Evaluation {
        fitness: weights.assembly,
        assembly: Some(report),
        composition: None,
        objective: 0.0,
        constraints: ConstraintReport::default(),
        solutions: Vec::new(),
        torques: Vec::new(),
        ik_calls: 0,
    };
    let mut composition = match decode(&restrict(genome, settings.mode), true, library) {
        Ok(c) => c,
        Err(e) => return unassemblable(e.report),
    };
    composition.base_pose = task.base_pose;
    let chain = match build_chain(&composition, library) {
        Ok(c) => c,
        Err(_) => return unassemblable(ValidationReport::default()),
    };
    let ik = IkSettings {
        seeds: settings.ik_seeds,
        ..task.ik
    };
    let solutions = solve_tsls(&chain, task, scene, settings);
    let mut torques = Vec::with_capacity(solutions.len());
    let mut report = ConstraintReport::default();
    for solution in &solutions {
        report.reach_excess.push(solution.excess(&ik));
        report
            .collision
            .push(collision_constraint(&chain, &solution.q, scene).expect("dimension"));
        torques.push(gravity_torque(&chain, &solution.q, task.gravity, task.payload).expect("dimension"));
    }
    report.torque = check_torque_limits(&chain, &torques).expect("dimension");
    let objective = rms_torque_sum(&torques).unwrap_or(0.0);
    let fitness = objective
        + weights.reach * report.total_reach()
        + weights.collide * report.total_collision()
        + weights.torque * report.torque.total_excess();
    Evaluation {
        fitness,
        assembly: None,
        composition: Some(composition),
        objective,
        constraints: report,
        solutions,
        torques,
        ik_calls: task.tsls.len(),
    }
}

/// Evaluates a batch of genomes, returning results in input order.
pub trait BatchEvaluator {
    fn evaluate_all(&self, problem: &Problem<'_>, genomes: &[Genome]) -> Vec<Evaluation>;
}

/// Evaluates one genome after another on the calling thread.
#[derive(Debug, Clone, Copy, Default)]
pub struct SerialEvaluator;

impl BatchEvaluator for SerialEvaluator {
    fn evaluate_all(&self, problem: &Problem<'_>, genomes: &[Genome]) -> Vec<Evaluation> {
        genomes.iter().map(|g| evaluate(g, problem)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub generation: usize,
    /// Best penalized fitness seen so far.
    pub best: f64,
    /// Mean penalized fitness of this generation.
    pub mean: f64,
    /// Feasible individuals in this generation.
    pub feasible: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub genome: Genome,
    pub composition: Composition,
    pub chain: KinematicChain,
    /// One joint vector per TSL.
    pub ik_solutions: Vec<Vec<f64>>,
    pub objective_value: f64,
    pub fitness: f64,
    pub constraint_report: ConstraintReport,
    pub torques: Vec<Vec<f64>>,
    pub history: Vec<GenerationStats>,
    pub feasible: bool,
    /// Distinct phenotypes evaluated.
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SynthesisError {
    #[error("task has no task-space locations")]
    NoTaskLocations,
    #[error("invalid settings: {0}")]
    InvalidSettings(&'static str),
    #[error("no assemblable genome was found")]
    NoAssembly,
}

/// Cache key: the decoded composition when there is one, so genomes that
/// differ only in hidden or inert genes share an entry.
fn phenotype_key(genome: &Genome, problem: &Problem<'_>) -> [u8; GENOME_LENGTH] {
    let g = restrict(genome, problem.settings.mode);
    match decode(&g, true, problem.library) {
        Ok(c) => encode(&c).to_genes(),
        Err(_) => g.to_genes(),
    }
}

fn tournament(rng: &mut ChaCha8Rng, fitness: &[f64], size: usize) -> usize {
    let mut best = rng.random_range(0..fitness.len());
    for _ in 1..size {
        let c = rng.random_range(0..fitness.len());
        if fitness[c] < fitness[best] || (fitness[c] == fitness[best] && c < best) {
            best = c;
        }
    }
    best
}

/// [`synthesize_with`] on the calling thread.
pub fn synthesize(
    task: &TaskSpec,
    scene: &Scene,
    library: &LibraryConfig,
    settings: &GaSettings,
) -> Result<SynthesisResult, SynthesisError> {
    synthesize_with(task, scene, library, settings, &SerialEvaluator)
}

/// Generational GA: tournament selection, uniform crossover, per-gene reset
/// mutation and elitism. Stops after `generations` or `stall_generations`
/// without improvement and returns the best individual ever seen.
///
/// The result depends only on the inputs, never on the evaluator.
pub fn synthesize_with(
    task: &TaskSpec,
    scene: &Scene,
    library: &LibraryConfig,
    settings: &GaSettings,
    evaluator: &impl BatchEvaluator,
) -> Result<SynthesisResult, SynthesisError> {
    synthesize_observed(task, scene, library, settings, evaluator, |_| {})
}

/// [`synthesize_with`], calling `on_generation` after each generation is scored.
pub fn synthesize_observed(
    task: &TaskSpec,
    scene: &Scene,
    library: &LibraryConfig,
    settings: &GaSettings,
    evaluator: &impl BatchEvaluator,
    mut on_generation: impl FnMut(&GenerationStats),
) -> Result<SynthesisResult, SynthesisError> {
    if task.tsls.is_empty() {
        return Err(SynthesisError::NoTaskLocations);
    }
    settings.validate()?;
    let problem = Problem {
        task,
        scene,
        library,
        settings,
    };
    let mode = settings.mode;
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    let mut cache: BTreeMap<[u8; GENOME_LENGTH], Evaluation> = BTreeMap::new();

    let score = |population: &[Genome], cache: &mut BTreeMap<_, Evaluation>| -> Vec<[u8; GENOME_LENGTH]> {
        let keys: Vec<_> = population.iter().map(|g| phenotype_key(g, &problem)).collect();
        let mut pending = Vec::new();
        let mut pending_keys = Vec::new();
        for (g, k) in population.iter().zip(&keys) {
            if !cache.contains_key(k) && !pending_keys.contains(k) {
                pending.push(*g);
                pending_keys.push(*k);
            }
        }
        for (k, e) in pending_keys.into_iter().zip(evaluator.evaluate_all(&problem, &pending)) {
            cache.insert(k, e);
        }
        keys
    };

    let mut population: Vec<Genome> = (0..settings.population).map(|_| random_genome(&mut rng, mode)).collect();
    let mut keys = score(&population, &mut cache);
    let mut history = Vec::new();
    let mut best: Option<(f64, Genome, [u8; GENOME_LENGTH])> = None;
    let mut stall = 0;

    for generation in 0..=settings.generations {
        if generation > 0 {
            let fitness: Vec<f64> = keys.iter().map(|k| cache[k].fitness).collect();
            let mut order: Vec<usize> = (0..population.len()).collect();
            order.sort_by(|&a, &b| fitness[a].total_cmp(&fitness[b]).then(a.cmp(&b)));
            let mut next: Vec<Genome> = order[..settings.elitism].iter().map(|&i| population[i]).collect();
            while next.len() < settings.population {
                let a = population[tournament(&mut rng, &fitness, settings.tournament_size)].to_genes();
                let b = population[tournament(&mut rng, &fitness, settings.tournament_size)].to_genes();
                let (mut c, mut d) = (a, b);
                if rng.random_bool(settings.crossover_rate) {
                    for i in 0..GENOME_LENGTH {
                        if rng.random_bool(0.5) {
                            c[i] = b[i];
                            d[i] = a[i];
                        }
                    }
                }
                for child in [&mut c, &mut d] {
                    for (i, gene) in child.iter_mut().enumerate() {
                        if rng.random_bool(settings.mutation_rate) {
                            let (lo, hi) = alphabet(i, mode);
                            *gene = rng.random_range(lo..=hi);
                        }
                    }
                }
                next.push(Genome::from_genes(&c));
                if next.len() < settings.population {
                    next.push(Genome::from_genes(&d));
                }
            }
            population = next;
            keys = score(&population, &mut cache);
        }

        let mut improved = false;
        for (g, k) in population.iter().zip(&keys) {
            let f = cache[k].fitness;
            if best.as_ref().is_none_or(|(b, _, _)| f < *b) {
                best = Some((f, *g, *k));
                improved = true;
            }
        }
        let total: f64 = keys.iter().map(|k| cache[k].fitness).sum();
        history.push(GenerationStats {
            generation,
            best: best.as_ref().map_or(f64::INFINITY, |b| b.0),
            mean: total / keys.len() as f64,
            feasible: keys.iter().filter(|k| cache[*k].feasible()).count(),
        });
        on_generation(history.last().expect("just pushed"));
        if generation > 0 {
            stall = if improved { 0 } else { stall + 1 };
            if stall >= settings.stall_generations {
                break;
            }
        }
    }

    let (fitness, genome, key) = best.expect("population is never empty");
    let evaluation = cache.get(&key).expect("cached").clone();
    let composition = evaluation.composition.clone().ok_or(SynthesisError::NoAssembly)?;
    let chain = build_chain(&composition, library).map_err(|_| SynthesisError::NoAssembly)?;
    Ok(SynthesisResult {
        genome,
        feasible: evaluation.feasible(),
        composition,
        chain,
        ik_solutions: evaluation.solutions.iter().map(|s| s.q.clone()).collect(),
        objective_value: evaluation.objective,
        fitness,
        constraint_report: evaluation.constraints,
        torques: evaluation.torques,
        history,
        evaluations: cache.len(),
    })
}

/// Result of checking a composition and its joint vectors against the
/// reach, collision and torque constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verification {
    pub assembly: ValidationReport,
    /// Per TSL: position residual recomputed from forward kinematics (m).
    pub position_residuals: Vec<f64>,
    /// Per TSL: orientation residual (rad), `None` for position-only TSLs.
    pub orientation_residuals: Vec<Option<f64>>,
    pub within_limits: Vec<bool>,
    /// Per TSL: collision violation (m).
    pub collision: Vec<f64>,
    pub torques: Vec<Vec<f64>>,
    pub torque: TorqueLimitReport,
    pub objective: f64,
    pub feasible: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum VerifyError {
    #[error("expected {expected} joint vectors, got {got}")]
    SolutionCount { expected: usize, got: usize },
    #[error("joint vector for TSL {0} has the wrong length")]
    SolutionLength(usize),
    #[error("composition cannot be built: {0}")]
    Chain(&'static str),
    #[error("task has no task-space locations")]
    NoTaskLocations,
}

/// Rechecks stored joint vectors from scratch: rebuilds the chain, recomputes
/// end-effector residuals, clearances and gravity torques. Shares no code with
/// the fitness pipeline beyond the geometric primitives.
pub fn verify(
    composition: &Composition,
    solutions: &[Vec<f64>],
    task: &TaskSpec,
    scene: &Scene,
    library: &LibraryConfig,
) -> Result<Verification, VerifyError> {
    if task.tsls.is_empty() {
        return Err(VerifyError::NoTaskLocations);
    }
    if solutions.len() != task.tsls.len() {
        return Err(VerifyError::SolutionCount {
            expected: task.tsls.len(),
            got: solutions.len(),
        });
    }
    let assembly = library
        .validate_assembly(&composition.units)
        .map_err(|_| VerifyError::Chain("unsupported number of modules"))?;
    let chain = build_chain(composition, library).map_err(|_| VerifyError::Chain("link mismatch"))?;

    let mut out = Verification {
        assembly,
        position_residuals: vec![],
        orientation_residuals: vec![],
        within_limits: vec![],
        collision: vec![],
        torques: vec![],
        torque: TorqueLimitReport::default(),
        objective: 0.0,
        feasible: false,
    };
    for (j, (q, target)) in solutions.iter().zip(&task.tsls).enumerate() {
        let poses = forward_kinematics(&chain, q).map_err(|_| VerifyError::SolutionLength(j))?;
        let ee = poses.end_effector;
        out.position_residuals
            .push((target.position - ee.translation.vector).norm());
        out.orientation_residuals
            .push(target.orientation.map(|r| rotation_error(&r, &ee.rotation).norm()));
        out.within_limits.push(chain.within_limits(q));
        out.collision
            .push(collision_constraint(&chain, q, scene).map_err(|_| VerifyError::SolutionLength(j))?);
        out.torques
            .push(gravity_torque(&chain, q, task.gravity, task.payload).map_err(|_| VerifyError::SolutionLength(j))?);
    }
    out.torque = check_torque_limits(&chain, &out.torques).map_err(|_| VerifyError::SolutionLength(0))?;
    out.objective = rms_torque_sum(&out.torques).map_err(|_| VerifyError::NoTaskLocations)?;
    let reach_ok = out
        .position_residuals
        .iter()
        .zip(&out.orientation_residuals)
        .all(|(p, o)| *p <= task.ik.pos_tol && o.is_none_or(|o| o <= task.ik.ori_tol));
    out.feasible = out.assembly.ok()
        && reach_ok
        && out.within_limits.iter().all(|&b| b)
        && out.collision.iter().all(|&c| c == 0.0)
        && out.torque.ok();
    Ok(out)
}

/// Solves IK for a fixed composition the way the search does, then verifies
/// the solutions. Returns the joint vectors along with the verification.
pub fn check_composition(
    composition: &Composition,
    task: &TaskSpec,
    scene: &Scene,
    library: &LibraryConfig,
    settings: &GaSettings,
) -> Result<(Vec<Vec<f64>>, Verification), VerifyError> {
    let mut composition = composition.clone();
    composition.base_pose = task.base_pose;
    let chain = build_chain(&composition, library).map_err(|_| VerifyError::Chain("invalid composition"))?;
    let q: Vec<Vec<f64>> = solve_tsls(&chain, task, scene, settings)
        .into_iter()
        .map(|s| s.q)
        .collect();
    let verification = verify(&composition, &q, task, scene, library)?;
    Ok((q, verification))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::collision::{Obstacle, Primitive};
    use crate::composition::SegmentGenes;
    use crate::kinematics::TargetPose;
    use crate::library::{LinkType, ModularUnit};
    use alloc::string::ToString;
    use nalgebra::Vector3;

    fn lib() -> LibraryConfig {
        LibraryConfig::default()
    }

    fn small() -> GaSettings {
        GaSettings {
            population: 16,
            generations: 8,
            ik_seeds: 6,
            stall_generations: 8,
            rng_seed: 5,
            ..Default::default()
        }
    }

    fn genome(units: &[ModularUnit]) -> Genome {
        encode(&Composition::new(units.to_vec()))
    }

    #[test]
    fn r4_genome_scores_flat_assembly_penalty_without_ik() {
        let g = Genome {
            dof: 4,
            segments: [SegmentGenes::default(); 6],
        };
        let task = TaskSpec::new(vec![TargetPose::position(Vector3::new(0.2, 0.1, 0.3))]);
        let scene = Scene::empty(0.01);
        let library = lib();
        let settings = small();
        let problem = Problem {
            task: &task,
            scene: &scene,
            library: &library,
            settings: &settings,
        };
        // Repair turns the last unit Light, leaving three Heavy: assemblable.
        assert!(evaluate(&g, &problem).assembly.is_none());
        let mut five = g;
        five.dof = 5;
        let e = evaluate(&five, &problem);
        assert_eq!(e.fitness, 1e6);
        assert_eq!(e.ik_calls, 0);
        assert!(!e.feasible());
    }

    #[test]
    fn feasible_candidate_scores_its_objective() {
        let units = [ModularUnit::parse('H', 1, 0, None), ModularUnit::parse('H', 2, 0, None), ModularUnit::parse('L', 2, 0, None)];
        let chain = build_chain(&Composition::new(units.to_vec()), &lib()).unwrap();
        let q = [0.3, 0.5, -0.4];
        let p = forward_kinematics(&chain, &q).unwrap().end_effector.translation.vector;
        let task = TaskSpec::new(vec![TargetPose::position(p)]);
        let scene = Scene::empty(0.01);
        let library = lib();
        let settings = small();
        let problem = Problem {
            task: &task,
            scene: &scene,
            library: &library,
            settings: &settings,
        };
        let e = evaluate(&genome(&units), &problem);
        assert!(e.feasible(), "{:?}", e.constraints);
        assert_eq!(e.fitness, e.objective);
        assert_eq!(evaluate(&genome(&units), &problem), e);
    }

    #[test]
    fn collision_penalty_arithmetic() {
        let units = [ModularUnit::parse('H', 1, 0, None), ModularUnit::parse('H', 2, 0, None)];
        let chain = build_chain(&Composition::new(units.to_vec()), &lib()).unwrap();
        let p = forward_kinematics(&chain, &[0.0, 0.0]).unwrap().end_effector.translation.vector;
        // A sphere swallowing the whole arm: every configuration collides.
        let scene = Scene::new(
            vec![Obstacle {
                name: "blob".to_string(),
                primitive: Primitive::sphere(Vector3::zeros(), 2.0),
            }],
            0.01,
        )
        .unwrap();
        let task = TaskSpec::new(vec![TargetPose::position(p), TargetPose::position(p)]);
        let library = lib();
        let settings = small();
        let problem = Problem {
            task: &task,
            scene: &scene,
            library: &library,
            settings: &settings,
        };
        let e = evaluate(&genome(&units), &problem);
        let expected = e.objective + 1e3 * e.constraints.collision.iter().sum::<f64>();
        assert_eq!(e.constraints.total_reach(), 0.0);
        assert!(e.constraints.collision.iter().all(|&c| c > 1.0));
        assert_eq!(e.fitness, expected);
    }

    #[test]
    fn conventional_restriction_pins_twists() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..200 {
            let g = random_genome(&mut rng, SearchMode::ConventionalOnly);
            assert!(g.segments.iter().all(|s| s.twist == ZERO_TWIST_INDEX));
            let f = random_genome(&mut rng, SearchMode::Full);
            if let Ok(c) = decode(&restrict(&f, SearchMode::ConventionalOnly), true, &lib()) {
                assert!(c.units.iter().all(|u| u.twist.degrees() == 0));
            }
        }
        for i in 0..GENOME_LENGTH {
            let (a, b) = alphabet(i, SearchMode::ConventionalOnly);
            let (c, d) = alphabet(i, SearchMode::Full);
            assert!(c <= a && b <= d);
        }
    }

    #[test]
    fn conventional_mode_keeps_port_choice() {
        let units = [
            ModularUnit::parse('H', 1, 0, None),
            ModularUnit::parse('H', 2, 0, None),
            ModularUnit::parse('H', 4, 0, Some(LinkType::S1)),
            ModularUnit::parse('L', 4, 0, Some(LinkType::S2)),
            ModularUnit::parse('L', 1, 0, None),
        ];
        let g = genome(&units);
        assert_eq!(restrict(&g, SearchMode::ConventionalOnly).active(), g.active());
        assert_eq!(decode(&g, false, &lib()).unwrap().units, units.to_vec());
        assert_eq!(conventional_mode(&GaSettings::default()).mode, SearchMode::ConventionalOnly);
    }

    #[test]
    fn small_run_is_feasible_and_monotone() {
        let task = TaskSpec::new(vec![TargetPose::position(Vector3::new(0.2, 0.15, 0.35))]);
        let scene = Scene::empty(0.01);
        let r = synthesize(&task, &scene, &lib(), &small()).unwrap();
        assert!(r.feasible);
        assert!(r.history.windows(2).all(|w| w[1].best <= w[0].best));
        let v = verify(&r.composition, &r.ik_solutions, &task, &scene, &lib()).unwrap();
        assert!(v.feasible);
        assert_eq!(synthesize(&task, &scene, &lib(), &small()).unwrap(), r);
    }

    #[test]
    fn settings_validation() {
        assert!(GaSettings::default().validate().is_ok());
        let bad = GaSettings {
            elitism: 60,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
        let task = TaskSpec::new(vec![]);
        assert_eq!(
            synthesize(&task, &Scene::empty(0.01), &lib(), &small()).unwrap_err(),
            SynthesisError::NoTaskLocations
        );
    }

    #[test]
    fn tsl_seeds_differ() {
        assert_ne!(tsl_seed(0, 0), tsl_seed(0, 1));
        assert_ne!(tsl_seed(0, 0), tsl_seed(1, 0));
    }
}
