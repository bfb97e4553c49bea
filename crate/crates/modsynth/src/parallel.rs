//! Data-parallel genome evaluation.

use modsynth_core::synthesis::{evaluate, BatchEvaluator, Evaluation, Problem};
use modsynth_core::Genome;
use rayon::prelude::*;

/// Evaluates a batch across a rayon pool. Results come back in input order,
/// so a run is identical to the serial one for any worker count.
#[derive(Debug)]
pub struct ParallelEvaluator {
    pool: Option<rayon::ThreadPool>,
}

impl ParallelEvaluator {
    /// `workers = None` uses the global pool.
    pub fn new(workers: Option<usize>) -> Result<Self, rayon::ThreadPoolBuildError> {
        let pool = workers
            .map(|n| rayon::ThreadPoolBuilder::new().num_threads(n).build())
            .transpose()?;
        Ok(ParallelEvaluator { pool })
    }
}

impl BatchEvaluator for ParallelEvaluator {
    fn evaluate_all(&self, problem: &Problem<'_>, genomes: &[Genome]) -> Vec<Evaluation> {
        let run = || genomes.par_iter().map(|g| evaluate(g, problem)).collect();
        match &self.pool {
            Some(pool) => pool.install(run),
            None => run(),
        }
    }
}
