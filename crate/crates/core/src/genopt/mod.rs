//! Genetic search over the six mobility genes, plus the exhaustive lattice
//! baseline it is benchmarked against.
//!
//! Genes are ordered `(cio1, cio2, cio3, hom1, hom2, hom3)`. One "iteration"
//! is one fitness evaluation of a distinct gene vector.

mod baseline;
mod ga;
mod operators;

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datagen::ParameterGrid;
use crate::error::{CopError, Result};
use crate::scenario::{MobilityConfig, Simulator, CIO_RANGE, HOM_RANGE};
use crate::surrogate::TrainedModel;

pub use baseline::{
    brute_force, compare, write_best_csv, write_convergence_csv, BruteForceResult, Comparison,
};
pub use ga::{run_ga, write_trace_csv, GaRun, StopReason, TracePoint};
pub use operators::{
    init_population, mutate, polynomial_delta, sbx_children, sbx_crossover, sbx_spread,
    select_elites,
};

pub const N_GENES: usize = 6;

pub type Genes = [f64; N_GENES];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeneBounds {
    pub lower: Genes,
    pub upper: Genes,
}

impl Default for GeneBounds {
    fn default() -> Self {
        let (c, h) = (CIO_RANGE, HOM_RANGE);
        Self {
            lower: [c.0, c.0, c.0, h.0, h.0, h.0],
            upper: [c.1, c.1, c.1, h.1, h.1, h.1],
        }
    }
}

impl GeneBounds {
    pub fn validate(&self) -> Result<()> {
        for (lo, hi) in self.lower.iter().zip(&self.upper) {
            if !(lo.is_finite() && hi.is_finite() && lo <= hi) {
                return Err(CopError::Config(format!("invalid gene bounds [{lo}, {hi}]")));
            }
        }
        Ok(())
    }

    pub fn contains(&self, genes: &Genes) -> bool {
        genes
            .iter()
            .zip(self.lower.iter().zip(&self.upper))
            .all(|(g, (lo, hi))| g >= lo && g <= hi)
    }

    pub fn clip(&self, genes: &mut Genes) {
        for (g, (lo, hi)) in genes.iter_mut().zip(self.lower.iter().zip(&self.upper)) {
            *g = g.clamp(*lo, *hi);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Chromosome {
    pub genes: Genes,
    pub fitness: Option<f64>,
}

impl Chromosome {
    pub fn new(genes: Genes) -> Self {
        Self {
            genes,
            fitness: None,
        }
    }

    /// Fitness, or negative infinity when not yet evaluated.
    pub fn score(&self) -> f64 {
        self.fitness.unwrap_or(f64::NEG_INFINITY)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GaConfig {
    pub population_size: usize,
    pub max_generations: usize,
    /// Parents selected per generation; each consecutive pair yields two
    /// children.
    pub elite_count: usize,
    pub sbx_eta: f64,
    pub mutation_eta: f64,
    /// Per-gene mutation probability.
    pub mutation_prob: f64,
    pub seed: u64,
    /// Stop after this many generations without improvement.
    pub stagnation_patience: usize,
    /// Snap every chromosome to this lattice, if set.
    pub lattice: Option<ParameterGrid>,
}

impl Default for GaConfig {
    fn default() -> Self {
        Self {
            population_size: 100,
            max_generations: 50,
            elite_count: 10,
            sbx_eta: 15.0,
            mutation_eta: 20.0,
            mutation_prob: 1.0 / 6.0,
            seed: 42,
            stagnation_patience: 20,
            lattice: None,
        }
    }
}

impl GaConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population_size == 0 {
            return Err(CopError::Config("population size must be positive".into()));
        }
        if self.elite_count == 0 || self.elite_count % 2 != 0 {
            return Err(CopError::Config("elite count must be positive and even".into()));
        }
        if self.elite_count > self.population_size {
            return Err(CopError::Config(
                "elite count cannot exceed the population size".into(),
            ));
        }
        if !(self.sbx_eta > 0.0 && self.mutation_eta > 0.0) {
            return Err(CopError::Config("distribution indices must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.mutation_prob) {
            return Err(CopError::Config("mutation probability must be in [0, 1]".into()));
        }
        if self.stagnation_patience == 0 {
            return Err(CopError::Config("stagnation patience must be positive".into()));
        }
        if let Some(g) = &self.lattice {
            g.validate()?;
        }
        Ok(())
    }
}

/// A pure, total objective over the gene box. Larger is better.
pub trait Fitness: Sync {
    fn fitness(&self, genes: &Genes) -> Result<f64>;
}

impl Fitness for TrainedModel {
    fn fitness(&self, genes: &Genes) -> Result<f64> {
        Ok(self.predict_genes(*genes))
    }
}

/// Adapts a plain closure.
pub struct FnFitness<F>(pub F);

impl<F: Fn(&Genes) -> f64 + Sync> Fitness for FnFitness<F> {
    fn fitness(&self, genes: &Genes) -> Result<f64> {
        Ok((self.0)(genes))
    }
}

/// Runs the network simulator directly.
pub struct SimulatorFitness<'a>(pub Simulator<'a>);

impl Fitness for SimulatorFitness<'_> {
    fn fitness(&self, genes: &Genes) -> Result<f64> {
        let config = MobilityConfig::from_genes(*genes)?;
        Ok(self.0.mean_sinr(&config)?.mean_sinr_db)
    }
}

fn gene_key(genes: &Genes) -> [u64; N_GENES] {
    // +0.0 folds -0.0 into 0.0
    genes.map(|g| (g + 0.0).to_bits())
}

/// Memoising fitness evaluator that counts distinct evaluations.
pub struct FitnessCache<'f, F: ?Sized> {
    fitness: &'f F,
    memo: HashMap<[u64; N_GENES], f64>,
    evaluations: usize,
}

impl<'f, F: Fitness + ?Sized> FitnessCache<'f, F> {
    pub fn new(fitness: &'f F) -> Self {
        Self {
            fitness,
            memo: HashMap::new(),
            evaluations: 0,
        }
    }

    /// Number of distinct gene vectors passed to the fitness function.
    pub fn evaluations(&self) -> usize {
        self.evaluations
    }

    /// Sets the fitness of every chromosome. Unseen gene vectors are
    /// evaluated (in parallel); repeats hit the memo.
    pub fn evaluate(&mut self, population: &mut [Chromosome]) -> Result<()> {
        let mut pending: Vec<Genes> = Vec::new();
        let mut queued = std::collections::HashSet::new();
        for c in population.iter() {
            let key = gene_key(&c.genes);
            if !self.memo.contains_key(&key) && queued.insert(key) {
                pending.push(c.genes);
            }
        }
        let values = pending
            .par_iter()
            .map(|g| {
                let v = self.fitness.fitness(g).map_err(|e| CopError::Fitness {
                    genes: *g,
                    reason: e.to_string(),
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(CopError::Fitness {
                        genes: *g,
                        reason: format!("non-finite fitness {v}"),
                    })
                }
            })
            .collect::<Result<Vec<f64>>>()?;
        self.evaluations += pending.len();
        for (g, v) in pending.iter().zip(values) {
            self.memo.insert(gene_key(g), v);
        }
        for c in population.iter_mut() {
            c.fitness = Some(self.memo[&gene_key(&c.genes)]);
        }
        Ok(())
    }
}
