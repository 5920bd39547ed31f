use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operators::{init_population, mutate, sbx_crossover, select_elites};
use super::{Chromosome, Fitness, FitnessCache, GaConfig, GeneBounds, Genes};
use crate::error::{CopError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TracePoint {
    pub generation: usize,
    /// Distinct fitness evaluations so far.
    pub evaluations: usize,
    /// Best fitness seen so far.
    pub best_fitness: f64,
    pub best_genes: Genes,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    MaxGenerations,
    Stagnation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaRun {
    pub config: GaConfig,
    /// One point per generation, generation 0 being the initial population.
    pub trace: Vec<TracePoint>,
    pub best: Chromosome,
    pub total_evaluations: usize,
    pub stop_reason: StopReason,
}

fn snap(config: &GaConfig, c: Chromosome) -> Chromosome {
    match &config.lattice {
        Some(grid) => {
            let genes = grid.project(c.genes).genes();
            if genes == c.genes {
                c
            } else {
                Chromosome::new(genes)
            }
        }
        None => c,
    }
}

fn fittest(population: &[Chromosome]) -> Chromosome {
    select_elites(population, 1)[0]
}

/// Elitist steady-state genetic algorithm.
///
/// Each generation the `elite_count` fittest members are paired in order
/// (1-2, 3-4, ...); every pair yields two SBX children which are then
/// mutated. The children replace the worst members of the population. The
/// loop ends after `max_generations` or once the best fitness has not
/// improved for `stagnation_patience` generations.
///
/// A single seeded RNG stream drives all random choices in a fixed order,
/// so runs are reproducible regardless of evaluation parallelism.
pub fn run_ga<F: Fitness + ?Sized>(
    fitness: &F,
    config: &GaConfig,
    bounds: &GeneBounds,
) -> Result<GaRun> {
    config.validate()?;
    bounds.validate()?;
    if let Some(grid) = &config.lattice {
        let probe = grid.project(bounds.lower).genes();
        if !bounds.contains(&probe) {
            return Err(CopError::Config("lattice lies outside the gene bounds".into()));
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut cache = FitnessCache::new(fitness);
    let mut population: Vec<Chromosome> = init_population(config, bounds, &mut rng)
        .into_iter()
        .map(|c| snap(config, c))
        .collect();
    cache.evaluate(&mut population)?;

    let mut best = fittest(&population);
    let mut trace = vec![TracePoint {
        generation: 0,
        evaluations: cache.evaluations(),
        best_fitness: best.score(),
        best_genes: best.genes,
    }];
    let mut stagnant = 0;
    let mut stop_reason = StopReason::MaxGenerations;

    for generation in 1..=config.max_generations {
        let parents = select_elites(&population, config.elite_count);
        let mut children = Vec::with_capacity(parents.len());
        for pair in parents.chunks_exact(2) {
            let (c1, c2) = sbx_crossover(&pair[0], &pair[1], config.sbx_eta, bounds, &mut rng);
            for child in [c1, c2] {
                let child = mutate(
                    &child,
                    config.mutation_prob,
                    config.mutation_eta,
                    bounds,
                    &mut rng,
                );
                children.push(snap(config, child));
            }
        }
        cache.evaluate(&mut children)?;

        // keep the best (P - children) members, then append the children
        let keep = population.len() - children.len();
        let mut next = select_elites(&population, keep);
        next.extend(children);
        population = next;

        let candidate = fittest(&population);
        if candidate.score() > best.score() {
            best = candidate;
            stagnant = 0;
        } else {
            stagnant += 1;
        }
        trace.push(TracePoint {
            generation,
            evaluations: cache.evaluations(),
            best_fitness: best.score(),
            best_genes: best.genes,
        });
        if stagnant >= config.stagnation_patience {
            stop_reason = StopReason::Stagnation;
            break;
        }
    }

    Ok(GaRun {
        config: config.clone(),
        trace,
        best,
        total_evaluations: cache.evaluations(),
        stop_reason,
    })
}

/// `generation,evaluations,best_fitness,cio1,...,hom3`, one row per
/// generation.
pub fn write_trace_csv(run: &GaRun, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("generation,evaluations,best_fitness,cio1,cio2,cio3,hom1,hom2,hom3\n");
    for p in &run.trace {
        let _ = write!(out, "{},{},{:.6}", p.generation, p.evaluations, p.best_fitness);
        for g in p.best_genes {
            let _ = write!(out, ",{:.6}", g + 0.0);
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| CopError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::ParameterGrid;
    use crate::genopt::FnFitness;

    const TARGET: Genes = [-10.0, -8.0, 4.0, 10.0, 5.0, 9.0];

    fn quadratic(g: &Genes) -> f64 {
        -g.iter().zip(&TARGET).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
    }

    #[test]
    fn zero_generations_returns_initial_best() {
        let config = GaConfig {
            max_generations: 0,
            ..Default::default()
        };
        let f = FnFitness(quadratic);
        let run = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        assert_eq!(run.total_evaluations, 100);
        assert_eq!(run.trace.len(), 1);

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let init = init_population(&config, &GeneBounds::default(), &mut rng);
        let oracle = init
            .iter()
            .map(|c| quadratic(&c.genes))
            .fold(f64::NEG_INFINITY, f64::max);
        assert_eq!(run.best.fitness, Some(oracle));
    }

    #[test]
    fn constant_fitness_stagnates() {
        let f = FnFitness(|_: &Genes| 2.5);
        let config = GaConfig {
            max_generations: 500,
            ..Default::default()
        };
        let run = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        assert_eq!(run.stop_reason, StopReason::Stagnation);
        assert_eq!(run.best.fitness, Some(2.5));
        assert_eq!(run.trace.len(), 1 + config.stagnation_patience);
    }

    #[test]
    fn converges_on_quadratic() {
        let f = FnFitness(quadratic);
        let run = run_ga(&f, &GaConfig::default(), &GeneBounds::default()).unwrap();
        let best = run.best.fitness.unwrap();
        assert!(best > -0.5, "best {best}");
        assert!(run.trace.len() <= 51);
    }

    #[test]
    fn trace_is_monotone_and_bounded() {
        let f = FnFitness(quadratic);
        let config = GaConfig {
            seed: 9,
            ..Default::default()
        };
        let run = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        for w in run.trace.windows(2) {
            assert!(w[1].best_fitness >= w[0].best_fitness);
            assert!(w[1].evaluations >= w[0].evaluations);
        }
        let g = run.trace.len() - 1;
        assert!(run.total_evaluations <= config.population_size * (g + 1));
        assert!(GeneBounds::default().contains(&run.best.genes));
    }

    #[test]
    fn deterministic() {
        let f = FnFitness(quadratic);
        let config = GaConfig {
            seed: 3,
            ..Default::default()
        };
        let a = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        let b = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn lattice_snapping_keeps_genes_on_grid() {
        let grid = ParameterGrid::default();
        let f = FnFitness(quadratic);
        let config = GaConfig {
            lattice: Some(grid),
            ..Default::default()
        };
        let run = run_ga(&f, &config, &GeneBounds::default()).unwrap();
        for p in &run.trace {
            let c = crate::scenario::MobilityConfig::from_genes(p.best_genes).unwrap();
            assert!(grid.contains(&c));
        }
    }
}
