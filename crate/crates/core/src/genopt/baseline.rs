use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_ga, Fitness, GaConfig, GaRun, GeneBounds, Genes};
use crate::datagen::{enumerate_grid, ParameterGrid};
use crate::error::{CopError, Result};
use crate::scenario::MobilityConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BruteForceResult {
    pub best_config: MobilityConfig,
    pub best_fitness: f64,
    /// Equals the grid cardinality.
    pub evaluations: usize,
    /// `(evaluations, best_so_far)` at every improvement, plus the final
    /// evaluation.
    pub convergence: Vec<(usize, f64)>,
}

/// Exhaustive lattice scan; the first maximum in enumeration order wins.
pub fn brute_force<F: Fitness + ?Sized>(
    fitness: &F,
    grid: &ParameterGrid,
) -> Result<BruteForceResult> {
    let configs: Vec<MobilityConfig> = enumerate_grid(grid)?.collect();
    let values = configs
        .par_iter()
        .map(|c| {
            let genes = c.genes();
            let v = fitness.fitness(&genes).map_err(|e| CopError::Fitness {
                genes,
                reason: e.to_string(),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(CopError::Fitness {
                    genes,
                    reason: format!("non-finite fitness {v}"),
                })
            }
        })
        .collect::<Result<Vec<f64>>>()?;

    let mut best = 0;
    let mut convergence = vec![(1, values[0])];
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
            convergence.push((i + 1, v));
        }
    }
    if convergence.last().map(|p| p.0) != Some(values.len()) {
        convergence.push((values.len(), values[best]));
    }
    Ok(BruteForceResult {
        best_config: configs[best],
        best_fitness: values[best],
        evaluations: values.len(),
        convergence,
    })
}

/// Side-by-side outcome of the genetic search and the exhaustive scan.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub brute: BruteForceResult,
    pub ga: GaRun,
    /// GA best as found (possibly off-lattice).
    pub ga_raw_genes: Genes,
    pub ga_raw_fitness: f64,
    /// GA best snapped to the lattice and re-evaluated.
    pub ga_projected_config: MobilityConfig,
    pub ga_projected_fitness: f64,
    /// `brute best - GA projected best`; never negative.
    pub gap: f64,
    /// `brute evaluations / GA evaluations`.
    pub speedup: f64,
}

pub fn compare<F: Fitness + ?Sized>(
    fitness: &F,
    grid: &ParameterGrid,
    ga_config: &GaConfig,
    bounds: &GeneBounds,
) -> Result<Comparison> {
    let brute = brute_force(fitness, grid)?;
    let ga = run_ga(fitness, ga_config, bounds)?;
    let ga_raw_fitness = ga
        .best
        .fitness
        .ok_or_else(|| CopError::Config("GA finished without a fitness".into()))?;
    let projected = grid.project(ga.best.genes);
    let ga_projected_fitness = fitness.fitness(&projected.genes())?;
    Ok(Comparison {
        gap: brute.best_fitness - ga_projected_fitness,
        speedup: brute.evaluations as f64 / ga.total_evaluations.max(1) as f64,
        ga_raw_genes: ga.best.genes,
        ga_raw_fitness,
        ga_projected_config: projected,
        ga_projected_fitness,
        brute,
        ga,
    })
}

/// Two-column `evaluations,best_fitness` convergence curve.
pub fn write_convergence_csv(points: &[(usize, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("evaluations,best_fitness\n");
    for (e, f) in points {
        let _ = writeln!(out, "{e},{f:.6}");
    }
    fs::write(path, out).map_err(|e| CopError::io(path, e))
}

/// Single-row `cio1,...,hom3,fitness` file.
pub fn write_best_csv(genes: &Genes, fitness: f64, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("cio1,cio2,cio3,hom1,hom2,hom3,fitness\n");
    for g in genes {
        let _ = write!(out, "{:.6},", g + 0.0);
    }
    let _ = writeln!(out, "{fitness:.6}");
    fs::write(path, out).map_err(|e| CopError::io(path, e))
}
