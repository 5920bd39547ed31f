use rand::Rng;

use super::{Chromosome, GaConfig, GeneBounds, Genes, N_GENES};

/// `population_size` chromosomes drawn uniformly over `bounds`.
pub fn init_population(
    config: &GaConfig,
    bounds: &GeneBounds,
    rng: &mut impl Rng,
) -> Vec<Chromosome> {
    (0..config.population_size)
        .map(|_| {
            let genes = std::array::from_fn(|i| {
                let (lo, hi) = (bounds.lower[i], bounds.upper[i]);
                if lo < hi {
                    rng.gen_range(lo..=hi)
                } else {
                    lo
                }
            });
            Chromosome::new(genes)
        })
        .collect()
}

/// The `count` fittest chromosomes, best first; equal fitness keeps the
/// earlier index first.
pub fn select_elites(population: &[Chromosome], count: usize) -> Vec<Chromosome> {
    let mut idx: Vec<usize> = (0..population.len()).collect();
    idx.sort_by(|&a, &b| population[b].score().total_cmp(&population[a].score()));
    idx.into_iter().take(count).map(|i| population[i]).collect()
}

/// SBX spread factor for a uniform draw `u` in [0, 1).
pub fn sbx_spread(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u <= 0.5 {
        (2.0 * u).powf(e)
    } else {
        (1.0 / (2.0 * (1.0 - u))).powf(e)
    }
}

/// Unclipped SBX children for explicit per-gene draws.
pub fn sbx_children(a: &Genes, b: &Genes, draws: &Genes, eta: f64) -> (Genes, Genes) {
    let mut c1 = [0.0; N_GENES];
    let mut c2 = [0.0; N_GENES];
    for i in 0..N_GENES {
        let beta = sbx_spread(draws[i], eta);
        let mean = 0.5 * (a[i] + b[i]);
        let half = 0.5 * beta * (a[i] - b[i]);
        c1[i] = mean + half;
        c2[i] = mean - half;
    }
    (c1, c2)
}

/// Real-coded simulated binary crossover, one spread draw per gene,
/// children clipped to `bounds`.
pub fn sbx_crossover(
    a: &Chromosome,
    b: &Chromosome,
    eta: f64,
    bounds: &GeneBounds,
    rng: &mut impl Rng,
) -> (Chromosome, Chromosome) {
    let draws: Genes = std::array::from_fn(|_| rng.gen::<f64>());
    let (mut c1, mut c2) = sbx_children(&a.genes, &b.genes, &draws, eta);
    bounds.clip(&mut c1);
    bounds.clip(&mut c2);
    (Chromosome::new(c1), Chromosome::new(c2))
}

/// Polynomial-mutation perturbation (as a fraction of the gene range) for a
/// uniform draw `u` in [0, 1).
pub fn polynomial_delta(u: f64, eta: f64) -> f64 {
    let e = 1.0 / (eta + 1.0);
    if u < 0.5 {
        (2.0 * u).powf(e) - 1.0
    } else {
        1.0 - (2.0 * (1.0 - u)).powf(e)
    }
}

/// Polynomial mutation: each gene mutates with probability `prob`, moving
/// by `delta * (upper - lower)`, then is clipped.
pub fn mutate(
    chromosome: &Chromosome,
    prob: f64,
    eta: f64,
    bounds: &GeneBounds,
    rng: &mut impl Rng,
) -> Chromosome {
    let mut genes = chromosome.genes;
    for (i, g) in genes.iter_mut().enumerate() {
        if rng.gen::<f64>() >= prob {
            continue;
        }
        let range = bounds.upper[i] - bounds.lower[i];
        let delta = polynomial_delta(rng.gen::<f64>(), eta);
        *g = (*g + delta * range).clamp(bounds.lower[i], bounds.upper[i]);
    }
    if genes == chromosome.genes {
        *chromosome
    } else {
        Chromosome::new(genes)
    }
}
