use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::{enumerate_grid, ParameterGrid, SweepDataset, SweepRecord, SCHEMA_VERSION};
use crate::error::{CopError, Result};
use crate::scenario::{NetworkScenario, Simulator};

/// Largest grid [`run_sweep`] will simulate.
pub const SWEEP_LIMIT: u64 = 1_000_000;

/// Simulates every lattice point of `grid`.
///
/// `jobs` is the worker-thread count (0 lets rayon decide). Records come out
/// in enumeration order whatever the parallelism.
pub fn run_sweep(
    scenario: &NetworkScenario,
    grid: &ParameterGrid,
    jobs: usize,
) -> Result<SweepDataset> {
    let cardinality = grid.cardinality()?;
    if cardinality > SWEEP_LIMIT {
        return Err(CopError::GridTooLarge {
            cardinality,
            limit: SWEEP_LIMIT,
        });
    }
    let configs: Vec<_> = enumerate_grid(grid)?.collect();
    let simulator = Simulator::new(scenario);
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| CopError::Config(format!("thread pool: {e}")))?;
    let records = pool.install(|| {
        configs
            .par_iter()
            .map(|config| match simulator.mean_sinr(config) {
                Ok(m) => Ok(SweepRecord {
                    config: *config,
                    mean_sinr_db: m.mean_sinr_db,
                    outage_count: m.outage_count as u64,
                }),
                Err(CopError::DegenerateKpi(_)) => Ok(SweepRecord {
                    config: *config,
                    mean_sinr_db: f64::NAN,
                    outage_count: simulator.outage_count(config) as u64,
                }),
                Err(e) => Err(e),
            })
            .collect::<Result<Vec<_>>>()
    })?;
    let full_outage = records.iter().filter(|r| r.is_full_outage()).count();
    if full_outage > 0 {
        log::warn!("{full_outage} configs left the whole gathering set in outage");
    }
    Ok(SweepDataset {
        records,
        scenario_seed: Some(scenario.rng_seed),
        grid: Some(*grid),
        schema_version: SCHEMA_VERSION,
    })
}

/// Seeded uniform sample of `floor(fraction * n)` indices out of `n`,
/// returned in ascending order.
pub fn subsample_indices(n: usize, fraction: f64, seed: u64) -> Result<Vec<usize>> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(CopError::Config(format!(
            "fraction {fraction} outside (0, 1]"
        )));
    }
    // the epsilon keeps products such as 0.29 * 100 from flooring to 28
    let k = ((fraction * n as f64) + 1e-9).floor() as usize;
    if k == 0 {
        return Err(CopError::Config(format!(
            "fraction {fraction} of {n} rows leaves nothing"
        )));
    }
    if k >= n {
        return Ok((0..n).collect());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picked = index::sample(&mut rng, n, k).into_vec();
    picked.sort_unstable();
    Ok(picked)
}

/// Uniform sample without replacement that keeps the original record order.
pub fn subsample(dataset: &SweepDataset, fraction: f64, seed: u64) -> Result<SweepDataset> {
    let picked = subsample_indices(dataset.len(), fraction, seed)?;
    Ok(dataset.select(&picked))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::MobilityConfig;

    fn toy(n: usize) -> SweepDataset {
        SweepDataset::new(
            (0..n)
                .map(|i| SweepRecord {
                    config: MobilityConfig::default(),
                    mean_sinr_db: i as f64,
                    outage_count: 0,
                })
                .collect(),
        )
    }

    #[test]
    fn full_fraction_is_identity() {
        let d = toy(50);
        assert_eq!(subsample(&d, 1.0, 3).unwrap(), d);
    }

    #[test]
    fn ten_percent_of_step_two_grid() {
        let picked = subsample_indices(287_496, 0.1, 42).unwrap();
        assert_eq!(picked.len(), 28_749);
        assert!(picked.windows(2).all(|w| w[0] < w[1]));
        assert!(*picked.last().unwrap() < 287_496);
    }

    #[test]
    fn subsample_is_seeded() {
        let d = toy(1000);
        let a = subsample(&d, 0.3, 9).unwrap();
        assert_eq!(a, subsample(&d, 0.3, 9).unwrap());
        assert_ne!(a, subsample(&d, 0.3, 10).unwrap());
        assert_eq!(a.len(), 300);
        // original order preserved
        assert!(a.records.windows(2).all(|w| w[0].mean_sinr_db < w[1].mean_sinr_db));
    }

    #[test]
    fn subsample_rejects_empty_result() {
        assert!(subsample(&toy(5), 0.1, 1).is_err());
        assert!(subsample(&toy(5), 0.0, 1).is_err());
        assert!(subsample(&toy(5), 1.5, 1).is_err());
        assert_eq!(subsample(&toy(5), 0.2, 1).unwrap().len(), 1);
    }

    #[test]
    fn best_skips_outage() {
        let mut d = toy(3);
        d.records[2].mean_sinr_db = f64::NAN;
        assert_eq!(d.best().unwrap().mean_sinr_db, 1.0);
    }
}
