use std::collections::{BTreeSet, HashSet};
use std::path::Path;
use std::sync::Mutex;

use proptest::prelude::*;

use copkit::datagen::{
    enumerate_grid, run_sweep, subsample, ParameterGrid, SweepDataset, SweepRecord,
};
use copkit::genopt::{
    mutate, run_ga, sbx_children, sbx_crossover, Chromosome, FnFitness, GaConfig, GeneBounds,
    Genes,
};
use copkit::scenario::{
    db_to_linear, generate_scenario, linear_to_db, LayoutParams, NetworkScenario,
};
use copkit::surrogate::{fit_knn, fit_linear, rmse, FeatureRow, Regressor};
use copkit::MobilityConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn small_scenario(seed: u64) -> NetworkScenario {
    let params = LayoutParams {
        n_users: 60,
        ..LayoutParams::default()
    };
    generate_scenario(seed, &params).unwrap()
}

fn genes_in_box() -> impl Strategy<Value = Genes> {
    (
        prop::array::uniform3(-10.0..=10.0f64),
        prop::array::uniform3(0.0..=10.0f64),
    )
        .prop_map(|(c, h)| [c[0], c[1], c[2], h[0], h[1], h[2]])
}

fn config() -> impl Strategy<Value = MobilityConfig> {
    genes_in_box().prop_map(|g| MobilityConfig::from_genes(g).unwrap())
}

/// Ids of users served by sector index `idx`.
fn served_by(s: &NetworkScenario, config: &MobilityConfig, idx: usize) -> BTreeSet<u32> {
    let id = s.sectors[idx].sector_id;
    s.users
        .iter()
        .filter(|u| s.associate(config, u).serving_sector_id == Some(id))
        .map(|u| u.ue_id)
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn sbx_preserves_parent_mean(
        a in genes_in_box(),
        b in genes_in_box(),
        u in prop::array::uniform6(0.0..1.0f64),
        eta in 1.0..30.0f64,
    ) {
        let (c1, c2) = sbx_children(&a, &b, &u, eta);
        for i in 0..6 {
            let scale = 1.0 + a[i].abs() + b[i].abs() + c1[i].abs() + c2[i].abs();
            prop_assert!(((c1[i] + c2[i]) - (a[i] + b[i])).abs() <= 1e-12 * scale);
        }
        let (d1, d2) = sbx_children(&a, &a, &u, eta);
        prop_assert_eq!(d1, a);
        prop_assert_eq!(d2, a);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10_000))]

    #[test]
    fn mutation_and_crossover_stay_in_bounds(
        genes in genes_in_box(),
        other in genes_in_box(),
        prob in 0.0..=1.0f64,
        eta in 0.5..50.0f64,
        seed in any::<u64>(),
    ) {
        let bounds = GeneBounds::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = mutate(&Chromosome::new(genes), prob, eta, &bounds, &mut rng);
        prop_assert!(bounds.contains(&m.genes));
        let (c1, c2) = sbx_crossover(
            &Chromosome::new(genes),
            &Chromosome::new(other),
            eta,
            &bounds,
            &mut rng,
        );
        prop_assert!(bounds.contains(&c1.genes) && bounds.contains(&c2.genes));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn raising_cio_never_loses_users(
        seed in 0..500u64,
        base in config(),
        k in 0..3usize,
        delta in 0.1..10.0f64,
    ) {
        let s = small_scenario(seed);
        let idx = s.target_indices()[k];
        let mut raised = base;
        raised.cio_db[k] = (base.cio_db[k] + delta).min(10.0);
        let before = served_by(&s, &base, idx);
        let after = served_by(&s, &raised, idx);
        prop_assert!(before.is_subset(&after), "{before:?} vs {after:?}");
    }

    #[test]
    fn raising_hom_keeps_preselected_users(
        seed in 0..500u64,
        base in config(),
        k in 0..3usize,
        delta in 0.1..10.0f64,
    ) {
        let s = small_scenario(seed);
        let idx = s.target_indices()[k];
        let id = s.sectors[idx].sector_id;
        let retained = |c: &MobilityConfig| -> BTreeSet<u32> {
            s.users
                .iter()
                .map(|u| s.associate(c, u))
                .filter(|a| a.preselected_sector_id == Some(id) && a.serving_sector_id == Some(id))
                .map(|a| a.ue_id)
                .collect()
        };
        let mut raised = base;
        raised.hom_db[k] = (base.hom_db[k] + delta).min(10.0);
        prop_assert!(retained(&base).is_subset(&retained(&raised)));
    }

    #[test]
    fn zero_offsets_serve_strongest_cell(seed in 0..1000u64) {
        let s = small_scenario(seed);
        let zero = MobilityConfig::default();
        for u in &s.users {
            let a = s.associate(&zero, u);
            let strongest = a
                .rsrp_by_sector_dbm
                .iter()
                .filter(|(id, _)| a.qualified_sector_ids.contains(id))
                .fold(None, |best: Option<(u32, f64)>, (&id, &r)| match best {
                    Some((_, b)) if b >= r => best,
                    _ => Some((id, r)),
                });
            prop_assert_eq!(a.serving_sector_id, strongest.map(|(id, _)| id));
        }
    }

    #[test]
    fn interferer_load_lowers_sinr(
        seed in 0..1000u64,
        config in config(),
        sector in 0..36usize,
        extra in 0.05..1.0f64,
    ) {
        let s = small_scenario(seed);
        let mut loaded = s.clone();
        loaded.sectors[sector].load = 0.0;
        let mut heavier = loaded.clone();
        heavier.sectors[sector].load = extra;
        let id = s.sectors[sector].sector_id;
        for u in &s.users {
            let a = loaded.associate(&config, u);
            match a.serving_sector_id {
                Some(serving) if serving != id => {
                    let before = db_to_linear(loaded.sinr_db(&a).unwrap());
                    let after = db_to_linear(heavier.sinr_db(&heavier.associate(&config, u)).unwrap());
                    prop_assert!(after < before);
                }
                _ => {}
            }
        }
    }

    #[test]
    fn mean_sinr_is_mean_of_users(seed in 0..1000u64, config in config()) {
        let s = small_scenario(seed);
        if let Ok(r) = s.evaluate_kpi(&config) {
            let mean = r.per_user_sinr_db.values().sum::<f64>() / r.per_user_sinr_db.len() as f64;
            prop_assert!((mean - r.mean_sinr_db).abs() <= 1e-9);
        }
    }

    #[test]
    fn sweep_matches_evaluate(seed in 0..1000u64) {
        let s = small_scenario(seed);
        let grid = ParameterGrid::with_steps(10.0, 10.0);
        let d = run_sweep(&s, &grid, 2).unwrap();
        prop_assert_eq!(d.len(), 216);
        for r in &d.records {
            match s.evaluate_kpi(&r.config) {
                Ok(k) => prop_assert!((k.mean_sinr_db - r.mean_sinr_db).abs() <= 1e-9),
                Err(_) => prop_assert!(r.mean_sinr_db.is_nan()),
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn db_round_trip(x in 1e-15..1e6f64) {
        prop_assert!((db_to_linear(linear_to_db(x)) - x).abs() <= 1e-12 * x);
    }

    #[test]
    fn grid_is_complete_and_distinct(cio_step in 1.5..12.0f64, hom_step in 1.5..12.0f64) {
        let grid = ParameterGrid::with_steps(cio_step, hom_step);
        let all: Vec<_> = enumerate_grid(&grid).unwrap().collect();
        let distinct: HashSet<[u64; 6]> =
            all.iter().map(|c| c.genes().map(f64::to_bits)).collect();
        let expected = grid.cio_values().len().pow(3) * grid.hom_values().len().pow(3);
        prop_assert_eq!(all.len(), expected);
        prop_assert_eq!(distinct.len(), expected);
        prop_assert_eq!(grid.cardinality().unwrap(), expected as u64);
    }

    #[test]
    fn dataset_csv_round_trip(
        rows in prop::collection::vec(
            (config(), prop_oneof![Just(f64::NAN), -30.0..30.0f64], 0..400u64),
            1..40,
        ),
        seed in any::<u64>(),
    ) {
        // the file stores six decimals, so round-tripping is exact for
        // values already on that lattice
        let six = |v: f64| (v * 1e6).round() / 1e6;
        let records: Vec<SweepRecord> = rows
            .into_iter()
            .map(|(c, v, o)| SweepRecord {
                config: MobilityConfig::from_genes(c.genes().map(six)).unwrap(),
                mean_sinr_db: six(v),
                outage_count: o,
            })
            .collect();
        let mut original = SweepDataset::new(records);
        original.scenario_seed = Some(seed);
        let text = original.to_csv_string();
        let back = SweepDataset::from_csv_str(&text, Path::new("mem")).unwrap();
        prop_assert_eq!(back.to_csv_string(), text);
        prop_assert_eq!(back.scenario_seed, Some(seed));
        for (a, b) in original.records.iter().zip(&back.records) {
            prop_assert_eq!(a.config, b.config);
            prop_assert_eq!(a.outage_count, b.outage_count);
            prop_assert_eq!(a.mean_sinr_db.to_bits(), b.mean_sinr_db.to_bits());
        }
    }

    #[test]
    fn subsample_is_subset(fraction in 0.01..=1.0f64, seed in any::<u64>()) {
        let s = small_scenario(1);
        let d = run_sweep(&s, &ParameterGrid::with_steps(10.0, 10.0), 1).unwrap();
        let sub = subsample(&d, fraction, seed).unwrap();
        prop_assert_eq!(sub.len(), ((fraction * 216.0) + 1e-9).floor() as usize);
        let parent: HashSet<[u64; 6]> =
            d.records.iter().map(|r| r.config.genes().map(f64::to_bits)).collect();
        for r in &sub.records {
            prop_assert!(parent.contains(&r.config.genes().map(f64::to_bits)));
        }
    }

    #[test]
    fn rmse_axioms(
        targets in prop::collection::vec(-20.0..20.0f64, 1..50),
        noise in prop::collection::vec(-3.0..3.0f64, 50),
    ) {
        struct Table(Vec<f64>);
        impl Regressor for Table {
            fn predict_row(&self, x: &[f64; 6]) -> f64 {
                self.0[x[0] as usize]
            }
        }
        let rows: Vec<FeatureRow> = targets
            .iter()
            .enumerate()
            .map(|(i, &y)| FeatureRow { x: [i as f64, 0.0, 0.0, 0.0, 0.0, 0.0], y })
            .collect();
        prop_assert_eq!(rmse(&Table(targets.clone()), &rows).unwrap(), 0.0);
        let perturbed: Vec<f64> = targets.iter().zip(&noise).map(|(t, n)| t + n).collect();
        let e = rmse(&Table(perturbed), &rows).unwrap();
        prop_assert!(e >= 0.0);
        prop_assert_eq!(e == 0.0, noise[..targets.len()].iter().all(|n| *n == 0.0));
    }

    #[test]
    fn knn_predictions_within_target_range(
        rows in prop::collection::vec((genes_in_box(), -20.0..20.0f64), 3..40),
        k in 1..5usize,
        query in genes_in_box(),
    ) {
        let rows: Vec<FeatureRow> = rows.into_iter().map(|(x, y)| FeatureRow { x, y }).collect();
        let k = k.min(rows.len());
        let model = fit_knn(&rows, k).unwrap();
        let lo = rows.iter().map(|r| r.y).fold(f64::INFINITY, f64::min);
        let hi = rows.iter().map(|r| r.y).fold(f64::NEG_INFINITY, f64::max);
        let p = model.predict_row(&query);
        prop_assert!(p >= lo - 1e-12 && p <= hi + 1e-12);
    }

    #[test]
    fn linear_residuals_are_orthogonal(
        rows in prop::collection::vec((genes_in_box(), -20.0..20.0f64), 12..60),
    ) {
        let rows: Vec<FeatureRow> = rows.into_iter().map(|(x, y)| FeatureRow { x, y }).collect();
        let model = fit_linear(&rows).unwrap();
        let residual: Vec<f64> = rows.iter().map(|r| r.y - model.predict_row(&r.x)).collect();
        let sum: f64 = residual.iter().sum();
        prop_assert!(sum.abs() <= 1e-6 * rows.len() as f64);
        for j in 0..6 {
            let dot: f64 = rows.iter().zip(&residual).map(|(r, e)| r.x[j] * e).sum();
            prop_assert!(dot.abs() <= 1e-6 * rows.len() as f64 * 10.0, "feature {j}: {dot}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn ga_runs_are_safe_honest_and_reproducible(
        seed in any::<u64>(),
        target in genes_in_box(),
        lattice in any::<bool>(),
    ) {
        let seen = Mutex::new(HashSet::new());
        let fitness = FnFitness(|g: &Genes| {
            seen.lock().unwrap().insert(g.map(|v| (v + 0.0).to_bits()));
            -g.iter().zip(&target).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
        });
        let config = GaConfig {
            population_size: 30,
            max_generations: 25,
            seed,
            lattice: lattice.then(|| ParameterGrid::with_steps(2.0, 2.0)),
            ..GaConfig::default()
        };
        let bounds = GeneBounds::default();
        let run = run_ga(&fitness, &config, &bounds).unwrap();
        prop_assert_eq!(run.total_evaluations, seen.lock().unwrap().len());
        prop_assert!(run.trace.windows(2).all(|w| w[1].best_fitness >= w[0].best_fitness));
        prop_assert!(run.trace.iter().all(|p| bounds.contains(&p.best_genes)));
        let again = run_ga(&fitness, &config, &bounds).unwrap();
        prop_assert_eq!(run, again);
    }
}

#[test]
fn random_gene_vectors_clip_into_the_box() {
    let bounds = GeneBounds::default();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..1000 {
        let mut g: Genes = std::array::from_fn(|_| rng.gen_range(-50.0..50.0));
        bounds.clip(&mut g);
        assert!(bounds.contains(&g));
    }
}
