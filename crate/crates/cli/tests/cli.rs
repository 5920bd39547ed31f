use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use copkit::datagen::{run_sweep, ParameterGrid, SweepDataset};
use copkit::genopt::{brute_force, run_ga, GaConfig, GeneBounds};
use copkit::scenario::{generate_scenario, LayoutParams, NetworkScenario};
use copkit::surrogate::{feature_rows, train_model, ModelSpec, TrainedModel};
use copkit::MobilityConfig;

fn copkit(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_copkit"))
        .current_dir(dir)
        .env_remove("COPKIT_JOBS")
        .args(args)
        .output()
        .unwrap()
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = copkit(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn read(dir: &Path, name: &str) -> String {
    fs::read_to_string(dir.join(name)).unwrap()
}

/// Scenario plus reduced-grid dataset shared by several tests.
fn workspace() -> tempfile::TempDir {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "--seed", "42", "--out", "s.toml"]);
    ok(
        d,
        &["sweep", "--scenario", "s.toml", "--cio-step", "5", "--hom-step", "5", "--out", "d.csv"],
    );
    tmp
}

#[test]
fn help_lists_every_flag() {
    let tmp = tempfile::tempdir().unwrap();
    let cases: [(&str, &[&str]); 8] = [
        ("generate", &["--seed", "--layout", "--out"]),
        ("simulate", &["--scenario", "--cio", "--hom", "--out"]),
        ("sweep", &["--scenario", "--cio-step", "--hom-step", "--out", "--fraction", "--seed"]),
        (
            "train",
            &["--data", "--model", "--fraction", "--seed", "--out", "--report", "--k", "--table"],
        ),
        (
            "optimize",
            &["--model", "--scenario", "--pop", "--gens", "--seed", "--trace", "--out", "--cio-step"],
        ),
        ("bruteforce", &["--model", "--cio-step", "--hom-step", "--out", "--convergence"]),
        ("compare", &["--model", "--pop", "--gens", "--ga-out", "--brute-out", "--continuous"]),
        ("pipeline", &["--config", "--out-dir"]),
    ];
    for (cmd, flags) in cases {
        let help = ok(tmp.path(), &[cmd, "--help"]);
        for f in flags.iter().chain(&["--jobs"]) {
            assert!(help.contains(f), "{cmd} --help lacks {f}");
        }
    }
}

#[test]
fn unknown_flags_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let out = copkit(tmp.path(), &["generate", "--seed", "1", "--out", "x", "--colour", "red"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--colour"));
    assert!(!tmp.path().join("x").exists());
}

#[test]
fn simulate_matches_library() {
    let tmp = workspace();
    let d = tmp.path();
    let stdout = ok(
        d,
        &["simulate", "--scenario", "s.toml", "--cio", "-10,-8,4", "--hom", "10,5,9", "--out", "r.csv"],
    );
    let scenario = generate_scenario(42, &LayoutParams::default()).unwrap();
    assert_eq!(NetworkScenario::load(d.join("s.toml")).unwrap(), scenario);
    let config = MobilityConfig::new([-10.0, -8.0, 4.0], [10.0, 5.0, 9.0]).unwrap();
    let report = scenario.evaluate_kpi(&config).unwrap();
    assert_eq!(read(d, "r.csv"), report.to_csv_string());
    assert!(stdout.contains(&format!("mean_sinr_db={:.6}", report.mean_sinr_db)));

    let bad = copkit(d, &["simulate", "--scenario", "s.toml", "--cio", "11,0,0", "--hom", "0,0,0"]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("outside"));
}

#[test]
fn sweep_is_thread_count_invariant() {
    let tmp = workspace();
    let d = tmp.path();
    for jobs in ["1", "8"] {
        let out = Command::new(env!("CARGO_BIN_EXE_copkit"))
            .current_dir(d)
            .env("COPKIT_JOBS", jobs)
            .args(["sweep", "--scenario", "s.toml", "--cio-step", "5", "--hom-step", "5"])
            .args(["--out", &format!("d{jobs}.csv")])
            .output()
            .unwrap();
        assert!(out.status.success());
    }
    assert_eq!(read(d, "d1.csv"), read(d, "d8.csv"));
    let scenario = NetworkScenario::load(d.join("s.toml")).unwrap();
    let dataset = run_sweep(&scenario, &ParameterGrid::with_steps(5.0, 5.0), 2).unwrap();
    assert_eq!(read(d, "d1.csv"), dataset.to_csv_string());
    assert_eq!(read(d, "d.csv"), dataset.to_csv_string());

}

#[test]
fn sweep_refuses_step_one_grid() {
    let tmp = workspace();
    let out = copkit(
        tmp.path(),
        &["sweep", "--scenario", "s.toml", "--cio-step", "1", "--hom-step", "1", "--out", "x.csv"],
    );
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("12326391"));
    assert!(!tmp.path().join("x.csv").exists());
}

#[test]
fn sweep_fraction_subsamples() {
    let tmp = workspace();
    let d = tmp.path();
    ok(
        d,
        &[
            "sweep", "--scenario", "s.toml", "--cio-step", "5", "--hom-step", "5", "--fraction",
            "0.1", "--seed", "7", "--out", "sub.csv",
        ],
    );
    let full = SweepDataset::read_csv(d.join("d.csv")).unwrap();
    let sub = SweepDataset::read_csv(d.join("sub.csv")).unwrap();
    let expected = copkit::datagen::subsample(&full, 0.1, 7).unwrap();
    assert_eq!(sub.len(), 337);
    assert_eq!(read(d, "sub.csv"), expected.to_csv_string());
}

#[test]
fn train_optimize_bruteforce_match_library() {
    let tmp = workspace();
    let d = tmp.path();
    ok(
        d,
        &[
            "train", "--data", "d.csv", "--model", "gbrt", "--trees", "50", "--seed", "3", "--out",
            "m.json", "--report", "rep.csv",
        ],
    );
    let dataset = SweepDataset::read_csv(d.join("d.csv")).unwrap();
    let spec = ModelSpec::Gbrt(copkit::surrogate::GbrtParams {
        n_trees: 50,
        ..Default::default()
    });
    let trained = train_model(&feature_rows(&dataset), &spec, 1.0, 3).unwrap();
    let loaded = TrainedModel::load(d.join("m.json")).unwrap();
    assert_eq!(loaded, trained);
    assert!(read(d, "rep.csv").starts_with("rank,model_name"));

    ok(
        d,
        &[
            "optimize", "--model", "m.json", "--pop", "40", "--gens", "15", "--seed", "9",
            "--trace", "t.csv", "--out", "best.csv",
        ],
    );
    let config = GaConfig {
        population_size: 40,
        max_generations: 15,
        seed: 9,
        ..GaConfig::default()
    };
    let run = run_ga(&trained, &config, &GeneBounds::default()).unwrap();
    let (genes, fitness) = copkit::pipeline::read_best_csv(d.join("best.csv")).unwrap();
    for (a, b) in genes.iter().zip(run.best.genes) {
        assert!((a - b).abs() < 1e-6);
    }
    assert!((fitness - run.best.score()).abs() < 1e-6);
    assert_eq!(read(d, "t.csv").lines().count(), run.trace.len() + 1);

    ok(
        d,
        &[
            "bruteforce", "--model", "m.json", "--cio-step", "5", "--hom-step", "5", "--out",
            "bb.csv", "--convergence", "bc.csv",
        ],
    );
    let brute = brute_force(&trained, &ParameterGrid::with_steps(5.0, 5.0)).unwrap();
    let (genes, fitness) = copkit::pipeline::read_best_csv(d.join("bb.csv")).unwrap();
    assert_eq!(genes, brute.best_config.genes());
    assert!((fitness - brute.best_fitness).abs() < 1e-6);
    let curve = read(d, "bc.csv");
    assert_eq!(curve.lines().next(), Some("evaluations,best_fitness"));
    assert!(curve.trim_end().ends_with(&format!("3375,{:.6}", brute.best_fitness)));

    let stdout = ok(
        d,
        &[
            "compare", "--model", "m.json", "--cio-step", "5", "--hom-step", "5", "--gens", "20",
            "--ga-out", "g.csv", "--brute-out", "b.csv",
        ],
    );
    assert!(stdout.contains("gap="));
    assert_eq!(read(d, "b.csv"), curve);
    assert_eq!(read(d, "g.csv").lines().next(), Some("evaluations,best_fitness"));
}

#[test]
fn knn_and_external_models() {
    let tmp = workspace();
    let d = tmp.path();
    ok(d, &["train", "--data", "d.csv", "--model", "knn", "--k", "1", "--out", "k.json"]);
    let out = copkit(d, &["train", "--data", "d.csv", "--model", "external", "--out", "e.json"]);
    assert_eq!(out.status.code(), Some(2));

    let table: String = read(d, "d.csv")
        .lines()
        .skip(2)
        .map(|l| l.rsplitn(2, ',').nth(1).unwrap().to_string() + "\n")
        .collect();
    fs::write(
        d.join("pred.csv"),
        "cio1,cio2,cio3,hom1,hom2,hom3,mean_sinr_db\n".to_string() + &table,
    )
    .unwrap();
    let stdout = ok(
        d,
        &[
            "train", "--data", "d.csv", "--model", "external", "--table", "pred.csv", "--out",
            "e.json",
        ],
    );
    // a table holding the data itself predicts it exactly
    assert!(stdout.contains("rmse_test=0.000000"), "{stdout}");
}

#[test]
fn optimize_against_simulator() {
    let tmp = workspace();
    let d = tmp.path();
    let stdout = ok(
        d,
        &[
            "optimize", "--scenario", "s.toml", "--pop", "20", "--gens", "3", "--cio-step", "5",
            "--hom-step", "5", "--out", "best.csv",
        ],
    );
    assert!(stdout.contains("best_fitness="));
    let (genes, fitness) = copkit::pipeline::read_best_csv(d.join("best.csv")).unwrap();
    let scenario = NetworkScenario::load(d.join("s.toml")).unwrap();
    let kpi = scenario
        .evaluate_kpi(&MobilityConfig::from_genes(genes).unwrap())
        .unwrap();
    assert!((kpi.mean_sinr_db - fitness).abs() < 1e-6);
    assert!(genes.iter().all(|g| g % 5.0 == 0.0));
}

#[test]
fn pipeline_runs_and_is_idempotent() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(
        d.join("p.toml"),
        "scenario_seed = 42\nout_dir = \"run\"\n[grid]\ncio_step = 5.0\nhom_step = 5.0\n",
    )
    .unwrap();
    let first = ok(d, &["pipeline", "--config", "p.toml"]);
    assert!(first.contains("sweep: done"));
    let names = ["scenario.toml", "dataset.csv", "model.json", "report.csv", "best.csv", "trace.csv"];
    let before: Vec<String> = names.iter().map(|n| read(&d.join("run"), n)).collect();
    let second = ok(d, &["pipeline", "--config", "p.toml"]);
    assert!(second.contains("sweep: reused") && second.contains("optimize: reused"));
    let after: Vec<String> = names.iter().map(|n| read(&d.join("run"), n)).collect();
    assert_eq!(before, after);
}

#[test]
fn pipeline_without_scenario_source_fails_fast() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("p.toml"), "out_dir = \"run\"\n").unwrap();
    let out = copkit(d, &["pipeline", "--config", "p.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("scenario"));
    assert!(!d.join("run").exists());
}
