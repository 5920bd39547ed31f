use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use copkit::datagen::{run_sweep, subsample, ParameterGrid, SweepDataset};
use copkit::genopt::{
    brute_force, compare, run_ga, write_best_csv, write_convergence_csv, write_trace_csv, Fitness,
    GaConfig, GeneBounds, SimulatorFitness,
};
use copkit::pipeline::{run_pipeline, PipelineConfig};
use copkit::scenario::{generate_scenario, LayoutParams, NetworkScenario, Simulator};
use copkit::surrogate::{
    feature_rows, train_model, write_reports_csv, EvaluationCell, GbrtParams, ModelSpec,
    TrainedModel,
};
use copkit::MobilityConfig;

#[derive(Parser)]
#[command(name = "copkit", version, about = "CIO/HOM mobility-parameter optimisation toolkit")]
struct Cli {
    /// Worker threads for parallel stages (0 = all cores).
    #[arg(long, global = true, env = "COPKIT_JOBS", default_value_t = 0)]
    jobs: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a random hexagonal scenario file.
    Generate(GenerateArgs),
    /// Evaluate the KPI of one CIO/HOM setting.
    Simulate(SimulateArgs),
    /// Simulate every point of a CIO/HOM grid.
    Sweep(SweepArgs),
    /// Fit a surrogate model on a sweep dataset.
    Train(TrainArgs),
    /// Maximise the fitness with the genetic algorithm.
    Optimize(OptimizeArgs),
    /// Maximise the fitness by exhaustive grid search.
    Bruteforce(BruteforceArgs),
    /// Run both searches and write their convergence curves.
    Compare(CompareArgs),
    /// Run scenario, sweep, train and optimize from a config file.
    Pipeline(PipelineArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Seed for site and user placement.
    #[arg(long)]
    seed: u64,
    /// Optional TOML file with layout parameters.
    #[arg(long)]
    layout: Option<PathBuf>,
    /// Scenario file to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SimulateArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Target-sector CIOs in dB, e.g. -10,-8,4.
    #[arg(long, value_parser = triple, allow_hyphen_values = true)]
    cio: [f64; 3],
    /// Target-sector HOMs in dB, e.g. 10,5,9.
    #[arg(long, value_parser = triple, allow_hyphen_values = true)]
    hom: [f64; 3],
    /// Per-user report.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn triple(s: &str) -> Result<[f64; 3], String> {
    let v = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("{p:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    v.try_into()
        .map_err(|v: Vec<f64>| format!("expected 3 comma-separated values, got {}", v.len()))
}

#[derive(Args, Clone, Copy)]
struct GridArgs {
    /// CIO lattice step in dB.
    #[arg(long, default_value_t = 2.0)]
    cio_step: f64,
    /// HOM lattice step in dB.
    #[arg(long, default_value_t = 2.0)]
    hom_step: f64,
}

impl GridArgs {
    fn grid(self) -> ParameterGrid {
        ParameterGrid::with_steps(self.cio_step, self.hom_step)
    }
}

#[derive(Args)]
struct SweepArgs {
    /// Scenario file.
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    grid: GridArgs,
    /// Dataset CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Keep only this share of the rows.
    #[arg(long)]
    fraction: Option<f64>,
    /// Subsampling seed.
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum Family {
    Linear,
    Knn,
    Gbrt,
    External,
}

#[derive(Args)]
struct TrainArgs {
    /// Dataset CSV from `sweep`.
    #[arg(long)]
    data: PathBuf,
    /// Model family.
    #[arg(long, value_enum)]
    model: Family,
    /// Share of the training split to fit on.
    #[arg(long, default_value_t = 1.0)]
    fraction: f64,
    /// Seed for the split, subsampling and fitting.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// Fit report CSV.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Neighbours for KNN.
    #[arg(long, default_value_t = 5)]
    k: usize,
    /// GBRT tree count.
    #[arg(long, default_value_t = GbrtParams::default().n_trees)]
    trees: usize,
    /// GBRT tree depth.
    #[arg(long, default_value_t = GbrtParams::default().max_depth)]
    depth: usize,
    /// GBRT shrinkage.
    #[arg(long, default_value_t = GbrtParams::default().learning_rate)]
    learning_rate: f64,
    /// Prediction table for the external family.
    #[arg(long, required_if_eq("model", "external"))]
    table: Option<PathBuf>,
}

/// Exactly one fitness source.
#[derive(Args)]
#[group(required = true, multiple = false)]
struct FitnessArgs {
    /// Trained surrogate model.
    #[arg(long)]
    model: Option<PathBuf>,
    /// Evaluate the simulator directly instead of a surrogate.
    #[arg(long)]
    scenario: Option<PathBuf>,
}

enum Source {
    Model(TrainedModel),
    Scenario(NetworkScenario),
}

impl FitnessArgs {
    fn load(&self) -> Result<Source> {
        Ok(match (&self.model, &self.scenario) {
            (Some(m), _) => Source::Model(TrainedModel::load(m)?),
            (_, Some(s)) => Source::Scenario(NetworkScenario::load(s)?),
            _ => unreachable!("clap enforces one source"),
        })
    }
}

impl Source {
    fn with<T>(&self, f: impl FnOnce(&dyn Fitness) -> T) -> T {
        match self {
            Source::Model(m) => f(m),
            Source::Scenario(s) => f(&SimulatorFitness(Simulator::new(s))),
        }
    }
}

#[derive(Args)]
struct GaArgs {
    /// Population size.
    #[arg(long, default_value_t = 100)]
    pop: usize,
    /// Maximum generations.
    #[arg(long, default_value_t = 50)]
    gens: usize,
    /// GA seed.
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Parents per generation (even).
    #[arg(long, default_value_t = 10)]
    elites: usize,
    /// Generations without improvement before stopping.
    #[arg(long, default_value_t = 20)]
    patience: usize,
}

impl GaArgs {
    fn config(&self, lattice: Option<ParameterGrid>) -> GaConfig {
        GaConfig {
            population_size: self.pop,
            max_generations: self.gens,
            seed: self.seed,
            elite_count: self.elites,
            stagnation_patience: self.patience,
            lattice,
            ..GaConfig::default()
        }
    }
}

#[derive(Args)]
struct OptimizeArgs {
    #[command(flatten)]
    fitness: FitnessArgs,
    #[command(flatten)]
    ga: GaArgs,
    /// Snap chromosomes to a lattice with this CIO step.
    #[arg(long, requires = "hom_step")]
    cio_step: Option<f64>,
    /// Snap chromosomes to a lattice with this HOM step.
    #[arg(long, requires = "cio_step")]
    hom_step: Option<f64>,
    /// Per-generation trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Best-configuration CSV to write.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BruteforceArgs {
    #[command(flatten)]
    fitness: FitnessArgs,
    #[command(flatten)]
    grid: GridArgs,
    /// Best-configuration CSV to write.
    #[arg(long)]
    out: PathBuf,
    /// Convergence curve (evaluations, best_fitness).
    #[arg(long)]
    convergence: Option<PathBuf>,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    fitness: FitnessArgs,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    ga: GaArgs,
    /// Search the continuous box instead of the grid lattice.
    #[arg(long)]
    continuous: bool,
    /// GA convergence curve.
    #[arg(long)]
    ga_out: PathBuf,
    /// Brute-force convergence curve.
    #[arg(long)]
    brute_out: PathBuf,
}

#[derive(Args)]
struct PipelineArgs {
    /// Pipeline TOML file.
    #[arg(long)]
    config: PathBuf,
    /// Override the output directory of the config file.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.jobs > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.jobs)
            .build_global()
            .context("configuring worker threads")?;
    }
    match cli.command {
        Command::Generate(a) => generate(a),
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a, cli.jobs),
        Command::Train(a) => train(a),
        Command::Optimize(a) => optimize(a),
        Command::Bruteforce(a) => bruteforce(a),
        Command::Compare(a) => compare_cmd(a),
        Command::Pipeline(a) => pipeline(a, cli.jobs),
    }
}

fn generate(a: GenerateArgs) -> Result<()> {
    let params = match &a.layout {
        Some(p) => {
            let text = std::fs::read_to_string(p).with_context(|| p.display().to_string())?;
            toml::from_str::<LayoutParams>(&text).with_context(|| p.display().to_string())?
        }
        None => LayoutParams::default(),
    };
    let scenario = generate_scenario(a.seed, &params)?;
    scenario.save(&a.out)?;
    println!(
        "{}: {} sectors, {} users",
        a.out.display(),
        scenario.sectors.len(),
        scenario.users.len()
    );
    Ok(())
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let scenario = NetworkScenario::load(&a.scenario)?;
    let config = MobilityConfig::new(a.cio, a.hom)?;
    let report = scenario.evaluate_kpi(&config)?;
    if let Some(out) = &a.out {
        report.write_csv(out)?;
    }
    println!(
        "mean_sinr_db={:.6} outage_count={}",
        report.mean_sinr_db, report.outage_count
    );
    Ok(())
}

fn sweep(a: SweepArgs, jobs: usize) -> Result<()> {
    let scenario = NetworkScenario::load(&a.scenario)?;
    let mut dataset = run_sweep(&scenario, &a.grid.grid(), jobs)?;
    if let Some(f) = a.fraction {
        dataset = subsample(&dataset, f, a.seed)?;
    }
    dataset.write_csv(&a.out)?;
    println!("{}: {} records", a.out.display(), dataset.len());
    Ok(())
}

fn train(a: TrainArgs) -> Result<()> {
    let spec = match a.model {
        Family::Linear => ModelSpec::Linear,
        Family::Knn => ModelSpec::Knn { k: a.k },
        Family::Gbrt => ModelSpec::Gbrt(GbrtParams {
            n_trees: a.trees,
            max_depth: a.depth,
            learning_rate: a.learning_rate,
            ..GbrtParams::default()
        }),
        Family::External => ModelSpec::External {
            path: a.table.clone().expect("clap requires --table"),
        },
    };
    let dataset = SweepDataset::read_csv(&a.data)?;
    let trained = train_model(&feature_rows(&dataset), &spec, a.fraction, a.seed)?;
    trained.save(&a.out)?;
    if let Some(report) = &a.report {
        let cell = EvaluationCell {
            model_name: trained.report.model_name.clone(),
            train_fraction: a.fraction,
            outcome: Ok(trained.report.clone()),
        };
        write_reports_csv(&[cell], report)?;
    }
    let r = &trained.report;
    println!(
        "{}: rmse_train={:.6} rmse_test={:.6} n_train={} n_test={}",
        r.model_name, r.rmse_train, r.rmse_test, r.n_train, r.n_test
    );
    Ok(())
}

fn optimize(a: OptimizeArgs) -> Result<()> {
    let lattice = match (a.cio_step, a.hom_step) {
        (Some(c), Some(h)) => Some(ParameterGrid::with_steps(c, h)),
        _ => None,
    };
    let config = a.ga.config(lattice);
    let source = a.fitness.load()?;
    let run = source.with(|f| run_ga(f, &config, &GeneBounds::default()))?;
    write_best_csv(&run.best.genes, run.best.score(), &a.out)?;
    if let Some(trace) = &a.trace {
        write_trace_csv(&run, trace)?;
    }
    println!(
        "best_fitness={:.6} genes={:?} evaluations={} generations={} stop={:?}",
        run.best.score(),
        run.best.genes,
        run.total_evaluations,
        run.trace.len() - 1,
        run.stop_reason
    );
    Ok(())
}

fn bruteforce(a: BruteforceArgs) -> Result<()> {
    let source = a.fitness.load()?;
    let result = source.with(|f| brute_force(f, &a.grid.grid()))?;
    write_best_csv(&result.best_config.genes(), result.best_fitness, &a.out)?;
    if let Some(c) = &a.convergence {
        write_convergence_csv(&result.convergence, c)?;
    }
    println!(
        "best_fitness={:.6} genes={:?} evaluations={}",
        result.best_fitness,
        result.best_config.genes(),
        result.evaluations
    );
    Ok(())
}

fn compare_cmd(a: CompareArgs) -> Result<()> {
    let grid = a.grid.grid();
    let config = a.ga.config((!a.continuous).then_some(grid));
    let source = a.fitness.load()?;
    let c = source.with(|f| compare(f, &grid, &config, &GeneBounds::default()))?;
    let ga_curve: Vec<(usize, f64)> = c
        .ga
        .trace
        .iter()
        .map(|p| (p.evaluations, p.best_fitness))
        .collect();
    write_convergence_csv(&ga_curve, &a.ga_out)?;
    write_convergence_csv(&c.brute.convergence, &a.brute_out)?;
    println!(
        "brute_best={:.6} ga_best={:.6} gap={:.6} brute_evaluations={} ga_evaluations={} speedup={:.1}",
        c.brute.best_fitness,
        c.ga_projected_fitness,
        c.gap,
        c.brute.evaluations,
        c.ga.total_evaluations,
        c.speedup
    );
    Ok(())
}

fn pipeline(a: PipelineArgs, jobs: usize) -> Result<()> {
    let mut config = PipelineConfig::load(&a.config)?;
    if let Some(out) = a.out_dir {
        config.out_dir = out;
    }
    if jobs > 0 {
        config.jobs = jobs;
    }
    let outcome = run_pipeline(&config)?;
    for (stage, reused) in &outcome.stages {
        println!("{stage}: {}", if *reused { "reused" } else { "done" });
    }
    println!(
        "best_genes={:?} predicted_db={:.6} simulated_db={}",
        outcome.best_genes,
        outcome.best_predicted_db,
        outcome
            .best_simulated_db
            .map_or("outage".into(), |v| format!("{v:.6}"))
    );
    Ok(())
}
