//! Python bindings for `copkit`.
//!
//! ```python
//! import copkit_py as ck
//! world = ck.Scenario.generate(42)
//! data = world.sweep(cio_step=5, hom_step=5)
//! model = ck.Model.train(data, "gbrt")
//! best = ck.optimize(model, gens=30)
//! ```

use std::path::PathBuf;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use copkit::datagen::{run_sweep, subsample, ParameterGrid, SweepDataset};
use copkit::genopt::{brute_force as brute, run_ga, Fitness, GaConfig, GeneBounds, SimulatorFitness};
use copkit::pipeline::{run_pipeline as pipeline, PipelineConfig};
use copkit::scenario::{generate_scenario, LayoutParams, NetworkScenario, Simulator};
use copkit::surrogate::{feature_rows, train_model, GbrtParams, ModelSpec, TrainedModel};
use copkit::{CopError, MobilityConfig};

fn to_py(e: CopError) -> PyErr {
    match e {
        CopError::Io { .. } => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn config(cio: [f64; 3], hom: [f64; 3]) -> PyResult<MobilityConfig> {
    MobilityConfig::new(cio, hom).map_err(to_py)
}

/// A network snapshot: sectors, users and radio constants.
#[pyclass(name = "Scenario", module = "copkit_py")]
struct PyScenario {
    inner: NetworkScenario,
}

#[pymethods]
impl PyScenario {
    /// Random hexagonal layout; `None` keeps the default for that setting.
    #[staticmethod]
    #[pyo3(signature = (seed, n_users=None, n_sites=None))]
    fn generate(seed: u64, n_users: Option<usize>, n_sites: Option<usize>) -> PyResult<Self> {
        let defaults = LayoutParams::default();
        let params = LayoutParams {
            n_users: n_users.unwrap_or(defaults.n_users),
            n_sites: n_sites.unwrap_or(defaults.n_sites),
            ..defaults
        };
        let inner = generate_scenario(seed, &params).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = NetworkScenario::load(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml().map_err(to_py)
    }

    #[getter]
    fn n_sectors(&self) -> usize {
        self.inner.sectors.len()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.users.len()
    }

    #[getter]
    fn target_sector_ids(&self) -> Vec<u32> {
        self.inner
            .target_indices()
            .into_iter()
            .map(|i| self.inner.sectors[i].sector_id)
            .collect()
    }

    /// Mean-SINR KPI with its per-user breakdown.
    fn evaluate<'py>(
        &self,
        py: Python<'py>,
        cio: [f64; 3],
        hom: [f64; 3],
    ) -> PyResult<Bound<'py, PyDict>> {
        let report = self.inner.evaluate_kpi(&config(cio, hom)?).map_err(to_py)?;
        let d = PyDict::new(py);
        d.set_item("mean_sinr_db", report.mean_sinr_db)?;
        d.set_item("outage_count", report.outage_count)?;
        d.set_item("capacity", report.capacity)?;
        d.set_item("per_user_sinr_db", report.per_user_sinr_db)?;
        d.set_item("serving", report.serving)?;
        Ok(d)
    }

    /// Cell selection for the user at `ue_index`.
    fn associate<'py>(
        &self,
        py: Python<'py>,
        cio: [f64; 3],
        hom: [f64; 3],
        ue_index: usize,
    ) -> PyResult<Bound<'py, PyDict>> {
        let ue = self
            .inner
            .users
            .get(ue_index)
            .ok_or_else(|| PyValueError::new_err(format!("no user at index {ue_index}")))?;
        let a = self.inner.associate(&config(cio, hom)?, ue);
        let d = PyDict::new(py);
        d.set_item("ue_id", a.ue_id)?;
        d.set_item("serving_sector_id", a.serving_sector_id)?;
        d.set_item("preselected_sector_id", a.preselected_sector_id)?;
        d.set_item("qualified_sector_ids", a.qualified_sector_ids.iter().collect::<Vec<_>>())?;
        d.set_item("sinr_db", self.inner.sinr_db(&a).ok())?;
        d.set_item("rsrp_by_sector_dbm", a.rsrp_by_sector_dbm)?;
        Ok(d)
    }

    #[pyo3(signature = (cio_step=2.0, hom_step=2.0, jobs=0))]
    fn sweep(&self, cio_step: f64, hom_step: f64, jobs: usize) -> PyResult<PyDataset> {
        let grid = ParameterGrid::with_steps(cio_step, hom_step);
        let inner = run_sweep(&self.inner, &grid, jobs).map_err(to_py)?;
        Ok(PyDataset { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Scenario(seed={}, sectors={}, users={})",
            self.inner.rng_seed,
            self.inner.sectors.len(),
            self.inner.users.len()
        )
    }
}

/// Sweep results: one record per configuration.
#[pyclass(name = "Dataset", module = "copkit_py")]
struct PyDataset {
    inner: SweepDataset,
}

#[pymethods]
impl PyDataset {
    #[staticmethod]
    fn read_csv(path: PathBuf) -> PyResult<Self> {
        let inner = SweepDataset::read_csv(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn write_csv(&self, path: PathBuf) -> PyResult<()> {
        self.inner.write_csv(path).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    /// `(genes, mean_sinr_db, outage_count)` tuples; full outage is NaN.
    fn records(&self) -> Vec<([f64; 6], f64, u64)> {
        self.inner
            .records
            .iter()
            .map(|r| (r.config.genes(), r.mean_sinr_db, r.outage_count))
            .collect()
    }

    fn best(&self) -> Option<([f64; 6], f64)> {
        self.inner.best().map(|r| (r.config.genes(), r.mean_sinr_db))
    }

    fn subsample(&self, fraction: f64, seed: u64) -> PyResult<Self> {
        let inner = subsample(&self.inner, fraction, seed).map_err(to_py)?;
        Ok(Self { inner })
    }
}

/// A fitted surrogate with its evaluation report.
#[pyclass(name = "Model", module = "copkit_py")]
struct PyModel {
    inner: TrainedModel,
}

#[pymethods]
impl PyModel {
    /// `family` is one of linear, knn, gbrt, external (`table` required).
    #[staticmethod]
    #[pyo3(signature = (
        dataset, family="gbrt", fraction=1.0, seed=42, k=5,
        n_trees=200, max_depth=4, learning_rate=0.1, table=None
    ))]
    #[allow(clippy::too_many_arguments)]
    fn train(
        dataset: &PyDataset,
        family: &str,
        fraction: f64,
        seed: u64,
        k: usize,
        n_trees: usize,
        max_depth: usize,
        learning_rate: f64,
        table: Option<PathBuf>,
    ) -> PyResult<Self> {
        let spec = match (family, table) {
            ("linear", _) => ModelSpec::Linear,
            ("knn", _) => ModelSpec::Knn { k },
            ("gbrt", _) => ModelSpec::Gbrt(GbrtParams {
                n_trees,
                max_depth,
                learning_rate,
                ..GbrtParams::default()
            }),
            ("external", Some(path)) => ModelSpec::External { path },
            ("external", None) => {
                return Err(PyValueError::new_err("the external family needs `table`"))
            }
            (other, _) => return Err(PyValueError::new_err(format!("unknown family {other:?}"))),
        };
        let rows = feature_rows(&dataset.inner);
        let inner = train_model(&rows, &spec, fraction, seed).map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = TrainedModel::load(path).map_err(to_py)?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.inner.save(path).map_err(to_py)
    }

    fn predict(&self, cio: [f64; 3], hom: [f64; 3]) -> PyResult<f64> {
        Ok(self.inner.predict(&config(cio, hom)?))
    }

    #[getter]
    fn family(&self) -> &'static str {
        self.inner.model.family()
    }

    #[getter]
    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = &self.inner.report;
        let d = PyDict::new(py);
        d.set_item("model_name", &r.model_name)?;
        d.set_item("rmse_train", r.rmse_train)?;
        d.set_item("rmse_test", r.rmse_test)?;
        d.set_item("train_fraction", r.train_fraction)?;
        d.set_item("n_train", r.n_train)?;
        d.set_item("n_test", r.n_test)?;
        d.set_item("seed", r.seed)?;
        Ok(d)
    }
}

/// Anything usable as a fitness: a surrogate or the simulator itself.
#[derive(FromPyObject)]
enum Source<'py> {
    Model(PyRef<'py, PyModel>),
    Scenario(PyRef<'py, PyScenario>),
}

impl Source<'_> {
    fn with<T>(&self, f: impl FnOnce(&dyn Fitness) -> T) -> T {
        match self {
            Source::Model(m) => f(&m.inner),
            Source::Scenario(s) => f(&SimulatorFitness(Simulator::new(&s.inner))),
        }
    }
}

/// Genetic search over the CIO/HOM box. Passing both steps snaps every
/// chromosome to that lattice.
#[pyfunction]
#[pyo3(signature = (
    source, pop=100, gens=50, seed=42, elites=10, patience=20, cio_step=None, hom_step=None
))]
#[allow(clippy::too_many_arguments)]
fn optimize<'py>(
    py: Python<'py>,
    source: Source<'py>,
    pop: usize,
    gens: usize,
    seed: u64,
    elites: usize,
    patience: usize,
    cio_step: Option<f64>,
    hom_step: Option<f64>,
) -> PyResult<Bound<'py, PyDict>> {
    let lattice = match (cio_step, hom_step) {
        (Some(c), Some(h)) => Some(ParameterGrid::with_steps(c, h)),
        (None, None) => None,
        _ => return Err(PyValueError::new_err("give both cio_step and hom_step, or neither")),
    };
    let ga = GaConfig {
        population_size: pop,
        max_generations: gens,
        seed,
        elite_count: elites,
        stagnation_patience: patience,
        lattice,
        ..GaConfig::default()
    };
    let run = source
        .with(|f| run_ga(f, &ga, &GeneBounds::default()))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("best_genes", run.best.genes)?;
    d.set_item("best_fitness", run.best.score())?;
    d.set_item("evaluations", run.total_evaluations)?;
    d.set_item("generations", run.trace.len() - 1)?;
    d.set_item("stop_reason", format!("{:?}", run.stop_reason))?;
    let trace: Vec<(usize, usize, f64)> = run
        .trace
        .iter()
        .map(|p| (p.generation, p.evaluations, p.best_fitness))
        .collect();
    d.set_item("trace", trace)?;
    Ok(d)
}

/// Exhaustive lattice search.
#[pyfunction]
#[pyo3(signature = (source, cio_step=2.0, hom_step=2.0))]
fn brute_force<'py>(
    py: Python<'py>,
    source: Source<'py>,
    cio_step: f64,
    hom_step: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let grid = ParameterGrid::with_steps(cio_step, hom_step);
    let r = source.with(|f| brute(f, &grid)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("best_genes", r.best_config.genes())?;
    d.set_item("best_fitness", r.best_fitness)?;
    d.set_item("evaluations", r.evaluations)?;
    d.set_item("convergence", r.convergence)?;
    Ok(d)
}

/// Number of lattice points, without enumerating them.
#[pyfunction]
fn grid_cardinality(cio_step: f64, hom_step: f64) -> PyResult<u64> {
    ParameterGrid::with_steps(cio_step, hom_step)
        .cardinality()
        .map_err(to_py)
}

/// Runs the pipeline described by a TOML config file.
#[pyfunction]
fn run_pipeline<'py>(py: Python<'py>, config_path: PathBuf) -> PyResult<Bound<'py, PyDict>> {
    let config = PipelineConfig::load(config_path).map_err(to_py)?;
    let outcome = pipeline(&config).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("stages", outcome.stages)?;
    d.set_item("best_genes", outcome.best_genes)?;
    d.set_item("best_predicted_db", outcome.best_predicted_db)?;
    d.set_item("best_simulated_db", outcome.best_simulated_db)?;
    d.set_item("dataset_max_db", outcome.dataset_max_db)?;
    Ok(d)
}

#[pymodule]
pub fn copkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyDataset>()?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(optimize, m)?)?;
    m.add_function(wrap_pyfunction!(brute_force, m)?)?;
    m.add_function(wrap_pyfunction!(grid_cardinality, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}
