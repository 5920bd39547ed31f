//! End-to-end run: scenario, sweep, surrogate training and GA optimisation.
//!
//! Every stage writes its artifacts into one output directory together with
//! a `manifest.json` recording, per stage, a digest of the stage inputs and
//! of each file produced. A rerun skips any stage whose input digest is
//! unchanged and whose files still hash to the recorded values.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::datagen::{run_sweep, ParameterGrid, SweepDataset};
use crate::error::{CopError, Result};
use crate::genopt::{run_ga, write_best_csv, write_trace_csv, GaConfig, GeneBounds, Genes};
use crate::scenario::{generate_scenario, LayoutParams, MobilityConfig, NetworkScenario};
use crate::surrogate::{
    feature_rows, train_model, write_reports_csv, EvaluationCell, GbrtParams, ModelSpec,
    TrainedModel,
};

pub const SCENARIO_FILE: &str = "scenario.toml";
pub const DATASET_FILE: &str = "dataset.csv";
pub const MODEL_FILE: &str = "model.json";
pub const REPORT_FILE: &str = "report.csv";
pub const BEST_FILE: &str = "best.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const MANIFEST_FILE: &str = "manifest.json";

/// Offsets added to the global seed for the seeded stages.
pub const TRAIN_SEED_OFFSET: u64 = 1;
pub const GA_SEED_OFFSET: u64 = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    /// Existing scenario file. Takes precedence over `scenario_seed`.
    #[serde(default)]
    pub scenario_file: Option<PathBuf>,
    #[serde(default)]
    pub scenario_seed: Option<u64>,
    #[serde(default)]
    pub layout: LayoutParams,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub grid: ParameterGrid,
    #[serde(default = "default_model")]
    pub model: ModelSpec,
    #[serde(default = "default_fraction")]
    pub train_fraction: f64,
    /// `seed` is ignored; the GA seed is derived from the global seed.
    #[serde(default)]
    pub ga: GaConfig,
    pub out_dir: PathBuf,
    /// Sweep worker threads, 0 for automatic. Does not affect results.
    #[serde(default)]
    pub jobs: usize,
}

fn default_seed() -> u64 {
    42
}

fn default_model() -> ModelSpec {
    ModelSpec::Gbrt(GbrtParams::default())
}

fn default_fraction() -> f64 {
    1.0
}

impl PipelineConfig {
    pub fn new(out_dir: impl Into<PathBuf>) -> Self {
        Self {
            scenario_file: None,
            scenario_seed: None,
            layout: LayoutParams::default(),
            seed: default_seed(),
            grid: ParameterGrid::default(),
            model: default_model(),
            train_fraction: default_fraction(),
            ga: GaConfig::default(),
            out_dir: out_dir.into(),
            jobs: 0,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| CopError::Config(format!("pipeline config: {e}")))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
        let mut config = Self::from_toml(&text)
            .map_err(|e| CopError::format(path, e.to_string()))?;
        // relative paths in the file are relative to the file
        let base = path.parent().unwrap_or(Path::new(""));
        if config.out_dir.is_relative() {
            config.out_dir = base.join(&config.out_dir);
        }
        if let Some(s) = &mut config.scenario_file {
            if s.is_relative() {
                *s = base.join(&*s);
            }
        }
        if let ModelSpec::External { path: p } = &mut config.model {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn train_seed(&self) -> u64 {
        self.seed.wrapping_add(TRAIN_SEED_OFFSET)
    }

    pub fn ga_config(&self) -> GaConfig {
        GaConfig {
            seed: self.seed.wrapping_add(GA_SEED_OFFSET),
            ..self.ga.clone()
        }
    }

    /// Checks that every stage input can be resolved, without computing
    /// anything.
    pub fn validate(&self) -> Result<()> {
        match (&self.scenario_file, self.scenario_seed) {
            (Some(p), _) if !p.is_file() => {
                return Err(CopError::Config(format!(
                    "scenario file {} does not exist",
                    p.display()
                )))
            }
            (None, None) => {
                return Err(CopError::Config(
                    "either a scenario file or a scenario seed is required".into(),
                ))
            }
            _ => {}
        }
        if self.scenario_file.is_none() {
            self.layout.validate()?;
        }
        self.grid.validate()?;
        self.grid.cardinality()?;
        if !(self.train_fraction > 0.0 && self.train_fraction <= 1.0) {
            return Err(CopError::Config(format!(
                "train fraction {} outside (0, 1]",
                self.train_fraction
            )));
        }
        if let ModelSpec::External { path } = &self.model {
            if !path.is_file() {
                return Err(CopError::Config(format!(
                    "external prediction table {} does not exist",
                    path.display()
                )));
            }
        }
        self.ga.validate()
    }
}

/// What happened to each stage, plus the headline numbers.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineOutcome {
    /// `(stage, reused)` in execution order.
    pub stages: Vec<(&'static str, bool)>,
    pub best_genes: Genes,
    /// Surrogate prediction at `best_genes`.
    pub best_predicted_db: f64,
    /// Simulated KPI at `best_genes`, `None` when every gathered user is in
    /// outage.
    pub best_simulated_db: Option<f64>,
    pub dataset_max_db: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct StageRecord {
    input: String,
    outputs: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
struct Manifest {
    stages: BTreeMap<String, StageRecord>,
}

struct Runner<'a> {
    dir: &'a Path,
    manifest: Manifest,
    stages: Vec<(&'static str, bool)>,
}

impl Runner<'_> {
    fn manifest_path(&self) -> PathBuf {
        self.dir.join(MANIFEST_FILE)
    }

    fn file_digest(&self, name: &str) -> Option<String> {
        fs::read(self.dir.join(name)).ok().map(|b| digest(&b))
    }

    /// Runs `body` unless the stage can be reused. Returns the digest of the
    /// first output, which downstream stages fold into their input digest.
    fn stage(
        &mut self,
        name: &'static str,
        input: String,
        outputs: &[&str],
        body: impl FnOnce(&Path) -> Result<()>,
    ) -> Result<String> {
        let reusable = self.manifest.stages.get(name).is_some_and(|rec| {
            rec.input == input
                && outputs.iter().all(|o| {
                    rec.outputs.get(*o).map(String::as_str) == self.file_digest(o).as_deref()
                })
        });
        if reusable {
            log::info!("stage {name}: reusing existing artifacts");
        } else {
            log::info!("stage {name}: running");
            // forget the stage first so an interrupted run is never reused
            self.manifest.stages.remove(name);
            body(self.dir).map_err(|e| CopError::Stage {
                stage: name,
                source: Box::new(e),
            })?;
            let mut record = StageRecord {
                input,
                outputs: BTreeMap::new(),
            };
            for o in outputs {
                let d = self.file_digest(o).ok_or_else(|| CopError::Stage {
                    stage: name,
                    source: Box::new(CopError::Config(format!("{o} was not written"))),
                })?;
                record.outputs.insert((*o).to_string(), d);
            }
            self.manifest.stages.insert(name.to_string(), record);
            self.save_manifest()?;
        }
        self.stages.push((name, reusable));
        Ok(self.manifest.stages[name].outputs[outputs[0]].clone())
    }

    fn save_manifest(&self) -> Result<()> {
        let path = self.manifest_path();
        let text = serde_json::to_string_pretty(&self.manifest)
            .map_err(|e| CopError::format(&path, e))?;
        fs::write(&path, text + "\n").map_err(|e| CopError::io(&path, e))
    }
}

fn digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn input_digest(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for p in parts {
        h.update((p.len() as u64).to_le_bytes());
        h.update(p.as_bytes());
    }
    hex::encode(h.finalize())
}

fn json<T: Serialize>(value: &T) -> String {
    serde_json::to_string(value).expect("config types serialize to JSON")
}

fn stage_error(stage: &'static str) -> impl FnOnce(CopError) -> CopError {
    move |e| CopError::Stage {
        stage,
        source: Box::new(e),
    }
}

/// Runs all stages into `config.out_dir`. Artifacts of completed stages are
/// kept when a later stage fails.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome> {
    config.validate()?;
    let dir = config.out_dir.as_path();
    fs::create_dir_all(dir).map_err(|e| CopError::io(dir, e))?;
    let manifest = fs::read_to_string(dir.join(MANIFEST_FILE))
        .ok()
        .and_then(|t| serde_json::from_str(&t).ok())
        .unwrap_or_default();
    let mut runner = Runner {
        dir,
        manifest,
        stages: Vec::new(),
    };

    let scenario_input = match &config.scenario_file {
        Some(path) => {
            let bytes = fs::read(path)
                .map_err(|e| CopError::io(path, e))
                .map_err(stage_error("scenario"))?;
            input_digest(&["file", &digest(&bytes)])
        }
        None => input_digest(&[
            "generate",
            &config.scenario_seed.unwrap_or_default().to_string(),
            &json(&config.layout),
        ]),
    };
    let scenario_digest = runner.stage("scenario", scenario_input, &[SCENARIO_FILE], |d| {
        let scenario = match &config.scenario_file {
            Some(path) => NetworkScenario::load(path)?,
            None => generate_scenario(config.scenario_seed.unwrap_or_default(), &config.layout)?,
        };
        scenario.save(d.join(SCENARIO_FILE))
    })?;
    let scenario = NetworkScenario::load(dir.join(SCENARIO_FILE)).map_err(stage_error("scenario"))?;

    let sweep_input = input_digest(&[&scenario_digest, &json(&config.grid)]);
    let dataset_digest = runner.stage("sweep", sweep_input, &[DATASET_FILE], |d| {
        run_sweep(&scenario, &config.grid, config.jobs)?.write_csv(d.join(DATASET_FILE))
    })?;
    let dataset = SweepDataset::read_csv(dir.join(DATASET_FILE)).map_err(stage_error("sweep"))?;

    let train_input = input_digest(&[
        &dataset_digest,
        &json(&config.model),
        &config.train_fraction.to_string(),
        &config.train_seed().to_string(),
        &match &config.model {
            ModelSpec::External { path } => fs::read(path).map(|b| digest(&b)).unwrap_or_default(),
            _ => String::new(),
        },
    ]);
    let model_digest = runner.stage("train", train_input, &[MODEL_FILE, REPORT_FILE], |d| {
        let rows = feature_rows(&dataset);
        let trained = train_model(&rows, &config.model, config.train_fraction, config.train_seed())?;
        trained.save(d.join(MODEL_FILE))?;
        let cell = EvaluationCell {
            model_name: trained.report.model_name.clone(),
            train_fraction: config.train_fraction,
            outcome: Ok(trained.report.clone()),
        };
        write_reports_csv(&[cell], d.join(REPORT_FILE))
    })?;
    let model = TrainedModel::load(dir.join(MODEL_FILE)).map_err(stage_error("train"))?;

    let ga_config = config.ga_config();
    let ga_input = input_digest(&[&model_digest, &json(&ga_config)]);
    runner.stage("optimize", ga_input, &[BEST_FILE, TRACE_FILE], |d| {
        let run = run_ga(&model, &ga_config, &GeneBounds::default())?;
        write_best_csv(&run.best.genes, run.best.score(), d.join(BEST_FILE))?;
        write_trace_csv(&run, d.join(TRACE_FILE))
    })?;
    let (best_genes, best_predicted_db) =
        read_best_csv(dir.join(BEST_FILE)).map_err(stage_error("optimize"))?;

    let config_at_best = MobilityConfig::from_genes(best_genes).map_err(stage_error("optimize"))?;
    let best_simulated_db = match scenario.evaluate_kpi(&config_at_best) {
        Ok(r) => Some(r.mean_sinr_db),
        Err(CopError::DegenerateKpi(_)) => None,
        Err(e) => return Err(stage_error("optimize")(e)),
    };
    Ok(PipelineOutcome {
        stages: runner.stages,
        best_genes,
        best_predicted_db,
        best_simulated_db,
        dataset_max_db: dataset.best().map(|r| r.mean_sinr_db),
    })
}

/// Reads the single-row file written by [`write_best_csv`].
pub fn read_best_csv(path: impl AsRef<Path>) -> Result<(Genes, f64)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| CopError::io(path, e))?;
    let row = text
        .lines()
        .nth(1)
        .ok_or_else(|| CopError::format(path, "missing data row"))?;
    let values = row
        .split(',')
        .map(|v| v.trim().parse::<f64>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| CopError::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: e.to_string(),
        })?;
    if values.len() != 7 {
        return Err(CopError::Parse {
            path: path.to_path_buf(),
            line: 2,
            message: format!("expected 7 values, found {}", values.len()),
        });
    }
    let genes = std::array::from_fn(|i| values[i]);
    Ok((genes, values[6]))
}
