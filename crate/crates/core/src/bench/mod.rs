//! Config-driven end-to-end runs: demonstrations, fitted models, planning,
//! execution in the kinematic scene, and aggregated reports.

mod report;
mod suite;
mod viz;

pub use report::{build_report, render_markdown, render_timing, MethodSummary, Rate, Report};
pub use suite::{all_stackings, build_suite, symbolic_steps, SuiteConfig, SuiteScene};
pub use viz::render_dot;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::io::{self, MODELS_SCHEMA, RUNS_SCHEMA, TRACE_SCHEMA};
use crate::data::{generate_demonstrations, DemoPolicy, TransitionDataset};
use crate::error::{Error, Result};
use crate::geom::{transform_object, Action, SegmentedCloud};
use crate::mde::{fit_mde, suggested_transitions, MdeConfig, MdeModel};
use crate::scene::{execute_plan, generate_scene, SceneSpec, TaskKind};
use crate::search::{
    astar_search, beam_search, random_rollouts, SearchContext, SearchParams, SearchResult, Suggesters, TraceNode,
};
use crate::suggest::{
    fit_object_suggester, fit_placement_suggester, ObjectPrior, ObjectSuggesterModel, PlacementSuggesterModel,
    UniformObjects,
};
use crate::tasks::{evaluate_task, TaskSpec};
use crate::util::{mix_seed, write_atomic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Spot,
    Beam,
    RandomRollouts,
    NoObjectSuggester,
    NoMde,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Spot,
        Method::Beam,
        Method::RandomRollouts,
        Method::NoObjectSuggester,
        Method::NoMde,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Spot => "spot",
            Method::Beam => "beam",
            Method::RandomRollouts => "random_rollouts",
            Method::NoObjectSuggester => "no_object_suggester",
            Method::NoMde => "no_mde",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DemoConfig {
    pub count: usize,
    pub seed: u64,
    /// Defaults to the scripted policy for the task kind.
    #[serde(default)]
    pub policy: Option<DemoPolicy>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MdeSetup {
    /// Demonstration observations used as MDE rollout starts.
    pub scenes: usize,
    /// Suggestions rolled out per object.
    pub k: usize,
    pub seed: u64,
    /// Defaults to the per-task hyperparameters.
    #[serde(default)]
    pub config: Option<MdeConfig>,
}

/// The single instance solved by `plan`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct PlanSetup {
    /// Suite scene name; the first scene when absent.
    #[serde(default)]
    pub scene: Option<String>,
    #[serde(default)]
    pub method: Option<Method>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    pub name: String,
    /// Object family of the demonstration scenes.
    pub family: String,
    pub task: TaskSpec,
    pub suite: SuiteConfig,
    pub demos: DemoConfig,
    pub mde: MdeSetup,
    #[serde(default)]
    pub search: SearchParams,
    pub methods: Vec<Method>,
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub output: PathBuf,
    /// Write one search trace file per run.
    #[serde(default = "yes")]
    pub write_traces: bool,
    #[serde(default)]
    pub plan: PlanSetup,
}

fn yes() -> bool {
    true
}

impl BenchmarkConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("no seeds".into()));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("no methods".into()));
        }
        if self.demos.count == 0 || self.mde.k == 0 || self.mde.scenes == 0 {
            return Err(Error::Config(
                "demo count, MDE scenes, and MDE k must be positive".into(),
            ));
        }
        self.task.validate().map_err(|e| Error::Config(e.to_string()))?;
        self.search.validate().map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn task_kind(&self) -> TaskKind {
        self.task.kind()
    }

    pub fn demo_policy(&self) -> DemoPolicy {
        self.demos.policy.clone().unwrap_or_else(|| match self.task_kind() {
            TaskKind::BlockStacking => DemoPolicy::block_stacking(),
            TaskKind::TableBussing => DemoPolicy::table_bussing(),
        })
    }

    pub fn mde_config(&self) -> MdeConfig {
        self.mde.config.unwrap_or_else(|| MdeConfig::for_task(self.task_kind()))
    }
}

/// Suggesters and deviation estimator fitted from one dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedModels {
    pub object: ObjectSuggesterModel,
    pub placement: PlacementSuggesterModel,
    pub mde: MdeModel,
}

impl FittedModels {
    pub fn save(&self, path: &Path) -> Result<()> {
        io::write_document(path, MODELS_SCHEMA, self)
    }

    pub fn load(path: &Path) -> Result<Self> {
        io::read_document(path, MODELS_SCHEMA)
    }
}

pub fn generate_demos(cfg: &BenchmarkConfig) -> Result<TransitionDataset> {
    let spec = SceneSpec::random_family(&cfg.family, vec![], cfg.demos.seed)?;
    generate_demonstrations(&spec, &cfg.demo_policy(), cfg.demos.count, cfg.demos.seed)
}

/// Fits both suggesters, then the deviation estimator on `k` suggested
/// placements per object rolled out from the first demonstration scenes.
pub fn fit_models(cfg: &BenchmarkConfig, dataset: &TransitionDataset) -> Result<FittedModels> {
    let object = fit_object_suggester(dataset)?;
    let placement = fit_placement_suggester(dataset)?;
    let scenes: Vec<SegmentedCloud> = dataset
        .records
        .iter()
        .take(cfg.mde.scenes)
        .map(|r| r.observation.clone())
        .collect();
    let transitions = suggested_transitions(&scenes, &placement, cfg.mde.k, cfg.mde.seed)?;
    let mde = fit_mde(&transitions, &cfg.task.contact, cfg.mde_config())?;
    Ok(FittedModels { object, placement, mde })
}

/// Outcome of one (scene, seed, method) run. Wall-clock time lives in
/// [`TimingRecord`] so run files stay reproducible.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scene: String,
    pub complexity: usize,
    pub seed: u64,
    pub method: Method,
    pub planning_success: bool,
    pub execution_success: bool,
    pub plan_length: usize,
    pub generated: usize,
    pub expanded: usize,
    pub goals: usize,
    pub collisions: usize,
    pub drops: usize,
    #[serde(default)]
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TimingRecord {
    pub scene: String,
    pub seed: u64,
    pub method: Method,
    pub seconds: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub scene: String,
    pub seed: u64,
    pub method: Method,
    pub selected: Option<usize>,
    pub goals: Vec<usize>,
    pub plan: Vec<Action>,
}

/// Search parameters of `method` for a run.
pub fn method_params(base: &SearchParams, method: Method, run_seed: u64, scene_index: usize) -> SearchParams {
    let mut p = base.clone();
    p.seed = mix_seed(run_seed, scene_index as u64);
    if method == Method::NoMde {
        p.w_d = 0.0;
    }
    p
}

/// Plans `cloud` with `method`.
pub fn plan_with(
    method: Method,
    cloud: &SegmentedCloud,
    task: &TaskSpec,
    models: &FittedModels,
    params: &SearchParams,
) -> Result<SearchResult> {
    let objects: &dyn ObjectPrior = match method {
        Method::NoObjectSuggester => &UniformObjects,
        _ => &models.object,
    };
    let mde = match method {
        Method::NoMde | Method::RandomRollouts => None,
        _ => Some(&models.mde),
    };
    let ctx = SearchContext {
        task,
        suggesters: Suggesters {
            objects,
            placements: &models.placement,
        },
        mde,
        params,
    };
    match method {
        Method::Beam => beam_search(cloud, &ctx),
        Method::RandomRollouts => random_rollouts(cloud, &ctx),
        _ => astar_search(cloud, &ctx),
    }
}

/// Whether replaying `plan` with the planner's own model reaches the goal.
pub fn replay_reaches_goal(cloud: &SegmentedCloud, plan: &[Action], task: &TaskSpec) -> Result<bool> {
    let mut cur = cloud.clone();
    for a in plan {
        cur = transform_object(&cur, a)?;
    }
    Ok(evaluate_task(&cur, task)?.is_goal)
}

pub struct RunOutput {
    pub record: RunRecord,
    pub timing: TimingRecord,
    pub search: Option<SearchResult>,
}

/// One run: plan, check the plan against the planner's model, then execute
/// it in the kinematic scene. Execution succeeds when the goal holds
/// afterwards and no placement collided.
pub fn run_one(
    cfg: &BenchmarkConfig,
    models: &FittedModels,
    scene_index: usize,
    scene: &SuiteScene,
    seed: u64,
    method: Method,
) -> RunOutput {
    let mut record = RunRecord {
        scene: scene.name.clone(),
        complexity: scene.complexity,
        seed,
        method,
        planning_success: false,
        execution_success: false,
        plan_length: 0,
        generated: 0,
        expanded: 0,
        goals: 0,
        collisions: 0,
        drops: 0,
        error: None,
    };
    let mut timing = TimingRecord {
        scene: scene.name.clone(),
        seed,
        method,
        seconds: 0.0,
    };
    let outcome = (|| -> Result<SearchResult> {
        let cloud = generate_scene(&scene.spec)?;
        let params = method_params(&cfg.search, method, seed, scene_index);
        let result = plan_with(method, &cloud, &cfg.task, models, &params)?;
        record.generated = result.stats.generated;
        record.expanded = result.stats.expanded;
        record.goals = result.goals.len();
        timing.seconds = result.stats.seconds;
        if result.solved {
            record.plan_length = result.plan.len();
            record.planning_success = replay_reaches_goal(&cloud, &result.plan, &cfg.task)?;
            let exec = execute_plan(&cloud, &result.plan, &cfg.task.contact)?;
            record.collisions = exec.collisions;
            record.drops = exec.drops;
            record.execution_success =
                record.planning_success && exec.collisions == 0 && evaluate_task(&exec.final_cloud, &cfg.task)?.is_goal;
        }
        Ok(result)
    })();
    match outcome {
        Ok(search) => RunOutput {
            record,
            timing,
            search: Some(search),
        },
        Err(e) => {
            record.error = Some(e.to_string());
            RunOutput {
                record,
                timing,
                search: None,
            }
        }
    }
}

/// Everything a benchmark produced.
pub struct BenchmarkOutput {
    pub runs: Vec<RunRecord>,
    pub timings: Vec<TimingRecord>,
    pub report: Report,
}

pub fn trace_path(dir: &Path, method: Method, scene: &str, seed: u64) -> PathBuf {
    dir.join("traces")
        .join(method.name())
        .join(format!("{scene}_seed{seed}.ndjson"))
}

/// Runs every (method, scene, seed) combination, in parallel, and
/// aggregates in that fixed order. With `out`, writes the dataset, models,
/// run records, timings, traces, and reports there.
pub fn run_benchmark(cfg: &BenchmarkConfig, out: Option<&Path>) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let suite = build_suite(&cfg.suite, &cfg.family, &cfg.task)?;
    let dataset = generate_demos(cfg)?;
    let models = fit_models(cfg, &dataset)?;
    if let Some(dir) = out {
        io::write_dataset(&dir.join("dataset.ndjson"), &dataset)?;
        models.save(&dir.join("models.json"))?;
    }
    run_suite(cfg, &suite, &models, out)
}

/// The run and report half of [`run_benchmark`], with models given.
pub fn run_suite(
    cfg: &BenchmarkConfig,
    suite: &[SuiteScene],
    models: &FittedModels,
    out: Option<&Path>,
) -> Result<BenchmarkOutput> {
    let mut jobs = Vec::new();
    for &method in &cfg.methods {
        for (i, scene) in suite.iter().enumerate() {
            for &seed in &cfg.seeds {
                jobs.push((method, i, scene, seed));
            }
        }
    }
    let results: Vec<Result<(RunRecord, TimingRecord)>> = jobs
        .par_iter()
        .map(|(method, i, scene, seed)| {
            let run = run_one(cfg, models, *i, scene, *seed, *method);
            if let (Some(dir), Some(search), true) = (out, &run.search, cfg.write_traces) {
                write_trace(&trace_path(dir, *method, &scene.name, *seed), &run.record, search)?;
            }
            Ok((run.record, run.timing))
        })
        .collect();
    let mut runs = Vec::with_capacity(results.len());
    let mut timings = Vec::with_capacity(results.len());
    for r in results {
        let (run, timing) = r?;
        runs.push(run);
        timings.push(timing);
    }
    let report = build_report(&cfg.name, &runs);
    if let Some(dir) = out {
        io::write_ndjson(&dir.join("runs.ndjson"), RUNS_SCHEMA, &cfg.name, &runs)?;
        io::write_ndjson(&dir.join("timings.ndjson"), RUNS_SCHEMA, &cfg.name, &timings)?;
        write_reports(dir, &report, &timings)?;
    }
    Ok(BenchmarkOutput { runs, timings, report })
}

pub fn write_trace(path: &Path, record: &RunRecord, search: &SearchResult) -> Result<()> {
    let meta = TraceMeta {
        scene: record.scene.clone(),
        seed: record.seed,
        method: record.method,
        selected: search.selected,
        goals: search.goals.clone(),
        plan: search.plan.clone(),
    };
    io::write_ndjson(path, TRACE_SCHEMA, &meta, &search.trace)
}

pub fn read_trace(path: &Path) -> Result<(TraceMeta, Vec<TraceNode>)> {
    io::read_ndjson(path, TRACE_SCHEMA)
}

/// Writes `report.md` and `report.json` (reproducible) and `timing.md`.
pub fn write_reports(dir: &Path, report: &Report, timings: &[TimingRecord]) -> Result<()> {
    write_atomic(&dir.join("report.md"), render_markdown(report).as_bytes())?;
    let json = serde_json::to_vec_pretty(report).map_err(|e| Error::Config(e.to_string()))?;
    write_atomic(&dir.join("report.json"), &json)?;
    write_atomic(&dir.join("timing.md"), render_timing(timings).as_bytes())?;
    Ok(())
}

/// Rebuilds the reports from a run directory's persisted records.
pub fn regenerate_report(dir: &Path) -> Result<Report> {
    let (name, runs): (String, Vec<RunRecord>) = io::read_ndjson(&dir.join("runs.ndjson"), RUNS_SCHEMA)?;
    let timings: Vec<TimingRecord> =
        match io::read_ndjson::<String, TimingRecord>(&dir.join("timings.ndjson"), RUNS_SCHEMA) {
            Ok((_, t)) => t,
            Err(Error::Io(_)) => Vec::new(),
            Err(e) => return Err(e),
        };
    let report = build_report(&name, &runs);
    write_reports(dir, &report, &timings)?;
    Ok(report)
}
