use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use cloudplan::bench::{
    build_suite, fit_models, generate_demos, plan_with, read_trace, regenerate_report, render_dot, render_markdown,
    render_timing, run_benchmark, trace_path, write_trace, BenchmarkConfig, FittedModels, Method, RunRecord,
};
use cloudplan::data::io;
use cloudplan::scene::generate_scene;
use cloudplan::{Error, Result};

#[derive(Parser)]
#[command(
    name = "cloudplan",
    version,
    about = "Rearrangement planning over segmented point clouds"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// Benchmark config (TOML).
    #[arg(long, short)]
    config: PathBuf,
    /// Overrides the seed of the stage being run.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; defaults to the config's `output`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Materialize the benchmark suite: specs and initial clouds.
    GenScenes(Common),
    /// Generate the demonstration dataset.
    GenDemos(Common),
    /// Fit the suggesters and the deviation estimator.
    Fit(Common),
    /// Plan one suite scene and print the plan.
    Plan(Common),
    /// Run the whole suite for every configured method and seed.
    Bench(Common),
    /// Rebuild the reports from persisted run records.
    Report(Common),
    /// Write Graphviz files for every persisted search trace.
    VizTrace(Common),
}

/// Distinguishes "searched and found nothing" from other failures.
enum Failure {
    NoPlan(String),
    Other(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::NoPlanFound(m) => Failure::NoPlan(m),
            e => Failure::Other(e),
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::NoPlan(m)) => {
            eprintln!("no plan found: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Other(e)) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn setup(common: &Common) -> Result<(BenchmarkConfig, PathBuf)> {
    let cfg = BenchmarkConfig::load(&common.config)?;
    let out = match &common.out {
        Some(o) => o.clone(),
        None if cfg.output.as_os_str().is_empty() => {
            return Err(Error::Config("no output directory: set `output` or pass --out".into()))
        }
        None => cfg.output.clone(),
    };
    std::fs::create_dir_all(&out)?;
    Ok((cfg, out))
}

fn run(command: Command) -> std::result::Result<(), Failure> {
    match command {
        Command::GenScenes(c) => gen_scenes(&c)?,
        Command::GenDemos(c) => {
            let (mut cfg, out) = setup(&c)?;
            if let Some(s) = c.seed {
                cfg.demos.seed = s;
            }
            let ds = generate_demos(&cfg)?;
            let path = out.join("dataset.ndjson");
            io::write_dataset(&path, &ds)?;
            println!("{} transitions -> {}", ds.records.len(), path.display());
        }
        Command::Fit(c) => {
            let (mut cfg, out) = setup(&c)?;
            if let Some(s) = c.seed {
                cfg.mde.seed = s;
            }
            let models = fit(&cfg, &out)?;
            let modes: usize = models.placement.tables.iter().map(|t| t.modes.len()).sum();
            println!(
                "placement modes: {modes} over {} class pairs; deviation examples: {}",
                models.placement.tables.len(),
                models.mde.examples.len()
            );
            println!("models -> {}", out.join("models.json").display());
        }
        Command::Plan(c) => plan(&c)?,
        Command::Bench(c) => {
            let (mut cfg, out) = setup(&c)?;
            if let Some(s) = c.seed {
                cfg.seeds = vec![s];
            }
            let res = run_benchmark(&cfg, Some(&out))?;
            print!("{}", render_markdown(&res.report));
            print!("{}", render_timing(&res.timings));
        }
        Command::Report(c) => {
            let (_, out) = setup(&c)?;
            let report = regenerate_report(&out)?;
            print!("{}", render_markdown(&report));
        }
        Command::VizTrace(c) => viz(&c)?,
    }
    Ok(())
}

fn gen_scenes(c: &Common) -> Result<()> {
    let (mut cfg, out) = setup(c)?;
    if let Some(s) = c.seed {
        match &mut cfg.suite {
            cloudplan::bench::SuiteConfig::BlockStacking { seed, .. }
            | cloudplan::bench::SuiteConfig::StackedBussing { seed, .. } => *seed = s,
            cloudplan::bench::SuiteConfig::Explicit { .. } => {}
        }
    }
    let suite = build_suite(&cfg.suite, &cfg.family, &cfg.task)?;
    let names: Vec<String> = suite.iter().map(|s| s.name.clone()).collect();
    let clouds = suite
        .iter()
        .map(|s| generate_scene(&s.spec))
        .collect::<Result<Vec<_>>>()?;
    io::write_document(&out.join("suite.json"), io::SUITE_SCHEMA, &suite)?;
    io::write_clouds(&out.join("scenes.ndjson"), &names, &clouds)?;
    for s in &suite {
        println!("{} complexity {}", s.name, s.complexity);
    }
    Ok(())
}

/// Models from `out/models.json` when present, otherwise fitted (from
/// `out/dataset.ndjson` when present) and saved.
fn fit(cfg: &BenchmarkConfig, out: &Path) -> Result<FittedModels> {
    let data = out.join("dataset.ndjson");
    let ds = if data.exists() {
        io::read_dataset(&data)?
    } else {
        let ds = generate_demos(cfg)?;
        io::write_dataset(&data, &ds)?;
        ds
    };
    let models = fit_models(cfg, &ds)?;
    models.save(&out.join("models.json"))?;
    Ok(models)
}

fn plan(c: &Common) -> std::result::Result<(), Failure> {
    let (cfg, out) = setup(c)?;
    let models_path = out.join("models.json");
    let models = if models_path.exists() {
        FittedModels::load(&models_path)?
    } else {
        fit(&cfg, &out)?
    };
    let suite = build_suite(&cfg.suite, &cfg.family, &cfg.task)?;
    let index = match &cfg.plan.scene {
        Some(name) => suite
            .iter()
            .position(|s| &s.name == name)
            .ok_or_else(|| Error::Config(format!("no suite scene named `{name}`")))?,
        None => 0,
    };
    let scene = suite.get(index).ok_or_else(|| Error::Config("empty suite".into()))?;
    let method = cfg.plan.method.unwrap_or(Method::Spot);
    let seed = c.seed.or(cfg.seeds.first().copied()).unwrap_or(0);
    let params = cloudplan::bench::method_params(&cfg.search, method, seed, index);
    let cloud = generate_scene(&scene.spec)?;
    let result = plan_with(method, &cloud, &cfg.task, &models, &params)?;
    let record = RunRecord {
        scene: scene.name.clone(),
        complexity: scene.complexity,
        seed,
        method,
        planning_success: result.solved,
        execution_success: false,
        plan_length: result.plan.len(),
        generated: result.stats.generated,
        expanded: result.stats.expanded,
        goals: result.goals.len(),
        collisions: 0,
        drops: 0,
        error: None,
    };
    let path = out.join("plan").join(format!("{}_seed{seed}.ndjson", scene.name));
    write_trace(&path, &record, &result)?;
    println!(
        "{} seed {seed} {method}: generated {} expanded {} goals {} in {:.3}s",
        scene.name,
        result.stats.generated,
        result.stats.expanded,
        result.goals.len(),
        result.stats.seconds
    );
    if !result.solved {
        return Err(Failure::NoPlan(format!("{} with {method}", scene.name)));
    }
    for (i, a) in result.plan.iter().enumerate() {
        let t = a.transform.translation();
        let r = a.transform.rotation();
        println!(
            "{:>2}. move {} ({}) by [{:.4}, {:.4}, {:.4}] yaw {:.2} deg",
            i + 1,
            a.object,
            cloud.class_of(a.object).unwrap_or("?"),
            t.x,
            t.y,
            t.z,
            r[(1, 0)].atan2(r[(0, 0)]).to_degrees()
        );
    }
    println!("trace -> {}", path.display());
    Ok(())
}

fn viz(c: &Common) -> Result<()> {
    let (cfg, out) = setup(c)?;
    let suite = build_suite(&cfg.suite, &cfg.family, &cfg.task)?;
    let mut written = 0;
    for &method in &cfg.methods {
        for scene in &suite {
            for &seed in &cfg.seeds {
                let path = trace_path(&out, method, &scene.name, seed);
                if !path.exists() {
                    continue;
                }
                let (meta, trace) = read_trace(&path)?;
                let dir = out.join("viz").join(method.name());
                let stem = format!("{}_seed{seed}", scene.name);
                cloudplan::util::write_atomic(
                    &dir.join(format!("{stem}.dot")),
                    render_dot(&meta, &trace, false).as_bytes(),
                )?;
                cloudplan::util::write_atomic(
                    &dir.join(format!("{stem}_plan.dot")),
                    render_dot(&meta, &trace, true).as_bytes(),
                )?;
                written += 1;
            }
        }
    }
    if written == 0 {
        return Err(Error::Config(format!(
            "no traces under {}; run `bench` first",
            out.join("traces").display()
        )));
    }
    println!("{written} traces rendered -> {}", out.join("viz").display());
    Ok(())
}
