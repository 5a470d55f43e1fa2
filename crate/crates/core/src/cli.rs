//! Command-line front end.
//!
//! ```text
//! diffscene gen-scenes   --count N --seed S --out DIR
//! diffscene gen-tasks    --count N --seed S --out FILE
//! diffscene train-policy --scenes DIR --out FILE
//! diffscene run          --tasks FILE --policy FILE [--ablation MODE] [--render]
//! ```
//!
//! Every command accepts `--config FILE` (JSON) and repeated
//! `--set key.path=value` overrides. Task failures are part of the report;
//! only infrastructure problems (bad input, I/O) give a nonzero exit code.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::Value;

use crate::bench::{
    build_suite, derive_seed, episodes_for_tasks, prepare_all, run_ablation_matrix, run_suite,
    summarize, thread_pool, threads_from_env, write_ablation_report, write_suite_report, Driver,
    Metrics, PreparedEpisode,
};
use crate::config::{parse_override, RunConfig};
use crate::control::{AblationMode, PolicyParams};
use crate::error::{Error, Result};
use crate::imitation::{collect_from_scenes, train_bc, TrainReport};
use crate::planner::{parse_task_file, write_task_file, TaskSpec};
use crate::world::{generate_scene, load_scene, save_scene, Catalog, GridScene};

#[derive(Debug, Parser)]
#[command(
    name = "diffscene",
    version,
    about = "Semantic scene maps and coarse-to-fine control in a grid world"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON configuration file; command-line values take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Override one configuration value, e.g. `--set map.m=60`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,
    /// Worker threads (default: DISCO_THREADS, then all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write N generated scenes as JSON files.
    GenScenes {
        #[arg(long)]
        count: usize,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a task file of solvable tasks cycling through all task types.
    /// Run it with the same seed to get the same episodes.
    GenTasks {
        #[arg(long)]
        count: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Label every scene in DIR with the expert and fit the fine policy.
    TrainPolicy {
        #[arg(long)]
        scenes: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the tasks of FILE and write report.csv and report.json.
    Run {
        #[arg(long)]
        tasks: PathBuf,
        /// Required unless the mode runs without fine control.
        #[arg(long)]
        policy: Option<PathBuf>,
        /// One of full, no-differentiable, no-nav-affordance,
        /// no-interactive-affordance, no-coarse, no-fine, expert or all.
        #[arg(long)]
        ablation: Option<String>,
        /// Write one PPM map render per step.
        #[arg(long)]
        render: bool,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory (default `report`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Parse arguments, run, and map errors to the exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(2)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

/// Resolve the configuration and run the command inside a sized pool.
pub fn execute(cli: Cli) -> Result<()> {
    let mut overrides = cli
        .common
        .overrides
        .iter()
        .map(|s| parse_override(s))
        .collect::<Result<Vec<_>>>()?;
    let seed = match &cli.command {
        Command::GenScenes { seed, .. }
        | Command::GenTasks { seed, .. }
        | Command::TrainPolicy { seed, .. }
        | Command::Run { seed, .. } => *seed,
    };
    if let Some(s) = seed {
        overrides.push(("seed".into(), s.to_string()));
    }
    let mut cfg = RunConfig::resolve(cli.common.config.as_deref(), &overrides)?;
    cfg.threads = match cli.common.threads {
        Some(n) => Some(n),
        None => cfg.threads.or(threads_from_env()?),
    };
    cfg.validate()?;
    let pool = thread_pool(cfg.threads)?;
    pool.install(|| match cli.command {
        Command::GenScenes { count, out, .. } => gen_scenes(&cfg, count, &out).map(|_| ()),
        Command::GenTasks { count, out, .. } => {
            if let Some(n) = count {
                cfg.bench.episodes = n;
            }
            gen_tasks(&cfg, &out).map(|_| ())
        }
        Command::TrainPolicy { scenes, out, .. } => {
            cfg.paths.scenes = Some(scenes);
            cfg.paths.policy = Some(out);
            train_policy(&cfg).map(|_| ())
        }
        Command::Run {
            tasks,
            policy,
            ablation,
            render,
            out,
            ..
        } => {
            cfg.paths.tasks = Some(tasks);
            if policy.is_some() {
                cfg.paths.policy = policy;
            }
            if let Some(a) = ablation {
                cfg.ablation = a;
            }
            if out.is_some() {
                cfg.paths.out = out;
            }
            run(&cfg, render).map(|_| ())
        }
    })
}

/// Scene file name for index `i`.
pub fn scene_file_name(i: usize) -> String {
    format!("scene_{i:04}.json")
}

/// Generate `count` scenes; scene `i` uses seed `derive_seed(cfg.seed, i)`.
pub fn gen_scenes(cfg: &RunConfig, count: usize, out: &Path) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(out)?;
    let catalog = Arc::new(Catalog::default());
    let scenes = (0..count)
        .into_par_iter()
        .map(|i| generate_scene(&cfg.scene, catalog.clone(), derive_seed(cfg.seed, i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut paths = Vec::with_capacity(count);
    for (i, scene) in scenes.iter().enumerate() {
        let path = out.join(scene_file_name(i));
        save_scene(&path, scene)?;
        paths.push(path);
    }
    println!("wrote {count} scenes to {}", out.display());
    Ok(paths)
}

/// Draw a seeded suite and write its tasks.
pub fn gen_tasks(cfg: &RunConfig, out: &Path) -> Result<Vec<TaskSpec>> {
    let catalog = Arc::new(Catalog::default());
    let preps = build_suite(&cfg.suite_config(), &cfg.bench_config(), catalog)?;
    let tasks: Vec<TaskSpec> = preps.into_iter().map(|p| p.spec.task).collect();
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    write_task_file(out, &tasks)?;
    println!(
        "wrote {} tasks to {} (run them with --seed {})",
        tasks.len(),
        out.display(),
        cfg.seed
    );
    Ok(tasks)
}

/// Scene files of `dir` in name order.
pub fn load_scene_dir(dir: &Path) -> Result<Vec<GridScene>> {
    let mut files: Vec<PathBuf> = std::fs::read_dir(dir)?
        .map(|e| e.map(|e| e.path()))
        .collect::<std::io::Result<Vec<_>>>()?
        .into_iter()
        .filter(|p| p.extension().is_some_and(|x| x == "json"))
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(Error::Config(format!(
            "no scene files (*.json) in {}",
            dir.display()
        )));
    }
    files
        .iter()
        .map(|p| load_scene(p).map_err(|e| Error::Parse(format!("{}: {e}", p.display()))))
        .collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainMetrics {
    pub config: Value,
    pub scenes: usize,
    pub skipped_objects: usize,
    pub report: TrainReport,
}

/// Metrics file written next to the policy: `policy.json` gives
/// `policy.metrics.json`.
pub fn metrics_path(policy: &Path) -> PathBuf {
    policy.with_extension("metrics.json")
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Collect the expert dataset from `cfg.paths.scenes`, train, and write the
/// policy to `cfg.paths.policy` with its metrics alongside.
pub fn train_policy(cfg: &RunConfig) -> Result<TrainMetrics> {
    let dir = cfg
        .paths
        .scenes
        .as_deref()
        .ok_or_else(|| Error::Config("no scene directory given".into()))?;
    let out = cfg
        .paths
        .policy
        .as_deref()
        .ok_or_else(|| Error::Config("no policy output path given".into()))?;
    let scenes = load_scene_dir(dir)?;
    let n_classes = scenes[0].catalog.len();
    if scenes.iter().any(|s| s.catalog != scenes[0].catalog) {
        return Err(Error::Config("scenes use different catalogs".into()));
    }
    let ds = collect_from_scenes(&scenes, &cfg.dataset_config());
    let (params, report) = train_bc(&ds, n_classes, &cfg.train_config())?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    if let Some(parent) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent)?;
    }
    params.save(out)?;
    let metrics = TrainMetrics {
        config: cfg.echo(),
        scenes: scenes.len(),
        skipped_objects: ds.skipped,
        report,
    };
    write_json(&metrics_path(out), &metrics)?;
    let heldout = metrics
        .report
        .heldout_accuracy
        .map_or("n/a".to_string(), |a| format!("{a:.4}"));
    println!(
        "trained on {} rows from {} scenes: train accuracy {:.4}, heldout accuracy {heldout}",
        metrics.report.train_rows, metrics.scenes, metrics.report.train_accuracy
    );
    Ok(metrics)
}

/// What a `run` produced.
#[derive(Debug, Clone)]
pub enum RunOutcome {
    Single { mode: String, metrics: Metrics },
    Matrix(Vec<(String, Metrics)>),
}

fn print_metrics(mode: &str, m: &Metrics) {
    println!(
        "{mode:<26} episodes {:>4}  SR {:.3}  GC {:.3}  PLWSR {:.3}  PLWGC {:.3}",
        m.episodes, m.sr, m.gc, m.plwsr, m.plwgc
    );
}

fn prepare_tasks(
    cfg: &RunConfig,
    tasks: &[TaskSpec],
    catalog: Arc<Catalog>,
) -> Result<Vec<PreparedEpisode>> {
    prepare_all(
        &episodes_for_tasks(tasks, cfg.seed),
        &cfg.bench_config(),
        catalog,
    )
    .map_err(|e| match e {
        Error::NoSolvableScene(what) => Error::NoSolvableScene(format!(
            "{what}; task files from gen-tasks only solve with the seed they were drawn with"
        )),
        other => other,
    })
}

/// Run the task file of `cfg.paths.tasks` and write the reports into
/// `cfg.paths.out` (default `report`).
pub fn run(cfg: &RunConfig, render: bool) -> Result<RunOutcome> {
    let tasks_path = cfg
        .paths
        .tasks
        .as_deref()
        .ok_or_else(|| Error::Config("no task file given".into()))?;
    let out = cfg
        .paths
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("report"));
    let catalog = Arc::new(Catalog::default());
    let tasks = parse_task_file(tasks_path)?;
    for t in &tasks {
        t.validate(&catalog)?;
    }
    let modes: Vec<AblationMode> = match cfg.ablation.as_str() {
        "expert" => Vec::new(),
        "all" => AblationMode::NAMES
            .iter()
            .map(|n| AblationMode::from_name(n))
            .collect::<Result<_>>()?,
        name => vec![AblationMode::from_name(name)?],
    };
    let needs_policy = modes.iter().any(|m| m.fine);
    let policy = match (&cfg.paths.policy, needs_policy) {
        (Some(p), true) => Some(PolicyParams::load(p)?),
        (None, true) => return Err(Error::Config("this mode needs --policy".into())),
        (_, false) => None,
    };
    if let Some(p) = &policy {
        if p.n_classes != catalog.len() {
            return Err(Error::Parse(format!(
                "policy has {} class heads but the catalog has {} classes",
                p.n_classes,
                catalog.len()
            )));
        }
    }
    let bench = cfg.bench_config();
    let preps = prepare_tasks(cfg, &tasks, catalog)?;
    let render_dir = render.then(|| out.join("renders"));
    let echo = cfg.echo();
    if cfg.ablation == "all" {
        let report = run_ablation_matrix(
            &preps,
            &bench,
            &modes,
            policy.as_ref(),
            render_dir.as_deref(),
        )?;
        write_ablation_report(&out, &echo, &report)?;
        let rows: Vec<(String, Metrics)> = report
            .modes
            .iter()
            .map(|m| (m.mode.clone(), m.metrics))
            .collect();
        for (mode, m) in &rows {
            print_metrics(mode, m);
        }
        println!("wrote {}", out.join("ablation.csv").display());
        return Ok(RunOutcome::Matrix(rows));
    }
    let driver = modes.first().map_or(Driver::Expert, |&m| Driver::Agent(m));
    let results = if tasks.is_empty() {
        Vec::new()
    } else {
        run_suite(
            &preps,
            &bench,
            driver,
            policy.as_ref(),
            render_dir.as_deref(),
        )?
    };
    if results.is_empty() {
        return Err(Error::EmptyResults);
    }
    let summary = summarize(&echo, driver.name(), &results)?;
    write_suite_report(&out, &summary)?;
    print_metrics(driver.name(), &summary.metrics);
    println!("wrote {}", out.join("report.csv").display());
    Ok(RunOutcome::Single {
        mode: driver.name().to_string(),
        metrics: summary.metrics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_parse() {
        let cli = Cli::try_parse_from([
            "diffscene",
            "--set",
            "map.m=60",
            "run",
            "--tasks",
            "t.json",
            "--policy",
            "p.json",
            "--ablation",
            "no-coarse",
            "--render",
        ])
        .unwrap();
        assert_eq!(cli.common.overrides, vec!["map.m=60"]);
        match cli.command {
            Command::Run {
                ablation, render, ..
            } => {
                assert_eq!(ablation.as_deref(), Some("no-coarse"));
                assert!(render);
            }
            other => panic!("parsed {other:?}"),
        }
    }

    #[test]
    fn metrics_file_sits_next_to_the_policy() {
        assert_eq!(
            metrics_path(Path::new("out/policy.json")),
            PathBuf::from("out/policy.metrics.json")
        );
    }

    #[test]
    fn empty_scene_dir_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        assert!(load_scene_dir(dir.path()).is_err());
    }
}
