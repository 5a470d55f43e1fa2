//! CSV and JSON reports. Every report carries the effective configuration
//! it was produced with.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::episode::EpisodeResult;
use super::metrics::{failure_counts, metrics, Metrics};
use super::suite::AblationReport;
use crate::error::{Error, Result};

const CONFIG_PREFIX: &str = "# config ";

/// One CSV line per episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub mode: String,
    pub index: usize,
    pub seed: u64,
    pub scene_seed: u64,
    pub task: String,
    pub task_type: String,
    pub success: bool,
    pub conditions_met: usize,
    pub conditions_total: usize,
    pub gc: f64,
    pub agent_steps: usize,
    pub expert_steps: usize,
    pub path_weight: f64,
    pub subgoals_done: usize,
    pub failure: String,
}

impl ResultRow {
    fn new(mode: &str, index: usize, r: &EpisodeResult) -> Self {
        ResultRow {
            mode: mode.to_string(),
            index,
            seed: r.seed,
            scene_seed: r.scene_seed,
            task: r.task.clone(),
            task_type: r.task_type.name().to_string(),
            success: r.success,
            conditions_met: r.conditions_met,
            conditions_total: r.conditions_total,
            gc: r.goal_fraction(),
            agent_steps: r.agent_steps,
            expert_steps: r.expert_steps,
            path_weight: r.path_weight(),
            subgoals_done: r.subgoals.iter().filter(|s| s.success).count(),
            failure: r.failure.map_or(String::new(), |f| f.name().to_string()),
        }
    }
}

fn csv_with_config(config: &Value, rows: impl IntoIterator<Item = ResultRow>) -> Result<String> {
    let mut out = format!("{CONFIG_PREFIX}{}\n", serde_json::to_string(config)?).into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        for row in rows {
            w.serialize(row)?;
        }
        w.flush()?;
    }
    String::from_utf8(out).map_err(|e| Error::Parse(e.to_string()))
}

/// Per-episode CSV preceded by a `# config {...}` comment line.
pub fn results_csv(config: &Value, driver: &str, results: &[EpisodeResult]) -> Result<String> {
    csv_with_config(
        config,
        results
            .iter()
            .enumerate()
            .map(|(i, r)| ResultRow::new(driver, i, r)),
    )
}

/// Rows of every mode, mode by mode.
pub fn ablation_csv(config: &Value, report: &AblationReport) -> Result<String> {
    csv_with_config(
        config,
        report.modes.iter().flat_map(|m| {
            m.results
                .iter()
                .enumerate()
                .map(|(i, r)| ResultRow::new(&m.mode, i, r))
        }),
    )
}

/// Parse a report CSV back into its config and rows.
pub fn read_results_csv(text: &str) -> Result<(Value, Vec<ResultRow>)> {
    let first = text.lines().next().unwrap_or("");
    let config = match first.strip_prefix(CONFIG_PREFIX) {
        Some(json) => serde_json::from_str(json)?,
        None => return Err(Error::Parse("report csv: missing config line".into())),
    };
    let mut r = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let rows = r
        .deserialize()
        .collect::<std::result::Result<Vec<ResultRow>, _>>()?;
    Ok((config, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub config: Value,
    pub driver: String,
    pub metrics: Metrics,
    pub by_task_type: BTreeMap<String, Metrics>,
    pub failures: BTreeMap<String, usize>,
    pub episodes: Vec<EpisodeResult>,
}

pub fn summarize(config: &Value, driver: &str, results: &[EpisodeResult]) -> Result<SuiteSummary> {
    let mut groups: BTreeMap<String, Vec<EpisodeResult>> = BTreeMap::new();
    for r in results {
        groups
            .entry(r.task_type.name().to_string())
            .or_default()
            .push(r.clone());
    }
    let by_task_type = groups
        .iter()
        .map(|(k, v)| Ok((k.clone(), metrics(v)?)))
        .collect::<Result<_>>()?;
    Ok(SuiteSummary {
        config: config.clone(),
        driver: driver.to_string(),
        metrics: metrics(results)?,
        by_task_type,
        failures: failure_counts(results),
        episodes: results.to_vec(),
    })
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

/// Write `report.csv` and `report.json` into `dir`.
pub fn write_suite_report(dir: &Path, summary: &SuiteSummary) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("report.csv"),
        results_csv(&summary.config, &summary.driver, &summary.episodes)?,
    )?;
    write_json(&dir.join("report.json"), summary)
}

#[derive(Serialize)]
struct AblationSummary<'a> {
    config: &'a Value,
    modes: Vec<ModeSummary<'a>>,
    deltas: &'a [super::suite::ModeDelta],
}

#[derive(Serialize)]
struct ModeSummary<'a> {
    mode: &'a str,
    ablation: &'a crate::control::AblationMode,
    metrics: &'a Metrics,
    failures: &'a BTreeMap<String, usize>,
}

/// Write `ablation.csv` (every episode of every mode) and `ablation.json`
/// (per-mode metrics and pairwise deltas) into `dir`.
pub fn write_ablation_report(dir: &Path, config: &Value, report: &AblationReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("ablation.csv"), ablation_csv(config, report)?)?;
    let summary = AblationSummary {
        config,
        modes: report
            .modes
            .iter()
            .map(|m| ModeSummary {
                mode: &m.mode,
                ablation: &m.ablation,
                metrics: &m.metrics,
                failures: &m.failures,
            })
            .collect(),
        deltas: &report.deltas,
    };
    write_json(&dir.join("ablation.json"), &summary)
}
