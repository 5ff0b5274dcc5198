//! Experiment files and the operations behind the command-line tool.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ExperimentError, LayoutError, ModelError};
use crate::kit_layout::{arrange_kit, layout_to_json, layout_to_svg, ArrangedKit, CostTerms, KitLayout};
use crate::planner::{KitCache, PlannerConfig};
use crate::sim::{run_simulation_cached, sweep, CellSummary, SimConfig, SimMetrics, SweepSpec, TraceEvent};
use crate::stats::{mean, std_dev};
use crate::strategies::StrategyKind;
use crate::task_model::{load_scenario, PartTypeId, Scenario, TaskId, Violation};

pub const EXAMPLE_EXPERIMENT: &str = include_str!("../configs/example_experiment.toml");
pub const SHOPFLOOR_SWEEP: &str = include_str!("../configs/shopfloor_sweep.toml");

/// Top-level experiment file (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Scenario JSON path, relative to the experiment file, or `bundled:<name>`.
    pub scenario: String,
    #[serde(default = "all_strategies")]
    pub strategies: Vec<StrategyKind>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub sim: SimSection,
    #[serde(default)]
    pub planner: PlannerConfig,
    #[serde(default)]
    pub sweep: Option<SweepSection>,
}

fn all_strategies() -> Vec<StrategyKind> {
    StrategyKind::ALL.to_vec()
}

fn one() -> usize {
    1
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub num_units: usize,
    pub mat_s: BTreeMap<PartTypeId, f64>,
    pub mttf_s: BTreeMap<String, f64>,
    pub repair_time_s: f64,
    pub delivery_time_s: f64,
    pub pipeline_units: bool,
}

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            num_units: d.num_units,
            mat_s: d.mat_by_part_type,
            mttf_s: d.mttf_by_machine,
            repair_time_s: d.repair_time,
            delivery_time_s: d.delivery_time,
            pipeline_units: d.pipeline_units,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default = "default_governed")]
    pub governed_types: Vec<PartTypeId>,
    pub mat_s: Vec<f64>,
    pub mttf_s: Vec<f64>,
}

fn default_governed() -> Vec<PartTypeId> {
    vec!["leg".into(), "foot".into()]
}

/// Command-line overrides; `None` keeps the file's value.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub strategy: Option<StrategyKind>,
    pub replications: Option<usize>,
    pub trace: bool,
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self, ExperimentError> {
        toml::from_str(text).map_err(|e| ExperimentError::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<(Self, PathBuf), ExperimentError> {
        let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let cfg = Self::from_toml(&text).map_err(|e| match e {
            ExperimentError::Config(m) => ExperimentError::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    /// A config file path, or `bundled:example_experiment` / `bundled:shopfloor_sweep`.
    /// Bundled configs resolve relative paths against the working directory.
    pub fn load_spec(spec: &str) -> Result<(Self, PathBuf), ExperimentError> {
        match spec.strip_prefix("bundled:") {
            Some("example_experiment") => Ok((Self::from_toml(EXAMPLE_EXPERIMENT)?, PathBuf::new())),
            Some("shopfloor_sweep") => Ok((Self::from_toml(SHOPFLOOR_SWEEP)?, PathBuf::new())),
            Some(other) => Err(ExperimentError::Config(format!("no bundled config named {other:?}"))),
            None => Self::load(Path::new(spec)),
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(d) = &o.output_dir {
            self.output_dir = d.clone();
        }
        if let Some(s) = o.strategy {
            self.strategies = vec![s];
        }
        if let Some(r) = o.replications {
            self.replications = r;
        }
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.strategies.is_empty() {
            return Err(ExperimentError::Config("strategies must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(ExperimentError::Config("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn load_scenario(&self, base: &Path) -> Result<Scenario, ExperimentError> {
        Ok(resolve_scenario(&self.scenario, base)?)
    }

    /// Simulation settings for one strategy and replication.
    pub fn sim_config(&self, strategy: StrategyKind, replication: usize) -> SimConfig {
        SimConfig {
            num_units: self.sim.num_units,
            mat_by_part_type: self.sim.mat_s.clone(),
            mttf_by_machine: self.sim.mttf_s.clone(),
            repair_time: self.sim.repair_time_s,
            delivery_time: self.sim.delivery_time_s,
            seed: self.seed.wrapping_add(replication as u64),
            strategy,
            pipeline_units: self.sim.pipeline_units,
            single_task_ships_partial: false,
            record_trace: false,
        }
    }

    pub fn sweep_spec(&self) -> Result<SweepSpec, ExperimentError> {
        let s = self
            .sweep
            .as_ref()
            .ok_or_else(|| ExperimentError::Config("no [sweep] section".into()))?;
        Ok(SweepSpec {
            governed_types: s.governed_types.clone(),
            mats: s.mat_s.clone(),
            mttfs: s.mttf_s.clone(),
            strategies: self.strategies.clone(),
            replications: self.replications,
        })
    }
}

/// A scenario path, or `bundled:<name>` for a shipped scenario.
pub fn resolve_scenario(spec: &str, base: &Path) -> Result<Scenario, ModelError> {
    match spec.strip_prefix("bundled:") {
        Some(name) => Scenario::bundled(name),
        None => {
            let p = Path::new(spec);
            load_scenario(if p.is_absolute() { p.to_path_buf() } else { base.join(p) })
        }
    }
}

/// Outcome of checking a scenario file.
#[derive(Debug)]
pub enum Validation {
    Valid(Box<Scenario>),
    Invalid(Vec<String>),
}

/// Loads and checks a scenario. Unreadable or malformed files are errors;
/// structural problems are reported as [`Validation::Invalid`].
pub fn cmd_validate(path: &Path) -> Result<Validation, ExperimentError> {
    match load_scenario(path) {
        Ok(s) => Ok(Validation::Valid(Box::new(s))),
        Err(ModelError::Invalid(v)) => Ok(Validation::Invalid(v.iter().map(Violation::to_string).collect())),
        Err(e @ ModelError::Field { .. }) => Ok(Validation::Invalid(vec![e.to_string()])),
        Err(e @ ModelError::Parse { .. }) => Err(ExperimentError::Config(format!("{}: {e}", path.display()))),
        Err(e) => Err(e.into()),
    }
}

/// One CSV line: one unit of one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub strategy: StrategyKind,
    pub mat_leg_s: f64,
    pub mat_foot_s: f64,
    pub mttf_s: f64,
    pub replication: usize,
    pub unit: usize,
    pub total_task_time_s: f64,
    pub human_idle_time_s: f64,
    pub kit_count: usize,
}

fn rows_for(config: &SimConfig, mttf: f64, replication: usize, m: &SimMetrics) -> Vec<MetricsRow> {
    let mat = |t: &str| config.mat_by_part_type.get(t).copied().unwrap_or(0.0);
    m.units
        .iter()
        .map(|u| MetricsRow {
            strategy: config.strategy,
            mat_leg_s: mat("leg"),
            mat_foot_s: mat("foot"),
            mttf_s: mttf,
            replication,
            unit: u.unit,
            total_task_time_s: u.total_task_time,
            human_idle_time_s: u.human_idle_time,
            kit_count: u.kit_count,
        })
        .collect()
}

/// Trace line: an event tagged with the run it belongs to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceLine {
    pub strategy: StrategyKind,
    pub replication: usize,
    #[serde(flatten)]
    pub event: TraceEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategyTotals {
    pub strategy: StrategyKind,
    pub runs: usize,
    pub mean_total_s: f64,
    pub std_total_s: f64,
    pub mean_idle_s: f64,
    pub std_idle_s: f64,
    pub mean_kits: f64,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<MetricsRow>,
    pub summary: Vec<StrategyTotals>,
    pub trace: Vec<TraceLine>,
    pub files: Vec<PathBuf>,
}

/// Runs every configured strategy for the configured replications and writes
/// `metrics.csv` (and `trace.jsonl` when tracing) to the output directory.
pub fn cmd_run(config: &ExperimentConfig, base: &Path, trace: bool) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let scenario = config.load_scenario(base)?;
    let cache = KitCache::new();
    let mut jobs = Vec::new();
    for &s in &config.strategies {
        for r in 0..config.replications {
            jobs.push((s, r));
        }
    }
    let runs = jobs
        .into_par_iter()
        .map(|(strategy, r)| {
            let sim = SimConfig {
                record_trace: trace,
                ..config.sim_config(strategy, r)
            };
            run_simulation_cached(&scenario, &sim, &config.planner, &cache)
                .map(|m| (sim, r, m))
                .map_err(|source| ExperimentError::Run {
                    cell: format!("strategy={strategy} replication={r}"),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mttf = config.sim.mttf_s.values().copied().fold(f64::INFINITY, f64::min);
    let mut rows = Vec::new();
    let mut lines = Vec::new();
    for (sim, r, m) in &runs {
        rows.extend(rows_for(sim, mttf, *r, m));
        for ev in m.trace.iter().flatten() {
            lines.push(TraceLine {
                strategy: sim.strategy,
                replication: *r,
                event: ev.clone(),
            });
        }
    }
    let summary = config
        .strategies
        .iter()
        .map(|&s| {
            let ms: Vec<&SimMetrics> = runs.iter().filter(|x| x.0.strategy == s).map(|x| &x.2).collect();
            let tot: Vec<f64> = ms.iter().map(|m| m.total_task_time).collect();
            let idle: Vec<f64> = ms.iter().map(|m| m.human_idle_time).collect();
            let kits: Vec<f64> = ms.iter().map(|m| m.kit_count as f64).collect();
            StrategyTotals {
                strategy: s,
                runs: ms.len(),
                mean_total_s: mean(&tot),
                std_total_s: std_dev(&tot),
                mean_idle_s: mean(&idle),
                std_idle_s: std_dev(&idle),
                mean_kits: mean(&kits),
            }
        })
        .collect();

    let dir = &config.output_dir;
    create_dir(dir)?;
    let mut files = vec![write_csv(&dir.join("metrics.csv"), &rows)?];
    if trace {
        files.push(write_trace(&dir.join("trace.jsonl"), &lines)?);
    }
    Ok(RunOutput {
        rows,
        summary,
        trace: lines,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct SweepOutput {
    pub rows: Vec<MetricsRow>,
    pub cells: Vec<CellSummary>,
    pub files: Vec<PathBuf>,
}

/// Row of `improvements.csv`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ImprovementRow {
    pub mat_s: f64,
    pub mttf_s: f64,
    pub baseline: StrategyKind,
    pub total_improvement_pct: f64,
    pub total_diff_ci_lo_s: f64,
    pub total_diff_ci_hi_s: f64,
    pub idle_improvement_pct: f64,
    pub idle_diff_ci_lo_s: f64,
    pub idle_diff_ci_hi_s: f64,
}

/// Runs the MAT × MTTF × strategy grid and writes `metrics.csv` and
/// `improvements.csv` to the output directory.
pub fn cmd_sweep(config: &ExperimentConfig, base: &Path) -> Result<SweepOutput, ExperimentError> {
    config.validate()?;
    let spec = config.sweep_spec()?;
    let scenario = config.load_scenario(base)?;
    let sim = config.sim_config(StrategyKind::Optimized, 0);
    let result = sweep(&scenario, &sim, &config.planner, &spec, &KitCache::new())?;

    let rows: Vec<MetricsRow> = result
        .runs
        .iter()
        .flat_map(|r| rows_for(&r.config, r.cell.mttf, r.replication, &r.metrics))
        .collect();
    let improvements: Vec<ImprovementRow> = result
        .cells
        .iter()
        .flat_map(|c| {
            c.comparisons.iter().map(move |cmp| ImprovementRow {
                mat_s: c.cell.mat,
                mttf_s: c.cell.mttf,
                baseline: cmp.baseline,
                total_improvement_pct: cmp.total_improvement_pct,
                total_diff_ci_lo_s: cmp.total_diff_ci.lo,
                total_diff_ci_hi_s: cmp.total_diff_ci.hi,
                idle_improvement_pct: cmp.idle_improvement_pct,
                idle_diff_ci_lo_s: cmp.idle_diff_ci.lo,
                idle_diff_ci_hi_s: cmp.idle_diff_ci.hi,
            })
        })
        .collect();

    let dir = &config.output_dir;
    create_dir(dir)?;
    let files = vec![
        write_csv(&dir.join("metrics.csv"), &rows)?,
        write_csv(&dir.join("improvements.csv"), &improvements)?,
    ];
    Ok(SweepOutput {
        rows,
        cells: result.cells,
        files,
    })
}

#[derive(Debug, Clone)]
pub struct LayoutOutput {
    pub kit: ArrangedKit,
    pub terms: CostTerms,
    pub files: Vec<PathBuf>,
}

/// Arranges the parts of `tasks` and writes `layout.json` (and `layout.svg`).
///
/// On infeasibility the best layout found is still written before the error is returned.
pub fn cmd_layout(
    scenario: &Scenario,
    tasks: &[TaskId],
    planner: &PlannerConfig,
    out_dir: &Path,
    svg: bool,
) -> Result<LayoutOutput, ExperimentError> {
    let parts = scenario.parts_for(tasks.iter().map(String::as_str))?;
    create_dir(out_dir)?;
    let write = |layout: &KitLayout| -> Result<Vec<PathBuf>, ExperimentError> {
        let mut files = vec![write_text(&out_dir.join("layout.json"), &layout_to_json(layout))?];
        if svg {
            files.push(write_text(&out_dir.join("layout.svg"), &layout_to_svg(layout, &scenario.catalog)?)?);
        }
        Ok(files)
    };
    match arrange_kit(&parts, &scenario.catalog, &scenario.tray, &planner.fitness_weights, &planner.ce) {
        Ok(kit) => {
            let files = write(&kit.layout)?;
            Ok(LayoutOutput {
                terms: kit.terms,
                kit,
                files,
            })
        }
        Err(LayoutError::Infeasible { attempts, best_cost, best }) => {
            write(&best)?;
            Err(LayoutError::Infeasible { attempts, best_cost, best }.into())
        }
        Err(e) => Err(e.into()),
    }
}

fn create_dir(dir: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(dir).map_err(|source| ExperimentError::Io {
        path: dir.display().to_string(),
        source,
    })
}

fn write_text(path: &Path, text: &str) -> Result<PathBuf, ExperimentError> {
    fs::write(path, text).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<PathBuf, ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path.to_path_buf())
}

fn write_trace(path: &Path, lines: &[TraceLine]) -> Result<PathBuf, ExperimentError> {
    let io = |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    };
    let mut f = std::io::BufWriter::new(fs::File::create(path).map_err(io)?);
    for l in lines {
        serde_json::to_writer(&mut f, l).expect("trace lines serialize");
        f.write_all(b"\n").map_err(io)?;
    }
    f.flush().map_err(io)?;
    Ok(path.to_path_buf())
}

/// Reads `metrics.csv`.
pub fn read_metrics_csv(path: &Path) -> Result<Vec<MetricsRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Reads `trace.jsonl`.
pub fn read_trace(path: &Path) -> Result<Vec<TraceLine>, ExperimentError> {
    let text = fs::read_to_string(path).map_err(|source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    })?;
    text.lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| serde_json::from_str(l).map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display()))))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bundled_configs_parse() {
        for text in [EXAMPLE_EXPERIMENT, SHOPFLOOR_SWEEP] {
            let c = ExperimentConfig::from_toml(text).unwrap();
            c.validate().unwrap();
            c.load_scenario(Path::new(".")).unwrap();
        }
        let sweep = ExperimentConfig::from_toml(SHOPFLOOR_SWEEP).unwrap();
        assert!(sweep.sweep_spec().unwrap().mttfs.contains(&f64::INFINITY));
    }

    #[test]
    fn overrides_replace_file_values() {
        let mut c = ExperimentConfig::from_toml(EXAMPLE_EXPERIMENT).unwrap();
        c.apply(&Overrides {
            seed: Some(7),
            strategy: Some(StrategyKind::SingleTask),
            replications: Some(3),
            ..Overrides::default()
        });
        assert_eq!(c.seed, 7);
        assert_eq!(c.strategies, vec![StrategyKind::SingleTask]);
        assert_eq!(c.replications, 3);
        assert_eq!(c.sim_config(StrategyKind::SingleTask, 2).seed, 9);
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = ExperimentConfig::from_toml("scenario = \"bundled:stool\"\nfoo = 1\n").unwrap_err();
        assert_eq!(e.exit_code(), 2);
        assert!(ExperimentConfig::from_toml("scenario = \"bundled:stool\"\n[sweep]\nmat_s = [0]\n").is_err());
    }
}
