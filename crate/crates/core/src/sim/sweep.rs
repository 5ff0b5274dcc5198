use rayon::prelude::*;
use serde::Serialize;

use super::{run_simulation_cached, SimConfig, SimMetrics};
use crate::error::ExperimentError;
use crate::planner::{KitCache, PlannerConfig};
use crate::stats::{bootstrap_mean_ci, mean, percent_improvement, std_dev, Interval, BOOTSTRAP_RESAMPLES};
use crate::strategies::StrategyKind;
use crate::task_model::{PartTypeId, Scenario};

/// MAT × MTTF grid. Every governed part type gets the same MAT and MTTF in a cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub governed_types: Vec<PartTypeId>,
    pub mats: Vec<f64>,
    pub mttfs: Vec<f64>,
    pub strategies: Vec<StrategyKind>,
    pub replications: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepCell {
    pub mat: f64,
    pub mttf: f64,
}

/// One replication of one strategy in one cell.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRun {
    pub cell: SweepCell,
    pub strategy: StrategyKind,
    pub replication: usize,
    pub config: SimConfig,
    pub metrics: SimMetrics,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StrategySummary {
    pub strategy: StrategyKind,
    pub mean_total: f64,
    pub std_total: f64,
    pub mean_idle: f64,
    pub std_idle: f64,
    pub mean_kits: f64,
}

/// `candidate` against `baseline` over paired replications.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Comparison {
    pub baseline: StrategyKind,
    pub candidate: StrategyKind,
    pub total_improvement_pct: f64,
    pub idle_improvement_pct: f64,
    /// 95% bootstrap interval of mean(baseline − candidate).
    pub total_diff_ci: Interval,
    pub idle_diff_ci: Interval,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CellSummary {
    pub cell: SweepCell,
    pub strategies: Vec<StrategySummary>,
    pub comparisons: Vec<Comparison>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    /// Grid order: MAT, then MTTF, then strategy, then replication.
    pub runs: Vec<SweepRun>,
    pub cells: Vec<CellSummary>,
}

impl SweepSpec {
    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.mats.is_empty() || self.mttfs.is_empty() || self.strategies.is_empty() {
            return Err(ExperimentError::Config("sweep grids and strategy list must be nonempty".into()));
        }
        if self.replications == 0 {
            return Err(ExperimentError::Config("replications must be at least 1".into()));
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<SweepCell> {
        self.mats
            .iter()
            .flat_map(|&mat| self.mttfs.iter().map(move |&mttf| SweepCell { mat, mttf }))
            .collect()
    }

    /// Config for one run: the base config with this cell's delays, the
    /// strategy, and seed `base.seed + replication`.
    pub fn run_config(&self, base: &SimConfig, cell: SweepCell, strategy: StrategyKind, replication: usize) -> SimConfig {
        let mut c = base.clone();
        for t in &self.governed_types {
            c.mat_by_part_type.insert(t.clone(), cell.mat);
            c.mttf_by_machine.insert(t.clone(), cell.mttf);
        }
        c.strategy = strategy;
        c.seed = base.seed.wrapping_add(replication as u64);
        c
    }
}

/// Runs every cell × strategy × replication, in parallel, and summarises each cell.
///
/// Replications of different strategies share seeds, so comparisons are paired.
pub fn sweep(
    scenario: &Scenario,
    base: &SimConfig,
    planner: &PlannerConfig,
    spec: &SweepSpec,
    cache: &KitCache,
) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let mut jobs = Vec::new();
    for cell in spec.cells() {
        for &strategy in &spec.strategies {
            for r in 0..spec.replications {
                jobs.push((cell, strategy, r));
            }
        }
    }
    let runs = jobs
        .into_par_iter()
        .map(|(cell, strategy, replication)| {
            let config = spec.run_config(base, cell, strategy, replication);
            run_simulation_cached(scenario, &config, planner, cache)
                .map(|metrics| SweepRun {
                    cell,
                    strategy,
                    replication,
                    config,
                    metrics,
                })
                .map_err(|source| ExperimentError::Run {
                    cell: format!(
                        "mat={} mttf={} strategy={strategy} replication={replication}",
                        cell.mat, cell.mttf
                    ),
                    source,
                })
        })
        .collect::<Result<Vec<_>, _>>()?;

    let per_cell = spec.strategies.len() * spec.replications;
    let cells = spec
        .cells()
        .into_iter()
        .zip(runs.chunks(per_cell))
        .map(|(cell, chunk)| summarize(cell, chunk, spec, base.seed))
        .collect();
    Ok(SweepResult { runs, cells })
}

fn summarize(cell: SweepCell, runs: &[SweepRun], spec: &SweepSpec, seed: u64) -> CellSummary {
    let series = |s: StrategyKind, f: fn(&SimMetrics) -> f64| -> Vec<f64> {
        runs.iter().filter(|r| r.strategy == s).map(|r| f(&r.metrics)).collect()
    };
    let total = |m: &SimMetrics| m.total_task_time;
    let idle = |m: &SimMetrics| m.human_idle_time;
    let kits = |m: &SimMetrics| m.kit_count as f64;

    let strategies = spec
        .strategies
        .iter()
        .map(|&s| {
            let (t, i) = (series(s, total), series(s, idle));
            StrategySummary {
                strategy: s,
                mean_total: mean(&t),
                std_total: std_dev(&t),
                mean_idle: mean(&i),
                std_idle: std_dev(&i),
                mean_kits: mean(&series(s, kits)),
            }
        })
        .collect();

    let mut comparisons = Vec::new();
    if spec.strategies.contains(&StrategyKind::Optimized) {
        for &baseline in spec.strategies.iter().filter(|&&s| s != StrategyKind::Optimized) {
            comparisons.push(compare(baseline, StrategyKind::Optimized, runs, seed));
        }
    }
    CellSummary {
        cell,
        strategies,
        comparisons,
    }
}

/// Paired comparison of two strategies over the runs of one cell.
pub fn compare(baseline: StrategyKind, candidate: StrategyKind, runs: &[SweepRun], seed: u64) -> Comparison {
    let pick = |s: StrategyKind, f: fn(&SimMetrics) -> f64| -> Vec<f64> {
        let mut v: Vec<(usize, f64)> = runs
            .iter()
            .filter(|r| r.strategy == s)
            .map(|r| (r.replication, f(&r.metrics)))
            .collect();
        v.sort_by_key(|x| x.0);
        v.into_iter().map(|x| x.1).collect()
    };
    let diffs = |f: fn(&SimMetrics) -> f64| -> (Vec<f64>, f64, f64) {
        let (b, c) = (pick(baseline, f), pick(candidate, f));
        let d = b.iter().zip(&c).map(|(x, y)| x - y).collect();
        (d, mean(&b), mean(&c))
    };
    let (dt, bt, ct) = diffs(|m| m.total_task_time);
    let (di, bi, ci) = diffs(|m| m.human_idle_time);
    Comparison {
        baseline,
        candidate,
        total_improvement_pct: percent_improvement(bt, ct),
        idle_improvement_pct: percent_improvement(bi, ci),
        total_diff_ci: bootstrap_mean_ci(&dt, 0.95, BOOTSTRAP_RESAMPLES, seed),
        idle_diff_ci: bootstrap_mean_ci(&di, 0.95, BOOTSTRAP_RESAMPLES, seed.wrapping_add(1)),
    }
}
