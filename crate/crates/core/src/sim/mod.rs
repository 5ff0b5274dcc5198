//! Discrete-event simulation of the kitting line: part arrivals, machine
//! breakdowns, robot kitting and delivery, human assembly.

mod engine;
mod sweep;

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{ModelError, SimError};
use crate::planner::{KitCache, PlannerConfig};
use crate::strategies::StrategyKind;
use crate::task_model::{PartTypeId, Scenario, Task, TaskId};

pub use engine::metrics_from_trace;
pub use sweep::{compare, sweep, CellSummary, Comparison, StrategySummary, SweepCell, SweepResult, SweepRun, SweepSpec};

/// One simulated run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub num_units: usize,
    /// Mean inter-arrival time per governed part type (s); 0 means parts are
    /// produced on demand while the machine is up. Other types are always in stock.
    #[serde(rename = "mat_s")]
    pub mat_by_part_type: BTreeMap<PartTypeId, f64>,
    /// Mean time to failure per machine (s). Machines are named after the part
    /// type they feed; missing entries never fail.
    #[serde(rename = "mttf_s")]
    pub mttf_by_machine: BTreeMap<String, f64>,
    #[serde(rename = "repair_time_s")]
    pub repair_time: f64,
    /// Used by the simulator and, for the optimized strategy, by the planner.
    #[serde(rename = "delivery_time_s")]
    pub delivery_time: f64,
    pub seed: u64,
    pub strategy: StrategyKind,
    /// Let the robot kit the next unit while the human is still assembling the
    /// current one. Off: units are assembled back to back.
    pub pipeline_units: bool,
    /// Reserved: single-task kits always wait for all their parts.
    pub single_task_ships_partial: bool,
    /// Keep a full event log in the metrics.
    #[serde(skip)]
    pub record_trace: bool,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            num_units: 1,
            mat_by_part_type: BTreeMap::new(),
            mttf_by_machine: BTreeMap::new(),
            repair_time: 30.0,
            delivery_time: 0.0,
            seed: 0,
            strategy: StrategyKind::Optimized,
            pipeline_units: false,
            single_task_ships_partial: false,
            record_trace: false,
        }
    }
}

impl SimConfig {
    /// Same MAT and MTTF for every listed part type.
    pub fn with_delays(mut self, types: &[&str], mat: f64, mttf: f64) -> Self {
        for t in types {
            self.mat_by_part_type.insert(t.to_string(), mat);
            self.mttf_by_machine.insert(t.to_string(), mttf);
        }
        self
    }

    pub fn validate(&self, scenario: &Scenario) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Config(m));
        if self.num_units == 0 {
            return bad("num_units must be at least 1".into());
        }
        if !(self.repair_time >= 0.0 && self.repair_time.is_finite()) {
            return bad("repair_time_s must be finite and non-negative".into());
        }
        if !(self.delivery_time >= 0.0 && self.delivery_time.is_finite()) {
            return bad("delivery_time_s must be finite and non-negative".into());
        }
        if self.single_task_ships_partial {
            return bad("single_task_ships_partial is reserved and must be false".into());
        }
        for (t, &mat) in &self.mat_by_part_type {
            if scenario.catalog.part_type(t).is_none() {
                return Err(ModelError::UnknownPartType(t.clone()).into());
            }
            if !(mat >= 0.0 && mat.is_finite()) {
                return bad(format!("MAT for {t} must be finite and non-negative"));
            }
        }
        for (m, &mttf) in &self.mttf_by_machine {
            if !self.mat_by_part_type.contains_key(m) {
                return bad(format!("machine {m} does not feed a governed part type"));
            }
            if !(mttf > 0.0) {
                return bad(format!("MTTF for {m} must be positive"));
            }
        }
        Ok(())
    }
}

/// Per-unit outcome. Times in seconds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct UnitMetrics {
    pub unit: usize,
    pub start: f64,
    pub end: f64,
    pub total_task_time: f64,
    pub human_idle_time: f64,
    pub active_time: f64,
    pub kit_count: usize,
}

/// Timeline of one delivered kit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KitRecord {
    pub unit: usize,
    pub segment: Vec<TaskId>,
    pub parts: Vec<String>,
    pub gather_start: f64,
    pub ready: f64,
    pub delivered: f64,
    pub retrieved: f64,
    /// Sampled robot and human time for the segment.
    pub robot_time: f64,
    pub human_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    PartArrival,
    MachineFailure,
    MachineRepaired,
    KitReady,
    KitDelivered,
    TrayRetrieved,
    HumanTaskDone,
}

/// One processed event, as written to a trace file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub time: f64,
    pub seq: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub unit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub machine: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tasks: Vec<TaskId>,
    /// Start of the finished human task.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimMetrics {
    pub units: Vec<UnitMetrics>,
    pub total_task_time: f64,
    pub human_idle_time: f64,
    pub kit_count: usize,
    pub kits: Vec<KitRecord>,
    /// Number of planner calls made by the robot.
    pub plans: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trace: Option<Vec<TraceEvent>>,
}

/// Draws (human s, robot s) for one task.
pub fn sample_durations<R: Rng + ?Sized>(task: &Task, rng: &mut R) -> Result<(f64, f64), ModelError> {
    Ok((task.human_duration.sample(rng)?, task.robot_duration.sample(rng)?))
}

/// Runs one simulation with a private kit cache.
pub fn run_simulation(scenario: &Scenario, config: &SimConfig, planner: &PlannerConfig) -> Result<SimMetrics, SimError> {
    run_simulation_cached(scenario, config, planner, &KitCache::new())
}

/// Runs one simulation, sharing arranged kits through `cache`.
///
/// `config.delivery_time` replaces the planner's delivery time.
pub fn run_simulation_cached(
    scenario: &Scenario,
    config: &SimConfig,
    planner: &PlannerConfig,
    cache: &KitCache,
) -> Result<SimMetrics, SimError> {
    config.validate(scenario)?;
    let planner = PlannerConfig {
        delivery_time: config.delivery_time,
        ..planner.clone()
    };
    planner.validate()?;
    engine::Engine::new(scenario, config, &planner, cache)?.run()
}
