use thiserror::Error;

use crate::kit_layout::KitLayout;
use crate::task_model::Violation;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("unknown part {0}")]
    UnknownPart(String),
    #[error("unknown part type {0}")]
    UnknownPartType(String),
    #[error("unknown bundled scenario {0}")]
    UnknownBundled(String),
    #[error("empty duration distribution")]
    EmptyDistribution,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("task {task}: {message}")]
    Field { task: String, message: String },
    #[error("invalid scenario: {}", join(.0))]
    Invalid(Vec<Violation>),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

fn join(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

#[derive(Debug, Error)]
pub enum LayoutError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("no parts to arrange")]
    NoParts,
    #[error("parts need {needed:.1} mm² but the tray has {available:.1} mm²")]
    DoesNotFit { needed: f64, available: f64 },
    #[error("no feasible layout after {attempts} attempts (best cost {best_cost:.3})")]
    Infeasible {
        attempts: usize,
        best_cost: f64,
        best: Box<KitLayout>,
    },
    #[error("invalid CE parameters: {0}")]
    Params(String),
}

#[derive(Debug, Error)]
pub enum PlanError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("all tasks are already segmented")]
    NothingToPlan,
    #[error("no candidate segment admits a feasible kit layout")]
    Infeasible,
    #[error("invalid planner configuration: {0}")]
    Config(String),
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Plan(#[from] PlanError),
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    #[error("deadlock at t={time:.3}s with {remaining} tasks unassembled; last events: {trace}")]
    Deadlock {
        time: f64,
        remaining: usize,
        trace: String,
    },
}

impl SimError {
    pub fn is_infeasible(&self) -> bool {
        matches!(self, SimError::Plan(PlanError::Infeasible))
    }
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Layout(#[from] LayoutError),
    #[error("cell {cell}: {source}")]
    Run {
        cell: String,
        #[source]
        source: SimError,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl ExperimentError {
    /// Process exit code class: config 2, infeasible 3, runtime 4.
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::Io { .. } | ExperimentError::Config(_) | ExperimentError::Model(_) => 2,
            ExperimentError::Layout(LayoutError::Model(_)) => 2,
            ExperimentError::Layout(_) => 3,
            ExperimentError::Run { source, .. } if source.is_infeasible() => 3,
            ExperimentError::Run {
                source: SimError::Config(_) | SimError::Model(_) | SimError::Plan(PlanError::Config(_) | PlanError::Model(_)),
                ..
            } => 2,
            ExperimentError::Run { .. } | ExperimentError::Csv(_) => 4,
        }
    }
}
