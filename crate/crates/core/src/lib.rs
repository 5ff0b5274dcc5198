//! Just-in-time robotic kitting.
//!
//! An upper-level planner segments assembly tasks into kits and a lower-level
//! cross-entropy solver arranges each kit on the tray. A discrete-event
//! shop-floor simulator compares the planner with fixed kitting baselines
//! under part-arrival delays and machine breakdowns.

pub mod error;
pub mod experiment;
pub mod generate;
pub mod kit_layout;
pub mod planner;
pub mod sim;
pub mod stats;
pub mod strategies;
pub mod task_model;

pub use error::{ExperimentError, LayoutError, ModelError, PlanError, SimError};
pub use kit_layout::{arrange_kit, ArrangedKit, CeParams, FitnessWeights, KitLayout, PartPlacement};
pub use task_model::{allowed, load_scenario, validate_graph, PartCatalog, Scenario, Task, TaskGraph, Tray};
pub use planner::{solve_segment, KitCache, PlannerConfig, PlannerState, PlannerWeights, SegmentDecision};
pub use strategies::{strategy_next_kit, KitRequest, StrategyKind};
pub use sim::{run_simulation, SimConfig, SimMetrics};
