//! The three kitting policies compared on the shop floor.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::PlanError;
use crate::kit_layout::{grid_layout, KitLayout};
use crate::planner::{solve_segment_cached, KitCache, PlannerConfig, PlannerState};
use crate::task_model::{allowed, PartId, Scenario, TaskId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyKind {
    /// One kit with every part of the unit.
    WholeAssembly,
    /// One kit per task, lexicographic topological order.
    SingleTask,
    /// Kits chosen by the bilevel planner.
    Optimized,
}

impl StrategyKind {
    pub const ALL: [StrategyKind; 3] = [
        StrategyKind::WholeAssembly,
        StrategyKind::SingleTask,
        StrategyKind::Optimized,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            StrategyKind::WholeAssembly => "whole_assembly",
            StrategyKind::SingleTask => "single_task",
            StrategyKind::Optimized => "optimized",
        }
    }
}

impl fmt::Display for StrategyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for StrategyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        StrategyKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| format!("unknown strategy {s:?} (expected whole_assembly, single_task or optimized)"))
    }
}

/// The next kit the robot should build.
#[derive(Debug, Clone, PartialEq)]
pub struct KitRequest {
    /// Tasks served by the kit, in the order the human performs them.
    pub segment: Vec<TaskId>,
    pub parts: Vec<PartId>,
    pub layout: KitLayout,
}

/// Next kit under `strategy`, or `None` once every task has been kitted.
///
/// The fixed strategies use a type-grouped grid layout.
pub fn strategy_next_kit(
    strategy: StrategyKind,
    state: &PlannerState,
    scenario: &Scenario,
    config: &PlannerConfig,
    cache: &KitCache,
) -> Result<Option<KitRequest>, PlanError> {
    let remaining = state.remaining(&scenario.graph);
    if remaining.is_empty() {
        return Ok(None);
    }
    let segment: Vec<TaskId> = match strategy {
        StrategyKind::Optimized => {
            let d = solve_segment_cached(state, scenario, config, cache)?;
            return Ok(Some(KitRequest {
                segment: d.segment,
                parts: d.parts,
                layout: d.layout,
            }));
        }
        StrategyKind::WholeAssembly => {
            let done = state.segmented();
            let order = scenario
                .graph
                .lexicographic_topological_order()
                .ok_or_else(|| PlanError::Config("task graph has a cycle".into()))?;
            order.into_iter().filter(|t| !done.contains(t.as_str())).collect()
        }
        StrategyKind::SingleTask => {
            let done = state.segmented();
            let mut next = None;
            for t in &remaining {
                if allowed(t, &done, &scenario.graph)? && next.is_none_or(|n: &str| *t < n) {
                    next = Some(*t);
                }
            }
            vec![next.ok_or(PlanError::Infeasible)?.to_string()]
        }
    };
    let parts = scenario.parts_for(segment.iter().map(String::as_str))?;
    let layout = grid_layout(&parts, &scenario.catalog, &scenario.tray)?;
    Ok(Some(KitRequest { segment, parts, layout }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn replay(kind: StrategyKind, scenario: &Scenario) -> Vec<KitRequest> {
        let cfg = PlannerConfig::default();
        let cache = KitCache::new();
        let mut state = PlannerState::default();
        let mut kits = Vec::new();
        while let Some(k) = strategy_next_kit(kind, &state, scenario, &cfg, &cache).unwrap() {
            state.completed_segments.push(k.segment.clone());
            kits.push(k);
        }
        kits
    }

    #[test]
    fn whole_assembly_is_one_kit() {
        let s = Scenario::bundled("table_12task").unwrap();
        let kits = replay(StrategyKind::WholeAssembly, &s);
        assert_eq!(kits.len(), 1);
        assert_eq!(kits[0].segment.len(), 12);
        assert_eq!(kits[0].parts.len(), s.unit_parts().len());
    }

    #[test]
    fn single_task_follows_graph_order() {
        let s = Scenario::bundled("stool").unwrap();
        let segs: Vec<Vec<TaskId>> = replay(StrategyKind::SingleTask, &s).into_iter().map(|k| k.segment).collect();
        assert_eq!(segs, vec![vec!["a1".to_string()], vec!["a2".to_string()], vec!["a3".to_string()]]);
    }

    #[test]
    fn single_task_uses_lexicographic_topological_order() {
        let s = Scenario::bundled("table_12task").unwrap();
        let kits = replay(StrategyKind::SingleTask, &s);
        assert!(kits.iter().all(|k| k.segment.len() == 1));
        let segs: Vec<TaskId> = kits.into_iter().flat_map(|k| k.segment).collect();
        assert_eq!(&segs[..4], ["foot_1", "connector_1", "foot_2", "connector_2"]);
        assert_eq!(segs, s.graph.lexicographic_topological_order().unwrap());
    }

    #[test]
    fn optimized_covers_every_task_once() {
        let s = Scenario::bundled("stool").unwrap();
        let kits = replay(StrategyKind::Optimized, &s);
        let mut tasks: Vec<TaskId> = kits.iter().flat_map(|k| k.segment.clone()).collect();
        tasks.sort();
        assert_eq!(tasks, ["a1", "a2", "a3"]);
        let mut parts: Vec<PartId> = kits.iter().flat_map(|k| k.parts.clone()).collect();
        parts.sort();
        let mut unit = s.unit_parts();
        unit.sort();
        assert_eq!(parts, unit);
    }

    #[test]
    fn strategy_names_round_trip() {
        for k in StrategyKind::ALL {
            assert_eq!(k.as_str().parse::<StrategyKind>().unwrap(), k);
            assert_eq!(serde_json::to_string(&k).unwrap(), format!("\"{k}\""));
        }
        assert!("fastest".parse::<StrategyKind>().is_err());
    }
}
