//! Random valid scenarios for property tests and benchmarks.

use rand::seq::SliceRandom;
use rand::Rng;

use crate::task_model::{DurationSpec, PartCatalog, PartInstance, PartType, Scenario, Task, TaskGraph, Tray};

#[derive(Debug, Clone, PartialEq)]
pub struct RandomScenarioSpec {
    pub tasks: usize,
    /// Probability of an edge between two tasks, taken along a hidden order.
    pub edge_probability: f64,
    pub part_types: usize,
    pub max_parts_per_task: usize,
    /// Whole-second durations instead of three-sample empirical lists.
    pub deterministic: bool,
}

impl Default for RandomScenarioSpec {
    fn default() -> Self {
        Self {
            tasks: 6,
            edge_probability: 0.35,
            part_types: 3,
            max_parts_per_task: 2,
            deterministic: true,
        }
    }
}

/// Draws a valid acyclic scenario. Task ids are shuffled so that id order and
/// precedence order disagree.
pub fn random_scenario<R: Rng + ?Sized>(spec: &RandomScenarioSpec, rng: &mut R) -> Scenario {
    let n = spec.tasks.max(1);
    let types: Vec<PartType> = (0..spec.part_types.max(1))
        .map(|k| PartType {
            id: format!("type{k}"),
            name: String::new(),
            bbox_width: rng.random_range(10..=60) as f64,
            bbox_height: rng.random_range(10..=40) as f64,
        })
        .collect();

    let mut ids: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
    ids.shuffle(rng);

    let mut parts = Vec::new();
    let mut tasks = Vec::with_capacity(n);
    for (pos, id) in ids.iter().enumerate() {
        let mut task = Task::new(id.clone(), 0.0, 0.0);
        let (h, r) = if spec.deterministic {
            (
                DurationSpec::Fixed(rng.random_range(5..=40) as f64),
                DurationSpec::Fixed(rng.random_range(3..=20) as f64),
            )
        } else {
            let mut draw = |lo: u32, hi: u32| DurationSpec::Empirical((0..3).map(|_| rng.random_range(lo..=hi) as f64).collect());
            (draw(5, 40), draw(3, 20))
        };
        task.human_duration = h;
        task.robot_duration = r;
        for j in 0..rng.random_range(1..=spec.max_parts_per_task.max(1)) {
            let part = format!("{id}_p{j}");
            parts.push(PartInstance {
                id: part.clone(),
                part_type: types[rng.random_range(0..types.len())].id.clone(),
            });
            task.required_parts.push(part);
        }
        for earlier in &ids[..pos] {
            if rng.random_bool(spec.edge_probability) {
                task.predecessors.push(earlier.clone());
            }
        }
        tasks.push(task);
    }

    let catalog = PartCatalog::new(types, parts);
    Scenario::new(TaskGraph::new(tasks), Tray::new(600.0, 400.0), catalog).expect("generated scenario is valid")
}
