//! Assembly tasks, parts, precedence constraints and the bundled scenario format.
//!
//! A [`Scenario`] is the immutable input shared by the planner, the kit layout
//! solver and the simulator. It is loaded from a single JSON document with the
//! top-level keys `part_types`, `parts`, `tasks` and `tray`; unknown keys are
//! rejected.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::ModelError;

pub type TaskId = String;
pub type PartId = String;
pub type PartTypeId = String;

/// A kind of part, such as "leg" or "M6 screw", with its footprint on the tray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartType {
    pub id: PartTypeId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(rename = "bbox_width_mm")]
    pub bbox_width: f64,
    #[serde(rename = "bbox_height_mm")]
    pub bbox_height: f64,
}

impl PartType {
    pub fn area(&self) -> f64 {
        self.bbox_width * self.bbox_height
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartInstance {
    pub id: PartId,
    pub part_type: PartTypeId,
}

/// Task duration: a fixed value or an empirical sample list drawn from uniformly.
#[derive(Debug, Clone, PartialEq)]
pub enum DurationSpec {
    Fixed(f64),
    Empirical(Vec<f64>),
}

impl DurationSpec {
    /// Point estimate used by the planner.
    pub fn mean(&self) -> f64 {
        match self {
            DurationSpec::Fixed(v) => *v,
            DurationSpec::Empirical(samples) if samples.is_empty() => 0.0,
            DurationSpec::Empirical(samples) => samples.iter().sum::<f64>() / samples.len() as f64,
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64, ModelError> {
        match self {
            DurationSpec::Fixed(v) => Ok(*v),
            DurationSpec::Empirical(samples) if samples.is_empty() => {
                Err(ModelError::EmptyDistribution)
            }
            DurationSpec::Empirical(samples) => Ok(samples[rng.random_range(0..samples.len())]),
        }
    }

    fn values(&self) -> &[f64] {
        match self {
            DurationSpec::Fixed(v) => std::slice::from_ref(v),
            DurationSpec::Empirical(samples) => samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub id: TaskId,
    pub name: String,
    pub human_duration: DurationSpec,
    pub robot_duration: DurationSpec,
    pub required_parts: Vec<PartId>,
    pub predecessors: Vec<TaskId>,
}

impl Task {
    pub fn new(id: impl Into<TaskId>, human_s: f64, robot_s: f64) -> Self {
        Self {
            id: id.into(),
            name: String::new(),
            human_duration: DurationSpec::Fixed(human_s),
            robot_duration: DurationSpec::Fixed(robot_s),
            required_parts: Vec::new(),
            predecessors: Vec::new(),
        }
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }

    pub fn with_parts<I, S>(mut self, parts: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<PartId>,
    {
        self.required_parts.extend(parts.into_iter().map(Into::into));
        self
    }

    pub fn with_predecessors<I, S>(mut self, preds: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<TaskId>,
    {
        self.predecessors.extend(preds.into_iter().map(Into::into));
        self
    }
}

/// Assembly tasks with precedence stored as predecessor lists.
///
/// Construction does not validate; call [`validate_graph`] (or load through
/// [`load_scenario`], which does).
#[derive(Debug, Clone, PartialEq)]
pub struct TaskGraph {
    tasks: Vec<Task>,
    index: HashMap<TaskId, usize>,
}

impl TaskGraph {
    pub fn new(tasks: Vec<Task>) -> Self {
        let mut index = HashMap::with_capacity(tasks.len());
        for (i, t) in tasks.iter().enumerate() {
            index.entry(t.id.clone()).or_insert(i);
        }
        Self { tasks, index }
    }

    pub fn tasks(&self) -> &[Task] {
        &self.tasks
    }

    pub fn len(&self) -> usize {
        self.tasks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tasks.is_empty()
    }

    pub fn task(&self, id: &str) -> Result<&Task, ModelError> {
        self.index_of(id).map(|i| &self.tasks[i])
    }

    pub fn index_of(&self, id: &str) -> Result<usize, ModelError> {
        self.index
            .get(id)
            .copied()
            .ok_or_else(|| ModelError::UnknownTask(id.to_string()))
    }

    pub fn task_ids(&self) -> impl Iterator<Item = &str> {
        self.tasks.iter().map(|t| t.id.as_str())
    }

    /// Predecessor indices per task; dangling references are skipped.
    pub fn predecessor_indices(&self) -> Vec<Vec<usize>> {
        self.tasks
            .iter()
            .map(|t| {
                t.predecessors
                    .iter()
                    .filter_map(|p| self.index.get(p).copied())
                    .collect()
            })
            .collect()
    }

    /// Topological order, choosing the lexicographically smallest ready task id
    /// at every step. Returns `None` if the graph has a cycle.
    pub fn lexicographic_topological_order(&self) -> Option<Vec<TaskId>> {
        let preds = self.predecessor_indices();
        let mut remaining: Vec<usize> = preds.iter().map(Vec::len).collect();
        let mut succs = vec![Vec::new(); self.tasks.len()];
        for (i, ps) in preds.iter().enumerate() {
            for &p in ps {
                succs[p].push(i);
            }
        }
        let mut ready: BTreeSet<(&str, usize)> = remaining
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(i, _)| (self.tasks[i].id.as_str(), i))
            .collect();
        let mut order = Vec::with_capacity(self.tasks.len());
        while let Some(first) = ready.pop_first() {
            let (_, i) = first;
            order.push(self.tasks[i].id.clone());
            for &s in &succs[i] {
                remaining[s] -= 1;
                if remaining[s] == 0 {
                    ready.insert((self.tasks[s].id.as_str(), s));
                }
            }
        }
        (order.len() == self.tasks.len()).then_some(order)
    }
}

/// Returns whether `task` may be performed once every task in `completed` is done.
pub fn allowed<S>(task: &str, completed: &BTreeSet<S>, graph: &TaskGraph) -> Result<bool, ModelError>
where
    S: std::borrow::Borrow<str> + Ord,
{
    let t = graph.task(task)?;
    Ok(t.predecessors.iter().all(|p| completed.contains(p.as_str())))
}

/// A graph or scenario invariant that does not hold.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Violation {
    NoTasks,
    DuplicateTask(TaskId),
    UnknownPredecessor { task: TaskId, predecessor: TaskId },
    Cycle(Vec<TaskId>),
    DuplicatePart { part: PartId, tasks: Vec<TaskId> },
    NegativeDuration(TaskId),
    EmptyDistribution(TaskId),
    UnknownPart { task: TaskId, part: PartId },
    UnknownPartType { part: PartId, part_type: PartTypeId },
    DuplicatePartType(PartTypeId),
    DuplicatePartInstance(PartId),
    NonPositiveBox(PartTypeId),
    NonPositiveTray,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoTasks => write!(f, "graph has no tasks"),
            Violation::DuplicateTask(id) => write!(f, "duplicate task {id}"),
            Violation::UnknownPredecessor { task, predecessor } => {
                write!(f, "unknown predecessor {predecessor} (in task {task})")
            }
            Violation::Cycle(ids) => write!(f, "cycle: {}", ids.join(",")),
            Violation::DuplicatePart { part, tasks } => {
                write!(f, "duplicate part {part} required by {}", tasks.join(","))
            }
            Violation::NegativeDuration(id) => write!(f, "negative duration in task {id}"),
            Violation::EmptyDistribution(id) => write!(f, "empty duration distribution in task {id}"),
            Violation::UnknownPart { task, part } => write!(f, "unknown part {part} (in task {task})"),
            Violation::UnknownPartType { part, part_type } => {
                write!(f, "unknown part type {part_type} (for part {part})")
            }
            Violation::DuplicatePartType(id) => write!(f, "duplicate part type {id}"),
            Violation::DuplicatePartInstance(id) => write!(f, "duplicate part {id}"),
            Violation::NonPositiveBox(id) => write!(f, "part type {id} has a non-positive bounding box"),
            Violation::NonPositiveTray => write!(f, "tray dimensions must be positive"),
        }
    }
}

/// Collects every cycle, dangling-reference and duplicate-part violation.
pub fn validate_graph(graph: &TaskGraph) -> Vec<Violation> {
    let mut out = Vec::new();
    if graph.is_empty() {
        out.push(Violation::NoTasks);
        return out;
    }
    let mut seen = BTreeSet::new();
    for t in graph.tasks() {
        if !seen.insert(t.id.as_str()) {
            out.push(Violation::DuplicateTask(t.id.clone()));
        }
        for p in &t.predecessors {
            if graph.index.get(p).is_none() {
                out.push(Violation::UnknownPredecessor {
                    task: t.id.clone(),
                    predecessor: p.clone(),
                });
            }
        }
        let durations = [&t.human_duration, &t.robot_duration];
        if durations.iter().any(|d| matches!(d, DurationSpec::Empirical(s) if s.is_empty())) {
            out.push(Violation::EmptyDistribution(t.id.clone()));
        }
        if durations
            .iter()
            .any(|d| d.values().iter().any(|v| !(*v >= 0.0) || !v.is_finite()))
        {
            out.push(Violation::NegativeDuration(t.id.clone()));
        }
    }

    for cycle in cycles(graph) {
        out.push(Violation::Cycle(cycle));
    }

    let mut users: BTreeMap<&str, Vec<TaskId>> = BTreeMap::new();
    for t in graph.tasks() {
        for p in &t.required_parts {
            users.entry(p.as_str()).or_default().push(t.id.clone());
        }
    }
    for (part, tasks) in users {
        if tasks.len() > 1 {
            out.push(Violation::DuplicatePart {
                part: part.to_string(),
                tasks,
            });
        }
    }
    out
}

/// Strongly connected components that contain a cycle, each sorted by id.
fn cycles(graph: &TaskGraph) -> Vec<Vec<TaskId>> {
    // Kosaraju over edges predecessor -> task.
    let n = graph.len();
    let preds = graph.predecessor_indices();
    let mut succs = vec![Vec::new(); n];
    for (i, ps) in preds.iter().enumerate() {
        for &p in ps {
            succs[p].push(i);
        }
    }

    let mut visited = vec![false; n];
    let mut finish = Vec::with_capacity(n);
    for root in 0..n {
        if visited[root] {
            continue;
        }
        visited[root] = true;
        let mut stack = vec![(root, 0usize)];
        while let Some((node, child)) = stack.pop() {
            if child < succs[node].len() {
                stack.push((node, child + 1));
                let next = succs[node][child];
                if !visited[next] {
                    visited[next] = true;
                    stack.push((next, 0));
                }
            } else {
                finish.push(node);
            }
        }
    }

    let mut component = vec![usize::MAX; n];
    let mut result = Vec::new();
    for &root in finish.iter().rev() {
        if component[root] != usize::MAX {
            continue;
        }
        let mut members = vec![root];
        component[root] = root;
        let mut stack = vec![root];
        while let Some(node) = stack.pop() {
            for &p in &preds[node] {
                if component[p] == usize::MAX {
                    component[p] = root;
                    members.push(p);
                    stack.push(p);
                }
            }
        }
        let self_loop = members.len() == 1 && preds[root].contains(&root);
        if members.len() > 1 || self_loop {
            let mut ids: Vec<TaskId> = members.iter().map(|&i| graph.tasks[i].id.clone()).collect();
            ids.sort();
            ids.dedup();
            result.push(ids);
        }
    }
    result.sort();
    result
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tray {
    #[serde(rename = "width_mm")]
    pub width: f64,
    #[serde(rename = "height_mm")]
    pub height: f64,
}

impl Tray {
    pub fn new(width: f64, height: f64) -> Self {
        Self { width, height }
    }

    pub fn area(&self) -> f64 {
        self.width * self.height
    }
}

/// Part types and part instances of one scenario.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PartCatalog {
    types: BTreeMap<PartTypeId, PartType>,
    parts: BTreeMap<PartId, PartInstance>,
}

impl PartCatalog {
    pub fn new(types: Vec<PartType>, parts: Vec<PartInstance>) -> Self {
        Self {
            types: types.into_iter().map(|t| (t.id.clone(), t)).collect(),
            parts: parts.into_iter().map(|p| (p.id.clone(), p)).collect(),
        }
    }

    pub fn part(&self, id: &str) -> Result<&PartInstance, ModelError> {
        self.parts
            .get(id)
            .ok_or_else(|| ModelError::UnknownPart(id.to_string()))
    }

    pub fn part_type_of(&self, part: &str) -> Result<&PartType, ModelError> {
        let inst = self.part(part)?;
        self.types
            .get(&inst.part_type)
            .ok_or_else(|| ModelError::UnknownPartType(inst.part_type.clone()))
    }

    pub fn part_type(&self, id: &str) -> Option<&PartType> {
        self.types.get(id)
    }

    pub fn types(&self) -> impl Iterator<Item = &PartType> {
        self.types.values()
    }

    pub fn parts(&self) -> impl Iterator<Item = &PartInstance> {
        self.parts.values()
    }

    /// Footprint of a part at zero rotation.
    pub fn area_of(&self, part: &str) -> Result<f64, ModelError> {
        Ok(self.part_type_of(part)?.area())
    }
}

/// A validated scenario: task graph, tray and part catalog.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub graph: TaskGraph,
    pub tray: Tray,
    pub catalog: PartCatalog,
}

impl Scenario {
    /// Builds and validates a scenario.
    pub fn new(graph: TaskGraph, tray: Tray, catalog: PartCatalog) -> Result<Self, ModelError> {
        let scenario = Self { graph, tray, catalog };
        let violations = scenario.violations();
        if violations.is_empty() {
            Ok(scenario)
        } else {
            Err(ModelError::Invalid(violations))
        }
    }

    /// Graph violations plus catalog/tray consistency checks.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = validate_graph(&self.graph);
        if !(self.tray.width > 0.0 && self.tray.height > 0.0) {
            out.push(Violation::NonPositiveTray);
        }
        for t in self.catalog.types.values() {
            if !(t.bbox_width > 0.0 && t.bbox_height > 0.0) {
                out.push(Violation::NonPositiveBox(t.id.clone()));
            }
        }
        for p in self.catalog.parts.values() {
            if !self.catalog.types.contains_key(&p.part_type) {
                out.push(Violation::UnknownPartType {
                    part: p.id.clone(),
                    part_type: p.part_type.clone(),
                });
            }
        }
        for t in self.graph.tasks() {
            for p in &t.required_parts {
                if !self.catalog.parts.contains_key(p) {
                    out.push(Violation::UnknownPart {
                        task: t.id.clone(),
                        part: p.clone(),
                    });
                }
            }
        }
        out
    }

    /// Parts required by the given tasks, in task then listing order.
    pub fn parts_for<'a, I>(&self, tasks: I) -> Result<Vec<PartId>, ModelError>
    where
        I: IntoIterator<Item = &'a str>,
    {
        let mut out = Vec::new();
        for id in tasks {
            out.extend(self.graph.task(id)?.required_parts.iter().cloned());
        }
        Ok(out)
    }

    /// All parts consumed by one assembled unit.
    pub fn unit_parts(&self) -> Vec<PartId> {
        self.graph
            .tasks()
            .iter()
            .flat_map(|t| t.required_parts.iter().cloned())
            .collect()
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        let file: ScenarioFile = serde_json::from_str(text).map_err(|e| ModelError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        file.into_scenario()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&ScenarioFile::from(self)).expect("scenario serializes")
    }

    /// One of the scenarios shipped with the crate: `stool` or `table_12task`.
    pub fn bundled(name: &str) -> Result<Self, ModelError> {
        let text = match name {
            "stool" => include_str!("../scenarios/stool.json"),
            "table_12task" | "table" => include_str!("../scenarios/table_12task.json"),
            other => return Err(ModelError::UnknownBundled(other.to_string())),
        };
        Self::from_json(text)
    }
}

/// Reads and validates a scenario JSON file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scenario::from_json(&text)
}

// On-disk representation.

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    part_types: Vec<PartType>,
    parts: Vec<PartInstance>,
    tasks: Vec<TaskFile>,
    tray: Tray,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TaskFile {
    id: TaskId,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    human_duration_dist: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robot_duration_s: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    robot_duration_dist: Option<Vec<f64>>,
    #[serde(default)]
    required_parts: Vec<PartId>,
    #[serde(default)]
    predecessors: Vec<TaskId>,
}

fn duration_field(
    task: &str,
    which: &str,
    fixed: Option<f64>,
    dist: Option<Vec<f64>>,
) -> Result<DurationSpec, ModelError> {
    match (fixed, dist) {
        (Some(v), None) => Ok(DurationSpec::Fixed(v)),
        (None, Some(d)) => Ok(DurationSpec::Empirical(d)),
        (Some(_), Some(_)) => Err(ModelError::Field {
            task: task.to_string(),
            message: format!("both {which}_duration_s and {which}_duration_dist given"),
        }),
        (None, None) => Err(ModelError::Field {
            task: task.to_string(),
            message: format!("missing {which}_duration_s or {which}_duration_dist"),
        }),
    }
}

impl ScenarioFile {
    fn into_scenario(self) -> Result<Scenario, ModelError> {
        let mut violations = Vec::new();
        let mut type_ids = BTreeSet::new();
        for t in &self.part_types {
            if !type_ids.insert(t.id.clone()) {
                violations.push(Violation::DuplicatePartType(t.id.clone()));
            }
        }
        let mut part_ids = BTreeSet::new();
        for p in &self.parts {
            if !part_ids.insert(p.id.clone()) {
                violations.push(Violation::DuplicatePartInstance(p.id.clone()));
            }
        }
        let mut tasks = Vec::with_capacity(self.tasks.len());
        for t in self.tasks {
            let human = duration_field(&t.id, "human", t.human_duration_s, t.human_duration_dist)?;
            let robot = duration_field(&t.id, "robot", t.robot_duration_s, t.robot_duration_dist)?;
            tasks.push(Task {
                id: t.id,
                name: t.name,
                human_duration: human,
                robot_duration: robot,
                required_parts: t.required_parts,
                predecessors: t.predecessors,
            });
        }
        let catalog = PartCatalog::new(self.part_types, self.parts);
        match Scenario::new(TaskGraph::new(tasks), self.tray, catalog) {
            Ok(s) if violations.is_empty() => Ok(s),
            Ok(_) => Err(ModelError::Invalid(violations)),
            Err(ModelError::Invalid(mut more)) => {
                violations.append(&mut more);
                Err(ModelError::Invalid(violations))
            }
            Err(e) => Err(e),
        }
    }
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        let split = |d: &DurationSpec| match d {
            DurationSpec::Fixed(v) => (Some(*v), None),
            DurationSpec::Empirical(v) => (None, Some(v.clone())),
        };
        ScenarioFile {
            part_types: s.catalog.types.values().cloned().collect(),
            parts: s.catalog.parts.values().cloned().collect(),
            tasks: s
                .graph
                .tasks()
                .iter()
                .map(|t| {
                    let (hs, hd) = split(&t.human_duration);
                    let (rs, rd) = split(&t.robot_duration);
                    TaskFile {
                        id: t.id.clone(),
                        name: t.name.clone(),
                        human_duration_s: hs,
                        human_duration_dist: hd,
                        robot_duration_s: rs,
                        robot_duration_dist: rd,
                        required_parts: t.required_parts.clone(),
                        predecessors: t.predecessors.clone(),
                    }
                })
                .collect(),
            tray: s.tray,
        }
    }
}
