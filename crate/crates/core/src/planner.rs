//! Upper-level segmentation: limited-horizon search over task sequences and
//! partition points, with kit arrangement solved as the inner problem.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::hash::{Hash, Hasher};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{LayoutError, ModelError, PlanError};
use crate::kit_layout::{arrange_kit, CeParams, FitnessWeights, KitLayout};
use crate::task_model::{allowed, PartId, Scenario, TaskGraph, TaskId};

/// Objective weights. `w1` and `w7` act as near-hard constraints.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerWeights {
    #[serde(rename = "w1")]
    pub w1_precedence: f64,
    #[serde(rename = "w2")]
    pub w2_coverage: f64,
    #[serde(rename = "w3")]
    pub w3_sync_now: f64,
    #[serde(rename = "w4")]
    pub w4_sync_next: f64,
    #[serde(rename = "w5")]
    pub w5_kit_fitness: f64,
    #[serde(rename = "w7")]
    pub w7_unavailable: f64,
}

impl Default for PlannerWeights {
    fn default() -> Self {
        Self {
            w1_precedence: 1e6,
            w2_coverage: 1.0,
            w3_sync_now: 1.0,
            w4_sync_next: 1.0,
            w5_kit_fitness: 0.01,
            w7_unavailable: 1e4,
        }
    }
}

impl PlannerWeights {
    /// All weights zero.
    pub fn zero() -> Self {
        Self {
            w1_precedence: 0.0,
            w2_coverage: 0.0,
            w3_sync_now: 0.0,
            w4_sync_next: 0.0,
            w5_kit_fitness: 0.0,
            w7_unavailable: 0.0,
        }
    }

    fn all(&self) -> [f64; 6] {
        [
            self.w1_precedence,
            self.w2_coverage,
            self.w3_sync_now,
            self.w4_sync_next,
            self.w5_kit_fitness,
            self.w7_unavailable,
        ]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    /// Maximum length of a candidate sequence.
    pub horizon_n: usize,
    #[serde(rename = "delivery_time_s")]
    pub delivery_time: f64,
    pub weights: PlannerWeights,
    pub ce: CeParams,
    pub fitness_weights: FitnessWeights,
    /// Use absolute values in the two synchronisation terms.
    pub abs_sync_terms: bool,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            horizon_n: 5,
            delivery_time: 0.0,
            weights: PlannerWeights::default(),
            ce: CeParams::default(),
            fitness_weights: FitnessWeights::default(),
            abs_sync_terms: false,
        }
    }
}

impl PlannerConfig {
    pub fn validate(&self) -> Result<(), PlanError> {
        if self.horizon_n == 0 {
            return Err(PlanError::Config("horizon_n must be at least 1".into()));
        }
        if !(self.delivery_time >= 0.0 && self.delivery_time.is_finite()) {
            return Err(PlanError::Config("delivery_time_s must be finite and non-negative".into()));
        }
        if self.weights.all().iter().any(|w| !(*w >= 0.0 && w.is_finite())) {
            return Err(PlanError::Config("weights must be finite and non-negative".into()));
        }
        self.ce.validate().map_err(|e| PlanError::Config(e.to_string()))
    }

    /// CE settings for one kit. The seed depends only on the configured seed
    /// and the set of parts, so a kit gets the same layout whenever it is planned.
    pub fn ce_for(&self, sorted_parts: &[PartId]) -> CeParams {
        let mut h = Fnv::default();
        sorted_parts.hash(&mut h);
        CeParams {
            seed: self.ce.seed ^ h.finish(),
            ..self.ce.clone()
        }
    }
}

/// Planning-time view of the line.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlannerState {
    /// Segments already kitted, in delivery order.
    pub completed_segments: Vec<Vec<TaskId>>,
    /// Human time still needed for the segment currently being assembled (s).
    pub current_segment_human_remaining: f64,
    /// Parts flagged available; parts without an entry count as available.
    pub part_availability: BTreeMap<PartId, bool>,
    /// (human s, robot s) estimates; tasks without an entry use their mean durations.
    pub duration_estimates: BTreeMap<TaskId, (f64, f64)>,
}

impl PlannerState {
    pub fn segmented(&self) -> BTreeSet<&str> {
        self.completed_segments.iter().flatten().map(String::as_str).collect()
    }

    /// Tasks not in any segment, in graph order.
    pub fn remaining<'g>(&self, graph: &'g TaskGraph) -> Vec<&'g str> {
        let done = self.segmented();
        graph.task_ids().filter(|t| !done.contains(t)).collect()
    }

    pub fn is_complete(&self, graph: &TaskGraph) -> bool {
        self.remaining(graph).is_empty()
    }

    fn estimate(&self, graph: &TaskGraph, task: &str) -> Result<(f64, f64), ModelError> {
        if let Some(&e) = self.duration_estimates.get(task) {
            return Ok(e);
        }
        let t = graph.task(task)?;
        Ok((t.human_duration.mean(), t.robot_duration.mean()))
    }

    fn is_available(&self, part: &str) -> bool {
        self.part_availability.get(part).copied().unwrap_or(true)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub struct PlanCandidate {
    pub k_sequence: Vec<TaskId>,
    /// Number of leading tasks of `k_sequence` in the next kit (1-based).
    pub partition_i: usize,
}

impl PlanCandidate {
    pub fn segment(&self) -> &[TaskId] {
        &self.k_sequence[..self.partition_i]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentDecision {
    pub candidate: PlanCandidate,
    /// Tasks of the next kit, in execution order.
    pub segment: Vec<TaskId>,
    pub parts: Vec<PartId>,
    pub layout: KitLayout,
    pub layout_cost: f64,
    pub objective_value: f64,
    pub estimated_robot_time: f64,
}

/// Upper-level objective for one candidate; lower is better.
pub fn upper_objective(
    candidate: &PlanCandidate,
    layout_cost: f64,
    state: &PlannerState,
    scenario: &Scenario,
    config: &PlannerConfig,
) -> Result<f64, ModelError> {
    let graph = &scenario.graph;
    let k = &candidate.k_sequence;
    let i = candidate.partition_i;
    let w = &config.weights;
    let d = config.delivery_time;

    let mut done: BTreeSet<&str> = state.segmented();
    let mut violations = 0usize;
    for t in k {
        if !allowed(t, &done, graph)? {
            violations += 1;
        }
        done.insert(t);
    }

    let mut robot_head = 0.0;
    let mut human_head = 0.0;
    let mut robot_tail = 0.0;
    for (j, t) in k.iter().enumerate() {
        let (h, r) = state.estimate(graph, t)?;
        if j < i {
            robot_head += r;
            human_head += h;
        } else {
            robot_tail += r;
        }
    }
    let sync = |v: f64| if config.abs_sync_terms { v.abs() } else { v };
    let sync_now = sync(d + robot_head - state.current_segment_human_remaining);
    let sync_next = sync(d + robot_tail - human_head);

    let unavailable = unavailable_count(&candidate.k_sequence[..i], state, scenario)?;

    Ok(w.w1_precedence * violations as f64 - w.w2_coverage * i as f64
        + w.w3_sync_now * sync_now
        + w.w4_sync_next * sync_next
        + w.w5_kit_fitness * layout_cost
        + w.w7_unavailable * unavailable as f64)
}

/// Parts of the kit for `segment` that cannot be gathered now.
///
/// Parts of one type are interchangeable: a kit needing `n` parts of a type is
/// short by `n` minus the number of not-yet-kitted parts of that type flagged available.
pub fn unavailable_count(segment: &[TaskId], state: &PlannerState, scenario: &Scenario) -> Result<usize, ModelError> {
    let mut need: BTreeMap<&str, usize> = BTreeMap::new();
    for t in segment {
        for p in &scenario.graph.task(t)?.required_parts {
            *need.entry(scenario.catalog.part_type_of(p)?.id.as_str()).or_default() += 1;
        }
    }
    if need.is_empty() || state.part_availability.values().all(|&a| a) {
        return Ok(0);
    }
    let mut have: BTreeMap<&str, usize> = BTreeMap::new();
    for t in state.remaining(&scenario.graph) {
        for p in &scenario.graph.task(t)?.required_parts {
            if state.is_available(p) {
                *have.entry(scenario.catalog.part_type_of(p)?.id.as_str()).or_default() += 1;
            }
        }
    }
    Ok(need
        .iter()
        .map(|(ty, &n)| n.saturating_sub(have.get(ty).copied().unwrap_or(0)))
        .sum())
}

/// All precedence-valid sequences of `min(N, #remaining)` remaining tasks, each
/// paired with every partition whose kit passes the tray-area filter.
pub fn enumerate_candidates(
    state: &PlannerState,
    scenario: &Scenario,
    config: &PlannerConfig,
) -> Result<Vec<PlanCandidate>, ModelError> {
    let graph = &scenario.graph;
    let mut remaining: Vec<&str> = state.remaining(graph);
    remaining.sort_unstable();
    let len = config.horizon_n.min(remaining.len());
    if len == 0 {
        return Ok(Vec::new());
    }

    let mut area = BTreeMap::new();
    for t in &remaining {
        let mut a = 0.0;
        for p in &graph.task(t)?.required_parts {
            a += scenario.catalog.area_of(p)?;
        }
        area.insert(*t, a);
    }

    let mut out = Vec::new();
    let mut done = state.segmented();
    let mut seq: Vec<&str> = Vec::with_capacity(len);
    let mut used = vec![false; remaining.len()];
    extend(graph, &remaining, len, &mut done, &mut seq, &mut used, &mut |seq| {
        let mut kit_area = 0.0;
        for i in 1..=seq.len() {
            kit_area += area[seq[i - 1]];
            if kit_area > scenario.tray.area() {
                break;
            }
            out.push(PlanCandidate {
                k_sequence: seq.iter().map(|s| s.to_string()).collect(),
                partition_i: i,
            });
        }
    })?;
    Ok(out)
}

fn extend<'a>(
    graph: &TaskGraph,
    remaining: &[&'a str],
    len: usize,
    done: &mut BTreeSet<&'a str>,
    seq: &mut Vec<&'a str>,
    used: &mut [bool],
    emit: &mut dyn FnMut(&[&str]),
) -> Result<(), ModelError> {
    if seq.len() == len {
        emit(seq);
        return Ok(());
    }
    for (idx, &t) in remaining.iter().enumerate() {
        if used[idx] || !allowed(t, done, graph)? {
            continue;
        }
        used[idx] = true;
        done.insert(t);
        seq.push(t);
        extend(graph, remaining, len, done, seq, used, emit)?;
        seq.pop();
        done.remove(t);
        used[idx] = false;
    }
    Ok(())
}

/// Outcome of arranging one kit, keyed by its sorted part list.
#[derive(Debug, Clone)]
enum CachedKit {
    Arranged { layout: KitLayout, cost: f64 },
    Infeasible,
}

/// Arranged kits shared between planning calls.
///
/// Only valid for one scenario and one planner configuration.
#[derive(Debug, Clone, Default)]
pub struct KitCache {
    inner: Arc<Mutex<HashMap<Vec<PartId>, CachedKit>>>,
}

impl KitCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.inner.lock().expect("kit cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn get_or_arrange(
        &self,
        parts: &[PartId],
        scenario: &Scenario,
        config: &PlannerConfig,
    ) -> Result<CachedKit, PlanError> {
        let mut key = parts.to_vec();
        key.sort();
        if let Some(hit) = self.inner.lock().expect("kit cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let ce = config.ce_for(&key);
        let kit = match arrange_kit(&key, &scenario.catalog, &scenario.tray, &config.fitness_weights, &ce) {
            Ok(a) => CachedKit::Arranged {
                layout: a.layout,
                cost: a.cost,
            },
            Err(LayoutError::Model(e)) => return Err(e.into()),
            Err(LayoutError::Params(e)) => return Err(PlanError::Config(e)),
            Err(_) => CachedKit::Infeasible,
        };
        self.inner
            .lock()
            .expect("kit cache poisoned")
            .insert(key, kit.clone());
        Ok(kit)
    }
}

/// Picks the next kit with a fresh kit cache.
pub fn solve_segment(state: &PlannerState, scenario: &Scenario, config: &PlannerConfig) -> Result<SegmentDecision, PlanError> {
    solve_segment_cached(state, scenario, config, &KitCache::new())
}

/// Picks the next kit: the candidate with the lowest objective, ties going to
/// the larger partition and then the lexicographically smaller sequence.
pub fn solve_segment_cached(
    state: &PlannerState,
    scenario: &Scenario,
    config: &PlannerConfig,
    cache: &KitCache,
) -> Result<SegmentDecision, PlanError> {
    config.validate()?;
    if state.is_complete(&scenario.graph) {
        return Err(PlanError::NothingToPlan);
    }
    let candidates = enumerate_candidates(state, scenario, config)?;

    // Many candidates share a kit; arrange each distinct task set once.
    let mut kits: HashMap<BTreeSet<&str>, Option<(Vec<PartId>, KitLayout, f64)>> = HashMap::new();
    let mut best: Option<(f64, &PlanCandidate)> = None;
    for cand in &candidates {
        let key: BTreeSet<&str> = cand.segment().iter().map(String::as_str).collect();
        if !kits.contains_key(&key) {
            let parts = scenario.parts_for(cand.segment().iter().map(String::as_str))?;
            let entry = match cache.get_or_arrange(&parts, scenario, config)? {
                CachedKit::Arranged { layout, cost } => Some((parts, layout, cost)),
                CachedKit::Infeasible => None,
            };
            kits.insert(key.clone(), entry);
        }
        let Some((_, _, cost)) = &kits[&key] else { continue };
        let value = upper_objective(cand, *cost, state, scenario, config)?;
        let better = match best {
            None => true,
            Some((bv, bc)) => {
                let tol = 1e-9 * bv.abs().max(value.abs()).max(1.0);
                if (value - bv).abs() <= tol {
                    (cand.partition_i, std::cmp::Reverse(&cand.k_sequence))
                        > (bc.partition_i, std::cmp::Reverse(&bc.k_sequence))
                } else {
                    value < bv
                }
            }
        };
        if better {
            best = Some((value, cand));
        }
    }

    let (objective_value, cand) = best.ok_or(PlanError::Infeasible)?;
    let key: BTreeSet<&str> = cand.segment().iter().map(String::as_str).collect();
    let (_, layout, layout_cost) = kits[&key].clone().expect("winner has a layout");
    // Kit parts in segment order rather than sorted.
    let parts = scenario.parts_for(cand.segment().iter().map(String::as_str))?;
    let mut estimated_robot_time = 0.0;
    for t in cand.segment() {
        estimated_robot_time += state.estimate(&scenario.graph, t)?.1;
    }
    Ok(SegmentDecision {
        candidate: cand.clone(),
        segment: cand.segment().to_vec(),
        parts,
        layout,
        layout_cost,
        objective_value,
        estimated_robot_time,
    })
}

/// Reduces the current segment's remaining human time by the observed progress.
pub fn replan_estimates(state: &PlannerState, observed: &BTreeMap<TaskId, f64>) -> PlannerState {
    let progress: f64 = observed.values().sum();
    PlannerState {
        current_segment_human_remaining: (state.current_segment_human_remaining - progress).max(0.0),
        ..state.clone()
    }
}

/// 64-bit FNV-1a; stable across platforms and releases, unlike `DefaultHasher`.
struct Fnv(u64);

impl Default for Fnv {
    fn default() -> Self {
        Fnv(0xcbf2_9ce4_8422_2325)
    }
}

impl Hasher for Fnv {
    fn finish(&self) -> u64 {
        self.0
    }

    fn write(&mut self, bytes: &[u8]) {
        for b in bytes {
            self.0 ^= u64::from(*b);
            self.0 = self.0.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::{PartCatalog, PartInstance, PartType, Task, Tray};

    fn stool() -> Scenario {
        Scenario::bundled("stool").unwrap()
    }

    fn only(f: impl FnOnce(&mut PlannerWeights)) -> PlannerConfig {
        let mut weights = PlannerWeights::zero();
        f(&mut weights);
        PlannerConfig {
            weights,
            ..PlannerConfig::default()
        }
    }

    fn cand(k: &[&str], i: usize) -> PlanCandidate {
        PlanCandidate {
            k_sequence: k.iter().map(|s| s.to_string()).collect(),
            partition_i: i,
        }
    }

    #[test]
    fn coverage_term_alone() {
        let cfg = only(|w| w.w2_coverage = 1.0);
        let v = upper_objective(&cand(&["a1"], 1), 0.0, &PlannerState::default(), &stool(), &cfg).unwrap();
        assert_eq!(v, -1.0);
    }

    #[test]
    fn precedence_violation_is_penalised() {
        let cfg = only(|w| w.w1_precedence = 1e6);
        let v = upper_objective(&cand(&["a2"], 1), 0.0, &PlannerState::default(), &stool(), &cfg).unwrap();
        assert_eq!(v, 1e6);
    }

    #[test]
    fn sync_terms_are_signed() {
        let mut cfg = only(|w| {
            w.w3_sync_now = 1.0;
            w.w4_sync_next = 1.0;
        });
        cfg.delivery_time = 5.0;
        let state = PlannerState {
            current_segment_human_remaining: 20.0,
            ..PlannerState::default()
        };
        // (5 + 10 - 20) + (5 + 10 - 20)
        let v = upper_objective(&cand(&["a1", "a2"], 1), 0.0, &state, &stool(), &cfg).unwrap();
        assert_eq!(v, -10.0);
        cfg.abs_sync_terms = true;
        let v = upper_objective(&cand(&["a1", "a2"], 1), 0.0, &state, &stool(), &cfg).unwrap();
        assert_eq!(v, 10.0);
    }

    #[test]
    fn unknown_task_is_an_error() {
        let cfg = PlannerConfig::default();
        let r = upper_objective(&cand(&["zz"], 1), 0.0, &PlannerState::default(), &stool(), &cfg);
        assert!(matches!(r, Err(ModelError::UnknownTask(_))));
    }

    #[test]
    fn stool_has_six_candidates() {
        let cfg = PlannerConfig {
            horizon_n: 3,
            ..PlannerConfig::default()
        };
        let c = enumerate_candidates(&PlannerState::default(), &stool(), &cfg).unwrap();
        assert_eq!(c.len(), 6);
        let seqs: BTreeSet<Vec<TaskId>> = c.iter().map(|c| c.k_sequence.clone()).collect();
        let expected: BTreeSet<Vec<TaskId>> = [["a1", "a2", "a3"], ["a1", "a3", "a2"]]
            .iter()
            .map(|s| s.iter().map(|t| t.to_string()).collect())
            .collect();
        assert_eq!(seqs, expected);
    }

    #[test]
    fn forced_and_empty_enumerations() {
        let s = stool();
        let cfg = PlannerConfig::default();
        let one_left = PlannerState {
            completed_segments: vec![vec!["a1".into(), "a2".into()]],
            ..PlannerState::default()
        };
        assert_eq!(enumerate_candidates(&one_left, &s, &cfg).unwrap(), vec![cand(&["a3"], 1)]);
        let none_left = PlannerState {
            completed_segments: vec![vec!["a1".into()], vec!["a2".into(), "a3".into()]],
            ..PlannerState::default()
        };
        assert!(enumerate_candidates(&none_left, &s, &cfg).unwrap().is_empty());
        assert!(matches!(
            solve_segment(&none_left, &s, &cfg),
            Err(PlanError::NothingToPlan)
        ));
    }

    #[test]
    fn area_filter_limits_partition() {
        // Tray holds exactly one of the two 10x10 parts.
        let cat = PartCatalog::new(
            vec![PartType {
                id: "box".into(),
                name: String::new(),
                bbox_width: 10.0,
                bbox_height: 10.0,
            }],
            vec![
                PartInstance {
                    id: "p".into(),
                    part_type: "box".into(),
                },
                PartInstance {
                    id: "q".into(),
                    part_type: "box".into(),
                },
            ],
        );
        let graph = TaskGraph::new(vec![
            Task::new("a", 1.0, 1.0).with_parts(["p"]),
            Task::new("b", 1.0, 1.0).with_parts(["q"]).with_predecessors(["a"]),
        ]);
        let s = Scenario::new(graph, Tray::new(10.0, 15.0), cat).unwrap();
        let c = enumerate_candidates(&PlannerState::default(), &s, &PlannerConfig::default()).unwrap();
        assert_eq!(c, vec![cand(&["a", "b"], 1)]);
    }

    fn balanced_stool() -> Scenario {
        let mut s = stool();
        let tasks = s
            .graph
            .tasks()
            .iter()
            .map(|t| {
                let mut t = t.clone();
                t.human_duration = crate::task_model::DurationSpec::Fixed(10.0);
                t.robot_duration = crate::task_model::DurationSpec::Fixed(10.0);
                t
            })
            .collect();
        s.graph = TaskGraph::new(tasks);
        s
    }

    fn sync_config(abs: bool) -> PlannerConfig {
        let mut cfg = only(|w| {
            w.w3_sync_now = 1.0;
            w.w4_sync_next = 1.0;
            w.w2_coverage = 0.01;
        });
        cfg.horizon_n = 3;
        cfg.abs_sync_terms = abs;
        cfg
    }

    #[test]
    fn balanced_stool_first_segment() {
        let s = balanced_stool();
        // Absolute sync terms: i=1 leaves |0+10-0| + |0+20-10| = 20, i=3 gives |30| + |-30| = 60.
        let d = solve_segment(&PlannerState::default(), &s, &sync_config(true)).unwrap();
        assert_eq!(d.segment, vec!["a1".to_string()]);
        // Signed terms reward the largest kit: 30 + (0 - 30) - 0.03.
        let d = solve_segment(&PlannerState::default(), &s, &sync_config(false)).unwrap();
        assert_eq!(d.candidate.partition_i, 3);
        assert!((d.objective_value - (-0.03)).abs() < 1e-12);
    }

    #[test]
    fn dominant_coverage_takes_everything() {
        let s = stool();
        let cfg = PlannerConfig {
            weights: PlannerWeights {
                w2_coverage: 1e5,
                ..PlannerWeights::default()
            },
            ..PlannerConfig::default()
        };
        let d = solve_segment(&PlannerState::default(), &s, &cfg).unwrap();
        assert_eq!(d.segment.len(), 3);
        assert_eq!(d.parts.len(), s.unit_parts().len());
    }

    #[test]
    fn unavailable_part_steers_the_kit() {
        let s = Scenario::bundled("table_12task").unwrap();
        let mut cfg = sync_config(true);
        cfg.horizon_n = 2;
        cfg.weights.w7_unavailable = 1e4;
        let mut state = PlannerState::default();
        state.completed_segments.push(vec!["foot_1".into(), "foot_2".into()]);
        state.part_availability.insert("leg_3".into(), false);
        state.part_availability.insert("leg_4".into(), false);
        let d = solve_segment(&state, &s, &cfg).unwrap();
        assert!(d.segment.iter().all(|t| !t.starts_with("foot_")), "{:?}", d.segment);
    }

    #[test]
    fn unavailable_counts_by_type() {
        let s = Scenario::bundled("table_12task").unwrap();
        let mut state = PlannerState::default();
        state.part_availability.insert("leg_1".into(), false);
        // Another leg can stand in for leg_1.
        let seg = vec!["foot_1".to_string()];
        assert_eq!(unavailable_count(&seg, &state, &s).unwrap(), 0);
        for k in 2..=4 {
            state.part_availability.insert(format!("leg_{k}"), false);
        }
        assert_eq!(unavailable_count(&seg, &state, &s).unwrap(), 1);
        let seg2 = vec!["foot_1".to_string(), "foot_2".to_string()];
        assert_eq!(unavailable_count(&seg2, &state, &s).unwrap(), 2);
    }

    #[test]
    fn replan_examples() {
        let state = PlannerState {
            current_segment_human_remaining: 30.0,
            ..PlannerState::default()
        };
        let obs = |v: f64| BTreeMap::from([("a1".to_string(), v)]);
        assert_eq!(replan_estimates(&state, &obs(10.0)).current_segment_human_remaining, 20.0);
        let short = PlannerState {
            current_segment_human_remaining: 5.0,
            ..PlannerState::default()
        };
        assert_eq!(replan_estimates(&short, &obs(10.0)).current_segment_human_remaining, 0.0);
        assert_eq!(replan_estimates(&state, &BTreeMap::new()), state);
    }

    #[test]
    fn cache_gives_identical_decisions() {
        let s = stool();
        let cfg = PlannerConfig::default();
        let cache = KitCache::new();
        let a = solve_segment_cached(&PlannerState::default(), &s, &cfg, &cache).unwrap();
        let filled = cache.len();
        assert!(filled > 0);
        let b = solve_segment_cached(&PlannerState::default(), &s, &cfg, &cache).unwrap();
        assert_eq!(cache.len(), filled);
        assert_eq!(a, b);
        assert_eq!(a, solve_segment(&PlannerState::default(), &s, &cfg).unwrap());
    }

    #[test]
    fn config_parses_documented_keys() {
        let cfg: PlannerConfig = toml::from_str(
            "horizon_n = 4\ndelivery_time_s = 12.5\n[weights]\nw1 = 1e6\nw7 = 10.0\n[ce]\nsamples = 100\nelite = 10\nmax_iters = 20\nseed = 3\n",
        )
        .unwrap();
        assert_eq!(cfg.horizon_n, 4);
        assert_eq!(cfg.delivery_time, 12.5);
        assert_eq!(cfg.weights.w7_unavailable, 10.0);
        assert_eq!(cfg.weights.w2_coverage, 1.0);
        assert_eq!(cfg.ce.sample_count, 100);
        assert!(PlannerConfig { horizon_n: 0, ..cfg }.validate().is_err());
    }
}
