use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp;

use super::{sample_durations, EventKind, KitRecord, SimConfig, SimMetrics, TraceEvent, UnitMetrics};
use crate::error::{ModelError, SimError};
use crate::planner::{replan_estimates, KitCache, PlannerConfig, PlannerState};
use crate::strategies::{strategy_next_kit, StrategyKind};
use crate::task_model::{PartId, Scenario};

/// Stream ids for the per-run generators. Each machine and each unit draws
/// from its own stream so that strategies see identical arrivals, failures
/// and durations for the same seed.
const DURATION_STREAM: u64 = 1 << 32;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Ev {
    Arrival { machine: usize, generation: u64 },
    Failure { machine: usize, generation: u64 },
    Repaired { machine: usize },
    KitReady,
    KitDelivered,
    TrayRetrieved,
    HumanTaskDone,
}

#[derive(Debug)]
struct Queued {
    time: f64,
    seq: u64,
    ev: Ev,
}

impl PartialEq for Queued {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Queued {}
impl PartialOrd for Queued {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Queued {
    // Reversed so the max-heap pops the earliest (time, seq).
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.seq.cmp(&self.seq))
    }
}

struct Machine {
    name: String,
    mat: f64,
    arrivals: Option<Exp<f64>>,
    failures: Option<Exp<f64>>,
    arrival_rng: ChaCha8Rng,
    failure_rng: ChaCha8Rng,
    up: bool,
    generation: u64,
    stock: usize,
}

impl Machine {
    fn available(&self) -> Option<usize> {
        if self.mat > 0.0 {
            Some(self.stock)
        } else if self.up {
            None
        } else {
            Some(0)
        }
    }
}

#[derive(Debug, Clone)]
struct Kit {
    unit: usize,
    tasks: Vec<usize>,
    parts: Vec<String>,
    /// Required count per governed machine.
    need: Vec<(usize, usize)>,
    record: Option<KitRecord>,
}

enum Robot {
    Idle,
    Waiting(Kit),
    Busy,
    Finished,
}

pub(crate) struct Engine<'a> {
    scenario: &'a Scenario,
    config: &'a SimConfig,
    planner: &'a PlannerConfig,
    cache: &'a KitCache,
    now: f64,
    seq: u64,
    queue: BinaryHeap<Queued>,
    machines: Vec<Machine>,
    /// Machine feeding each governed part type.
    machine_of_type: BTreeMap<String, usize>,
    /// (human, robot) per unit and task index.
    durations: Vec<Vec<(f64, f64)>>,
    robot: Robot,
    robot_unit: usize,
    plan_state: PlannerState,
    in_flight: Option<Kit>,
    tray: Option<Kit>,
    human_queue: VecDeque<(usize, usize)>,
    human_current: Option<(usize, usize, f64)>,
    tasks_left: Vec<usize>,
    units: Vec<UnitMetrics>,
    kits: Vec<KitRecord>,
    plans: usize,
    trace: Vec<TraceEvent>,
    recent: VecDeque<String>,
}

impl<'a> Engine<'a> {
    pub(crate) fn new(
        scenario: &'a Scenario,
        config: &'a SimConfig,
        planner: &'a PlannerConfig,
        cache: &'a KitCache,
    ) -> Result<Self, SimError> {
        let graph = &scenario.graph;
        let mut durations = Vec::with_capacity(config.num_units);
        for u in 0..config.num_units {
            let mut rng = stream(config.seed, DURATION_STREAM + u as u64);
            let mut per_task = Vec::with_capacity(graph.len());
            for t in graph.tasks() {
                per_task.push(sample_durations(t, &mut rng)?);
            }
            durations.push(per_task);
        }

        let mut machines = Vec::new();
        let mut machine_of_type = BTreeMap::new();
        for (m, (ty, &mat)) in config.mat_by_part_type.iter().enumerate() {
            let mttf = config.mttf_by_machine.get(ty).copied().unwrap_or(f64::INFINITY);
            let rate = |mean: f64| (mean > 0.0 && mean.is_finite()).then(|| Exp::new(1.0 / mean).expect("positive rate"));
            machines.push(Machine {
                name: ty.clone(),
                mat,
                arrivals: rate(mat),
                failures: rate(mttf),
                arrival_rng: stream(config.seed, 2 * m as u64 + 1),
                failure_rng: stream(config.seed, 2 * m as u64 + 2),
                up: true,
                generation: 0,
                stock: 0,
            });
            machine_of_type.insert(ty.clone(), m);
        }

        Ok(Self {
            scenario,
            config,
            planner,
            cache,
            now: 0.0,
            seq: 0,
            queue: BinaryHeap::new(),
            machines,
            machine_of_type,
            durations,
            robot: Robot::Idle,
            robot_unit: 0,
            plan_state: PlannerState::default(),
            in_flight: None,
            tray: None,
            human_queue: VecDeque::new(),
            human_current: None,
            tasks_left: vec![graph.len(); config.num_units],
            units: Vec::with_capacity(config.num_units),
            kits: Vec::new(),
            plans: 0,
            trace: Vec::new(),
            recent: VecDeque::new(),
        })
    }

    fn schedule(&mut self, delay: f64, ev: Ev) {
        self.seq += 1;
        self.queue.push(Queued {
            time: self.now + delay,
            seq: self.seq,
            ev,
        });
    }

    fn schedule_arrival(&mut self, m: usize) {
        let mach = &mut self.machines[m];
        if let Some(dist) = mach.arrivals {
            let dt = mach.arrival_rng.sample(dist);
            let generation = mach.generation;
            self.schedule(dt, Ev::Arrival { machine: m, generation });
        }
    }

    fn schedule_failure(&mut self, m: usize) {
        let mach = &mut self.machines[m];
        if let Some(dist) = mach.failures {
            let dt = mach.failure_rng.sample(dist);
            let generation = mach.generation;
            self.schedule(dt, Ev::Failure { machine: m, generation });
        }
    }

    pub(crate) fn run(mut self) -> Result<SimMetrics, SimError> {
        for m in 0..self.machines.len() {
            self.schedule_arrival(m);
            self.schedule_failure(m);
        }
        self.robot_step()?;

        while self.units.len() < self.config.num_units {
            let Some(q) = self.queue.pop() else {
                let remaining = self.tasks_left.iter().sum();
                return Err(SimError::Deadlock {
                    time: self.now,
                    remaining,
                    trace: Vec::from(self.recent.clone()).join(" | "),
                });
            };
            self.now = q.time;
            self.handle(q.seq, q.ev)?;
        }

        let kit_count = self.units.iter().map(|u| u.kit_count).sum();
        Ok(SimMetrics {
            total_task_time: self.units.iter().map(|u| u.total_task_time).sum(),
            human_idle_time: self.units.iter().map(|u| u.human_idle_time).sum(),
            kit_count,
            units: self.units,
            kits: self.kits,
            plans: self.plans,
            trace: self.config.record_trace.then_some(self.trace),
        })
    }

    fn log(&mut self, seq: u64, kind: EventKind, unit: Option<usize>, machine: Option<usize>, tasks: &[usize], start: Option<f64>) {
        let graph = &self.scenario.graph;
        let ev = TraceEvent {
            time: self.now,
            seq,
            kind,
            unit,
            machine: machine.map(|m| self.machines[m].name.clone()),
            tasks: tasks.iter().map(|&t| graph.tasks()[t].id.clone()).collect(),
            start,
        };
        if self.recent.len() == 12 {
            self.recent.pop_front();
        }
        self.recent.push_back(format!("{:.3} {:?} {:?}", ev.time, ev.kind, ev.tasks));
        if self.config.record_trace {
            self.trace.push(ev);
        }
    }

    fn handle(&mut self, seq: u64, ev: Ev) -> Result<(), SimError> {
        match ev {
            Ev::Arrival { machine, generation } => {
                let mach = &mut self.machines[machine];
                if !mach.up || generation != mach.generation {
                    return Ok(());
                }
                mach.stock += 1;
                self.log(seq, EventKind::PartArrival, None, Some(machine), &[], None);
                self.schedule_arrival(machine);
                self.availability_changed()?;
            }
            Ev::Failure { machine, generation } => {
                let mach = &mut self.machines[machine];
                if generation != mach.generation {
                    return Ok(());
                }
                mach.up = false;
                mach.generation += 1;
                self.log(seq, EventKind::MachineFailure, None, Some(machine), &[], None);
                let repair = self.config.repair_time;
                self.schedule(repair, Ev::Repaired { machine });
                self.availability_changed()?;
            }
            Ev::Repaired { machine } => {
                let mach = &mut self.machines[machine];
                mach.up = true;
                mach.generation += 1;
                self.log(seq, EventKind::MachineRepaired, None, Some(machine), &[], None);
                self.schedule_arrival(machine);
                self.schedule_failure(machine);
                self.availability_changed()?;
            }
            Ev::KitReady => {
                let kit = self.in_flight.as_mut().expect("kit in flight");
                let rec = kit.record.as_mut().expect("kit record");
                rec.ready = self.now;
                let (unit, tasks) = (kit.unit, kit.tasks.clone());
                self.log(seq, EventKind::KitReady, Some(unit), None, &tasks, None);
                let d = self.config.delivery_time;
                self.schedule(d, Ev::KitDelivered);
            }
            Ev::KitDelivered => {
                let mut kit = self.in_flight.take().expect("kit in flight");
                kit.record.as_mut().expect("kit record").delivered = self.now;
                self.log(seq, EventKind::KitDelivered, Some(kit.unit), None, &kit.tasks.clone(), None);
                self.tray = Some(kit);
                if self.human_idle() {
                    self.schedule(0.0, Ev::TrayRetrieved);
                }
            }
            Ev::TrayRetrieved => {
                let mut kit = self.tray.take().expect("kit on tray");
                let mut rec = kit.record.take().expect("kit record");
                rec.retrieved = self.now;
                self.log(seq, EventKind::TrayRetrieved, Some(kit.unit), None, &kit.tasks, None);
                self.kits.push(rec);
                for &t in &kit.tasks {
                    self.human_queue.push_back((kit.unit, t));
                }
                self.start_next_human_task();
                self.robot = Robot::Idle;
                self.robot_step()?;
            }
            Ev::HumanTaskDone => {
                let (unit, task, start) = self.human_current.take().expect("human busy");
                self.log(seq, EventKind::HumanTaskDone, Some(unit), None, &[task], Some(start));
                self.tasks_left[unit] -= 1;
                if self.tasks_left[unit] == 0 {
                    self.finish_unit(unit);
                    self.robot_step()?;
                }
                self.start_next_human_task();
                if self.human_idle() && self.tray.is_some() {
                    self.schedule(0.0, Ev::TrayRetrieved);
                }
            }
        }
        Ok(())
    }

    fn human_idle(&self) -> bool {
        self.human_current.is_none() && self.human_queue.is_empty()
    }

    fn start_next_human_task(&mut self) {
        if self.human_current.is_some() {
            return;
        }
        if let Some((unit, task)) = self.human_queue.pop_front() {
            self.human_current = Some((unit, task, self.now));
            let h = self.durations[unit][task].0;
            self.schedule(h, Ev::HumanTaskDone);
        }
    }

    fn finish_unit(&mut self, unit: usize) {
        let start = self.units.last().map_or(0.0, |u| u.end);
        let active: f64 = self.durations[unit].iter().map(|d| d.0).sum();
        let total = self.now - start;
        let kit_count = self.kits.iter().filter(|k| k.unit == unit).count();
        self.units.push(UnitMetrics {
            unit,
            start,
            end: self.now,
            total_task_time: total,
            human_idle_time: (total - active).max(0.0),
            active_time: active,
            kit_count,
        });
    }

    fn availability_changed(&mut self) -> Result<(), SimError> {
        if !matches!(self.robot, Robot::Waiting(_)) {
            return Ok(());
        }
        // The optimized robot replans only when its view of part availability changed.
        if self.config.strategy == StrategyKind::Optimized && self.availability_view()? != self.plan_state.part_availability {
            self.robot = Robot::Idle;
        }
        self.robot_step()
    }

    /// Advances the robot as far as possible without simulated time passing.
    fn robot_step(&mut self) -> Result<(), SimError> {
        if matches!(self.robot, Robot::Idle) && self.waiting_for_unit_end() {
            return Ok(());
        }
        if matches!(self.robot, Robot::Idle) {
            self.robot = match self.next_kit()? {
                Some(kit) => Robot::Waiting(kit),
                None => Robot::Finished,
            };
        }
        let Robot::Waiting(kit) = &self.robot else {
            return Ok(());
        };
        let ready = kit
            .need
            .iter()
            .all(|&(m, n)| self.machines[m].available().is_none_or(|have| have >= n));
        if !ready {
            return Ok(());
        }
        let Robot::Waiting(mut kit) = std::mem::replace(&mut self.robot, Robot::Busy) else {
            unreachable!()
        };
        for &(m, n) in &kit.need {
            if self.machines[m].mat > 0.0 {
                self.machines[m].stock -= n;
            }
        }
        let robot_time: f64 = kit.tasks.iter().map(|&t| self.durations[kit.unit][t].1).sum();
        let human_time: f64 = kit.tasks.iter().map(|&t| self.durations[kit.unit][t].0).sum();
        let graph = &self.scenario.graph;
        let segment: Vec<String> = kit.tasks.iter().map(|&t| graph.tasks()[t].id.clone()).collect();
        self.plan_state.completed_segments.push(segment.clone());
        kit.record = Some(KitRecord {
            unit: kit.unit,
            segment,
            parts: kit.parts.clone(),
            gather_start: self.now,
            ready: f64::NAN,
            delivered: f64::NAN,
            retrieved: f64::NAN,
            robot_time,
            human_time,
        });
        self.in_flight = Some(kit);
        self.schedule(robot_time, Ev::KitReady);
        Ok(())
    }

    /// Without unit pipelining the robot starts a unit only once the previous one is assembled.
    fn waiting_for_unit_end(&self) -> bool {
        !self.config.pipeline_units
            && self.plan_state.is_complete(&self.scenario.graph)
            && self.units.len() <= self.robot_unit
    }

    fn next_kit(&mut self) -> Result<Option<Kit>, SimError> {
        let graph = &self.scenario.graph;
        if self.plan_state.is_complete(graph) {
            self.robot_unit += 1;
            self.plan_state = PlannerState::default();
        }
        if self.robot_unit >= self.config.num_units {
            return Ok(None);
        }
        self.refresh_plan_state()?;
        self.plans += 1;
        let req = strategy_next_kit(self.config.strategy, &self.plan_state, self.scenario, self.planner, self.cache)?
            .expect("unit has unkitted tasks");

        let mut need: BTreeMap<usize, usize> = BTreeMap::new();
        for p in &req.parts {
            let ty = &self.scenario.catalog.part_type_of(p)?.id;
            if let Some(&m) = self.machine_of_type.get(ty) {
                *need.entry(m).or_default() += 1;
            }
        }
        let mut tasks = Vec::with_capacity(req.segment.len());
        for t in &req.segment {
            tasks.push(graph.index_of(t)?);
        }
        Ok(Some(Kit {
            unit: self.robot_unit,
            tasks,
            parts: req.parts,
            need: need.into_iter().collect(),
            record: None,
        }))
    }

    /// Human workload and part availability as the planner sees them now.
    fn refresh_plan_state(&mut self) -> Result<(), ModelError> {
        let graph = &self.scenario.graph;
        let est = |t: usize| graph.tasks()[t].human_duration.mean();
        let mut remaining: f64 = self.human_queue.iter().map(|&(_, t)| est(t)).sum();
        let mut observed = BTreeMap::new();
        if let Some((_, t, start)) = self.human_current {
            remaining += est(t);
            observed.insert(graph.tasks()[t].id.clone(), self.now - start);
        }
        self.plan_state.current_segment_human_remaining = remaining;
        self.plan_state = replan_estimates(&self.plan_state, &observed);

        self.plan_state.part_availability = self.availability_view()?;
        Ok(())
    }

    /// Which remaining parts of the robot's unit could be kitted from current
    /// stock, handing stock out in task order. Parts without a machine are omitted.
    fn availability_view(&self) -> Result<BTreeMap<PartId, bool>, ModelError> {
        let mut view = BTreeMap::new();
        if self.machines.is_empty() {
            return Ok(view);
        }
        let graph = &self.scenario.graph;
        let mut left: Vec<Option<usize>> = self.machines.iter().map(Machine::available).collect();
        for t in self.plan_state.remaining(graph) {
            for p in &graph.task(t)?.required_parts {
                let ty = &self.scenario.catalog.part_type_of(p)?.id;
                if let Some(&m) = self.machine_of_type.get(ty) {
                    let ok = match &mut left[m] {
                        None => true,
                        Some(0) => false,
                        Some(n) => {
                            *n -= 1;
                            true
                        }
                    };
                    view.insert(p.clone(), ok);
                }
            }
        }
        Ok(view)
    }
}

/// Rebuilds per-unit totals, idle times and kit counts from a trace.
pub fn metrics_from_trace(trace: &[TraceEvent], num_units: usize) -> Vec<UnitMetrics> {
    let mut active = vec![0.0; num_units];
    let mut end = vec![0.0f64; num_units];
    let mut kits = vec![0usize; num_units];
    for ev in trace {
        let Some(u) = ev.unit.filter(|&u| u < num_units) else { continue };
        match ev.kind {
            EventKind::HumanTaskDone => {
                active[u] += ev.time - ev.start.unwrap_or(ev.time);
                end[u] = end[u].max(ev.time);
            }
            EventKind::TrayRetrieved => kits[u] += 1,
            _ => {}
        }
    }
    let mut out = Vec::with_capacity(num_units);
    let mut start = 0.0;
    for u in 0..num_units {
        let total = end[u] - start;
        out.push(UnitMetrics {
            unit: u,
            start,
            end: end[u],
            total_task_time: total,
            human_idle_time: (total - active[u]).max(0.0),
            active_time: active[u],
            kit_count: kits[u],
        });
        start = end[u];
    }
    out
}
