use std::collections::BTreeMap;

use jitkit::generate::{random_scenario, RandomScenarioSpec};
use jitkit::sim::{metrics_from_trace, run_simulation_cached, EventKind, SweepSpec};
use jitkit::task_model::DurationSpec;
use jitkit::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn fixed(d: &DurationSpec) -> f64 {
    match d {
        DurationSpec::Fixed(v) => *v,
        DurationSpec::Empirical(_) => panic!("expected fixed duration"),
    }
}

fn cfg(strategy: StrategyKind, delivery: f64) -> SimConfig {
    SimConfig {
        strategy,
        delivery_time: delivery,
        ..SimConfig::default()
    }
}

#[test]
fn stool_single_task_golden_trace() {
    // Hand trace, robot 10 s and human 20 s per task, 5 s delivery:
    // kit a1 ready 10, delivered 15, human 15-35;
    // kit a2 gathered from 15, ready 25, delivered 30, retrieved 35, human 35-55;
    // kit a3 gathered from 35, ready 45, delivered 50, retrieved 55, human 55-75.
    let s = Scenario::bundled("stool").unwrap();
    let m = run_simulation(&s, &cfg(StrategyKind::SingleTask, 5.0), &PlannerConfig::default()).unwrap();
    assert_eq!(m.total_task_time, 75.0);
    assert_eq!(m.human_idle_time, 15.0);
    assert_eq!(m.kit_count, 3);
    let times: Vec<[f64; 4]> = m
        .kits
        .iter()
        .map(|k| [k.gather_start, k.ready, k.delivered, k.retrieved])
        .collect();
    assert_eq!(
        times,
        vec![[0.0, 10.0, 15.0, 15.0], [15.0, 25.0, 30.0, 35.0], [35.0, 45.0, 50.0, 55.0]]
    );
}

#[test]
fn whole_assembly_without_delays_is_serial() {
    let s = Scenario::bundled("stool").unwrap();
    let m = run_simulation(&s, &cfg(StrategyKind::WholeAssembly, 5.0), &PlannerConfig::default()).unwrap();
    // 3·10 robot + 5 delivery + 3·20 human
    assert_eq!(m.total_task_time, 95.0);
    assert_eq!(m.human_idle_time, 35.0);
}

/// Makespan under the two-stage pipeline recurrence. Segments are tagged with
/// their unit; without unit pipelining the robot restarts when a unit ends.
fn pipeline_makespan(segments: &[(usize, f64, f64)], d: f64, pipeline_units: bool) -> f64 {
    let (mut robot_free, mut human_free) = (0.0f64, 0.0f64);
    let mut unit = 0;
    for &(u, r, h) in segments {
        if u != unit && !pipeline_units {
            robot_free = human_free;
        }
        unit = u;
        let ready = robot_free + r + d;
        let start = human_free.max(ready);
        human_free = start + h;
        robot_free = start;
    }
    human_free
}

#[test]
fn no_delay_runs_match_pipeline_recurrence() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let planner = PlannerConfig {
        ce: CeParams {
            sample_count: 60,
            elite_count: 10,
            max_iterations: 20,
            ..CeParams::default()
        },
        ..PlannerConfig::default()
    };
    for i in 0..12 {
        let s = random_scenario(
            &RandomScenarioSpec {
                tasks: 2 + i % 5,
                ..RandomScenarioSpec::default()
            },
            &mut rng,
        );
        let cache = KitCache::new();
        for (strategy, pipeline_units) in StrategyKind::ALL.into_iter().flat_map(|s| [(s, false), (s, true)]) {
            let c = SimConfig {
                num_units: 2,
                pipeline_units,
                ..cfg(strategy, 3.0 + i as f64)
            };
            let m = run_simulation_cached(&s, &c, &planner, &cache).unwrap();
            let segs: Vec<(usize, f64, f64)> = m
                .kits
                .iter()
                .map(|k| {
                    k.segment.iter().fold((k.unit, 0.0, 0.0), |(u, r, h), t| {
                        let task = s.graph.task(t).unwrap();
                        (u, r + fixed(&task.robot_duration), h + fixed(&task.human_duration))
                    })
                })
                .collect();
            let expected = pipeline_makespan(&segs, c.delivery_time, pipeline_units);
            assert!(
                (m.units.last().unwrap().end - expected).abs() < 1e-6,
                "{strategy} pipelined={pipeline_units} on scenario {i}"
            );
        }
    }
}

#[test]
fn parts_and_tasks_are_conserved_and_causal() {
    let s = Scenario::bundled("table_12task").unwrap();
    let cache = KitCache::new();
    for strategy in StrategyKind::ALL {
        let c = SimConfig {
            num_units: 2,
            seed: 3,
            record_trace: true,
            ..cfg(strategy, 20.0)
        }
        .with_delays(&["leg", "foot"], 60.0, 300.0);
        let m = run_simulation_cached(&s, &c, &PlannerConfig::default(), &cache).unwrap();
        for unit in 0..2 {
            let mut parts: Vec<String> = m.kits.iter().filter(|k| k.unit == unit).flat_map(|k| k.parts.clone()).collect();
            parts.sort();
            let mut expected = s.unit_parts();
            expected.sort();
            assert_eq!(parts, expected, "{strategy} unit {unit}");
            let mut tasks: Vec<String> = m.kits.iter().filter(|k| k.unit == unit).flat_map(|k| k.segment.clone()).collect();
            tasks.sort();
            let mut all: Vec<String> = s.graph.task_ids().map(String::from).collect();
            all.sort();
            assert_eq!(tasks, all);
        }
        for k in &m.kits {
            assert!(k.gather_start <= k.ready && k.ready <= k.delivered && k.delivered <= k.retrieved);
        }
        // Each human task starts no earlier than the retrieval of its kit.
        let trace = m.trace.as_ref().unwrap();
        let mut retrieved_at = BTreeMap::new();
        for ev in trace {
            match ev.kind {
                EventKind::TrayRetrieved => {
                    for t in &ev.tasks {
                        retrieved_at.insert((ev.unit.unwrap(), t.clone()), ev.time);
                    }
                }
                EventKind::HumanTaskDone => {
                    let r = retrieved_at[&(ev.unit.unwrap(), ev.tasks[0].clone())];
                    assert!(ev.start.unwrap() >= r);
                }
                _ => {}
            }
        }
        for u in &m.units {
            assert!(0.0 <= u.human_idle_time && u.human_idle_time <= u.total_task_time);
            assert!((u.human_idle_time + u.active_time - u.total_task_time).abs() < 1e-6);
        }
        assert_eq!(metrics_from_trace(trace, 2).len(), 2);
        for (a, b) in metrics_from_trace(trace, 2).iter().zip(&m.units) {
            assert!((a.total_task_time - b.total_task_time).abs() < 1e-9);
            assert!((a.human_idle_time - b.human_idle_time).abs() < 1e-6);
            assert_eq!(a.kit_count, b.kit_count);
        }
    }
}

#[test]
fn same_seed_same_metrics() {
    let s = Scenario::bundled("table_12task").unwrap();
    let c = SimConfig {
        seed: 42,
        record_trace: true,
        ..cfg(StrategyKind::Optimized, 30.0)
    }
    .with_delays(&["leg", "foot"], 30.0, 120.0);
    let a = run_simulation(&s, &c, &PlannerConfig::default()).unwrap();
    let b = run_simulation(&s, &c, &PlannerConfig::default()).unwrap();
    assert_eq!(a, b);
}

#[test]
fn long_leg_delays_hurt_whole_assembly_most() {
    let s = Scenario::bundled("table_12task").unwrap();
    let cache = KitCache::new();
    let planner = PlannerConfig::default();
    let (mut whole, mut opt) = (0.0, 0.0);
    for seed in 0..100 {
        let base = SimConfig {
            seed,
            ..cfg(StrategyKind::WholeAssembly, 30.0)
        }
        .with_delays(&["leg"], 400.0, f64::INFINITY);
        let w = run_simulation_cached(&s, &base, &planner, &cache).unwrap();
        // Whole assembly waits at least until the fourth leg arrives.
        assert!(w.human_idle_time >= w.kits[0].gather_start);
        let o = run_simulation_cached(
            &s,
            &SimConfig {
                strategy: StrategyKind::Optimized,
                ..base
            },
            &planner,
            &cache,
        )
        .unwrap();
        whole += w.human_idle_time;
        opt += o.human_idle_time;
    }
    assert!(opt < whole, "optimized {opt} vs whole {whole}");
}

#[test]
fn degenerate_sweep_and_self_comparison() {
    let s = Scenario::bundled("stool").unwrap();
    let spec = SweepSpec {
        governed_types: vec!["front_leg".into()],
        mats: vec![0.0],
        mttfs: vec![f64::INFINITY],
        strategies: vec![StrategyKind::SingleTask],
        replications: 1,
    };
    let r = sim::sweep(&s, &SimConfig::default(), &PlannerConfig::default(), &spec, &KitCache::new()).unwrap();
    assert_eq!(r.runs.len(), 1);
    assert_eq!(r.cells.len(), 1);
    assert!(r.cells[0].comparisons.is_empty());

    let spec = SweepSpec {
        strategies: vec![StrategyKind::Optimized, StrategyKind::SingleTask],
        replications: 3,
        ..spec
    };
    let r = sim::sweep(&s, &SimConfig::default(), &PlannerConfig::default(), &spec, &KitCache::new()).unwrap();
    let same = sim::compare(StrategyKind::Optimized, StrategyKind::Optimized, &r.runs, 0);
    assert_eq!(same.total_improvement_pct, 0.0);
    assert_eq!(same.idle_improvement_pct, 0.0);
    assert_eq!(r.runs.len(), 6);
    assert_eq!(r.cells[0].comparisons.len(), 1);
}

#[test]
fn sweep_failures_name_the_cell() {
    let s = Scenario::bundled("stool").unwrap();
    let spec = SweepSpec {
        governed_types: vec!["no_such_type".into()],
        mats: vec![10.0],
        mttfs: vec![f64::INFINITY],
        strategies: vec![StrategyKind::SingleTask],
        replications: 1,
    };
    let err = sim::sweep(&s, &SimConfig::default(), &PlannerConfig::default(), &spec, &KitCache::new()).unwrap_err();
    assert!(err.to_string().contains("mat=10"), "{err}");
}
