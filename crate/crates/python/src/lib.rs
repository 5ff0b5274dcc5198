use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use ::jitkit::kit_layout::layout_to_json;
use ::jitkit::{arrange_kit as arrange, run_simulation, ModelError, PlannerConfig, Scenario, SimConfig, StrategyKind};

fn value_error(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn planner_from(json: Option<&str>) -> PyResult<PlannerConfig> {
    match json {
        Some(text) => serde_json::from_str(text).map_err(value_error),
        None => Ok(PlannerConfig::default()),
    }
}

/// JSON text of a bundled scenario: `stool` or `table_12task`.
#[pyfunction]
fn bundled_scenario(name: &str) -> PyResult<String> {
    Scenario::bundled(name).map(|s| s.to_json()).map_err(value_error)
}

/// Violations found in a scenario JSON document; empty when it is valid.
/// Malformed JSON raises ValueError.
#[pyfunction]
fn validate_scenario(scenario_json: &str) -> PyResult<Vec<String>> {
    match Scenario::from_json(scenario_json) {
        Ok(_) => Ok(Vec::new()),
        Err(ModelError::Invalid(v)) => Ok(v.iter().map(ToString::to_string).collect()),
        Err(e @ ModelError::Field { .. }) => Ok(vec![e.to_string()]),
        Err(e) => Err(value_error(e)),
    }
}

/// Simulates one run and returns its metrics as JSON.
///
/// `sim_json` and `planner_json` hold the simulator and planner settings;
/// missing keys take their defaults. The planner uses the simulator's
/// delivery time.
#[pyfunction]
#[pyo3(signature = (scenario_json, strategy, sim_json=None, planner_json=None))]
fn simulate(
    py: Python<'_>,
    scenario_json: &str,
    strategy: &str,
    sim_json: Option<&str>,
    planner_json: Option<&str>,
) -> PyResult<String> {
    let scenario = Scenario::from_json(scenario_json).map_err(value_error)?;
    let mut sim: SimConfig = match sim_json {
        Some(text) => serde_json::from_str(text).map_err(value_error)?,
        None => SimConfig::default(),
    };
    sim.strategy = strategy.parse::<StrategyKind>().map_err(value_error)?;
    let mut planner = planner_from(planner_json)?;
    planner.delivery_time = sim.delivery_time;
    let metrics = py
        .detach(|| run_simulation(&scenario, &sim, &planner))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    serde_json::to_string(&metrics).map_err(value_error)
}

/// Arranges the parts of `tasks` on the tray and returns JSON with the
/// layout, the cost terms and the weighted cost.
#[pyfunction]
#[pyo3(signature = (scenario_json, tasks, seed=0, planner_json=None))]
fn arrange_kit(
    py: Python<'_>,
    scenario_json: &str,
    tasks: Vec<String>,
    seed: u64,
    planner_json: Option<&str>,
) -> PyResult<String> {
    let scenario = Scenario::from_json(scenario_json).map_err(value_error)?;
    let parts = scenario.parts_for(tasks.iter().map(String::as_str)).map_err(value_error)?;
    let mut planner = planner_from(planner_json)?;
    planner.ce.seed = seed;
    let kit = py
        .detach(|| arrange(&parts, &scenario.catalog, &scenario.tray, &planner.fitness_weights, &planner.ce))
        .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    let layout: serde_json::Value = serde_json::from_str(&layout_to_json(&kit.layout)).map_err(value_error)?;
    let out = serde_json::json!({
        "layout": layout,
        "terms": kit.terms,
        "cost": kit.terms.cost(&planner.fitness_weights),
        "attempts": kit.attempts,
    });
    Ok(out.to_string())
}

#[pymodule]
#[pyo3(name = "jitkit")]
fn jitkit_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(bundled_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(validate_scenario, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(arrange_kit, m)?)?;
    Ok(())
}
