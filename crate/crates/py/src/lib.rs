//! Python bindings. Every function speaks JSON strings using the same
//! schemas as the command-line tool, so rosters and instances round-trip
//! between the two front ends.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use metrocrew::heuristics::{lgh, lgh_r, sph};
use metrocrew::model::{parse_instance, perturb_timetable, Instance, InstanceFile};
use metrocrew::replanner::{apply_disruption, replan, DisruptionScenario};
use metrocrew::roster::Roster;
use metrocrew::validate::{validate_roster, Mode};

fn bad_input<E: std::fmt::Display>(context: &str) -> impl Fn(E) -> PyErr + '_ {
    move |e| PyValueError::new_err(format!("{context}: {e}"))
}

fn parse(instance_json: &str) -> PyResult<Instance> {
    parse_instance(instance_json).map_err(bad_input("instance"))
}

fn parse_roster(roster_json: &str) -> PyResult<Roster> {
    Roster::from_json(roster_json).map_err(bad_input("roster"))
}

fn parse_scenario(scenario_json: &str) -> PyResult<DisruptionScenario> {
    serde_json::from_str(scenario_json).map_err(bad_input("scenario"))
}

/// Materialize an instance spec: generated tasks and crew are filled in,
/// and task times are jittered by `seed` when `perturb` is set. Returns
/// the full instance as JSON.
#[pyfunction]
#[pyo3(signature = (spec_json, seed=0, perturb=false))]
fn generate(spec_json: &str, seed: u64, perturb: bool) -> PyResult<String> {
    let mut instance = parse(spec_json)?;
    if perturb {
        instance.tasks = perturb_timetable(&instance.tasks, instance.horizon, seed);
    }
    let file = InstanceFile::from_instance(&instance);
    Ok(serde_json::to_string_pretty(&file).expect("instance serialization"))
}

/// Build a roster with `algo` in {"tscg", "sph", "lgh"}. Returns a JSON
/// object with `algorithm`, `metrics` and `roster`.
#[pyfunction]
#[pyo3(signature = (instance_json, algo="tscg"))]
fn plan(instance_json: &str, algo: &str) -> PyResult<String> {
    let instance = parse(instance_json)?;
    let result = match algo {
        "tscg" => metrocrew::planner::plan(&instance)
            .map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        "sph" => sph(&instance).map_err(|e| PyRuntimeError::new_err(e.to_string()))?,
        "lgh" => lgh(&instance),
        other => return Err(PyValueError::new_err(format!("unknown algorithm {other}"))),
    };
    Ok(run_output(algo, &result.metrics, &result.roster, &instance))
}

/// Rebuild a roster after a disruption with `algo` in
/// {"fpah", "fpah-n", "lgh-r"}.
#[pyfunction]
#[pyo3(signature = (instance_json, roster_json, scenario_json, algo="fpah"))]
fn replan_roster(
    instance_json: &str,
    roster_json: &str,
    scenario_json: &str,
    algo: &str,
) -> PyResult<String> {
    let instance = parse(instance_json)?;
    let original = parse_roster(roster_json)?;
    let scenario = parse_scenario(scenario_json)?;
    let outcome = match algo {
        "fpah" => replan(&instance, &original, &scenario, true),
        "fpah-n" => replan(&instance, &original, &scenario, false),
        "lgh-r" => lgh_r(&instance, &original, &scenario),
        other => return Err(PyValueError::new_err(format!("unknown algorithm {other}"))),
    }
    .map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(run_output(algo, &outcome.metrics, &outcome.roster, &outcome.instance))
}

/// Check a roster against the operational rules; pass `scenario_json` and
/// `original_json` to check a replanned roster including the continuity
/// rules. Returns the violation report as JSON.
#[pyfunction]
#[pyo3(signature = (instance_json, roster_json, scenario_json=None, original_json=None))]
fn validate(
    instance_json: &str,
    roster_json: &str,
    scenario_json: Option<&str>,
    original_json: Option<&str>,
) -> PyResult<String> {
    let instance = parse(instance_json)?;
    let roster = parse_roster(roster_json)?;
    let report = match scenario_json {
        None => validate_roster(&instance, &roster, Mode::Plan),
        Some(scenario_json) => {
            let scenario = parse_scenario(scenario_json)?;
            let original = parse_roster(original_json.ok_or_else(|| {
                PyValueError::new_err("scenario validation needs original_json")
            })?)?;
            let (rinst, demands, _) =
                apply_disruption(&instance, &scenario).map_err(bad_input("scenario"))?;
            validate_roster(
                &rinst,
                &roster,
                Mode::Replan {
                    day: scenario.day,
                    t_bar: scenario.t_bar,
                    original: &original,
                    demands: &demands,
                },
            )
        }
    };
    Ok(serde_json::to_string_pretty(&report).expect("report serialization"))
}

fn run_output<M: serde::Serialize>(
    algo: &str,
    metrics: &M,
    roster: &Roster,
    instance: &Instance,
) -> String {
    let value = serde_json::json!({
        "algorithm": algo,
        "metrics": metrics,
        "roster": serde_json::from_str::<serde_json::Value>(&roster.to_json(instance))
            .expect("roster json"),
    });
    serde_json::to_string_pretty(&value).expect("output serialization")
}

#[pymodule]
fn metrocrew_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(plan, m)?)?;
    m.add_function(wrap_pyfunction!(replan_roster, m)?)?;
    m.add_function(wrap_pyfunction!(validate, m)?)?;
    Ok(())
}
