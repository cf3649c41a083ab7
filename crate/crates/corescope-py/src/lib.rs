//! Python bindings for the rescheduling toolkit.
//!
//! Complex values cross the boundary as the same versioned JSON the store
//! uses; the wrapper classes expose the scalars that are useful in a REPL
//! plus `to_json`/`from_json` for everything else.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use corescope::grid::{InfraParams, SpeedDistribution, TrainId};
use corescope::resched::CostWeights;
use corescope::solver::Budget;

fn value_err(err: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(err.to_string())
}

fn runtime_err(err: impl std::fmt::Display) -> PyErr {
    PyRuntimeError::new_err(err.to_string())
}

fn to_json<T: serde::Serialize>(value: &T) -> PyResult<String> {
    serde_json::to_string_pretty(value).map_err(runtime_err)
}

fn from_json<T: serde::de::DeserializeOwned>(raw: &str) -> PyResult<T> {
    serde_json::from_str(raw).map_err(value_err)
}

#[pyclass(frozen)]
struct Infrastructure {
    inner: corescope::grid::Infrastructure,
}

#[pymethods]
impl Infrastructure {
    #[getter]
    fn width(&self) -> u32 {
        self.inner.width
    }

    #[getter]
    fn height(&self) -> u32 {
        self.inner.height
    }

    #[getter]
    fn num_cities(&self) -> usize {
        self.inner.cities.len()
    }

    #[getter]
    fn num_trains(&self) -> usize {
        self.inner.trains.len()
    }

    fn render_svg(&self) -> String {
        corescope::grid::render_svg(&self.inner)
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }

    #[staticmethod]
    fn from_json(raw: &str) -> PyResult<Self> {
        Ok(Infrastructure {
            inner: from_json(raw)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Infrastructure({}x{}, {} cities, {} trains)",
            self.inner.width,
            self.inner.height,
            self.inner.cities.len(),
            self.inner.trains.len()
        )
    }
}

#[pyclass(frozen)]
struct Schedule {
    inner: corescope::schedule::Schedule,
}

#[pymethods]
impl Schedule {
    #[getter]
    fn num_trains(&self) -> usize {
        self.inner.runs.len()
    }

    #[getter]
    fn horizon(&self) -> i64 {
        self.inner.horizon
    }

    /// Occupancy conflicts as human-readable strings; empty means valid.
    fn verify(&self, infra: &Infrastructure) -> Vec<String> {
        corescope::schedule::verify_conflict_free(&self.inner, &infra.inner)
            .iter()
            .map(|c| {
                format!(
                    "trains {} and {} overlap on ({},{}) during [{},{})",
                    c.first.0, c.second.0, c.cell.row, c.cell.col, c.overlap.0, c.overlap.1
                )
            })
            .collect()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }

    #[staticmethod]
    fn from_json(raw: &str) -> PyResult<Self> {
        Ok(Schedule {
            inner: from_json(raw)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Schedule({} trains, horizon {})",
            self.inner.runs.len(),
            self.inner.horizon
        )
    }
}

#[pyclass(frozen)]
struct Malfunction {
    inner: corescope::resched::Malfunction,
}

#[pymethods]
impl Malfunction {
    #[getter]
    fn train(&self) -> u32 {
        self.inner.train.0
    }

    #[getter]
    fn time_step(&self) -> i64 {
        self.inner.time_step
    }

    #[getter]
    fn duration(&self) -> i64 {
        self.inner.duration
    }

    fn __repr__(&self) -> String {
        format!(
            "Malfunction(train {}, t={}, d={})",
            self.inner.train.0, self.inner.time_step, self.inner.duration
        )
    }
}

#[pyclass(frozen)]
struct Problem {
    inner: corescope::resched::FullProblem,
}

#[pymethods]
impl Problem {
    #[getter]
    fn num_trains(&self) -> usize {
        self.inner.trains.len()
    }

    #[getter]
    fn max_window(&self) -> i64 {
        self.inner.max_window
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }

    #[staticmethod]
    fn from_json(raw: &str) -> PyResult<Self> {
        Ok(Problem {
            inner: from_json(raw)?,
        })
    }

    fn __repr__(&self) -> String {
        format!(
            "Problem({} trains, window {})",
            self.inner.trains.len(),
            self.inner.max_window
        )
    }
}

#[pyclass(frozen)]
struct Solution {
    inner: corescope::solver::Solution,
}

#[pymethods]
impl Solution {
    #[getter]
    fn cost(&self) -> i64 {
        self.inner.cost
    }

    #[getter]
    fn nodes_expanded(&self) -> u64 {
        self.inner.stats.nodes_expanded
    }

    #[getter]
    fn proved_optimal(&self) -> bool {
        self.inner.stats.proved_optimal
    }

    #[getter]
    fn wall_seconds(&self) -> f64 {
        self.inner.stats.wall_seconds
    }

    fn runs_json(&self) -> PyResult<String> {
        to_json(&self.inner.runs)
    }

    fn __repr__(&self) -> String {
        format!(
            "Solution(cost {}, {} nodes, optimal {})",
            self.inner.cost, self.inner.stats.nodes_expanded, self.inner.stats.proved_optimal
        )
    }
}

#[pyclass(frozen)]
struct Directive {
    inner: corescope::resched::ScopeDirective,
}

#[pymethods]
impl Directive {
    #[getter]
    fn kind(&self) -> String {
        self.inner.kind.to_string()
    }

    #[getter]
    fn predicted_changed(&self) -> Vec<u32> {
        self.inner.predicted_changed.iter().map(|t| t.0).collect()
    }

    fn to_json(&self) -> PyResult<String> {
        to_json(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Directive({}, {} trains predicted changed)",
            self.inner.kind,
            self.inner.predicted_changed.len()
        )
    }
}

#[pyfunction]
#[pyo3(signature = (
    width, height, max_num_cities, number_of_agents, seed,
    grid_mode = false, max_rail_between_cities = 1, max_rail_in_city = 2,
    speeds = vec![(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)],
))]
#[allow(clippy::too_many_arguments)]
fn generate_infrastructure(
    width: u32,
    height: u32,
    max_num_cities: u32,
    number_of_agents: u32,
    seed: u64,
    grid_mode: bool,
    max_rail_between_cities: u32,
    max_rail_in_city: u32,
    speeds: Vec<(u32, f64)>,
) -> PyResult<Infrastructure> {
    let params = InfraParams {
        width,
        height,
        max_num_cities,
        grid_mode,
        max_rails_between_cities: max_rail_between_cities,
        max_rails_in_city: max_rail_in_city,
        num_agents: number_of_agents,
        speeds: SpeedDistribution(speeds),
    };
    let inner = corescope::grid::generate_infrastructure(&params, seed).map_err(value_err)?;
    Ok(Infrastructure { inner })
}

#[pyfunction]
#[pyo3(signature = (infra, seed, horizon = None))]
fn generate_schedule(
    infra: &Infrastructure,
    seed: u64,
    horizon: Option<i64>,
) -> PyResult<Schedule> {
    let inner =
        corescope::schedule::generate_schedule(&infra.inner, horizon, seed).map_err(value_err)?;
    Ok(Schedule { inner })
}

#[pyfunction]
fn malfunction_for_train(
    schedule: &Schedule,
    train: u32,
    earliest_malfunction: i64,
    duration: i64,
) -> PyResult<Malfunction> {
    let inner = corescope::resched::malfunction_for_train(
        &schedule.inner,
        TrainId(train),
        earliest_malfunction,
        duration,
    )
    .map_err(value_err)?;
    Ok(Malfunction { inner })
}

#[pyfunction]
#[pyo3(signature = (
    infra, schedule, malfunction,
    k = 10, max_window = 60, lateness_weight = 1, route_change_weight = 30,
))]
fn build_problem(
    infra: &Infrastructure,
    schedule: &Schedule,
    malfunction: &Malfunction,
    k: usize,
    max_window: i64,
    lateness_weight: i64,
    route_change_weight: i64,
) -> PyResult<Problem> {
    let weights = CostWeights {
        lateness_weight,
        deviation_penalty: route_change_weight,
    };
    let inner = corescope::resched::build_full_problem(
        &infra.inner,
        &schedule.inner,
        &malfunction.inner,
        weights,
        k,
        max_window,
    )
    .map_err(value_err)?;
    Ok(Problem { inner })
}

#[pyfunction]
#[pyo3(signature = (problem, budget = 500_000, seed = 0))]
fn solve(py: Python<'_>, problem: &Problem, budget: u64, seed: u64) -> PyResult<Solution> {
    let weights = problem.inner.weights;
    let inner = py
        .allow_threads(|| {
            corescope::solver::solve(
                &problem.inner,
                weights,
                Budget { max_nodes: budget },
                seed,
            )
        })
        .map_err(runtime_err)?;
    Ok(Solution { inner })
}

#[pyfunction]
fn oracle_cost(py: Python<'_>, problem: &Problem) -> PyResult<i64> {
    let weights = problem.inner.weights;
    let (_, cost) = py
        .allow_threads(|| corescope::solver::brute_force_oracle(&problem.inner, weights))
        .map_err(runtime_err)?;
    Ok(cost)
}

#[pyfunction]
fn scope_online_unrestricted(schedule: &Schedule, malfunction: &Malfunction) -> Directive {
    Directive {
        inner: corescope::scopers::scope_online_unrestricted(&schedule.inner, &malfunction.inner),
    }
}

#[pyfunction]
fn scope_upper_bound(schedule: &Schedule, solution: &Solution) -> Directive {
    Directive {
        inner: corescope::scopers::scope_upper_bound(&schedule.inner, &solution.inner),
    }
}

#[pyfunction]
fn scope_max_speedup(schedule: &Schedule, solution: &Solution) -> Directive {
    Directive {
        inner: corescope::scopers::scope_max_speedup(&schedule.inner, &solution.inner),
    }
}

#[pyfunction]
fn scope_baseline(schedule: &Schedule, solution: &Solution) -> Directive {
    Directive {
        inner: corescope::scopers::scope_baseline(&schedule.inner, &solution.inner),
    }
}

#[pyfunction]
#[pyo3(signature = (schedule, malfunction, infra, route_restricted = false))]
fn scope_heuristic(
    schedule: &Schedule,
    malfunction: &Malfunction,
    infra: &Infrastructure,
    route_restricted: bool,
) -> Directive {
    Directive {
        inner: corescope::scopers::scope_heuristic(
            &schedule.inner,
            &malfunction.inner,
            &infra.inner,
            route_restricted,
        ),
    }
}

#[pyfunction]
fn scope_random(schedule: &Schedule, malfunction: &Malfunction, n: usize, seed: u64) -> Directive {
    Directive {
        inner: corescope::scopers::scope_random(&schedule.inner, &malfunction.inner, n, seed),
    }
}

#[pyfunction]
fn apply_scope(problem: &Problem, directive: &Directive) -> PyResult<Problem> {
    let inner =
        corescope::resched::apply_scope(&problem.inner, &directive.inner).map_err(value_err)?;
    Ok(Problem { inner })
}

#[pyfunction]
fn changed_trains(schedule: &Schedule, solution: &Solution) -> Vec<u32> {
    corescope::scopers::changed_trains(&schedule.inner, &solution.inner)
        .iter()
        .map(|t| t.0)
        .collect()
}

#[pyfunction]
fn prediction_quality(predicted: Vec<u32>, core: Vec<u32>) -> (usize, usize, usize, f64) {
    let predicted: Vec<TrainId> = predicted.into_iter().map(TrainId).collect();
    let core: Vec<TrainId> = core.into_iter().map(TrainId).collect();
    let quality = corescope::metrics::prediction_quality(&predicted, &core);
    (
        quality.true_positives,
        quality.false_positives,
        quality.false_negatives,
        quality.f1,
    )
}

#[pyfunction]
fn speedup(t_full_seconds: f64, t_restricted_seconds: f64) -> f64 {
    corescope::metrics::speedup(t_full_seconds, t_restricted_seconds)
}

#[pyfunction]
fn desk_config_json() -> PyResult<String> {
    to_json(&corescope::pipeline::AgendaConfig::desk_default())
}

#[pyfunction]
fn paper_config_json() -> PyResult<String> {
    to_json(&corescope::pipeline::AgendaConfig::paper_default())
}

#[pyfunction]
#[pyo3(signature = (config_json, store, workers = 1))]
fn run_agenda(
    py: Python<'_>,
    config_json: &str,
    store: &str,
    workers: usize,
) -> PyResult<String> {
    let config: corescope::pipeline::AgendaConfig = from_json(config_json)?;
    let agenda = corescope::pipeline::expand_agenda(&config).map_err(value_err)?;
    let store = corescope::pipeline::Store::new(store);
    let summary = py
        .allow_threads(|| {
            corescope::pipeline::run_agenda(
                &agenda,
                &store,
                workers,
                &|_: corescope::pipeline::Progress<'_>| {},
            )
        })
        .map_err(runtime_err)?;
    to_json(&summary)
}

#[pyfunction]
#[pyo3(signature = (store, agenda_id, bins = 10, min_time = None, max_time = None))]
fn analyze_agenda(
    py: Python<'_>,
    store: &str,
    agenda_id: &str,
    bins: usize,
    min_time: Option<f64>,
    max_time: Option<f64>,
) -> PyResult<String> {
    let time_range = match (min_time, max_time) {
        (None, None) => None,
        (lo, hi) => Some((lo.unwrap_or(0.0), hi.unwrap_or(f64::MAX))),
    };
    let options = corescope::pipeline::AnalysisOptions { bins, time_range };
    let store = corescope::pipeline::Store::new(store);
    let report = py
        .allow_threads(|| corescope::pipeline::analyze(&store, agenda_id, &options))
        .map_err(runtime_err)?;
    corescope::pipeline::write_analysis(&store, &report).map_err(runtime_err)?;
    to_json(&report)
}

#[pymodule]
fn corescope_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Infrastructure>()?;
    m.add_class::<Schedule>()?;
    m.add_class::<Malfunction>()?;
    m.add_class::<Problem>()?;
    m.add_class::<Solution>()?;
    m.add_class::<Directive>()?;
    m.add_function(wrap_pyfunction!(generate_infrastructure, m)?)?;
    m.add_function(wrap_pyfunction!(generate_schedule, m)?)?;
    m.add_function(wrap_pyfunction!(malfunction_for_train, m)?)?;
    m.add_function(wrap_pyfunction!(build_problem, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(oracle_cost, m)?)?;
    m.add_function(wrap_pyfunction!(scope_online_unrestricted, m)?)?;
    m.add_function(wrap_pyfunction!(scope_upper_bound, m)?)?;
    m.add_function(wrap_pyfunction!(scope_max_speedup, m)?)?;
    m.add_function(wrap_pyfunction!(scope_baseline, m)?)?;
    m.add_function(wrap_pyfunction!(scope_heuristic, m)?)?;
    m.add_function(wrap_pyfunction!(scope_random, m)?)?;
    m.add_function(wrap_pyfunction!(apply_scope, m)?)?;
    m.add_function(wrap_pyfunction!(changed_trains, m)?)?;
    m.add_function(wrap_pyfunction!(prediction_quality, m)?)?;
    m.add_function(wrap_pyfunction!(speedup, m)?)?;
    m.add_function(wrap_pyfunction!(desk_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(paper_config_json, m)?)?;
    m.add_function(wrap_pyfunction!(run_agenda, m)?)?;
    m.add_function(wrap_pyfunction!(analyze_agenda, m)?)?;
    Ok(())
}
