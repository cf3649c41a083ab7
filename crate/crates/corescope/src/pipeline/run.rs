//! Experiment execution: one experiment solves the same re-scheduling
//! problem once per scoper and records solutions, costs and prediction
//! metrics; agenda runs drive many experiments over a worker pool with
//! durable, resumable results.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{generate_infrastructure, Infrastructure, TrainId};
use crate::metrics::{self, AdditionalLateness, CoreProblem, PredictionQuality};
use crate::pipeline::agenda::{Agenda, AgendaConfig, ExperimentSpec, InfraSpec};
use crate::pipeline::store::{Store, StoreError, FORMAT_VERSION};
use crate::resched::{
    apply_scope, build_full_problem, malfunction_for_train, solution_fits, FullProblem,
    Malfunction, ReschedError, ScopeDirective, ScoperKind,
};
use crate::schedule::{generate_schedule, Schedule, TrainRun};
use crate::scopers;
use crate::seeds::derive_seed;
use crate::solver::{solve, Budget, SolveError, Solution};

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Store(#[from] StoreError),
    #[error("failed to generate {what}: {message}")]
    Generation { what: String, message: String },
    #[error("store already holds agenda `{agenda_id}` with a different configuration")]
    AgendaMismatch { agenda_id: String },
    #[error("agenda has no experiment `{composite_id}`")]
    UnknownExperiment { composite_id: String },
}

/// Stored record of one malfunction draw. Draws that miss the train's run
/// entirely are kept as data points, not treated as errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MalfunctionRecord {
    pub version: u32,
    pub infra_idx: usize,
    pub schedule_idx: usize,
    pub train: TrainId,
    pub earliest_malfunction: i64,
    pub duration: i64,
    pub malfunction: Option<Malfunction>,
    pub inapplicable_reason: Option<String>,
}

/// Outcome of solving one scoped problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum SolveOutcome {
    Solved {
        cost: i64,
        runs: Vec<TrainRun>,
        nodes_expanded: u64,
        proved_optimal: bool,
        incumbent_trace: Vec<(u64, i64)>,
        wall_seconds: f64,
    },
    /// The scoped problem admits no solution; recorded with a pessimistic
    /// stand-in cost so quality statistics count it as a worst case.
    Infeasible { penalty_cost: i64, wall_seconds: f64 },
    BudgetExhausted { budget: u64, wall_seconds: f64 },
    Skipped { reason: String },
    Error { message: String },
}

impl SolveOutcome {
    pub fn is_solved(&self) -> bool {
        matches!(self, SolveOutcome::Solved { .. })
    }

    pub fn cost(&self) -> Option<i64> {
        match self {
            SolveOutcome::Solved { cost, .. } => Some(*cost),
            SolveOutcome::Infeasible { penalty_cost, .. } => Some(*penalty_cost),
            _ => None,
        }
    }

    pub fn wall_seconds(&self) -> Option<f64> {
        match self {
            SolveOutcome::Solved { wall_seconds, .. }
            | SolveOutcome::Infeasible { wall_seconds, .. }
            | SolveOutcome::BudgetExhausted { wall_seconds, .. } => Some(*wall_seconds),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct ScoperMetrics {
    /// Wall-clock speed-up of this solve relative to the unrestricted solve.
    pub speedup: Option<f64>,
    pub additional_lateness: Option<AdditionalLateness>,
    /// True when the lateness value is an infeasibility penalty, not a cost
    /// difference between two solutions.
    pub lateness_penalized: bool,
    pub prediction: Option<PredictionQuality>,
    /// Whether the unrestricted optimum remains feasible inside this scope.
    pub contains_reference: Option<bool>,
}

/// One solver invocation under one scope directive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoperOutcome {
    pub sample_seed: Option<u64>,
    pub directive: ScopeDirective,
    pub outcome: SolveOutcome,
    pub metrics: ScoperMetrics,
}

/// All solver invocations for one scoper kind; every kind has exactly one
/// sample except the random scoper, which draws several.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoperEntry {
    pub scoper: ScoperKind,
    pub samples: Vec<ScoperOutcome>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Environment {
    pub package_version: String,
    pub total_wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub version: u32,
    pub agenda_id: String,
    pub composite_id: String,
    pub infra_idx: usize,
    pub schedule_idx: usize,
    pub run_idx: usize,
    pub malfunction_train: TrainId,
    pub malfunction: Option<Malfunction>,
    pub inapplicable_reason: Option<String>,
    pub error: Option<String>,
    /// Exact change set of the unrestricted solution against the schedule.
    pub core_problem: Option<CoreProblem>,
    pub scopers: Vec<ScoperEntry>,
    pub environment: Environment,
}

impl ExperimentResult {
    pub fn entry(&self, kind: ScoperKind) -> Option<&ScoperEntry> {
        self.scopers.iter().find(|e| e.scoper == kind)
    }
}

/// Removes fields that legitimately differ between identical reruns: raw
/// wall-clock measurements and values derived from them, such as speed-ups.
pub fn strip_volatile(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Object(map) => {
            map.remove("wall_seconds");
            map.remove("total_wall_seconds");
            map.remove("speedup");
            for v in map.values_mut() {
                strip_volatile(v);
            }
        }
        serde_json::Value::Array(items) => {
            for v in items {
                strip_volatile(v);
            }
        }
        _ => {}
    }
}

struct Reference {
    runs: Vec<TrainRun>,
    cost: i64,
    proved: bool,
    wall_seconds: f64,
    core: CoreProblem,
}

fn infeasible_penalty(config: &AgendaConfig, problem: &FullProblem) -> i64 {
    config.weight_lateness_seconds
        * (config.max_window_size_from_earliest + config.malfunction_duration)
        * problem.trains.len() as i64
}

fn solve_directive(
    problem: &FullProblem,
    directive: &ScopeDirective,
    config: &AgendaConfig,
    solver_seed: u64,
) -> SolveOutcome {
    let started = Instant::now();
    let scoped = match apply_scope(problem, directive) {
        Ok(scoped) => scoped,
        Err(ReschedError::InfeasibleFreeze { .. }) => {
            return SolveOutcome::Infeasible {
                penalty_cost: infeasible_penalty(config, problem),
                wall_seconds: started.elapsed().as_secs_f64(),
            }
        }
        Err(other) => {
            return SolveOutcome::Error {
                message: other.to_string(),
            }
        }
    };
    let budget = Budget {
        max_nodes: config.solver_budget,
    };
    match solve(&scoped, config.weights(), budget, solver_seed) {
        Ok(solution) => SolveOutcome::Solved {
            cost: solution.cost,
            runs: solution.runs,
            nodes_expanded: solution.stats.nodes_expanded,
            proved_optimal: solution.stats.proved_optimal,
            incumbent_trace: solution.stats.incumbent_trace,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
        Err(SolveError::Infeasible) => SolveOutcome::Infeasible {
            penalty_cost: infeasible_penalty(config, problem),
            wall_seconds: started.elapsed().as_secs_f64(),
        },
        Err(SolveError::BudgetExhausted { budget }) => SolveOutcome::BudgetExhausted {
            budget,
            wall_seconds: started.elapsed().as_secs_f64(),
        },
    }
}

fn measure(
    problem: &FullProblem,
    directive: ScopeDirective,
    config: &AgendaConfig,
    solver_seed: u64,
    sample_seed: Option<u64>,
    reference: Option<&Reference>,
    check_containment: bool,
) -> ScoperOutcome {
    let outcome = solve_directive(problem, &directive, config, solver_seed);
    let mut metrics = ScoperMetrics::default();
    if let Some(reference) = reference {
        metrics.prediction = Some(metrics::prediction_quality(
            &directive.predicted_changed,
            &reference.core.changed_trains,
        ));
        match &outcome {
            SolveOutcome::Solved {
                cost,
                proved_optimal,
                wall_seconds,
                ..
            } => {
                metrics.speedup = Some(metrics::speedup(reference.wall_seconds, *wall_seconds));
                metrics.additional_lateness = Some(metrics::additional_lateness(
                    *cost,
                    reference.cost,
                    *proved_optimal,
                    reference.proved,
                ));
            }
            SolveOutcome::Infeasible { penalty_cost, .. } => {
                metrics.additional_lateness = Some(AdditionalLateness {
                    value: *penalty_cost,
                    proven: false,
                });
                metrics.lateness_penalized = true;
            }
            _ => {}
        }
        if check_containment {
            metrics.contains_reference = apply_scope(problem, &directive)
                .ok()
                .map(|scoped| solution_fits(&scoped, &reference.runs));
        }
    }
    ScoperOutcome {
        sample_seed,
        directive,
        outcome,
        metrics,
    }
}

fn skipped_entry(kind: ScoperKind, schedule: &Schedule, m: &Malfunction, reason: &str) -> ScoperEntry {
    let directive = match kind {
        ScoperKind::UpperBound | ScoperKind::MaxSpeedup | ScoperKind::Baseline => {
            // Offline directives need the unrestricted solution; fall back to
            // an explicit do-nothing directive so the entry is still recorded.
            ScopeDirective {
                kind,
                trains: Vec::new(),
                predicted_changed: Vec::new(),
                used_solution: true,
                seed: None,
                sample_size: None,
            }
        }
        _ => scopers::scope_online_unrestricted(schedule, m),
    };
    ScoperEntry {
        scoper: kind,
        samples: vec![ScoperOutcome {
            sample_seed: None,
            directive,
            outcome: SolveOutcome::Skipped {
                reason: reason.to_string(),
            },
            metrics: ScoperMetrics::default(),
        }],
    }
}

/// Runs one experiment: solves the full re-scheduling problem once per
/// configured scoper and packages solutions, costs and prediction metrics.
pub fn run_experiment(
    config: &AgendaConfig,
    spec: &ExperimentSpec,
    infra: &Infrastructure,
    schedule: &Schedule,
    record: &MalfunctionRecord,
) -> ExperimentResult {
    let started = Instant::now();
    let mut result = ExperimentResult {
        version: FORMAT_VERSION,
        agenda_id: config.agenda_id.clone(),
        composite_id: spec.composite_id.clone(),
        infra_idx: spec.infra_idx,
        schedule_idx: spec.schedule_idx,
        run_idx: spec.run_idx,
        malfunction_train: spec.malfunction_train,
        malfunction: record.malfunction,
        inapplicable_reason: record.inapplicable_reason.clone(),
        error: None,
        core_problem: None,
        scopers: Vec::new(),
        environment: Environment {
            package_version: env!("CARGO_PKG_VERSION").to_string(),
            total_wall_seconds: 0.0,
        },
    };
    let Some(malfunction) = record.malfunction else {
        result.environment.total_wall_seconds = started.elapsed().as_secs_f64();
        return result;
    };

    let problem = match build_full_problem(
        infra,
        schedule,
        &malfunction,
        config.weights(),
        config.number_of_shortest_paths_per_train,
        config.max_window_size_from_earliest,
    ) {
        Ok(problem) => problem,
        Err(err) => {
            result.error = Some(err.to_string());
            result.environment.total_wall_seconds = started.elapsed().as_secs_f64();
            return result;
        }
    };

    let seed_for = |tag: u64, extra: u64| {
        derive_seed(
            config.master_seed,
            &[
                tag,
                spec.infra_idx as u64,
                spec.schedule_idx as u64,
                spec.malfunction_train.0 as u64,
                spec.run_idx as u64,
                extra,
            ],
        )
    };

    // The unrestricted problem is solved first: it is both a scoper in its
    // own right and the reference for every other entry.
    let unrestricted_directive = scopers::scope_online_unrestricted(schedule, &malfunction);
    let unrestricted_outcome =
        solve_directive(&problem, &unrestricted_directive, config, seed_for(1, 0));
    let reference = match &unrestricted_outcome {
        SolveOutcome::Solved {
            cost,
            runs,
            proved_optimal,
            wall_seconds,
            nodes_expanded,
            incumbent_trace,
            ..
        } => {
            let solution = Solution {
                runs: runs.clone(),
                cost: *cost,
                stats: crate::solver::SolveStats {
                    nodes_expanded: *nodes_expanded,
                    incumbent_trace: incumbent_trace.clone(),
                    proved_optimal: *proved_optimal,
                    wall_seconds: *wall_seconds,
                },
            };
            let core = metrics::core_problem(schedule, &solution);
            Some(Reference {
                runs: solution.runs,
                cost: *cost,
                proved: *proved_optimal,
                wall_seconds: *wall_seconds,
                core,
            })
        }
        _ => None,
    };
    result.core_problem = reference.as_ref().map(|r| r.core.clone());

    for &kind in &config.scopers {
        let entry = match kind {
            ScoperKind::OnlineUnrestricted => {
                let mut metrics = ScoperMetrics::default();
                if let Some(reference) = &reference {
                    metrics.speedup = Some(metrics::speedup(
                        reference.wall_seconds,
                        reference.wall_seconds,
                    ));
                    metrics.additional_lateness =
                        Some(metrics::additional_lateness(
                            reference.cost,
                            reference.cost,
                            reference.proved,
                            reference.proved,
                        ));
                    metrics.prediction = Some(metrics::prediction_quality(
                        &unrestricted_directive.predicted_changed,
                        &reference.core.changed_trains,
                    ));
                }
                ScoperEntry {
                    scoper: kind,
                    samples: vec![ScoperOutcome {
                        sample_seed: None,
                        directive: unrestricted_directive.clone(),
                        outcome: unrestricted_outcome.clone(),
                        metrics,
                    }],
                }
            }
            ScoperKind::UpperBound | ScoperKind::MaxSpeedup | ScoperKind::Baseline => {
                match &reference {
                    None => {
                        let reason = format!(
                            "unrestricted solve produced no solution ({})",
                            outcome_label(&unrestricted_outcome)
                        );
                        skipped_entry(kind, schedule, &malfunction, &reason)
                    }
                    Some(reference) => {
                        let solution = Solution {
                            runs: reference.runs.clone(),
                            cost: reference.cost,
                            stats: crate::solver::SolveStats {
                                nodes_expanded: 0,
                                incumbent_trace: Vec::new(),
                                proved_optimal: reference.proved,
                                wall_seconds: reference.wall_seconds,
                            },
                        };
                        let directive = match kind {
                            ScoperKind::UpperBound => {
                                scopers::scope_upper_bound(schedule, &solution)
                            }
                            ScoperKind::MaxSpeedup => {
                                scopers::scope_max_speedup(schedule, &solution)
                            }
                            _ => scopers::scope_baseline(schedule, &solution),
                        };
                        ScoperEntry {
                            scoper: kind,
                            samples: vec![measure(
                                &problem,
                                directive,
                                config,
                                seed_for(2, kind as u64),
                                None,
                                Some(reference),
                                kind != ScoperKind::UpperBound,
                            )],
                        }
                    }
                }
            }
            ScoperKind::Heuristic => {
                let directive = scopers::scope_heuristic(
                    schedule,
                    &malfunction,
                    infra,
                    config.heuristic_route_restricted,
                );
                ScoperEntry {
                    scoper: kind,
                    samples: vec![measure(
                        &problem,
                        directive,
                        config,
                        seed_for(3, 0),
                        None,
                        reference.as_ref(),
                        false,
                    )],
                }
            }
            ScoperKind::Random => {
                let sample_size = scopers::scope_heuristic(
                    schedule,
                    &malfunction,
                    infra,
                    config.heuristic_route_restricted,
                )
                .predicted_changed
                .len();
                let samples = (0..config.random_samples)
                    .map(|j| {
                        let sample_seed = seed_for(4, j as u64);
                        let directive = scopers::scope_random(
                            schedule,
                            &malfunction,
                            sample_size,
                            sample_seed,
                        );
                        measure(
                            &problem,
                            directive,
                            config,
                            seed_for(5, j as u64),
                            Some(sample_seed),
                            reference.as_ref(),
                            false,
                        )
                    })
                    .collect();
                ScoperEntry {
                    scoper: kind,
                    samples,
                }
            }
        };
        result.scopers.push(entry);
    }

    result.environment.total_wall_seconds = started.elapsed().as_secs_f64();
    result
}

fn outcome_label(outcome: &SolveOutcome) -> &'static str {
    match outcome {
        SolveOutcome::Solved { .. } => "solved",
        SolveOutcome::Infeasible { .. } => "infeasible",
        SolveOutcome::BudgetExhausted { .. } => "budget-exhausted",
        SolveOutcome::Skipped { .. } => "skipped",
        SolveOutcome::Error { .. } => "error",
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Progress<'a> {
    InfraReady { infra_idx: usize, cached: bool },
    ScheduleReady {
        infra_idx: usize,
        schedule_idx: usize,
        cached: bool,
    },
    ExperimentFinished {
        composite_id: &'a str,
        cached: bool,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct RunSummary {
    pub executed: usize,
    pub skipped_existing: usize,
    pub inapplicable: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct StoredAgenda {
    version: u32,
    config: AgendaConfig,
}

/// Generates any missing artifacts for the agenda, then runs every
/// experiment whose result is not yet stored, distributing independent
/// experiments over `workers` threads. Results are written atomically, so
/// an interrupted run resumes where it stopped.
fn stamp_agenda(store: &Store, config: &AgendaConfig) -> Result<(), RunError> {
    let agenda_path = store.agenda_path(&config.agenda_id);
    if store.exists(&agenda_path) {
        let existing: StoredAgenda = store.read_json(&agenda_path)?;
        if existing.config != *config {
            return Err(RunError::AgendaMismatch {
                agenda_id: config.agenda_id.clone(),
            });
        }
    } else {
        store.write_json(
            &agenda_path,
            &StoredAgenda {
                version: FORMAT_VERSION,
                config: config.clone(),
            },
        )?;
    }
    Ok(())
}

fn ensure_infra(store: &Store, spec: &InfraSpec) -> Result<(Infrastructure, bool), RunError> {
    let path = store.infra_path(spec.infra_idx);
    if store.exists(&path) {
        return Ok((store.read_json(&path)?, true));
    }
    let mut infra = generate_infrastructure(&spec.params, spec.seed).map_err(|e| {
        RunError::Generation {
            what: format!("infrastructure {}", spec.infra_idx),
            message: e.to_string(),
        }
    })?;
    infra.infra_id = spec.infra_idx as u32;
    store.write_json(&path, &infra)?;
    Ok((infra, false))
}

fn ensure_schedule(
    store: &Store,
    config: &AgendaConfig,
    infra: &Infrastructure,
    infra_idx: usize,
    schedule_idx: usize,
) -> Result<(Schedule, bool), RunError> {
    let path = store.schedule_path(infra_idx, schedule_idx);
    if store.exists(&path) {
        return Ok((store.read_json(&path)?, true));
    }
    let seed = derive_seed(
        config.master_seed,
        &[7, infra_idx as u64, schedule_idx as u64],
    );
    let mut schedule = generate_schedule(infra, None, seed).map_err(|e| {
        RunError::Generation {
            what: format!("schedule {schedule_idx} of infrastructure {infra_idx}"),
            message: e.to_string(),
        }
    })?;
    schedule.schedule_id = schedule_idx as u32;
    store.write_json(&path, &schedule)?;
    Ok((schedule, false))
}

fn ensure_malfunction(
    store: &Store,
    config: &AgendaConfig,
    schedule: &Schedule,
    infra_idx: usize,
    schedule_idx: usize,
    train: TrainId,
) -> Result<MalfunctionRecord, RunError> {
    let path = store.malfunction_path(infra_idx, schedule_idx, train);
    if store.exists(&path) {
        return Ok(store.read_json(&path)?);
    }
    let drawn = malfunction_for_train(
        schedule,
        train,
        config.earliest_malfunction,
        config.malfunction_duration,
    );
    let record = MalfunctionRecord {
        version: FORMAT_VERSION,
        infra_idx,
        schedule_idx,
        train,
        earliest_malfunction: config.earliest_malfunction,
        duration: config.malfunction_duration,
        malfunction: drawn.as_ref().ok().copied(),
        inapplicable_reason: drawn.err().map(|e| e.to_string()),
    };
    store.write_json(&path, &record)?;
    Ok(record)
}

/// Run one experiment of an agenda, generating any missing prerequisite
/// artifacts on the way. Returns the stored result when it already exists.
pub fn run_single(
    agenda: &Agenda,
    store: &Store,
    composite_id: &str,
) -> Result<ExperimentResult, RunError> {
    let config = &agenda.config;
    stamp_agenda(store, config)?;
    let spec = agenda
        .experiments
        .iter()
        .find(|s| s.composite_id == composite_id)
        .ok_or_else(|| RunError::UnknownExperiment {
            composite_id: composite_id.to_string(),
        })?;
    let result_path = store.result_path(&config.agenda_id, &spec.composite_id);
    if store.exists(&result_path) {
        return Ok(store.read_json(&result_path)?);
    }
    let (infra, _) = ensure_infra(store, &agenda.infras[spec.infra_idx])?;
    let (schedule, _) = ensure_schedule(store, config, &infra, spec.infra_idx, spec.schedule_idx)?;
    let record = ensure_malfunction(
        store,
        config,
        &schedule,
        spec.infra_idx,
        spec.schedule_idx,
        spec.malfunction_train,
    )?;
    let result = run_experiment(config, spec, &infra, &schedule, &record);
    store.write_json(&result_path, &result)?;
    Ok(result)
}

pub fn run_agenda(
    agenda: &Agenda,
    store: &Store,
    workers: usize,
    progress: &(dyn Fn(Progress<'_>) + Sync),
) -> Result<RunSummary, RunError> {
    let config = &agenda.config;
    stamp_agenda(store, config)?;

    let mut infras: Vec<Infrastructure> = Vec::with_capacity(agenda.infras.len());
    for spec in &agenda.infras {
        let (infra, cached) = ensure_infra(store, spec)?;
        progress(Progress::InfraReady {
            infra_idx: spec.infra_idx,
            cached,
        });
        infras.push(infra);
    }

    let mut schedules: Vec<Vec<Schedule>> = Vec::with_capacity(infras.len());
    for (infra_idx, infra) in infras.iter().enumerate() {
        let mut per_infra = Vec::with_capacity(agenda.schedule_count);
        for schedule_idx in 0..agenda.schedule_count {
            let (schedule, cached) =
                ensure_schedule(store, config, infra, infra_idx, schedule_idx)?;
            progress(Progress::ScheduleReady {
                infra_idx,
                schedule_idx,
                cached,
            });
            per_infra.push(schedule);
        }
        schedules.push(per_infra);
    }

    let mut records: std::collections::BTreeMap<(usize, usize, u32), MalfunctionRecord> =
        std::collections::BTreeMap::new();
    for spec in &agenda.experiments {
        let key = (spec.infra_idx, spec.schedule_idx, spec.malfunction_train.0);
        if records.contains_key(&key) {
            continue;
        }
        let record = ensure_malfunction(
            store,
            config,
            &schedules[spec.infra_idx][spec.schedule_idx],
            spec.infra_idx,
            spec.schedule_idx,
            spec.malfunction_train,
        )?;
        records.insert(key, record);
    }

    let jobs: Vec<&ExperimentSpec> = agenda
        .experiments
        .iter()
        .filter(|spec| {
            !store.exists(&store.result_path(&config.agenda_id, &spec.composite_id))
        })
        .collect();
    let skipped_existing = agenda.experiments.len() - jobs.len();
    for spec in &agenda.experiments {
        if !jobs.iter().any(|j| j.composite_id == spec.composite_id) {
            progress(Progress::ExperimentFinished {
                composite_id: &spec.composite_id,
                cached: true,
            });
        }
    }

    let next = AtomicUsize::new(0);
    let executed = AtomicUsize::new(0);
    let inapplicable = AtomicUsize::new(0);
    let failures: Mutex<Vec<RunError>> = Mutex::new(Vec::new());
    let workers = workers.max(1).min(jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(spec) = jobs.get(i) else { break };
                let infra = &infras[spec.infra_idx];
                let schedule = &schedules[spec.infra_idx][spec.schedule_idx];
                let record = &records[&(
                    spec.infra_idx,
                    spec.schedule_idx,
                    spec.malfunction_train.0,
                )];
                let result = run_experiment(config, spec, infra, schedule, record);
                if result.malfunction.is_none() {
                    inapplicable.fetch_add(1, Ordering::Relaxed);
                }
                let path = store.result_path(&config.agenda_id, &spec.composite_id);
                match store.write_json(&path, &result) {
                    Ok(()) => {
                        executed.fetch_add(1, Ordering::Relaxed);
                        progress(Progress::ExperimentFinished {
                            composite_id: &spec.composite_id,
                            cached: false,
                        });
                    }
                    Err(err) => {
                        failures.lock().unwrap().push(err.into());
                        break;
                    }
                }
            });
        }
    });
    if let Some(err) = failures.into_inner().unwrap().into_iter().next() {
        return Err(err);
    }

    Ok(RunSummary {
        executed: executed.into_inner(),
        skipped_existing,
        inapplicable: inapplicable.into_inner(),
    })
}
