//! Re-scheduling problems: a malfunction halts one train mid-run, and every
//! train must be re-timed (and possibly re-routed within its route DAG) into
//! a new conflict-free plan. Scope directives shrink the problem by pinning
//! selected trains to fixed runs.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{to_graph, Infrastructure, TrainId, Waypoint};
use crate::routing::{route_dag_of, RouteDag, RouteError};
use crate::schedule::{Schedule, TrainRun};

#[derive(Debug, Error)]
pub enum ReschedError {
    #[error("train {train} is not running at step {time_step} (active {active_from}..{active_to})")]
    InapplicableMalfunction {
        train: TrainId,
        time_step: i64,
        active_from: i64,
        active_to: i64,
    },
    #[error("no train is still running {earliest_malfunction} steps after its departure")]
    NoEligibleTrain { earliest_malfunction: i64 },
    #[error(
        "scope pins train {train} at {waypoint:?} to step {pinned}, before its earliest feasible step {earliest}"
    )]
    InfeasibleFreeze {
        train: TrainId,
        waypoint: Waypoint,
        pinned: i64,
        earliest: i64,
    },
    #[error("scope references waypoint {waypoint:?} outside train {train}'s route dag")]
    UnknownWaypoint { train: TrainId, waypoint: Waypoint },
    #[error("unknown train {train}")]
    UnknownTrain { train: TrainId },
    #[error(transparent)]
    Route(#[from] RouteError),
}

/// A halt of one train: it cannot advance for `duration` steps starting at
/// `time_step`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Malfunction {
    pub train: TrainId,
    pub time_step: i64,
    pub duration: i64,
}

/// Objective weights: total cost is `lateness_weight` per step of arrival
/// delay beyond the schedule plus `deviation_penalty` per solution waypoint
/// that the scheduled path never visits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct CostWeights {
    pub lateness_weight: i64,
    pub deviation_penalty: i64,
}

impl Default for CostWeights {
    fn default() -> Self {
        CostWeights {
            lateness_weight: 1,
            deviation_penalty: 30,
        }
    }
}

/// Per-train restriction inside a scope directive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrainScope {
    /// Full route DAG and time window stay open.
    Flexible,
    /// The train must run exactly its scheduled waypoints and times.
    PinnedToSchedule,
    /// The train must run exactly the given run.
    PinnedToRun(TrainRun),
    /// The route DAG is restricted to `edges`, and each waypoint in `pins`
    /// gets an exact entry time.
    EdgeUnion {
        edges: Vec<(Waypoint, Waypoint)>,
        pins: Vec<(Waypoint, i64)>,
    },
}

impl TrainScope {
    /// Whether this scope leaves the train any freedom at all.
    pub fn is_flexible(&self) -> bool {
        !matches!(self, TrainScope::PinnedToSchedule | TrainScope::PinnedToRun(_))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScoperKind {
    OnlineUnrestricted,
    UpperBound,
    MaxSpeedup,
    Baseline,
    Heuristic,
    Random,
}

impl std::fmt::Display for ScoperKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            ScoperKind::OnlineUnrestricted => "online-unrestricted",
            ScoperKind::UpperBound => "upper-bound",
            ScoperKind::MaxSpeedup => "max-speedup",
            ScoperKind::Baseline => "baseline",
            ScoperKind::Heuristic => "heuristic",
            ScoperKind::Random => "random",
        };
        f.write_str(name)
    }
}

/// Everything a scoper decided: which trains stay open, which are pinned,
/// and which trains it predicts will have to change their runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScopeDirective {
    pub kind: ScoperKind,
    /// Per-train scopes, sorted by train id. Trains not listed stay flexible.
    pub trains: Vec<(TrainId, TrainScope)>,
    /// Trains this scoper predicts to be part of the core problem.
    pub predicted_changed: Vec<TrainId>,
    /// Whether the scoper consumed the unrestricted optimum to decide.
    pub used_solution: bool,
    pub seed: Option<u64>,
    pub sample_size: Option<usize>,
}

impl ScopeDirective {
    pub fn scope_of(&self, train: TrainId) -> &TrainScope {
        self.trains
            .iter()
            .find(|(t, _)| *t == train)
            .map(|(_, s)| s)
            .unwrap_or(&TrainScope::Flexible)
    }
}

/// One train inside a re-scheduling problem: its (possibly pruned) route
/// DAG, per-waypoint time windows, exact pins, and its scheduled reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainProblem {
    pub train: TrainId,
    pub steps_per_cell: u32,
    pub dag: RouteDag,
    /// Earliest feasible entry per reachable waypoint, sorted by waypoint.
    pub earliest: Vec<(Waypoint, i64)>,
    /// Latest allowed entry per reachable waypoint, sorted by waypoint.
    pub latest: Vec<(Waypoint, i64)>,
    /// Waypoints with exact, immovable entry times (committed history or
    /// scope pins), sorted by entry time.
    pub pinned: Vec<(Waypoint, i64)>,
    pub sched_waypoints: Vec<Waypoint>,
    pub sched_arrival: i64,
}

impl TrainProblem {
    pub fn earliest_of(&self, wp: Waypoint) -> Option<i64> {
        lookup(&self.earliest, wp)
    }

    pub fn latest_of(&self, wp: Waypoint) -> Option<i64> {
        lookup(&self.latest, wp)
    }

    pub fn pinned_of(&self, wp: Waypoint) -> Option<i64> {
        self.pinned.iter().find(|(w, _)| *w == wp).map(|&(_, t)| t)
    }

    /// True when the pinned waypoints already form a complete run.
    pub fn is_fully_pinned(&self) -> bool {
        match self.pinned.last() {
            Some(&(wp, _)) => self.dag.sinks.contains(&wp) && self.pinned.len() > 1
                || self.dag.edges.is_empty() && self.dag.sinks.contains(&wp),
            None => false,
        }
    }
}

fn lookup(sorted: &[(Waypoint, i64)], wp: Waypoint) -> Option<i64> {
    sorted
        .binary_search_by(|(w, _)| w.cmp(&wp))
        .ok()
        .map(|i| sorted[i].1)
}

/// A full (unrestricted) or scoped re-scheduling problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FullProblem {
    pub version: u32,
    pub infra_id: u32,
    pub schedule_id: u32,
    pub malfunction: Malfunction,
    pub weights: CostWeights,
    pub max_window: i64,
    pub trains: Vec<TrainProblem>,
}

impl FullProblem {
    pub fn train(&self, id: TrainId) -> Option<&TrainProblem> {
        self.trains.iter().find(|t| t.train == id)
    }
}

/// Build a malfunction for a specific train: it strikes `earliest_malfunction`
/// steps after the train's scheduled departure and must hit the train while
/// it is still running.
pub fn malfunction_for_train(
    schedule: &Schedule,
    train: TrainId,
    earliest_malfunction: i64,
    duration: i64,
) -> Result<Malfunction, ReschedError> {
    let run = schedule
        .run(train)
        .ok_or(ReschedError::UnknownTrain { train })?;
    let time_step = run.departure() + earliest_malfunction;
    if time_step >= run.arrival() {
        return Err(ReschedError::InapplicableMalfunction {
            train,
            time_step,
            active_from: run.departure(),
            active_to: run.arrival(),
        });
    }
    Ok(Malfunction {
        train,
        time_step,
        duration,
    })
}

/// Draw a malfunction uniformly among the trains still running
/// `earliest_malfunction` steps after their departure.
pub fn draw_malfunction(
    schedule: &Schedule,
    earliest_malfunction: i64,
    duration: i64,
    seed: u64,
) -> Result<Malfunction, ReschedError> {
    let eligible: Vec<TrainId> = schedule
        .runs
        .iter()
        .filter(|r| r.departure() + earliest_malfunction < r.arrival())
        .map(|r| r.train)
        .collect();
    if eligible.is_empty() {
        return Err(ReschedError::NoEligibleTrain {
            earliest_malfunction,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let train = eligible[rng.gen_range(0..eligible.len())];
    malfunction_for_train(schedule, train, earliest_malfunction, duration)
}

/// Keep only the committed prefix chain plus everything reachable from its
/// last node.
fn prune_dag(dag: &RouteDag, prefix: &[Waypoint]) -> RouteDag {
    let last = *prefix.last().unwrap();
    let adj = dag.adjacency();
    let mut reachable: BTreeSet<Waypoint> = BTreeSet::new();
    let mut queue = VecDeque::from([last]);
    reachable.insert(last);
    while let Some(wp) = queue.pop_front() {
        for &next in adj.get(&wp).into_iter().flatten() {
            if reachable.insert(next) {
                queue.push_back(next);
            }
        }
    }
    let mut edges: BTreeSet<(Waypoint, Waypoint)> =
        prefix.windows(2).map(|w| (w[0], w[1])).collect();
    for &(a, b) in &dag.edges {
        if reachable.contains(&a) {
            edges.insert((a, b));
        }
    }
    RouteDag {
        train: dag.train,
        source: prefix[0],
        sinks: dag
            .sinks
            .iter()
            .copied()
            .filter(|s| reachable.contains(s) || prefix.contains(s))
            .collect(),
        edges: edges.into_iter().collect(),
    }
}

/// Forward-propagate earliest entry times through a DAG in topological
/// order: a node is reachable no earlier than the best predecessor exit.
/// `exit_extra` adds holding time on top of a node's traversal time.
fn propagate_earliest(
    dag: &RouteDag,
    steps_per_cell: i64,
    seeds: &BTreeMap<Waypoint, i64>,
    exit_extra: &BTreeMap<Waypoint, i64>,
) -> BTreeMap<Waypoint, i64> {
    let adj = dag.adjacency();
    let nodes = dag.nodes();
    let mut indegree: BTreeMap<Waypoint, usize> = nodes.iter().map(|&n| (n, 0)).collect();
    for &(_, b) in &dag.edges {
        *indegree.get_mut(&b).unwrap() += 1;
    }
    let mut queue: VecDeque<Waypoint> = indegree
        .iter()
        .filter(|&(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut earliest: BTreeMap<Waypoint, i64> = seeds.clone();
    while let Some(u) = queue.pop_front() {
        for &v in adj.get(&u).into_iter().flatten() {
            if let Some(&eu) = earliest.get(&u) {
                let via = eu + steps_per_cell + exit_extra.get(&u).copied().unwrap_or(0);
                let seeded = seeds.contains_key(&v);
                earliest
                    .entry(v)
                    .and_modify(|t| {
                        if !seeded && via < *t {
                            *t = via;
                        }
                    })
                    .or_insert(via);
            }
            let d = indegree.get_mut(&v).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(v);
            }
        }
    }
    earliest
}

fn windows_from(
    earliest: &BTreeMap<Waypoint, i64>,
    pinned: &BTreeMap<Waypoint, i64>,
    max_window: i64,
) -> (Vec<(Waypoint, i64)>, Vec<(Waypoint, i64)>) {
    let e: Vec<(Waypoint, i64)> = earliest.iter().map(|(&w, &t)| (w, t)).collect();
    let l: Vec<(Waypoint, i64)> = earliest
        .iter()
        .map(|(&w, &t)| {
            let latest = match pinned.get(&w) {
                Some(&p) => p,
                None => t + max_window,
            };
            (w, latest)
        })
        .collect();
    (e, l)
}

/// Build the unrestricted re-scheduling problem at the malfunction's time
/// step. Trains that already arrived are pinned to history; trains that have
/// not departed keep their full route DAG; running trains keep their
/// committed prefix pinned and may re-route from their current cell. The
/// malfunctioning train additionally cannot advance for the malfunction's
/// duration.
pub fn build_full_problem(
    infra: &Infrastructure,
    schedule: &Schedule,
    malfunction: &Malfunction,
    weights: CostWeights,
    k: usize,
    max_window: i64,
) -> Result<FullProblem, ReschedError> {
    let graph = to_graph(infra);
    let t = malfunction.time_step;
    let mut trains = Vec::with_capacity(schedule.runs.len());

    let mut runs: Vec<&TrainRun> = schedule.runs.iter().collect();
    runs.sort_by_key(|r| r.train);
    for run in runs {
        let spec = infra
            .train(run.train)
            .ok_or(ReschedError::UnknownTrain { train: run.train })?;
        let n = spec.steps_per_cell as i64;
        let full_dag = route_dag_of(infra, &graph, run.train, k)?;

        let (dag, pinned_map, seeds, exit_extra) = if run.arrival() <= t {
            // Already at its target: everything is history.
            let chain = RouteDag {
                train: run.train,
                source: run.waypoints[0],
                sinks: vec![*run.waypoints.last().unwrap()],
                edges: run.waypoints.windows(2).map(|w| (w[0], w[1])).collect(),
            };
            let pins: BTreeMap<Waypoint, i64> = run
                .waypoints
                .iter()
                .copied()
                .zip(run.entries.iter().copied())
                .collect();
            (chain, pins.clone(), pins, BTreeMap::new())
        } else if run.departure() > t {
            // Not yet departed: fully open, but it cannot leave earlier than
            // scheduled.
            let seeds = BTreeMap::from([(full_dag.source, run.departure())]);
            (full_dag, BTreeMap::new(), seeds, BTreeMap::new())
        } else {
            // Running: the prefix entered at or before t is committed.
            let prefix_len = run.entries.iter().filter(|&&e| e <= t).count();
            let prefix = &run.waypoints[..prefix_len];
            let dag = prune_dag(&full_dag, prefix);
            let pins: BTreeMap<Waypoint, i64> = prefix
                .iter()
                .copied()
                .zip(run.entries.iter().copied())
                .collect();
            let mut extra = BTreeMap::new();
            if run.train == malfunction.train {
                extra.insert(prefix[prefix_len - 1], malfunction.duration);
            }
            (dag, pins.clone(), pins, extra)
        };

        let earliest = propagate_earliest(&dag, n, &seeds, &exit_extra);
        let (e, l) = windows_from(&earliest, &pinned_map, max_window);
        let mut pinned: Vec<(Waypoint, i64)> = pinned_map.into_iter().collect();
        pinned.sort_by_key(|&(_, t)| t);

        trains.push(TrainProblem {
            train: run.train,
            steps_per_cell: spec.steps_per_cell,
            dag,
            earliest: e,
            latest: l,
            pinned,
            sched_waypoints: run.waypoints.clone(),
            sched_arrival: run.arrival(),
        });
    }

    Ok(FullProblem {
        version: crate::grid::FORMAT_VERSION,
        infra_id: schedule.infra_id,
        schedule_id: schedule.schedule_id,
        malfunction: *malfunction,
        weights,
        max_window,
        trains,
    })
}

/// Restrict `problem` according to `directive`. Pinning a train to times it
/// physically cannot make is an `InfeasibleFreeze` error.
pub fn apply_scope(
    problem: &FullProblem,
    directive: &ScopeDirective,
) -> Result<FullProblem, ReschedError> {
    let mut scoped = problem.clone();
    for tp in &mut scoped.trains {
        let scope = directive.scope_of(tp.train);
        match scope {
            TrainScope::Flexible => {}
            TrainScope::PinnedToSchedule => {
                let entries = schedule_entries_of(tp);
                pin_to_chain(tp, &tp.sched_waypoints.clone(), &entries)?;
            }
            TrainScope::PinnedToRun(run) => {
                let waypoints = run.waypoints.clone();
                pin_to_chain(tp, &waypoints, &run.entries)?;
            }
            TrainScope::EdgeUnion { edges, pins } => {
                let allowed: BTreeSet<(Waypoint, Waypoint)> = edges.iter().copied().collect();
                tp.dag.edges.retain(|e| allowed.contains(e));
                let nodes = tp.dag.nodes();
                tp.dag.sinks.retain(|s| nodes.contains(s));
                for &(wp, t) in pins {
                    if !nodes.contains(&wp) {
                        return Err(ReschedError::UnknownWaypoint {
                            train: tp.train,
                            waypoint: wp,
                        });
                    }
                    let earliest = tp.earliest_of(wp).unwrap_or(i64::MAX);
                    if t < earliest {
                        return Err(ReschedError::InfeasibleFreeze {
                            train: tp.train,
                            waypoint: wp,
                            pinned: t,
                            earliest,
                        });
                    }
                    if tp.pinned_of(wp).is_none() {
                        tp.pinned.push((wp, t));
                    }
                    set_window(&mut tp.earliest, wp, t);
                    set_window(&mut tp.latest, wp, t);
                }
                tp.pinned.sort_by_key(|&(_, t)| t);
            }
        }
    }
    Ok(scoped)
}

/// The scheduled entry times of a train, reconstructed from its recorded
/// arrival: scheduled runs move one cell every `steps_per_cell` steps with
/// no mid-route waits.
fn schedule_entries_of(tp: &TrainProblem) -> Vec<i64> {
    let m = tp.sched_waypoints.len();
    let n = tp.steps_per_cell as i64;
    (0..m)
        .map(|i| tp.sched_arrival - (m as i64 - 1 - i as i64) * n)
        .collect()
}

fn pin_to_chain(
    tp: &mut TrainProblem,
    waypoints: &[Waypoint],
    entries: &[i64],
) -> Result<(), ReschedError> {
    let nodes = tp.dag.nodes();
    for (&wp, &t) in waypoints.iter().zip(entries) {
        if !nodes.contains(&wp) {
            return Err(ReschedError::UnknownWaypoint {
                train: tp.train,
                waypoint: wp,
            });
        }
        let earliest = tp.earliest_of(wp).unwrap_or(i64::MAX);
        if t < earliest {
            return Err(ReschedError::InfeasibleFreeze {
                train: tp.train,
                waypoint: wp,
                pinned: t,
                earliest,
            });
        }
    }
    tp.dag = RouteDag {
        train: tp.train,
        source: waypoints[0],
        sinks: vec![*waypoints.last().unwrap()],
        edges: waypoints.windows(2).map(|w| (w[0], w[1])).collect(),
    };
    tp.pinned = waypoints.iter().copied().zip(entries.iter().copied()).collect();
    tp.earliest = tp.pinned.clone();
    tp.latest = tp.pinned.clone();
    tp.pinned.sort_by_key(|&(_, t)| t);
    tp.earliest.sort_by_key(|&(w, _)| w);
    tp.latest.sort_by_key(|&(w, _)| w);
    Ok(())
}

fn set_window(sorted: &mut [(Waypoint, i64)], wp: Waypoint, t: i64) {
    if let Ok(i) = sorted.binary_search_by(|(w, _)| w.cmp(&wp)) {
        sorted[i].1 = t;
    }
}

/// Objective value of a set of runs against the schedule: weighted arrival
/// lateness plus weighted count of waypoints outside the scheduled path.
pub fn cost(runs: &[TrainRun], schedule: &Schedule, weights: CostWeights) -> i64 {
    runs.iter()
        .map(|run| {
            let sched = schedule
                .run(run.train)
                .unwrap_or_else(|| panic!("run for unknown train {}", run.train));
            let lateness = (run.arrival() - sched.arrival()).max(0);
            let sched_set: BTreeSet<Waypoint> = sched.waypoints.iter().copied().collect();
            let deviation = run
                .waypoints
                .iter()
                .filter(|w| !sched_set.contains(w))
                .count() as i64;
            weights.lateness_weight * lateness + weights.deviation_penalty * deviation
        })
        .sum()
}

/// True when `runs` is a feasible solution of `problem`: one run per problem
/// train whose waypoints form a route in the train's DAG, whose entry times
/// respect windows, spacing and pins, and whose cell occupancies never
/// overlap across trains.
pub fn solution_fits(problem: &FullProblem, runs: &[TrainRun]) -> bool {
    if runs.len() != problem.trains.len() {
        return false;
    }
    for tp in &problem.trains {
        let Some(run) = runs.iter().find(|r| r.train == tp.train) else {
            return false;
        };
        if run.waypoints.is_empty() || run.waypoints.len() != run.entries.len() {
            return false;
        }
        if run.waypoints[0] != tp.dag.source
            || !tp.dag.sinks.contains(run.waypoints.last().unwrap())
        {
            return false;
        }
        let edges: BTreeSet<(Waypoint, Waypoint)> = tp.dag.edges.iter().copied().collect();
        if run
            .waypoints
            .windows(2)
            .any(|pair| !edges.contains(&(pair[0], pair[1])))
        {
            return false;
        }
        let n = tp.steps_per_cell as i64;
        for (j, (&wp, &t)) in run.waypoints.iter().zip(&run.entries).enumerate() {
            let in_window = matches!(
                (tp.earliest_of(wp), tp.latest_of(wp)),
                (Some(e), Some(l)) if e <= t && t <= l
            );
            if !in_window {
                return false;
            }
            if j > 0 && t < run.entries[j - 1] + n {
                return false;
            }
        }
        for &(wp, t) in &tp.pinned {
            if run
                .waypoints
                .iter()
                .zip(&run.entries)
                .find(|(w, _)| **w == wp)
                .map(|(_, &entry)| entry)
                != Some(t)
            {
                return false;
            }
        }
    }
    let mut held: Vec<(TrainId, crate::grid::Cell, i64, i64)> = Vec::new();
    for run in runs {
        let n = problem
            .train(run.train)
            .map(|tp| tp.steps_per_cell)
            .unwrap_or(1);
        for (cell, start, end) in run.occupancy(n) {
            for &(other, ocell, ostart, oend) in &held {
                if other != run.train && ocell == cell && start < oend && ostart < end {
                    return false;
                }
            }
            held.push((run.train, cell, start, end));
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_infrastructure, InfraParams};
    use crate::schedule::generate_schedule;

    fn fixture() -> (Infrastructure, Schedule) {
        let infra = generate_infrastructure(
            &InfraParams {
                max_num_cities: 3,
                num_agents: 6,
                ..Default::default()
            },
            2,
        )
        .unwrap();
        let schedule = generate_schedule(&infra, None, 7).unwrap();
        (infra, schedule)
    }

    fn mid_run_malfunction(schedule: &Schedule, duration: i64) -> Malfunction {
        let run = schedule
            .runs
            .iter()
            .max_by_key(|r| r.arrival() - r.departure())
            .unwrap();
        let mid = (run.arrival() - run.departure()) / 2;
        malfunction_for_train(schedule, run.train, mid, duration).unwrap()
    }

    #[test]
    fn test_malfunction_strikes_relative_to_departure() {
        let (_, schedule) = fixture();
        let run = &schedule.runs[0];
        let m = malfunction_for_train(&schedule, run.train, 1, 10).unwrap();
        assert_eq!(m.time_step, run.departure() + 1);
        assert_eq!(m.duration, 10);
    }

    #[test]
    fn test_malfunction_after_arrival_is_inapplicable() {
        let (_, schedule) = fixture();
        let run = &schedule.runs[0];
        let beyond = run.arrival() - run.departure() + 5;
        assert!(matches!(
            malfunction_for_train(&schedule, run.train, beyond, 10),
            Err(ReschedError::InapplicableMalfunction { .. })
        ));
    }

    #[test]
    fn test_draw_malfunction_is_deterministic_and_eligible() {
        let (_, schedule) = fixture();
        let a = draw_malfunction(&schedule, 2, 8, 31).unwrap();
        let b = draw_malfunction(&schedule, 2, 8, 31).unwrap();
        assert_eq!(a, b);
        let run = schedule.run(a.train).unwrap();
        assert!(a.time_step < run.arrival());
    }

    #[test]
    fn test_full_problem_pins_history_and_delays_malfunction_train() {
        let (infra, schedule) = fixture();
        let m = mid_run_malfunction(&schedule, 12);
        let problem =
            build_full_problem(&infra, &schedule, &m, CostWeights::default(), 10, 60).unwrap();
        assert_eq!(problem.trains.len(), schedule.runs.len());

        for tp in &problem.trains {
            let run = schedule.run(tp.train).unwrap();
            let n = infra.train(tp.train).unwrap().steps_per_cell as i64;
            if run.arrival() <= m.time_step {
                assert!(tp.is_fully_pinned(), "arrived train must be pinned");
            } else if run.departure() > m.time_step {
                assert!(tp.pinned.is_empty());
                assert_eq!(tp.earliest_of(tp.dag.source), Some(run.departure()));
            } else {
                let committed = run.entries.iter().filter(|&&e| e <= m.time_step).count();
                assert_eq!(tp.pinned.len(), committed);
                let (last_wp, last_t) = *tp.pinned.last().unwrap();
                let next_earliest = tp
                    .dag
                    .adjacency()
                    .get(&last_wp)
                    .into_iter()
                    .flatten()
                    .map(|&v| tp.earliest_of(v).unwrap())
                    .min();
                if let Some(next) = next_earliest {
                    let extra = if tp.train == m.train { m.duration } else { 0 };
                    assert_eq!(next, last_t + n + extra, "train {}", tp.train);
                }
            }
            for &(wp, e) in &tp.earliest {
                let l = tp.latest_of(wp).unwrap();
                if tp.pinned_of(wp).is_some() {
                    assert_eq!(l, tp.pinned_of(wp).unwrap());
                } else {
                    assert_eq!(l, e + 60);
                }
            }
        }
    }

    #[test]
    fn test_pinning_malfunction_train_to_schedule_is_infeasible() {
        let (infra, schedule) = fixture();
        let m = mid_run_malfunction(&schedule, 12);
        let problem =
            build_full_problem(&infra, &schedule, &m, CostWeights::default(), 10, 60).unwrap();
        let directive = ScopeDirective {
            kind: ScoperKind::Baseline,
            trains: vec![(m.train, TrainScope::PinnedToSchedule)],
            predicted_changed: vec![],
            used_solution: false,
            seed: None,
            sample_size: None,
        };
        assert!(matches!(
            apply_scope(&problem, &directive),
            Err(ReschedError::InfeasibleFreeze { train, .. }) if train == m.train
        ));
    }

    #[test]
    fn test_pinning_unaffected_train_to_schedule_is_feasible() {
        let (infra, schedule) = fixture();
        let m = mid_run_malfunction(&schedule, 12);
        let problem =
            build_full_problem(&infra, &schedule, &m, CostWeights::default(), 10, 60).unwrap();
        let other = schedule
            .runs
            .iter()
            .map(|r| r.train)
            .find(|&t| t != m.train)
            .unwrap();
        let directive = ScopeDirective {
            kind: ScoperKind::Baseline,
            trains: vec![(other, TrainScope::PinnedToSchedule)],
            predicted_changed: vec![],
            used_solution: false,
            seed: None,
            sample_size: None,
        };
        let scoped = apply_scope(&problem, &directive).unwrap();
        let tp = scoped.train(other).unwrap();
        assert!(tp.is_fully_pinned());
        assert_eq!(tp.pinned.len(), tp.sched_waypoints.len());
    }

    #[test]
    fn test_cost_of_schedule_against_itself_is_zero() {
        let (_, schedule) = fixture();
        assert_eq!(cost(&schedule.runs, &schedule, CostWeights::default()), 0);
    }

    #[test]
    fn test_cost_counts_lateness_and_deviation() {
        let (_, schedule) = fixture();
        let weights = CostWeights::default();
        let mut runs = schedule.runs.clone();
        for e in &mut runs[0].entries {
            *e += 7;
        }
        assert_eq!(cost(&runs, &schedule, weights), 7);

        // Reversing another train's heading at one waypoint counts as one
        // off-schedule waypoint.
        let wp = runs[1].waypoints[0];
        runs[1].waypoints[0] = Waypoint::new(wp.cell, wp.heading.opposite());
        assert_eq!(cost(&runs, &schedule, weights), 7 + 30);
    }

    #[test]
    fn test_solution_fits_accepts_solver_output_and_rejects_tampering() {
        let (infra, schedule) = fixture();
        let m = mid_run_malfunction(&schedule, 12);
        let problem =
            build_full_problem(&infra, &schedule, &m, CostWeights::default(), 10, 60).unwrap();
        let solution = crate::solver::solve(
            &problem,
            CostWeights::default(),
            crate::solver::Budget::default(),
            0,
        )
        .unwrap();
        assert!(solution_fits(&problem, &solution.runs));

        let mut late = solution.runs.clone();
        let last = late[0].entries.len() - 1;
        late[0].entries[last] += 10_000;
        assert!(!solution_fits(&problem, &late));

        let mut rerouted = solution.runs.clone();
        let wp = rerouted[0].waypoints[1];
        rerouted[0].waypoints[1] = Waypoint::new(wp.cell, wp.heading.opposite());
        assert!(!solution_fits(&problem, &rerouted));

        assert!(!solution_fits(&problem, &solution.runs[1..]));
    }

    #[test]
    fn test_solution_fits_detects_occupancy_overlap() {
        use crate::grid::Heading;
        use crate::solver::fixtures::{chain_train, problem_of, wp};

        let shared = wp(0, 5, Heading::East);
        let path_a = [wp(0, 4, Heading::East), shared, wp(0, 6, Heading::East)];
        let path_b = [
            wp(1, 5, Heading::North),
            wp(0, 5, Heading::East),
            wp(0, 6, Heading::East),
        ];
        let problem = problem_of(
            vec![
                chain_train(0, 1, &path_a, 0, 20, 2),
                chain_train(1, 1, &path_b, 0, 20, 2),
            ],
            20,
        );
        let run = |id: u32, path: &[Waypoint], start: i64| TrainRun {
            train: TrainId(id),
            waypoints: path.to_vec(),
            entries: (0..path.len() as i64).map(|j| start + j).collect(),
        };
        let clashing = vec![run(0, &path_a, 0), run(1, &path_b, 0)];
        assert!(!solution_fits(&problem, &clashing));
        let staggered = vec![run(0, &path_a, 0), run(1, &path_b, 3)];
        assert!(solution_fits(&problem, &staggered));
    }
}
