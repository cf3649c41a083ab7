//! The six scope-restriction strategies. Offline scopers consume the
//! unrestricted optimum and can therefore pin trains to it; online scopers
//! see only the schedule and the malfunction, which the function signatures
//! enforce by never accepting a `Solution`.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::grid::{Cell, Infrastructure, TrainId, Waypoint};
use crate::resched::{Malfunction, ScopeDirective, ScoperKind, TrainScope};
use crate::schedule::{Schedule, TrainRun};
use crate::solver::Solution;

/// Leave every train fully flexible: the re-scheduling problem itself.
pub fn scope_online_unrestricted(
    schedule: &Schedule,
    _malfunction: &Malfunction,
) -> ScopeDirective {
    let trains: Vec<(TrainId, TrainScope)> = sorted_ids(schedule)
        .into_iter()
        .map(|id| (id, TrainScope::Flexible))
        .collect();
    let predicted_changed = trains.iter().map(|(id, _)| *id).collect();
    ScopeDirective {
        kind: ScoperKind::OnlineUnrestricted,
        trains,
        predicted_changed,
        used_solution: false,
        seed: None,
        sample_size: None,
    }
}

/// Pin every train to the unrestricted optimum, leaving a solution space of
/// exactly one point. Measures pure solver overhead.
pub fn scope_upper_bound(schedule: &Schedule, solution: &Solution) -> ScopeDirective {
    let trains = solution
        .runs
        .iter()
        .map(|run| (run.train, TrainScope::PinnedToRun(run.clone())))
        .collect();
    ScopeDirective {
        kind: ScoperKind::UpperBound,
        trains,
        predicted_changed: changed_trains(schedule, solution),
        used_solution: true,
        seed: None,
        sample_size: None,
    }
}

/// Per train, restrict routes to the union of the scheduled path and the
/// optimum's path, and pin every waypoint whose location and entry time
/// agree in both. Unchanged trains end up fully pinned.
pub fn scope_max_speedup(schedule: &Schedule, solution: &Solution) -> ScopeDirective {
    let mut trains = Vec::with_capacity(solution.runs.len());
    for run in &solution.runs {
        let Some(sched_run) = schedule.run(run.train) else {
            continue;
        };
        let mut edges: Vec<(Waypoint, Waypoint)> = sched_run
            .waypoints
            .windows(2)
            .chain(run.waypoints.windows(2))
            .map(|w| (w[0], w[1]))
            .collect();
        edges.sort();
        edges.dedup();
        let sched_pairs: BTreeSet<(Waypoint, i64)> = timed_pairs(sched_run).collect();
        let pins: Vec<(Waypoint, i64)> = timed_pairs(run)
            .filter(|pair| sched_pairs.contains(pair))
            .collect();
        trains.push((run.train, TrainScope::EdgeUnion { edges, pins }));
    }
    trains.sort_by_key(|&(id, _)| id);
    ScopeDirective {
        kind: ScoperKind::MaxSpeedup,
        trains,
        predicted_changed: changed_trains(schedule, solution),
        used_solution: true,
        seed: None,
        sample_size: None,
    }
}

/// Open changed trains completely, freeze unchanged trains at their
/// scheduled runs.
pub fn scope_baseline(schedule: &Schedule, solution: &Solution) -> ScopeDirective {
    let changed = changed_trains(schedule, solution);
    let changed_set: BTreeSet<TrainId> = changed.iter().copied().collect();
    let trains = sorted_ids(schedule)
        .into_iter()
        .map(|id| {
            let scope = if changed_set.contains(&id) {
                TrainScope::Flexible
            } else {
                TrainScope::PinnedToSchedule
            };
            (id, scope)
        })
        .collect();
    ScopeDirective {
        kind: ScoperKind::Baseline,
        trains,
        predicted_changed: changed,
        used_solution: true,
        seed: None,
        sample_size: None,
    }
}

/// Predict affected trains by propagating the malfunction delay along
/// scheduled resource hand-overs, then open exactly those trains. With
/// `route_restricted` the affected trains keep their scheduled route and
/// only regain time flexibility.
pub fn scope_heuristic(
    schedule: &Schedule,
    malfunction: &Malfunction,
    infra: &Infrastructure,
    route_restricted: bool,
) -> ScopeDirective {
    let affected = transmission_chains(schedule, malfunction, infra);
    let trains = sorted_ids(schedule)
        .into_iter()
        .map(|id| {
            let scope = if !affected.contains_key(&id) {
                TrainScope::PinnedToSchedule
            } else if route_restricted {
                let run = schedule.run(id).expect("affected train has a run");
                let mut edges: Vec<(Waypoint, Waypoint)> =
                    run.waypoints.windows(2).map(|w| (w[0], w[1])).collect();
                edges.sort();
                TrainScope::EdgeUnion {
                    edges,
                    pins: Vec::new(),
                }
            } else {
                TrainScope::Flexible
            };
            (id, scope)
        })
        .collect();
    ScopeDirective {
        kind: ScoperKind::Heuristic,
        trains,
        predicted_changed: affected.keys().copied().collect(),
        used_solution: false,
        seed: None,
        sample_size: None,
    }
}

/// Open a uniform sample of `n` trains (always including the malfunction
/// train), freeze the rest. A frozen train scheduled through the halted
/// cell makes the instance infeasible; callers record that as a
/// worst-quality outcome rather than an error.
pub fn scope_random(
    schedule: &Schedule,
    malfunction: &Malfunction,
    n: usize,
    seed: u64,
) -> ScopeDirective {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut others: Vec<TrainId> = sorted_ids(schedule)
        .into_iter()
        .filter(|&id| id != malfunction.train)
        .collect();
    others.shuffle(&mut rng);
    let mut sample: BTreeSet<TrainId> = others
        .into_iter()
        .take(n.saturating_sub(1).min(schedule.runs.len().saturating_sub(1)))
        .collect();
    sample.insert(malfunction.train);
    let trains = sorted_ids(schedule)
        .into_iter()
        .map(|id| {
            let scope = if sample.contains(&id) {
                TrainScope::Flexible
            } else {
                TrainScope::PinnedToSchedule
            };
            (id, scope)
        })
        .collect();
    ScopeDirective {
        kind: ScoperKind::Random,
        trains,
        predicted_changed: sample.into_iter().collect(),
        used_solution: false,
        seed: Some(seed),
        sample_size: Some(n),
    }
}

fn sorted_ids(schedule: &Schedule) -> Vec<TrainId> {
    let mut ids: Vec<TrainId> = schedule.runs.iter().map(|r| r.train).collect();
    ids.sort();
    ids
}

fn timed_pairs(run: &TrainRun) -> impl Iterator<Item = (Waypoint, i64)> + '_ {
    run.waypoints
        .iter()
        .copied()
        .zip(run.entries.iter().copied())
}

/// Trains whose optimum run differs from the scheduled run in waypoints or
/// entry times.
pub fn changed_trains(schedule: &Schedule, solution: &Solution) -> Vec<TrainId> {
    let mut changed: Vec<TrainId> = solution
        .runs
        .iter()
        .filter(|run| {
            schedule
                .run(run.train)
                .map(|sched| sched.waypoints != run.waypoints || sched.entries != run.entries)
                .unwrap_or(true)
        })
        .map(|run| run.train)
        .collect();
    changed.sort();
    changed
}

/// Delay propagation along scheduled resource hand-overs. Each affected
/// train carries a delay estimate and the time it first gets hit; only
/// resource releases at or after that onset are considered shifted. A train
/// whose scheduled entry falls between a shifted release's old and new time
/// joins the affected set with the overshoot as its own delay.
fn transmission_chains(
    schedule: &Schedule,
    malfunction: &Malfunction,
    infra: &Infrastructure,
) -> BTreeMap<TrainId, (i64, i64)> {
    let steps_of: BTreeMap<TrainId, i64> = infra
        .trains
        .iter()
        .map(|t| (t.id, t.steps_per_cell as i64))
        .collect();
    let uses_by_cell: BTreeMap<Cell, Vec<(TrainId, i64, i64)>> = {
        let mut map: BTreeMap<Cell, Vec<(TrainId, i64, i64)>> = BTreeMap::new();
        for run in &schedule.runs {
            let n = steps_of.get(&run.train).copied().unwrap_or(1);
            for (i, wp) in run.waypoints.iter().enumerate() {
                let entry = run.entries[i];
                let release = run
                    .entries
                    .get(i + 1)
                    .copied()
                    .unwrap_or(run.arrival() + n);
                map.entry(wp.cell).or_default().push((run.train, entry, release));
            }
        }
        map
    };

    let mut affected: BTreeMap<TrainId, (i64, i64)> = BTreeMap::new();
    affected.insert(
        malfunction.train,
        (malfunction.duration, malfunction.time_step),
    );
    let mut queue = vec![malfunction.train];
    while let Some(a) = queue.pop() {
        let (delay, onset) = affected[&a];
        if delay == 0 {
            continue;
        }
        let Some(run) = schedule.run(a) else { continue };
        let n = steps_of.get(&a).copied().unwrap_or(1);
        for (i, wp) in run.waypoints.iter().enumerate() {
            let release = run
                .entries
                .get(i + 1)
                .copied()
                .unwrap_or(run.arrival() + n);
            if release < onset {
                continue;
            }
            let shifted = release + delay;
            for &(b, b_entry, _) in uses_by_cell.get(&wp.cell).into_iter().flatten() {
                if b == a || b_entry < release || b_entry > shifted {
                    continue;
                }
                let overshoot = shifted - b_entry;
                match affected.get_mut(&b) {
                    None => {
                        affected.insert(b, (overshoot, b_entry));
                        if overshoot > 0 {
                            queue.push(b);
                        }
                    }
                    Some(cur) => {
                        let grown = (cur.0.max(overshoot), cur.1.min(b_entry));
                        if grown != *cur {
                            *cur = grown;
                            if grown.0 > 0 {
                                queue.push(b);
                            }
                        }
                    }
                }
            }
        }
    }
    affected
}
