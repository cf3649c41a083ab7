//! Conflict-free timetable generation by prioritized planning: trains are
//! inserted one by one on their shortest path, each departing at the earliest
//! offset that avoids every earlier reservation.

use std::collections::HashMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{to_graph, Cell, Infrastructure, TrainId, Waypoint};
use crate::routing::{k_shortest_paths, target_waypoints, RouteError};

const MAX_PERMUTATION_RESTARTS: usize = 50;

#[derive(Debug, Error)]
pub enum ScheduleError {
    #[error("no conflict-free timetable found within the horizon after {attempts} permutations")]
    Unschedulable { attempts: usize },
    #[error(transparent)]
    Route(#[from] RouteError),
}

/// One train's timetable: the waypoints of its path and the time step at
/// which it enters each of them. Entry times are spaced by the train's
/// steps-per-cell; the train waits only before departing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainRun {
    pub train: TrainId,
    pub waypoints: Vec<Waypoint>,
    pub entries: Vec<i64>,
}

impl TrainRun {
    pub fn departure(&self) -> i64 {
        self.entries[0]
    }

    /// Entry time into the target cell.
    pub fn arrival(&self) -> i64 {
        *self.entries.last().unwrap()
    }

    pub fn entry_at(&self, cell: Cell) -> Option<i64> {
        self.waypoints
            .iter()
            .position(|w| w.cell == cell)
            .map(|i| self.entries[i])
    }

    /// Cell occupancy intervals [start, end): each cell is held from entry
    /// until the next cell's entry; the target cell is held for one full
    /// cell traversal after arrival.
    pub fn occupancy(&self, steps_per_cell: u32) -> impl Iterator<Item = (Cell, i64, i64)> + '_ {
        let n = steps_per_cell as i64;
        self.waypoints.iter().enumerate().map(move |(i, wp)| {
            let start = self.entries[i];
            let end = match self.entries.get(i + 1) {
                Some(&next) => next,
                None => start + n,
            };
            (wp.cell, start, end)
        })
    }
}

/// A complete conflict-free timetable for an infrastructure.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Schedule {
    pub version: u32,
    pub infra_id: u32,
    pub schedule_id: u32,
    pub seed: u64,
    pub horizon: i64,
    pub runs: Vec<TrainRun>,
}

impl Schedule {
    pub fn run(&self, train: TrainId) -> Option<&TrainRun> {
        self.runs.iter().find(|r| r.train == train)
    }
}

/// A pair of trains holding the same cell at overlapping times.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conflict {
    pub cell: Cell,
    pub first: TrainId,
    pub second: TrainId,
    pub overlap: (i64, i64),
}

/// Earliest departure offset >= 0 such that shifting the relative cell uses
/// by it avoids all reservations, or None if none exists with the run ending
/// by `horizon`.
fn earliest_offset(
    uses: &[(Cell, i64, i64)],
    reservations: &HashMap<Cell, Vec<(i64, i64)>>,
    horizon: i64,
    duration: i64,
) -> Option<i64> {
    let mut blocked: Vec<(i64, i64)> = Vec::new();
    for &(cell, s, e) in uses {
        for &(rs, re) in reservations.get(&cell).into_iter().flatten() {
            let lo = rs - e + 1;
            let hi = re - s - 1;
            if lo <= hi {
                blocked.push((lo, hi));
            }
        }
    }
    blocked.sort_unstable();
    let mut t0 = 0i64;
    for (lo, hi) in blocked {
        if t0 < lo {
            break;
        }
        if t0 <= hi {
            t0 = hi + 1;
        }
    }
    (t0 + duration <= horizon).then_some(t0)
}

/// Generate a conflict-free schedule. Each train follows its shortest path;
/// insertion order permutations are retried until every train fits within
/// the horizon. `horizon` defaults to twice the slowest solo run.
pub fn generate_schedule(
    infra: &Infrastructure,
    horizon: Option<i64>,
    seed: u64,
) -> Result<Schedule, ScheduleError> {
    let graph = to_graph(infra);
    let mut paths = Vec::with_capacity(infra.trains.len());
    let mut max_solo_end = 0i64;
    for train in &infra.trains {
        let targets = target_waypoints(&graph, train.target);
        let path = k_shortest_paths(&graph, train.origin, &targets, 1)?.remove(0);
        let n = train.steps_per_cell as i64;
        max_solo_end = max_solo_end.max(path.len() as i64 * n);
        paths.push(path);
    }
    let horizon = horizon.unwrap_or(2 * max_solo_end);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut attempts = 0;
    for _ in 0..MAX_PERMUTATION_RESTARTS {
        attempts += 1;
        let mut order: Vec<usize> = (0..infra.trains.len()).collect();
        order.shuffle(&mut rng);

        let mut reservations: HashMap<Cell, Vec<(i64, i64)>> = HashMap::new();
        let mut runs: Vec<Option<TrainRun>> = vec![None; infra.trains.len()];
        let mut feasible = true;
        for &ti in &order {
            let train = &infra.trains[ti];
            let path = &paths[ti];
            let n = train.steps_per_cell as i64;
            let uses: Vec<(Cell, i64, i64)> = path
                .iter()
                .enumerate()
                .map(|(i, wp)| (wp.cell, i as i64 * n, (i as i64 + 1) * n))
                .collect();
            let duration = path.len() as i64 * n;
            let Some(t0) = earliest_offset(&uses, &reservations, horizon, duration) else {
                feasible = false;
                break;
            };
            for &(cell, s, e) in &uses {
                reservations.entry(cell).or_default().push((t0 + s, t0 + e));
            }
            runs[ti] = Some(TrainRun {
                train: train.id,
                waypoints: path.clone(),
                entries: (0..path.len()).map(|i| t0 + i as i64 * n).collect(),
            });
        }
        if feasible {
            return Ok(Schedule {
                version: crate::grid::FORMAT_VERSION,
                infra_id: infra.infra_id,
                schedule_id: 0,
                seed,
                horizon,
                runs: runs.into_iter().map(Option::unwrap).collect(),
            });
        }
    }
    Err(ScheduleError::Unschedulable { attempts })
}

/// All pairs of runs that hold the same cell at overlapping times. An empty
/// result means the schedule is conflict-free.
pub fn verify_conflict_free(schedule: &Schedule, infra: &Infrastructure) -> Vec<Conflict> {
    let mut by_cell: HashMap<Cell, Vec<(i64, i64, TrainId)>> = HashMap::new();
    for run in &schedule.runs {
        let n = infra
            .train(run.train)
            .map(|t| t.steps_per_cell)
            .unwrap_or(1);
        for (cell, s, e) in run.occupancy(n) {
            by_cell.entry(cell).or_default().push((s, e, run.train));
        }
    }
    let mut conflicts = Vec::new();
    let mut cells: Vec<_> = by_cell.into_iter().collect();
    cells.sort_by_key(|(c, _)| *c);
    for (cell, mut uses) in cells {
        uses.sort_unstable();
        for i in 0..uses.len() {
            for j in i + 1..uses.len() {
                let (s1, e1, a) = uses[i];
                let (s2, e2, b) = uses[j];
                if a == b {
                    continue;
                }
                let lo = s1.max(s2);
                let hi = e1.min(e2);
                if lo < hi {
                    conflicts.push(Conflict {
                        cell,
                        first: a.min(b),
                        second: a.max(b),
                        overlap: (lo, hi),
                    });
                }
            }
        }
    }
    conflicts
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_infrastructure, InfraParams};

    fn desk_infra(seed: u64) -> Infrastructure {
        generate_infrastructure(
            &InfraParams {
                max_num_cities: 4,
                num_agents: 8,
                ..Default::default()
            },
            seed,
        )
        .unwrap()
    }

    #[test]
    fn test_generated_schedule_is_conflict_free() {
        for seed in 0..4 {
            let infra = desk_infra(seed);
            let schedule = generate_schedule(&infra, None, 100 + seed).unwrap();
            assert_eq!(schedule.runs.len(), infra.trains.len());
            assert!(verify_conflict_free(&schedule, &infra).is_empty());
        }
    }

    #[test]
    fn test_runs_move_at_train_speed_without_mid_route_waits() {
        let infra = desk_infra(1);
        let schedule = generate_schedule(&infra, None, 42).unwrap();
        for run in &schedule.runs {
            let n = infra.train(run.train).unwrap().steps_per_cell as i64;
            assert!(run.departure() >= 0);
            for pair in run.entries.windows(2) {
                assert_eq!(pair[1] - pair[0], n);
            }
        }
    }

    #[test]
    fn test_runs_follow_shortest_paths_within_horizon() {
        let infra = desk_infra(2);
        let schedule = generate_schedule(&infra, None, 7).unwrap();
        let graph = to_graph(&infra);
        for run in &schedule.runs {
            let spec = infra.train(run.train).unwrap();
            let targets = target_waypoints(&graph, spec.target);
            let shortest = k_shortest_paths(&graph, spec.origin, &targets, 1).unwrap();
            assert_eq!(run.waypoints, shortest[0]);
            let n = spec.steps_per_cell as i64;
            assert!(run.arrival() + n <= schedule.horizon);
        }
    }

    #[test]
    fn test_schedule_generation_is_deterministic() {
        let infra = desk_infra(3);
        let a = generate_schedule(&infra, None, 9).unwrap();
        let b = generate_schedule(&infra, None, 9).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn test_tiny_horizon_is_unschedulable() {
        let infra = desk_infra(0);
        assert!(matches!(
            generate_schedule(&infra, Some(3), 0),
            Err(ScheduleError::Unschedulable { .. })
        ));
    }

    #[test]
    fn test_earliest_offset_matches_direct_scan() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let cells: Vec<Cell> = (0..4).map(|i| Cell::new(0, i)).collect();
            let uses: Vec<(Cell, i64, i64)> = cells
                .iter()
                .enumerate()
                .map(|(i, &c)| (c, 2 * i as i64, 2 * (i as i64 + 1)))
                .collect();
            let mut reservations: HashMap<Cell, Vec<(i64, i64)>> = HashMap::new();
            for _ in 0..rng.gen_range(0..6) {
                let cell = cells[rng.gen_range(0..cells.len())];
                let s = rng.gen_range(0..20);
                let e = s + rng.gen_range(1..6);
                reservations.entry(cell).or_default().push((s, e));
            }
            let horizon = 100;
            let got = earliest_offset(&uses, &reservations, horizon, 8);
            let want = (0..=horizon - 8).find(|&t0| {
                uses.iter().all(|&(cell, s, e)| {
                    reservations
                        .get(&cell)
                        .into_iter()
                        .flatten()
                        .all(|&(rs, re)| t0 + e <= rs || re <= t0 + s)
                })
            });
            assert_eq!(got, want);
        }
    }

    #[test]
    fn test_conflict_detection_reports_overlaps() {
        let infra = desk_infra(1);
        let mut schedule = generate_schedule(&infra, None, 11).unwrap();
        // Clone the first run onto the second train's identity so they
        // collide on every cell.
        let mut dup = schedule.runs[0].clone();
        dup.train = schedule.runs[1].train;
        schedule.runs[1] = dup;
        let conflicts = verify_conflict_free(&schedule, &infra);
        assert!(!conflicts.is_empty());
        assert!(conflicts.iter().all(|c| c.overlap.0 < c.overlap.1));
    }
}
