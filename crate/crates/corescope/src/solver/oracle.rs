//! Brute-force enumeration oracle. Deliberately shares no search code with
//! the branch-and-bound solver: paths are enumerated with a worklist instead
//! of recursion, entry times are assigned value by value, and conflicts are
//! detected by scanning raw occupancy intervals. Exponential, so it refuses
//! instances whose search space estimate exceeds a hard cap.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::grid::{TrainId, Waypoint};
use crate::resched::{CostWeights, FullProblem};
use crate::schedule::TrainRun;

/// Product over trains of (paths x window size) above which the oracle
/// refuses to run.
const ESTIMATE_CAP: u128 = 10_000_000;

/// Hard stop on individual time assignments tried, in case the estimate was
/// optimistic. Hitting it aborts with `TooLarge` rather than returning a
/// possibly non-optimal answer.
const VISIT_CAP: u64 = 50_000_000;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("search space estimate {estimate} exceeds the oracle cap of {cap}")]
    TooLarge { estimate: u128, cap: u128 },
    #[error("no conflict-free assignment exists within the time windows")]
    Infeasible,
}

struct PathChoice {
    waypoints: Vec<Waypoint>,
    earliest: Vec<i64>,
    latest: Vec<i64>,
    deviation_cost: i64,
}

struct OracleTrain {
    id: TrainId,
    steps: i64,
    sched_arrival: i64,
    paths: Vec<PathChoice>,
}

struct Placed {
    path_idx: usize,
    /// (cell row, cell col, start, end) occupancy quadruples.
    intervals: Vec<(u32, u32, i64, i64)>,
}

struct Enumeration<'a> {
    trains: &'a [OracleTrain],
    lateness_weight: i64,
    visits: u64,
    aborted: bool,
    best_cost: i64,
    best_runs: Option<Vec<(usize, Vec<i64>)>>,
}

/// Exhaustively search the full assignment space and return the cheapest
/// conflict-free set of runs with its cost.
pub fn brute_force_oracle(
    problem: &FullProblem,
    weights: CostWeights,
) -> Result<(Vec<TrainRun>, i64), OracleError> {
    let mut trains = Vec::with_capacity(problem.trains.len());
    let mut estimate: u128 = 1;
    for tp in &problem.trains {
        let sched: BTreeSet<Waypoint> = tp.sched_waypoints.iter().copied().collect();
        let mut paths = Vec::new();
        for waypoints in all_paths(&tp.dag) {
            if !tp.pinned.iter().all(|(wp, _)| waypoints.contains(wp)) {
                continue;
            }
            let mut earliest = Vec::with_capacity(waypoints.len());
            let mut latest = Vec::with_capacity(waypoints.len());
            let mut ok = true;
            for &wp in &waypoints {
                match (tp.earliest_of(wp), tp.latest_of(wp)) {
                    (Some(e), Some(l)) if e <= l => {
                        earliest.push(e);
                        latest.push(l);
                    }
                    _ => {
                        ok = false;
                        break;
                    }
                }
            }
            if !ok {
                continue;
            }
            let deviation_cost = weights.deviation_penalty
                * waypoints.iter().filter(|wp| !sched.contains(wp)).count() as i64;
            paths.push(PathChoice {
                waypoints,
                earliest,
                latest,
                deviation_cost,
            });
        }
        if paths.is_empty() {
            return Err(OracleError::Infeasible);
        }
        let window = problem.max_window.max(0) as u128 + 1;
        estimate = estimate.saturating_mul(paths.len() as u128 * window);
        trains.push(OracleTrain {
            id: tp.train,
            steps: tp.steps_per_cell as i64,
            sched_arrival: tp.sched_arrival,
            paths,
        });
    }
    if estimate > ESTIMATE_CAP {
        return Err(OracleError::TooLarge {
            estimate,
            cap: ESTIMATE_CAP,
        });
    }

    let mut enumeration = Enumeration {
        trains: &trains,
        lateness_weight: weights.lateness_weight,
        visits: 0,
        aborted: false,
        best_cost: i64::MAX,
        best_runs: None,
    };
    let mut placed = Vec::new();
    enumeration.place_train(0, 0, &mut placed);
    if enumeration.aborted {
        return Err(OracleError::TooLarge {
            estimate: enumeration.visits as u128,
            cap: VISIT_CAP as u128,
        });
    }
    match enumeration.best_runs {
        Some(assignment) => {
            let runs = assignment
                .into_iter()
                .enumerate()
                .map(|(i, (path_idx, entries))| TrainRun {
                    train: trains[i].id,
                    waypoints: trains[i].paths[path_idx].waypoints.clone(),
                    entries,
                })
                .collect();
            Ok((runs, enumeration.best_cost))
        }
        None => Err(OracleError::Infeasible),
    }
}

/// Every source-to-sink path, grown breadth-first from the source.
fn all_paths(dag: &crate::routing::RouteDag) -> Vec<Vec<Waypoint>> {
    let adj = dag.adjacency();
    let sinks: BTreeSet<Waypoint> = dag.sinks.iter().copied().collect();
    let mut complete = Vec::new();
    let mut frontier = vec![vec![dag.source]];
    while let Some(path) = frontier.pop() {
        let last = *path.last().unwrap();
        if sinks.contains(&last) {
            complete.push(path);
            continue;
        }
        match adj.get(&last) {
            Some(nexts) => {
                for &next in nexts.iter().rev() {
                    let mut grown = path.clone();
                    grown.push(next);
                    frontier.push(grown);
                }
            }
            None => {}
        }
    }
    complete
}

impl<'a> Enumeration<'a> {
    fn place_train(&mut self, idx: usize, acc_cost: i64, placed: &mut Vec<Placed>) {
        if self.aborted || acc_cost >= self.best_cost {
            return;
        }
        if idx == self.trains.len() {
            self.best_cost = acc_cost;
            self.best_runs = Some(
                placed
                    .iter()
                    .map(|p| {
                        let entries = p.intervals.iter().map(|&(_, _, s, _)| s).collect();
                        (p.path_idx, entries)
                    })
                    .collect(),
            );
            return;
        }
        let train = &self.trains[idx];
        for (path_idx, path) in train.paths.iter().enumerate() {
            let mut times = vec![0i64; path.waypoints.len()];
            self.assign_times(idx, path_idx, path, 0, &mut times, acc_cost, placed);
            if self.aborted {
                return;
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn assign_times(
        &mut self,
        idx: usize,
        path_idx: usize,
        path: &PathChoice,
        pos: usize,
        times: &mut Vec<i64>,
        acc_cost: i64,
        placed: &mut Vec<Placed>,
    ) {
        if self.aborted {
            return;
        }
        let train = &self.trains[idx];
        let m = path.waypoints.len();
        if pos == m {
            let arrival = times[m - 1];
            let cost = path.deviation_cost
                + self.lateness_weight * (arrival - train.sched_arrival).max(0);
            if acc_cost + cost >= self.best_cost {
                return;
            }
            let intervals = intervals_of(path, times, train.steps);
            if conflicts_any(&intervals, placed) {
                return;
            }
            placed.push(Placed { path_idx, intervals });
            self.place_train(idx + 1, acc_cost + cost, placed);
            placed.pop();
            return;
        }
        let low = if pos == 0 {
            path.earliest[0]
        } else {
            path.earliest[pos].max(times[pos - 1] + train.steps)
        };
        for t in low..=path.latest[pos] {
            self.visits += 1;
            if self.visits > VISIT_CAP {
                self.aborted = true;
                return;
            }
            times[pos] = t;
            let floor_arrival = t + (m - 1 - pos) as i64 * train.steps;
            let bound = acc_cost
                + path.deviation_cost
                + self.lateness_weight * (floor_arrival - train.sched_arrival).max(0);
            if bound >= self.best_cost {
                return;
            }
            self.assign_times(idx, path_idx, path, pos + 1, times, acc_cost, placed);
            if self.aborted {
                return;
            }
        }
    }
}

fn intervals_of(path: &PathChoice, times: &[i64], steps: i64) -> Vec<(u32, u32, i64, i64)> {
    let m = path.waypoints.len();
    (0..m)
        .map(|j| {
            let cell = path.waypoints[j].cell;
            let end = if j + 1 < m { times[j + 1] } else { times[j] + steps };
            (cell.row, cell.col, times[j], end)
        })
        .collect()
}

fn conflicts_any(candidate: &[(u32, u32, i64, i64)], placed: &[Placed]) -> bool {
    for other in placed {
        for &(r1, c1, s1, e1) in candidate {
            for &(r2, c2, s2, e2) in &other.intervals {
                if r1 == r2 && c1 == c2 && s1.max(s2) < e1.min(e2) {
                    return true;
                }
            }
        }
    }
    false
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Heading;
    use crate::solver::fixtures::{chain_train, funnel_three_trains, problem_of, wp};
    use crate::solver::{solve, Budget};

    #[test]
    fn test_oracle_matches_branch_and_bound_on_funnel() {
        let problem = funnel_three_trains();
        let (_, oracle_cost) = brute_force_oracle(&problem, CostWeights::default()).unwrap();
        let sol = solve(&problem, CostWeights::default(), Budget::default(), 0).unwrap();
        assert_eq!(oracle_cost, 2);
        assert_eq!(sol.cost, oracle_cost);
    }

    #[test]
    fn test_oracle_lone_train_is_free() {
        let path = [
            wp(0, 0, Heading::East),
            wp(0, 1, Heading::East),
            wp(0, 2, Heading::East),
        ];
        let problem = problem_of(vec![chain_train(0, 1, &path, 5, 10, 7)], 10);
        let (runs, cost) = brute_force_oracle(&problem, CostWeights::default()).unwrap();
        assert_eq!(cost, 0);
        assert_eq!(runs[0].entries, vec![5, 6, 7]);
    }

    #[test]
    fn test_oracle_permits_head_on_swap() {
        let a = chain_train(
            0,
            1,
            &[wp(0, 0, Heading::East), wp(0, 1, Heading::East)],
            0,
            5,
            1,
        );
        let b = chain_train(
            1,
            1,
            &[wp(0, 1, Heading::West), wp(0, 0, Heading::West)],
            0,
            5,
            1,
        );
        let problem = problem_of(vec![a, b], 5);
        let (_, oracle_cost) = brute_force_oracle(&problem, CostWeights::default()).unwrap();
        let sol = solve(&problem, CostWeights::default(), Budget::default(), 0).unwrap();
        assert_eq!(oracle_cost, 0);
        assert_eq!(sol.cost, 0);
    }

    #[test]
    fn test_oracle_refuses_huge_window() {
        let path = [wp(0, 0, Heading::East), wp(0, 1, Heading::East)];
        let a = chain_train(0, 1, &path, 0, 1_000_000_000, 1);
        let b = chain_train(1, 1, &[wp(1, 0, Heading::East), wp(1, 1, Heading::East)], 0, 1_000_000_000, 1);
        let problem = problem_of(vec![a, b], 1_000_000_000);
        let err = brute_force_oracle(&problem, CostWeights::default()).unwrap_err();
        assert!(matches!(err, OracleError::TooLarge { .. }));
    }

    #[test]
    fn test_oracle_detects_infeasible_window() {
        let path = [wp(0, 0, Heading::East), wp(0, 1, Heading::East)];
        let mut train = chain_train(0, 5, &path, 0, 0, 5);
        train.earliest = vec![(path[0], 0), (path[1], 0)];
        train.latest = vec![(path[0], 5), (path[1], 3)];
        let problem = problem_of(vec![train], 5);
        let err = brute_force_oracle(&problem, CostWeights::default()).unwrap_err();
        assert!(matches!(err, OracleError::Infeasible));
    }

    #[test]
    fn test_oracle_prefers_cheap_deviation_over_long_wait() {
        use crate::grid::TrainId;
        use crate::resched::TrainProblem;
        use crate::routing::RouteDag;

        let w1 = wp(5, 1, Heading::North);
        let w2 = wp(4, 1, Heading::North);
        let mut holder = chain_train(0, 1, &[w1, w2], 0, 0, 10);
        holder.earliest = vec![(w1, 0), (w2, 10)];
        holder.earliest.sort_by_key(|&(w, _)| w);
        holder.latest = holder.earliest.clone();
        holder.pinned = vec![(w1, 0), (w2, 10)];
        holder.sched_arrival = 10;

        let s = wp(5, 0, Heading::East);
        let a = wp(5, 1, Heading::East);
        let b = wp(6, 1, Heading::North);
        let t = wp(5, 2, Heading::East);
        let mut edges = vec![(s, a), (s, b), (a, t), (b, t)];
        edges.sort();
        let mut earliest = vec![(s, 0), (a, 1), (b, 1), (t, 2)];
        earliest.sort_by_key(|&(w, _)| w);
        let latest: Vec<_> = earliest.iter().map(|&(w, e)| (w, e + 5)).collect();
        let diamond = TrainProblem {
            train: TrainId(1),
            steps_per_cell: 1,
            dag: RouteDag {
                train: TrainId(1),
                source: s,
                sinks: vec![t],
                edges,
            },
            earliest,
            latest,
            pinned: Vec::new(),
            sched_waypoints: vec![s, a, t],
            sched_arrival: 2,
        };

        let problem = problem_of(vec![holder, diamond], 5);
        let (runs, cost) = brute_force_oracle(&problem, CostWeights::default()).unwrap();
        assert_eq!(cost, 30);
        assert_eq!(runs[1].waypoints, vec![s, b, t]);
    }
}
