//! Branch-and-bound re-scheduling solver. Outer decisions assign one route
//! per train from its route DAG; inner decisions order pairs of trains that
//! collide on a cell. A fixpoint over the difference constraints (chain
//! spacing, pins, precedences) yields per-waypoint lower bounds; because the
//! objective is monotone in entry times, the lower-bound assignment is the
//! cheapest completion of a conflict-free leaf.

use std::collections::HashMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, Waypoint};
use crate::resched::{CostWeights, FullProblem};
use crate::schedule::TrainRun;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("no conflict-free assignment exists within the time windows")]
    Infeasible,
    #[error("budget of {budget} node expansions exhausted without finding any solution")]
    BudgetExhausted { budget: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Budget {
    pub max_nodes: u64,
}

impl Default for Budget {
    fn default() -> Self {
        Budget { max_nodes: 500_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveStats {
    /// Branching decisions taken: route choices with more than one option
    /// and conflict orderings. A fully pinned problem expands zero nodes.
    pub nodes_expanded: u64,
    /// (nodes_expanded, cost) at each incumbent improvement; costs are
    /// strictly decreasing.
    pub incumbent_trace: Vec<(u64, i64)>,
    /// False when the budget ran out before the search space was exhausted.
    pub proved_optimal: bool,
    pub wall_seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Solution {
    /// One run per train, in train id order.
    pub runs: Vec<TrainRun>,
    pub cost: i64,
    pub stats: SolveStats,
}

/// One candidate route of one train, with its static data resolved.
struct Route {
    waypoints: Vec<Waypoint>,
    earliest: Vec<i64>,
    latest: Vec<i64>,
    deviation_cost: i64,
    /// Cost of this route if the train ran alone: deviation plus lateness at
    /// the unimpeded earliest arrival.
    solo_cost: i64,
}

struct TrainCtx {
    steps: i64,
    sched_arrival: i64,
    routes: Vec<Route>,
    min_solo_cost: i64,
}

/// Exit-of-`before` must not exceed entry-of-`after`:
/// lo[after] >= exit(before).
#[derive(Clone, Copy)]
struct Precedence {
    before: (usize, usize),
    after: (usize, usize),
}

struct Search<'a> {
    trains: &'a [TrainCtx],
    weights: CostWeights,
    budget: u64,
    nodes_expanded: u64,
    aborted: bool,
    incumbent: Option<(i64, Vec<(usize, Vec<i64>)>)>,
    trace: Vec<(u64, i64)>,
}

/// Solve a (possibly scoped) re-scheduling problem exactly. The search is
/// fully deterministic; `_seed` is accepted for interface symmetry with the
/// generators and ignored.
pub fn solve(
    problem: &FullProblem,
    weights: CostWeights,
    budget: Budget,
    _seed: u64,
) -> Result<Solution, SolveError> {
    let start = Instant::now();
    let trains: Vec<TrainCtx> = problem
        .trains
        .iter()
        .map(|tp| {
            let sched: std::collections::BTreeSet<Waypoint> =
                tp.sched_waypoints.iter().copied().collect();
            let mut routes: Vec<Route> = enumerate_routes(&tp.dag)
                .into_iter()
                .filter(|path| tp.pinned.iter().all(|(wp, _)| path.contains(wp)))
                .filter_map(|path| {
                    let earliest: Vec<i64> = path
                        .iter()
                        .map(|&wp| tp.earliest_of(wp))
                        .collect::<Option<_>>()?;
                    let latest: Vec<i64> = path
                        .iter()
                        .map(|&wp| tp.latest_of(wp))
                        .collect::<Option<_>>()?;
                    let n = tp.steps_per_cell as i64;
                    let mut t = earliest[0];
                    for j in 0..path.len() {
                        if j > 0 {
                            t = (t + n).max(earliest[j]);
                        }
                        if t > latest[j] {
                            return None;
                        }
                    }
                    let deviation_cost = weights.deviation_penalty
                        * path.iter().filter(|wp| !sched.contains(wp)).count() as i64;
                    let solo_cost = deviation_cost
                        + weights.lateness_weight * (t - tp.sched_arrival).max(0);
                    Some(Route {
                        waypoints: path,
                        earliest,
                        latest,
                        deviation_cost,
                        solo_cost,
                    })
                })
                .collect();
            routes.sort_by(|a, b| {
                (a.solo_cost, a.deviation_cost, &a.waypoints)
                    .cmp(&(b.solo_cost, b.deviation_cost, &b.waypoints))
            });
            let min_solo_cost = routes.iter().map(|r| r.solo_cost).min().unwrap_or(i64::MAX);
            TrainCtx {
                steps: tp.steps_per_cell as i64,
                sched_arrival: tp.sched_arrival,
                routes,
                min_solo_cost,
            }
        })
        .collect();

    if trains.iter().any(|t| t.routes.is_empty()) {
        return Err(SolveError::Infeasible);
    }

    let mut search = Search {
        trains: &trains,
        weights,
        budget: budget.max_nodes,
        nodes_expanded: 0,
        aborted: false,
        incumbent: None,
        trace: Vec::new(),
    };
    let mut chosen: Vec<usize> = Vec::with_capacity(trains.len());
    search.assign_routes(&mut chosen);

    let stats_proved = !search.aborted;
    match search.incumbent {
        Some((cost, assignment)) => {
            let runs = assignment
                .iter()
                .enumerate()
                .map(|(i, (route_idx, entries))| TrainRun {
                    train: problem.trains[i].train,
                    waypoints: trains[i].routes[*route_idx].waypoints.clone(),
                    entries: entries.clone(),
                })
                .collect();
            Ok(Solution {
                runs,
                cost,
                stats: SolveStats {
                    nodes_expanded: search.nodes_expanded,
                    incumbent_trace: search.trace,
                    proved_optimal: stats_proved,
                    wall_seconds: start.elapsed().as_secs_f64(),
                },
            })
        }
        None if search.aborted => Err(SolveError::BudgetExhausted {
            budget: budget.max_nodes,
        }),
        None => Err(SolveError::Infeasible),
    }
}

/// All source-to-sink paths of the DAG in deterministic order.
fn enumerate_routes(dag: &crate::routing::RouteDag) -> Vec<Vec<Waypoint>> {
    let adj = dag.adjacency();
    let sinks: std::collections::BTreeSet<Waypoint> = dag.sinks.iter().copied().collect();
    let mut out = Vec::new();
    let mut stack = vec![dag.source];
    fn rec(
        adj: &std::collections::BTreeMap<Waypoint, Vec<Waypoint>>,
        sinks: &std::collections::BTreeSet<Waypoint>,
        stack: &mut Vec<Waypoint>,
        out: &mut Vec<Vec<Waypoint>>,
    ) {
        let cur = *stack.last().unwrap();
        if sinks.contains(&cur) {
            out.push(stack.clone());
            return;
        }
        for &next in adj.get(&cur).into_iter().flatten() {
            stack.push(next);
            rec(adj, sinks, stack, out);
            stack.pop();
        }
    }
    rec(&adj, &sinks, &mut stack, &mut out);
    out
}

impl<'a> Search<'a> {
    fn out_of_budget(&mut self) -> bool {
        if self.nodes_expanded >= self.budget {
            self.aborted = true;
        }
        self.aborted
    }

    fn incumbent_cost(&self) -> i64 {
        self.incumbent.as_ref().map(|(c, _)| *c).unwrap_or(i64::MAX)
    }

    /// Outer phase: pick a route for each train in id order.
    fn assign_routes(&mut self, chosen: &mut Vec<usize>) {
        if self.out_of_budget() {
            return;
        }
        let i = chosen.len();
        if i == self.trains.len() {
            self.resolve_conflicts(chosen, &mut Vec::new());
            return;
        }
        let remaining_lb: i64 = self.trains[i + 1..].iter().map(|t| t.min_solo_cost).sum();
        let n_routes = self.trains[i].routes.len();
        if n_routes > 1 {
            self.nodes_expanded += 1;
        }
        for r in 0..n_routes {
            chosen.push(r);
            let decided_lb: i64 = chosen
                .iter()
                .enumerate()
                .map(|(t, &route)| self.trains[t].routes[route].solo_cost)
                .sum();
            if decided_lb + remaining_lb < self.incumbent_cost() {
                self.assign_routes(chosen);
            }
            chosen.pop();
            if self.aborted {
                return;
            }
        }
    }

    /// Inner phase: propagate bounds, order one conflict, recurse.
    fn resolve_conflicts(&mut self, chosen: &[usize], precedences: &mut Vec<Precedence>) {
        if self.out_of_budget() {
            return;
        }
        let Some(lo) = self.propagate(chosen, precedences) else {
            return;
        };

        let mut cost = 0;
        for (i, &r) in chosen.iter().enumerate() {
            let route = &self.trains[i].routes[r];
            let arrival = *lo[i].last().unwrap();
            cost += route.deviation_cost
                + self.weights.lateness_weight * (arrival - self.trains[i].sched_arrival).max(0);
        }
        if cost >= self.incumbent_cost() {
            return;
        }

        match self.first_conflict(chosen, &lo) {
            None => {
                self.trace.push((self.nodes_expanded, cost));
                let assignment = chosen
                    .iter()
                    .enumerate()
                    .map(|(i, &r)| (r, lo[i].clone()))
                    .collect();
                self.incumbent = Some((cost, assignment));
            }
            Some((a, b)) => {
                self.nodes_expanded += 1;
                let first_then = [
                    Precedence { before: a, after: b },
                    Precedence { before: b, after: a },
                ];
                for prec in first_then {
                    precedences.push(prec);
                    self.resolve_conflicts(chosen, precedences);
                    precedences.pop();
                    if self.aborted {
                        return;
                    }
                }
            }
        }
    }

    /// Fixpoint of the lower bounds under chain, pin, and precedence
    /// constraints. None when some bound exceeds its latest allowed entry.
    fn propagate(&self, chosen: &[usize], precedences: &[Precedence]) -> Option<Vec<Vec<i64>>> {
        let mut lo: Vec<Vec<i64>> = chosen
            .iter()
            .enumerate()
            .map(|(i, &r)| self.trains[i].routes[r].earliest.clone())
            .collect();
        loop {
            let mut changed = false;
            for (i, &r) in chosen.iter().enumerate() {
                let n = self.trains[i].steps;
                let route = &self.trains[i].routes[r];
                for j in 1..lo[i].len() {
                    let via = lo[i][j - 1] + n;
                    if via > lo[i][j] {
                        if via > route.latest[j] {
                            return None;
                        }
                        lo[i][j] = via;
                        changed = true;
                    }
                }
            }
            for prec in precedences {
                let (bi, bj) = prec.before;
                let (ai, aj) = prec.after;
                let exit = if bj + 1 < lo[bi].len() {
                    lo[bi][bj + 1]
                } else {
                    lo[bi][bj] + self.trains[bi].steps
                };
                if exit > lo[ai][aj] {
                    let route = &self.trains[ai].routes[chosen[ai]];
                    if exit > route.latest[aj] {
                        return None;
                    }
                    lo[ai][aj] = exit;
                    changed = true;
                }
            }
            if !changed {
                return Some(lo);
            }
        }
    }

    /// The earliest conflict under the lower-bound times: two trains holding
    /// one cell at overlapping intervals. Ties break on cell then train ids,
    /// so branching is deterministic.
    fn first_conflict(
        &self,
        chosen: &[usize],
        lo: &[Vec<i64>],
    ) -> Option<((usize, usize), (usize, usize))> {
        let mut by_cell: HashMap<Cell, Vec<(i64, i64, usize, usize)>> = HashMap::new();
        for (i, &r) in chosen.iter().enumerate() {
            let route = &self.trains[i].routes[r];
            let n = self.trains[i].steps;
            for j in 0..route.waypoints.len() {
                let s = lo[i][j];
                let e = if j + 1 < route.waypoints.len() {
                    lo[i][j + 1]
                } else {
                    lo[i][j] + n
                };
                by_cell
                    .entry(route.waypoints[j].cell)
                    .or_default()
                    .push((s, e, i, j));
            }
        }
        let mut best: Option<(i64, Cell, usize, usize, (usize, usize), (usize, usize))> = None;
        for (cell, uses) in &by_cell {
            for x in 0..uses.len() {
                for y in x + 1..uses.len() {
                    let (s1, e1, i1, j1) = uses[x];
                    let (s2, e2, i2, j2) = uses[y];
                    if i1 == i2 {
                        continue;
                    }
                    let overlap = s1.max(s2);
                    if overlap < e1.min(e2) {
                        let (first, second) = if (s1, i1, j1) <= (s2, i2, j2) {
                            ((i1, j1), (i2, j2))
                        } else {
                            ((i2, j2), (i1, j1))
                        };
                        let key = (overlap, *cell, first.0.min(second.0), first.0.max(second.0));
                        let better = match &best {
                            None => true,
                            Some((t, c, a, b, _, _)) => key < (*t, *c, *a, *b),
                        };
                        if better {
                            best = Some((key.0, key.1, key.2, key.3, first, second));
                        }
                    }
                }
            }
        }
        best.map(|(_, _, _, _, first, second)| (first, second))
    }
}
