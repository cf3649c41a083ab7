//! Route search on the topology graph: k shortest loopless paths per train
//! and the union route DAG built from them.

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::grid::{Cell, Infrastructure, TopologyGraph, TrainId, Waypoint};

#[derive(Debug, Error)]
pub enum RouteError {
    #[error("no path from {origin:?} to any target waypoint")]
    NoPath { origin: Waypoint },
}

/// Union of a train's k shortest paths, restricted to combinations that keep
/// the edge set acyclic. Edges are kept sorted so serialized DAGs are
/// canonical.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteDag {
    pub train: TrainId,
    pub source: Waypoint,
    pub sinks: Vec<Waypoint>,
    pub edges: Vec<(Waypoint, Waypoint)>,
}

impl RouteDag {
    pub fn nodes(&self) -> BTreeSet<Waypoint> {
        let mut nodes = BTreeSet::new();
        for &(a, b) in &self.edges {
            nodes.insert(a);
            nodes.insert(b);
        }
        nodes.insert(self.source);
        nodes
    }

    pub fn adjacency(&self) -> BTreeMap<Waypoint, Vec<Waypoint>> {
        let mut adj: BTreeMap<Waypoint, Vec<Waypoint>> = BTreeMap::new();
        for &(a, b) in &self.edges {
            adj.entry(a).or_default().push(b);
        }
        adj
    }

    /// All source-to-sink paths in deterministic (lexicographic) order.
    pub fn enumerate_paths(&self) -> Vec<Vec<Waypoint>> {
        let adj = self.adjacency();
        let sinks: BTreeSet<Waypoint> = self.sinks.iter().copied().collect();
        let mut out = Vec::new();
        let mut stack = vec![self.source];
        fn rec(
            adj: &BTreeMap<Waypoint, Vec<Waypoint>>,
            sinks: &BTreeSet<Waypoint>,
            stack: &mut Vec<Waypoint>,
            out: &mut Vec<Vec<Waypoint>>,
        ) {
            let cur = *stack.last().unwrap();
            if sinks.contains(&cur) {
                out.push(stack.clone());
                return;
            }
            if let Some(nexts) = adj.get(&cur) {
                for &n in nexts {
                    stack.push(n);
                    rec(adj, sinks, stack, out);
                    stack.pop();
                }
            }
        }
        rec(&adj, &sinks, &mut stack, &mut out);
        out
    }
}

/// Multi-source backward BFS: hop distance from every node to the nearest
/// target, honoring banned nodes and edges.
fn dist_to_targets(
    graph: &TopologyGraph,
    targets: &BTreeSet<Waypoint>,
    banned_nodes: &HashSet<Waypoint>,
    banned_edges: &HashSet<(Waypoint, Waypoint)>,
) -> BTreeMap<Waypoint, u32> {
    let mut dist = BTreeMap::new();
    let mut queue = VecDeque::new();
    for &t in targets {
        if graph.contains(t) && !banned_nodes.contains(&t) {
            dist.insert(t, 0);
            queue.push_back(t);
        }
    }
    while let Some(wp) = queue.pop_front() {
        let d = dist[&wp];
        for pred in graph.predecessors(wp) {
            if banned_nodes.contains(&pred) || banned_edges.contains(&(pred, wp)) {
                continue;
            }
            if !dist.contains_key(&pred) {
                dist.insert(pred, d + 1);
                queue.push_back(pred);
            }
        }
    }
    dist
}

/// The lexicographically smallest shortest path from `source` into `targets`,
/// if one exists under the bans.
fn lex_shortest(
    graph: &TopologyGraph,
    source: Waypoint,
    targets: &BTreeSet<Waypoint>,
    banned_nodes: &HashSet<Waypoint>,
    banned_edges: &HashSet<(Waypoint, Waypoint)>,
) -> Option<Vec<Waypoint>> {
    if banned_nodes.contains(&source) {
        return None;
    }
    let dist = dist_to_targets(graph, targets, banned_nodes, banned_edges);
    let mut cur = source;
    let mut d = *dist.get(&source)?;
    let mut path = vec![source];
    while d > 0 {
        let next = graph
            .successors(cur)
            .filter(|n| {
                !banned_nodes.contains(n)
                    && !banned_edges.contains(&(cur, *n))
                    && dist.get(n) == Some(&(d - 1))
            })
            .min()?;
        path.push(next);
        cur = next;
        d -= 1;
    }
    Some(path)
}

/// Yen's algorithm for the k shortest loopless paths, with deterministic
/// lexicographic tie-breaking on both path choice and candidate order.
/// Returns between 1 and k paths, sorted by (length, lexicographic order).
pub fn k_shortest_paths(
    graph: &TopologyGraph,
    source: Waypoint,
    targets: &BTreeSet<Waypoint>,
    k: usize,
) -> Result<Vec<Vec<Waypoint>>, RouteError> {
    assert!(k >= 1, "k must be at least 1");
    let no_nodes = HashSet::new();
    let no_edges = HashSet::new();
    let first = lex_shortest(graph, source, targets, &no_nodes, &no_edges)
        .ok_or(RouteError::NoPath { origin: source })?;

    let mut accepted: Vec<Vec<Waypoint>> = vec![first];
    let mut candidates: BTreeSet<(usize, Vec<Waypoint>)> = BTreeSet::new();

    while accepted.len() < k {
        let last = accepted.last().unwrap().clone();
        for spur_idx in 0..last.len().saturating_sub(1) {
            let root = &last[..=spur_idx];
            let spur = last[spur_idx];
            let mut banned_edges = HashSet::new();
            for p in &accepted {
                if p.len() > spur_idx + 1 && p[..=spur_idx] == *root {
                    banned_edges.insert((p[spur_idx], p[spur_idx + 1]));
                }
            }
            let banned_nodes: HashSet<Waypoint> = root[..spur_idx].iter().copied().collect();
            if let Some(spur_path) = lex_shortest(graph, spur, targets, &banned_nodes, &banned_edges)
            {
                let mut full = root[..spur_idx].to_vec();
                full.extend(spur_path);
                if !accepted.contains(&full) {
                    candidates.insert((full.len(), full));
                }
            }
        }
        match candidates.pop_first() {
            Some((_, path)) => accepted.push(path),
            None => break,
        }
    }
    Ok(accepted)
}

/// Waypoints of the train's target cell that exist in the graph.
pub fn target_waypoints(graph: &TopologyGraph, target: Cell) -> BTreeSet<Waypoint> {
    crate::grid::Heading::ALL
        .into_iter()
        .map(|h| Waypoint::new(target, h))
        .filter(|&wp| graph.contains(wp))
        .collect()
}

/// Build the route DAG of a train from its k shortest paths. Paths whose
/// edges would make the union cyclic are skipped, so the result is always a
/// DAG containing at least the shortest path.
pub fn route_dag_of(
    infra: &Infrastructure,
    graph: &TopologyGraph,
    train: TrainId,
    k: usize,
) -> Result<RouteDag, RouteError> {
    let spec = infra
        .train(train)
        .unwrap_or_else(|| panic!("unknown train {train}"));
    let targets = target_waypoints(graph, spec.target);
    let paths = k_shortest_paths(graph, spec.origin, &targets, k)?;

    let mut edges: BTreeSet<(Waypoint, Waypoint)> = BTreeSet::new();
    let mut sinks: BTreeSet<Waypoint> = BTreeSet::new();
    for path in &paths {
        let new_edges: Vec<_> = path.windows(2).map(|w| (w[0], w[1])).collect();
        let mut trial = edges.clone();
        trial.extend(new_edges.iter().copied());
        if is_acyclic(&trial) {
            edges = trial;
            sinks.insert(*path.last().unwrap());
        }
    }
    Ok(RouteDag {
        train,
        source: spec.origin,
        sinks: sinks.into_iter().collect(),
        edges: edges.into_iter().collect(),
    })
}

fn is_acyclic(edges: &BTreeSet<(Waypoint, Waypoint)>) -> bool {
    let mut adj: BTreeMap<Waypoint, Vec<Waypoint>> = BTreeMap::new();
    let mut indegree: BTreeMap<Waypoint, usize> = BTreeMap::new();
    for &(a, b) in edges {
        adj.entry(a).or_default().push(b);
        indegree.entry(a).or_insert(0);
        *indegree.entry(b).or_insert(0) += 1;
    }
    let mut queue: VecDeque<Waypoint> = indegree
        .iter()
        .filter(|&(_, &d)| d == 0)
        .map(|(&n, _)| n)
        .collect();
    let mut seen = 0;
    while let Some(n) = queue.pop_front() {
        seen += 1;
        for &m in adj.get(&n).into_iter().flatten() {
            let d = indegree.get_mut(&m).unwrap();
            *d -= 1;
            if *d == 0 {
                queue.push_back(m);
            }
        }
    }
    seen == indegree.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{generate_infrastructure, to_graph, InfraParams};

    fn small_infra() -> Infrastructure {
        generate_infrastructure(
            &InfraParams {
                max_num_cities: 2,
                num_agents: 4,
                ..Default::default()
            },
            3,
        )
        .unwrap()
    }

    /// Every waypoint-simple path from source into targets, by bounded DFS.
    fn all_simple_paths(
        graph: &TopologyGraph,
        source: Waypoint,
        targets: &BTreeSet<Waypoint>,
        max_len: usize,
    ) -> Vec<Vec<Waypoint>> {
        let mut out = Vec::new();
        let mut stack = vec![source];
        let mut on_path: HashSet<Waypoint> = HashSet::new();
        on_path.insert(source);
        fn rec(
            graph: &TopologyGraph,
            targets: &BTreeSet<Waypoint>,
            max_len: usize,
            stack: &mut Vec<Waypoint>,
            on_path: &mut HashSet<Waypoint>,
            out: &mut Vec<Vec<Waypoint>>,
        ) {
            let cur = *stack.last().unwrap();
            if targets.contains(&cur) {
                out.push(stack.clone());
                return;
            }
            if stack.len() >= max_len {
                return;
            }
            for next in graph.successors(cur) {
                if on_path.insert(next) {
                    stack.push(next);
                    rec(graph, targets, max_len, stack, on_path, out);
                    stack.pop();
                    on_path.remove(&next);
                }
            }
        }
        rec(graph, targets, max_len, &mut stack, &mut on_path, &mut out);
        out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        out
    }

    #[test]
    fn test_yen_matches_exhaustive_enumeration() {
        let infra = small_infra();
        let graph = to_graph(&infra);
        for train in &infra.trains {
            let targets = target_waypoints(&graph, train.target);
            let expected = all_simple_paths(&graph, train.origin, &targets, 200);
            let got = k_shortest_paths(&graph, train.origin, &targets, 10).unwrap();
            let take = expected.len().min(10);
            assert_eq!(got.len(), take, "train {}", train.id);
            assert_eq!(got, expected[..take].to_vec(), "train {}", train.id);
        }
    }

    #[test]
    fn test_first_path_is_lexicographically_smallest_shortest() {
        let infra = small_infra();
        let graph = to_graph(&infra);
        let train = &infra.trains[0];
        let targets = target_waypoints(&graph, train.target);
        let paths = k_shortest_paths(&graph, train.origin, &targets, 3).unwrap();
        let shortest_len = paths[0].len();
        for p in &paths[1..] {
            assert!((p.len(), p) > (shortest_len, &paths[0]));
        }
    }

    #[test]
    fn test_no_path_is_an_error() {
        let infra = small_infra();
        let graph = to_graph(&infra);
        let train = &infra.trains[0];
        let unreachable = BTreeSet::new();
        assert!(matches!(
            k_shortest_paths(&graph, train.origin, &unreachable, 5),
            Err(RouteError::NoPath { .. })
        ));
    }

    #[test]
    fn test_route_dag_contains_shortest_path_and_is_acyclic() {
        let infra = small_infra();
        let graph = to_graph(&infra);
        for train in &infra.trains {
            let dag = route_dag_of(&infra, &graph, train.id, 10).unwrap();
            let targets = target_waypoints(&graph, train.target);
            let shortest = k_shortest_paths(&graph, train.origin, &targets, 1).unwrap();
            for w in shortest[0].windows(2) {
                assert!(dag.edges.contains(&(w[0], w[1])));
            }
            let edge_set: BTreeSet<_> = dag.edges.iter().copied().collect();
            assert!(is_acyclic(&edge_set));
            assert!(!dag.enumerate_paths().is_empty());
            for path in dag.enumerate_paths() {
                assert_eq!(path[0], dag.source);
                assert_eq!(path[0].cell, train.origin.cell);
                assert_eq!(path.last().unwrap().cell, train.target);
            }
        }
    }

    #[test]
    fn test_yen_is_deterministic() {
        let infra = small_infra();
        let graph = to_graph(&infra);
        let train = &infra.trains[1];
        let targets = target_waypoints(&graph, train.target);
        let a = k_shortest_paths(&graph, train.origin, &targets, 10).unwrap();
        let b = k_shortest_paths(&graph, train.origin, &targets, 10).unwrap();
        assert_eq!(a, b);
    }
}
