//! Random infrastructure generation: city placement, corridor routing,
//! and train endpoint assignment.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::graph::{check_path_consistency, to_graph};
use super::{
    Cell, CellType, City, GridError, Heading, Infrastructure, TrackKind, TrainId, TrainSpec,
    Waypoint,
};

/// Interior length of each parallel rail segment inside a city.
const RAIL_INTERIOR_LEN: u32 = 4;
const MAX_LAYOUT_ATTEMPTS: u32 = 24;
const CITY_PLACE_TRIES: u32 = 200;
const TRAIN_PLACE_TRIES: u32 = 40;
const TURN_PENALTY: u32 = 2;

/// Distribution over `steps_per_cell` values; a train drawing `n` advances
/// one cell every `n` time steps.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedDistribution(pub Vec<(u32, f64)>);

impl Default for SpeedDistribution {
    fn default() -> Self {
        SpeedDistribution(vec![(1, 0.25), (2, 0.25), (3, 0.25), (4, 0.25)])
    }
}

impl SpeedDistribution {
    fn draw(&self, rng: &mut ChaCha8Rng) -> u32 {
        let total: f64 = self.0.iter().map(|&(_, w)| w).sum();
        if total <= 0.0 || self.0.is_empty() {
            return 1;
        }
        let mut r = rng.gen::<f64>() * total;
        for &(steps, w) in &self.0 {
            r -= w;
            if r <= 0.0 {
                return steps.max(1);
            }
        }
        self.0.last().unwrap().0.max(1)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InfraParams {
    pub width: u32,
    pub height: u32,
    pub max_num_cities: u32,
    pub grid_mode: bool,
    pub max_rails_between_cities: u32,
    pub max_rails_in_city: u32,
    pub num_agents: u32,
    pub speeds: SpeedDistribution,
}

impl Default for InfraParams {
    fn default() -> Self {
        InfraParams {
            width: 40,
            height: 40,
            max_num_cities: 4,
            grid_mode: false,
            max_rails_between_cities: 1,
            max_rails_in_city: 2,
            num_agents: 8,
            speeds: SpeedDistribution::default(),
        }
    }
}

impl InfraParams {
    fn rails_per_city(&self) -> u32 {
        self.max_rails_in_city.clamp(1, 3)
    }
}

/// One city footprint before it is stamped onto the grid.
struct CityPlan {
    pivot_row: u32,
    col_start: u32,
    rails: u32,
}

impl CityPlan {
    fn col_end(&self) -> u32 {
        self.col_start + RAIL_INTERIOR_LEN + 1
    }

    fn bounds(&self) -> (Cell, Cell) {
        let (r0, r1) = match self.rails {
            1 => (self.pivot_row, self.pivot_row),
            2 => (self.pivot_row - 1, self.pivot_row + 1),
            _ => (self.pivot_row - 1, self.pivot_row + 2),
        };
        let east = if self.rails == 3 {
            self.col_end() + 2
        } else {
            self.col_end() + 1
        };
        (Cell::new(r0, self.col_start - 1), Cell::new(r1, east))
    }

    fn port_west(&self) -> Cell {
        Cell::new(self.pivot_row, self.col_start - 1)
    }

    fn port_east(&self) -> Cell {
        let c = if self.rails == 3 {
            self.col_end() + 2
        } else {
            self.col_end() + 1
        };
        Cell::new(self.pivot_row, c)
    }

    /// Track pieces of the city, ports included (ports are plain straights;
    /// unused ones are capped later).
    fn pieces(&self) -> Vec<(Cell, CellType)> {
        let rp = self.pivot_row;
        let c0 = self.col_start;
        let ce = self.col_end();
        let ew = CellType::new(TrackKind::Straight, 1);
        let mut out = vec![(self.port_west(), ew), (self.port_east(), ew)];
        match self.rails {
            1 => {
                for c in c0..=ce {
                    out.push((Cell::new(rp, c), ew));
                }
            }
            2 => {
                out.push((Cell::new(rp, c0), CellType::new(TrackKind::SymmetricalSwitch, 3)));
                out.push((Cell::new(rp, ce), CellType::new(TrackKind::SymmetricalSwitch, 1)));
                out.push((Cell::new(rp - 1, c0), CellType::new(TrackKind::Curve, 1)));
                out.push((Cell::new(rp - 1, ce), CellType::new(TrackKind::Curve, 2)));
                out.push((Cell::new(rp + 1, c0), CellType::new(TrackKind::Curve, 0)));
                out.push((Cell::new(rp + 1, ce), CellType::new(TrackKind::Curve, 3)));
                for c in c0 + 1..ce {
                    out.push((Cell::new(rp - 1, c), ew));
                    out.push((Cell::new(rp + 1, c), ew));
                }
            }
            _ => {
                out.push((Cell::new(rp, c0), CellType::new(TrackKind::SymmetricalSwitch, 3)));
                out.push((Cell::new(rp - 1, c0), CellType::new(TrackKind::Curve, 1)));
                out.push((Cell::new(rp + 1, c0), CellType::new(TrackKind::SimpleSwitch, 0)));
                out.push((Cell::new(rp + 2, c0), CellType::new(TrackKind::Curve, 0)));
                out.push((Cell::new(rp, ce), CellType::new(TrackKind::SymmetricalSwitch, 1)));
                out.push((Cell::new(rp - 1, ce), CellType::new(TrackKind::Curve, 2)));
                out.push((Cell::new(rp + 1, ce), CellType::new(TrackKind::DiamondCrossing, 0)));
                out.push((Cell::new(rp + 2, ce), CellType::new(TrackKind::Curve, 3)));
                out.push((Cell::new(rp + 1, ce + 1), CellType::new(TrackKind::Curve, 3)));
                out.push((Cell::new(rp, ce + 1), CellType::new(TrackKind::SimpleSwitch, 1)));
                for c in c0 + 1..ce {
                    out.push((Cell::new(rp - 1, c), ew));
                    out.push((Cell::new(rp + 1, c), ew));
                    out.push((Cell::new(rp + 2, c), ew));
                }
            }
        }
        out
    }

    fn rail_cells(&self) -> Vec<Vec<Cell>> {
        let rp = self.pivot_row;
        let c0 = self.col_start;
        let ce = self.col_end();
        match self.rails {
            1 => vec![(c0..=ce).map(|c| Cell::new(rp, c)).collect()],
            2 => vec![
                (c0 + 1..ce).map(|c| Cell::new(rp - 1, c)).collect(),
                (c0 + 1..ce).map(|c| Cell::new(rp + 1, c)).collect(),
            ],
            _ => vec![
                (c0 + 1..ce).map(|c| Cell::new(rp - 1, c)).collect(),
                (c0 + 1..ce).map(|c| Cell::new(rp + 1, c)).collect(),
                (c0 + 1..ce).map(|c| Cell::new(rp + 2, c)).collect(),
            ],
        }
    }
}

fn bounds_overlap(a: (Cell, Cell), b: (Cell, Cell), gap: u32) -> bool {
    let a_r0 = a.0.row.saturating_sub(gap);
    let a_c0 = a.0.col.saturating_sub(gap);
    let a_r1 = a.1.row + gap;
    let a_c1 = a.1.col + gap;
    a_r0 <= b.1.row && b.0.row <= a_r1 && a_c0 <= b.1.col && b.0.col <= a_c1
}

fn in_bounds(cell: Cell, b: (Cell, Cell)) -> bool {
    b.0.row <= cell.row && cell.row <= b.1.row && b.0.col <= cell.col && cell.col <= b.1.col
}

/// Pick the straight or curve piece for entering toward `h_in` and leaving
/// toward `h_out`.
fn piece_for(h_in: Heading, h_out: Heading) -> CellType {
    if h_in == h_out {
        let rotation = match h_in {
            Heading::North | Heading::South => 0,
            Heading::East | Heading::West => 1,
        };
        return CellType::new(TrackKind::Straight, rotation);
    }
    let side_in = h_in.opposite();
    let side_out = h_out;
    let mut sides = [side_in, side_out];
    sides.sort_by_key(|h| h.index());
    let rotation = match (sides[0], sides[1]) {
        (Heading::North, Heading::East) => 0,
        (Heading::East, Heading::South) => 1,
        (Heading::South, Heading::West) => 2,
        (Heading::North, Heading::West) => 3,
        _ => unreachable!("reversal moves are never routed"),
    };
    CellType::new(TrackKind::Curve, rotation)
}

struct LayoutGrid {
    width: u32,
    height: u32,
    cells: Vec<Option<CellType>>,
    /// Cells laid by corridors as plain straights; eligible for diamond
    /// upgrades when a later corridor crosses them perpendicularly.
    corridor_straight: Vec<bool>,
}

impl LayoutGrid {
    fn new(width: u32, height: u32) -> Self {
        let n = (width * height) as usize;
        LayoutGrid {
            width,
            height,
            cells: vec![None; n],
            corridor_straight: vec![false; n],
        }
    }

    fn idx(&self, c: Cell) -> usize {
        (c.row * self.width + c.col) as usize
    }

    fn get(&self, c: Cell) -> Option<CellType> {
        self.cells[self.idx(c)]
    }

    fn set(&mut self, c: Cell, t: CellType) {
        let i = self.idx(c);
        self.cells[i] = Some(t);
    }

    fn is_crossable_straight(&self, c: Cell, axis: Heading) -> bool {
        let i = self.idx(c);
        if !self.corridor_straight[i] {
            return false;
        }
        match self.cells[i] {
            Some(t) if t.kind == TrackKind::Straight => {
                let vertical = t.rotation % 2 == 0;
                match axis {
                    Heading::North | Heading::South => !vertical,
                    Heading::East | Heading::West => vertical,
                }
            }
            _ => false,
        }
    }
}

/// Dijkstra over (cell, heading) states from `from_port` leaving east to
/// `to_port` entered heading east. Returns the entry waypoint sequence,
/// excluding both port cells.
fn route_corridor(
    grid: &LayoutGrid,
    blocked: &[(Cell, Cell)],
    from_port: Cell,
    to_port: Cell,
) -> Option<Vec<Waypoint>> {
    let n_states = (grid.width * grid.height * 4) as usize;
    let state_id =
        |w: Waypoint| ((w.cell.row * grid.width + w.cell.col) * 4 + w.heading.index() as u32) as usize;
    let mut dist = vec![u32::MAX; n_states];
    let mut parent: Vec<Option<Waypoint>> = vec![None; n_states];
    let mut heap = std::collections::BinaryHeap::new();

    let admit = |cell: Cell, heading: Heading| -> bool {
        if cell == to_port {
            return heading == Heading::East;
        }
        if cell == from_port || blocked.iter().any(|&b| in_bounds(cell, b)) {
            return false;
        }
        match grid.get(cell) {
            None => true,
            Some(_) => grid.is_crossable_straight(cell, heading),
        }
    };

    let start = Waypoint::new(from_port, Heading::East);
    dist[state_id(start)] = 0;
    heap.push(std::cmp::Reverse((0u32, state_id(start), start)));

    while let Some(std::cmp::Reverse((d, _, wp))) = heap.pop() {
        if d > dist[state_id(wp)] {
            continue;
        }
        if wp.cell == to_port && wp.heading == Heading::East {
            let mut path = vec![wp];
            let mut cur = wp;
            while let Some(p) = parent[state_id(cur)] {
                path.push(p);
                cur = p;
            }
            path.reverse();
            path.retain(|w| w.cell != from_port && w.cell != to_port);
            return Some(path);
        }
        let on_crossing = wp.cell != from_port && grid.get(wp.cell).is_some();
        let straight_only = [wp.heading];
        let moves: &[Heading] = if wp.cell == from_port || on_crossing {
            &straight_only
        } else {
            &Heading::ALL
        };
        for &out in moves {
            if out == wp.heading.opposite() {
                continue;
            }
            let Some(next_cell) = wp.cell.step(out, grid.width, grid.height) else {
                continue;
            };
            if !admit(next_cell, out) {
                continue;
            }
            let cost = d + 1 + if out == wp.heading { 0 } else { TURN_PENALTY };
            let next = Waypoint::new(next_cell, out);
            let id = state_id(next);
            if cost < dist[id] {
                dist[id] = cost;
                parent[id] = Some(wp);
                heap.push(std::cmp::Reverse((cost, id, next)));
            }
        }
    }
    None
}

fn lay_corridor(grid: &mut LayoutGrid, path: &[Waypoint]) -> bool {
    let mut seen = std::collections::HashSet::new();
    for wp in path {
        if !seen.insert(wp.cell) {
            return false;
        }
    }
    for (i, wp) in path.iter().enumerate() {
        let h_in = wp.heading;
        let h_out = path.get(i + 1).map(|n| n.heading).unwrap_or(Heading::East);
        if grid.get(wp.cell).is_some() {
            grid.set(wp.cell, CellType::new(TrackKind::DiamondCrossing, 0));
            let idx = grid.idx(wp.cell);
            grid.corridor_straight[idx] = false;
        } else {
            let piece = piece_for(h_in, h_out);
            grid.set(wp.cell, piece);
            if piece.kind == TrackKind::Straight {
                let idx = grid.idx(wp.cell);
                grid.corridor_straight[idx] = true;
            }
        }
    }
    true
}

/// Feasible (pivot row, start column) ranges for a city so its footprint
/// keeps a one-cell border to the grid edge. None when the grid is too small.
fn placement_ranges(params: &InfraParams) -> Option<(u32, u32, u32, u32)> {
    let rails = params.rails_per_city();
    let (row_pad_top, row_pad_bottom) = match rails {
        1 => (1, 1),
        2 => (2, 2),
        _ => (2, 3),
    };
    let east_extra = if rails == 3 { 2 } else { 1 };
    let rp_min = row_pad_top;
    let rp_max = params.height.checked_sub(1 + row_pad_bottom)?;
    let c0_min = 2u32;
    let c0_max = params
        .width
        .checked_sub(2 + east_extra + RAIL_INTERIOR_LEN + 1)?;
    (rp_min <= rp_max && c0_min <= c0_max).then_some((rp_min, rp_max, c0_min, c0_max))
}

fn place_cities(
    params: &InfraParams,
    ranges: (u32, u32, u32, u32),
    rng: &mut ChaCha8Rng,
) -> Option<Vec<CityPlan>> {
    let rails = params.rails_per_city();
    let (rp_min, rp_max, c0_min, c0_max) = ranges;
    let mut plans: Vec<CityPlan> = Vec::new();
    if params.grid_mode {
        let n = params.max_num_cities;
        let cols = (n as f64).sqrt().ceil() as u32;
        let rows = n.div_ceil(cols);
        for i in 0..n {
            let (gr, gc) = (i / cols, i % cols);
            let rp = rp_min + (rp_max - rp_min) * (2 * gr + 1) / (2 * rows);
            let c0 = c0_min + (c0_max - c0_min) * (2 * gc + 1) / (2 * cols);
            let plan = CityPlan { pivot_row: rp, col_start: c0, rails };
            if plans
                .iter()
                .any(|p| bounds_overlap(plan.bounds(), p.bounds(), 2))
            {
                return None;
            }
            plans.push(plan);
        }
        return Some(plans);
    }

    for _ in 0..params.max_num_cities {
        let mut placed = false;
        for _ in 0..CITY_PLACE_TRIES {
            let rp = rng.gen_range(rp_min..=rp_max);
            let c0 = rng.gen_range(c0_min..=c0_max);
            let plan = CityPlan { pivot_row: rp, col_start: c0, rails };
            if plans
                .iter()
                .all(|p| !bounds_overlap(plan.bounds(), p.bounds(), 2))
            {
                plans.push(plan);
                placed = true;
                break;
            }
        }
        if !placed {
            break;
        }
    }
    (plans.len() >= 2).then_some(plans)
}

fn place_trains(
    params: &InfraParams,
    cities: &[City],
    infra: &Infrastructure,
    rng: &mut ChaCha8Rng,
) -> Option<Vec<TrainSpec>> {
    let graph = to_graph(infra);
    let mut trains = Vec::with_capacity(params.num_agents as usize);
    for id in 0..params.num_agents {
        let mut chosen = None;
        for _ in 0..TRAIN_PLACE_TRIES {
            let oc = rng.gen_range(0..cities.len());
            let mut tc = rng.gen_range(0..cities.len() - 1);
            if tc >= oc {
                tc += 1;
            }
            let origin_rails = &cities[oc].rail_cells;
            let target_rails = &cities[tc].rail_cells;
            let orail = &origin_rails[rng.gen_range(0..origin_rails.len())];
            let trail = &target_rails[rng.gen_range(0..target_rails.len())];
            let origin_cell = orail[rng.gen_range(0..orail.len())];
            let target_cell = trail[rng.gen_range(0..trail.len())];
            let toward_target = if cities[tc].center.col >= cities[oc].center.col {
                Heading::East
            } else {
                Heading::West
            };
            let headings = [toward_target, toward_target.opposite()];
            let found = headings.into_iter().find(|&h| {
                let origin = Waypoint::new(origin_cell, h);
                graph.contains(origin) && reaches(&graph, origin, target_cell)
            });
            if let Some(h) = found {
                chosen = Some(TrainSpec {
                    id: TrainId(id),
                    origin: Waypoint::new(origin_cell, h),
                    target: target_cell,
                    steps_per_cell: params.speeds.draw(rng),
                    origin_city: oc as u32,
                    target_city: tc as u32,
                });
                break;
            }
        }
        trains.push(chosen?);
    }
    Some(trains)
}

fn reaches(graph: &super::TopologyGraph, from: Waypoint, target: Cell) -> bool {
    let mut seen = std::collections::HashSet::new();
    let mut stack = vec![from];
    seen.insert(from);
    while let Some(wp) = stack.pop() {
        if wp.cell == target {
            return true;
        }
        for next in graph.successors(wp) {
            if seen.insert(next) {
                stack.push(next);
            }
        }
    }
    false
}

/// Generate a full infrastructure: place cities, route corridors between
/// neighbors in west-to-east order, cap unused ports, and assign trains.
pub fn generate_infrastructure(params: &InfraParams, seed: u64) -> Result<Infrastructure, GridError> {
    if params.max_num_cities < 2 {
        return Err(GridError::InvalidParams {
            reason: "at least two cities are required".into(),
        });
    }
    let Some(ranges) = placement_ranges(params) else {
        return Err(GridError::GridTooSmall {
            width: params.width,
            height: params.height,
        });
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best_cities = 0usize;
    let mut attempts = 0usize;

    for _ in 0..MAX_LAYOUT_ATTEMPTS {
        attempts += 1;
        let Some(mut plans) = place_cities(params, ranges, &mut rng) else {
            continue;
        };
        plans.sort_by_key(|p| (p.col_start, p.pivot_row));
        best_cities = best_cities.max(plans.len());

        let mut grid = LayoutGrid::new(params.width, params.height);
        for plan in &plans {
            for (cell, piece) in plan.pieces() {
                grid.set(cell, piece);
            }
        }

        let all_bounds: Vec<_> = plans.iter().map(|p| p.bounds()).collect();
        let mut ok = true;
        for i in 0..plans.len().saturating_sub(1) {
            let Some(path) = route_corridor(
                &grid,
                &all_bounds,
                plans[i].port_east(),
                plans[i + 1].port_west(),
            ) else {
                ok = false;
                break;
            };
            if !lay_corridor(&mut grid, &path) {
                ok = false;
                break;
            }
        }
        if !ok {
            continue;
        }

        grid.set(plans[0].port_west(), CellType::new(TrackKind::DeadEnd, 1));
        grid.set(
            plans[plans.len() - 1].port_east(),
            CellType::new(TrackKind::DeadEnd, 3),
        );

        let cities: Vec<City> = plans
            .iter()
            .enumerate()
            .map(|(id, p)| City {
                id: id as u32,
                center: Cell::new(p.pivot_row, p.col_start + (RAIL_INTERIOR_LEN + 1) / 2),
                rail_cells: p.rail_cells(),
                port_west: p.port_west(),
                port_east: p.port_east(),
                bounds: p.bounds(),
            })
            .collect();

        let mut infra = Infrastructure {
            version: super::FORMAT_VERSION,
            infra_id: 0,
            width: params.width,
            height: params.height,
            cells: grid.cells,
            cities,
            trains: Vec::new(),
            params: params.clone(),
            seed,
        };
        if check_path_consistency(&infra).is_err() {
            continue;
        }
        let Some(trains) = place_trains(params, &infra.cities, &infra, &mut rng) else {
            continue;
        };
        infra.trains = trains;
        return Ok(infra);
    }

    Err(GridError::GenerationFailed {
        cities: best_cities,
        attempts,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::graph::to_graph;

    fn desk_params() -> InfraParams {
        InfraParams {
            width: 40,
            height: 40,
            max_num_cities: 4,
            num_agents: 8,
            ..Default::default()
        }
    }

    #[test]
    fn test_generation_is_deterministic() {
        let params = desk_params();
        let a = generate_infrastructure(&params, 7).unwrap();
        let b = generate_infrastructure(&params, 7).unwrap();
        assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    }

    #[test]
    fn test_different_seeds_differ() {
        let params = desk_params();
        let a = generate_infrastructure(&params, 1).unwrap();
        let b = generate_infrastructure(&params, 2).unwrap();
        assert_ne!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn test_generated_grid_is_path_consistent() {
        for seed in 0..6 {
            let infra = generate_infrastructure(&desk_params(), seed).unwrap();
            check_path_consistency(&infra).unwrap();
        }
    }

    #[test]
    fn test_every_train_can_reach_its_target() {
        let infra = generate_infrastructure(&desk_params(), 3).unwrap();
        let graph = to_graph(&infra);
        assert_eq!(infra.trains.len(), 8);
        for train in &infra.trains {
            assert!(graph.contains(train.origin));
            assert!(reaches(&graph, train.origin, train.target));
            assert_ne!(train.origin_city, train.target_city);
        }
    }

    #[test]
    fn test_three_rail_cities_generate() {
        let params = InfraParams {
            max_rails_in_city: 3,
            ..desk_params()
        };
        let infra = generate_infrastructure(&params, 11).unwrap();
        check_path_consistency(&infra).unwrap();
        assert!(infra.cities.iter().all(|c| c.rail_cells.len() == 3));
    }

    #[test]
    fn test_single_rail_cities_generate() {
        let params = InfraParams {
            max_rails_in_city: 1,
            num_agents: 2,
            ..desk_params()
        };
        let infra = generate_infrastructure(&params, 5).unwrap();
        check_path_consistency(&infra).unwrap();
    }

    #[test]
    fn test_too_small_grid_is_rejected() {
        let params = InfraParams {
            width: 8,
            height: 3,
            ..desk_params()
        };
        assert!(matches!(
            generate_infrastructure(&params, 0),
            Err(GridError::GridTooSmall { .. }) | Err(GridError::GenerationFailed { .. })
        ));
    }

    #[test]
    fn test_speed_draws_follow_support() {
        let params = InfraParams {
            num_agents: 12,
            ..desk_params()
        };
        let infra = generate_infrastructure(&params, 9).unwrap();
        assert!(infra
            .trains
            .iter()
            .all(|t| (1..=4).contains(&t.steps_per_cell)));
    }
}
