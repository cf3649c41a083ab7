//! Directed double-point topology graph derived from the grid.

use super::{Cell, GridError, Heading, Infrastructure, Waypoint};

/// Directed graph over (cell, heading) waypoints. An edge `(c, h) -> (c', h')`
/// means a train that entered cell `c` moving toward `h` may move one cell
/// toward `h'`, arriving at neighbor `c'`.
#[derive(Debug, Clone)]
pub struct TopologyGraph {
    width: u32,
    height: u32,
    /// Successor node ids per node id; id = (row * width + col) * 4 + heading.
    succ: Vec<Vec<u32>>,
    pred: Vec<Vec<u32>>,
    node_count: usize,
}

impl TopologyGraph {
    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn node_id(&self, wp: Waypoint) -> u32 {
        (wp.cell.row * self.width + wp.cell.col) * 4 + wp.heading.index() as u32
    }

    pub fn waypoint_of(&self, id: u32) -> Waypoint {
        let cell_idx = id / 4;
        Waypoint::new(
            Cell::new(cell_idx / self.width, cell_idx % self.width),
            Heading::from_index((id % 4) as usize),
        )
    }

    /// A waypoint is a node when some move leads out of it or into it.
    pub fn contains(&self, wp: Waypoint) -> bool {
        if wp.cell.row >= self.height || wp.cell.col >= self.width {
            return false;
        }
        let id = self.node_id(wp) as usize;
        !self.succ[id].is_empty() || !self.pred[id].is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edge_count(&self) -> usize {
        self.succ.iter().map(Vec::len).sum()
    }

    pub fn successors(&self, wp: Waypoint) -> impl Iterator<Item = Waypoint> + '_ {
        self.succ[self.node_id(wp) as usize]
            .iter()
            .map(|&id| self.waypoint_of(id))
    }

    pub fn predecessors(&self, wp: Waypoint) -> impl Iterator<Item = Waypoint> + '_ {
        self.pred[self.node_id(wp) as usize]
            .iter()
            .map(|&id| self.waypoint_of(id))
    }

    /// All nodes in (row, col, heading) order.
    pub fn nodes(&self) -> impl Iterator<Item = Waypoint> + '_ {
        (0..self.succ.len() as u32).filter_map(|id| {
            let wp = self.waypoint_of(id);
            self.contains(wp).then_some(wp)
        })
    }
}

/// Build the topology graph of `infra`. Moves that would leave the grid or
/// enter a non-accepting cell produce no edge; `check_path_consistency`
/// reports such dangling transitions on generated infrastructure.
pub fn to_graph(infra: &Infrastructure) -> TopologyGraph {
    let n = (infra.width * infra.height * 4) as usize;
    let mut graph = TopologyGraph {
        width: infra.width,
        height: infra.height,
        succ: vec![Vec::new(); n],
        pred: vec![Vec::new(); n],
        node_count: 0,
    };
    for row in 0..infra.height {
        for col in 0..infra.width {
            let cell = Cell::new(row, col);
            let Some(ct) = infra.cell_at(cell) else {
                continue;
            };
            let matrix = ct.matrix();
            for incoming in Heading::ALL {
                for outgoing in matrix.outgoing(incoming) {
                    let Some(neighbor) = cell.step(outgoing, infra.width, infra.height) else {
                        continue;
                    };
                    let Some(nt) = infra.cell_at(neighbor) else {
                        continue;
                    };
                    if nt.matrix().row_is_empty(outgoing) {
                        continue;
                    }
                    let from = graph.node_id(Waypoint::new(cell, incoming));
                    let to = graph.node_id(Waypoint::new(neighbor, outgoing));
                    graph.succ[from as usize].push(to);
                    graph.pred[to as usize].push(from);
                }
            }
        }
    }
    graph.node_count = (0..n)
        .filter(|&id| !graph.succ[id].is_empty() || !graph.pred[id].is_empty())
        .count();
    graph
}

/// Verify that every allowed outgoing heading of every track cell leads into
/// a neighbor that accepts the corresponding incoming heading.
pub fn check_path_consistency(infra: &Infrastructure) -> Result<(), GridError> {
    for row in 0..infra.height {
        for col in 0..infra.width {
            let cell = Cell::new(row, col);
            let Some(ct) = infra.cell_at(cell) else {
                continue;
            };
            let matrix = ct.matrix();
            for incoming in Heading::ALL {
                for outgoing in matrix.outgoing(incoming) {
                    let accepted = cell
                        .step(outgoing, infra.width, infra.height)
                        .and_then(|n| infra.cell_at(n))
                        .is_some_and(|nt| !nt.matrix().row_is_empty(outgoing));
                    if !accepted {
                        return Err(GridError::InconsistentTransitions {
                            cell,
                            heading: outgoing,
                        });
                    }
                }
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{CellType, TrackKind};

    fn infra_with(width: u32, height: u32, cells: &[(u32, u32, TrackKind, u8)]) -> Infrastructure {
        let mut grid = vec![None; (width * height) as usize];
        for &(row, col, kind, rotation) in cells {
            grid[(row * width + col) as usize] = Some(CellType::new(kind, rotation));
        }
        Infrastructure {
            version: 1,
            infra_id: 0,
            width,
            height,
            cells: grid,
            cities: Vec::new(),
            trains: Vec::new(),
            params: Default::default(),
            seed: 0,
        }
    }

    #[test]
    fn test_three_cell_straight_has_six_nodes_four_edges() {
        let infra = infra_with(
            5,
            3,
            &[
                (1, 1, TrackKind::Straight, 1),
                (1, 2, TrackKind::Straight, 1),
                (1, 3, TrackKind::Straight, 1),
            ],
        );
        let graph = to_graph(&infra);
        assert_eq!(graph.node_count(), 6);
        assert_eq!(graph.edge_count(), 4);
    }

    #[test]
    fn test_empty_grid_yields_empty_graph() {
        let graph = to_graph(&infra_with(4, 4, &[]));
        assert_eq!(graph.node_count(), 0);
        assert_eq!(graph.edge_count(), 0);
    }

    #[test]
    fn test_dead_end_produces_reversal_edge() {
        // Eastward track ending in a dead end whose opening faces west.
        let infra = infra_with(
            4,
            1,
            &[
                (0, 0, TrackKind::Straight, 1),
                (0, 1, TrackKind::Straight, 1),
                (0, 2, TrackKind::DeadEnd, 3),
            ],
        );
        let graph = to_graph(&infra);
        let into_dead_end = Waypoint::new(Cell::new(0, 2), Heading::East);
        let back_out: Vec<_> = graph.successors(into_dead_end).collect();
        assert_eq!(
            back_out,
            vec![Waypoint::new(Cell::new(0, 1), Heading::West)]
        );
    }

    #[test]
    fn test_path_consistency_flags_dangling_exit() {
        let infra = infra_with(3, 3, &[(1, 1, TrackKind::Straight, 1)]);
        assert!(matches!(
            check_path_consistency(&infra),
            Err(GridError::InconsistentTransitions { .. })
        ));
    }

    #[test]
    fn test_path_consistency_accepts_capped_segment() {
        let infra = infra_with(
            4,
            1,
            &[
                (0, 0, TrackKind::DeadEnd, 1),
                (0, 1, TrackKind::Straight, 1),
                (0, 2, TrackKind::Straight, 1),
                (0, 3, TrackKind::DeadEnd, 3),
            ],
        );
        assert!(check_path_consistency(&infra).is_ok());
        // The capped segment is one closed tour: 4 forward moves, 2 of them
        // re-entering the straights westward, closing back at the west cap.
        let graph = to_graph(&infra);
        assert_eq!(graph.edge_count(), 6);
    }
}
