//! Grid-world railway infrastructure: the eight track elements, procedural
//! generation, and the directed double-point topology graph.

mod generate;
mod graph;
mod svg;
mod transitions;

pub use generate::{generate_infrastructure, InfraParams, SpeedDistribution};
pub use graph::{check_path_consistency, to_graph, TopologyGraph};
pub use svg::render_svg;
pub use transitions::transitions_of;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Version stamp written into every serialized artifact of this crate.
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("could not build a layout with {cities} connected cities after {attempts} attempts")]
    GenerationFailed { cities: usize, attempts: usize },
    #[error("transition at {cell:?} heading {heading:?} exits into a cell that does not accept it")]
    InconsistentTransitions { cell: Cell, heading: Heading },
    #[error("grid {width}x{height} is too small for the requested city layout")]
    GridTooSmall { width: u32, height: u32 },
    #[error("invalid generation parameters: {reason}")]
    InvalidParams { reason: String },
}

/// Travel direction, which doubles as a cell-side identifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Heading {
    North,
    East,
    South,
    West,
}

impl Heading {
    pub const ALL: [Heading; 4] = [Heading::North, Heading::East, Heading::South, Heading::West];

    pub fn index(self) -> usize {
        match self {
            Heading::North => 0,
            Heading::East => 1,
            Heading::South => 2,
            Heading::West => 3,
        }
    }

    pub fn from_index(i: usize) -> Heading {
        Heading::ALL[i % 4]
    }

    pub fn opposite(self) -> Heading {
        self.rotate_cw(2)
    }

    /// Rotate by `quarter_turns` clockwise (North -> East -> South -> West).
    pub fn rotate_cw(self, quarter_turns: u8) -> Heading {
        Heading::from_index(self.index() + quarter_turns as usize)
    }

    /// Row/column delta of one step in this direction (row grows southward).
    pub fn delta(self) -> (i64, i64) {
        match self {
            Heading::North => (-1, 0),
            Heading::East => (0, 1),
            Heading::South => (1, 0),
            Heading::West => (0, -1),
        }
    }
}

/// Grid cell coordinate; row 0 is the top row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Cell {
    pub row: u32,
    pub col: u32,
}

impl Cell {
    pub fn new(row: u32, col: u32) -> Cell {
        Cell { row, col }
    }

    /// The neighboring cell one step toward `heading`, if it stays on a
    /// `width` x `height` grid.
    pub fn step(self, heading: Heading, width: u32, height: u32) -> Option<Cell> {
        let (dr, dc) = heading.delta();
        let row = self.row as i64 + dr;
        let col = self.col as i64 + dc;
        if row < 0 || col < 0 || row >= height as i64 || col >= width as i64 {
            return None;
        }
        Some(Cell::new(row as u32, col as u32))
    }
}

/// One (cell, heading) node of the double-point topology graph. The heading
/// is the direction the train was moving when it entered the cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Waypoint {
    pub cell: Cell,
    pub heading: Heading,
}

impl Waypoint {
    pub fn new(cell: Cell, heading: Heading) -> Waypoint {
        Waypoint { cell, heading }
    }
}

/// The eight basic track elements.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrackKind {
    Straight,
    SimpleSwitch,
    DiamondCrossing,
    SingleSlip,
    DoubleSlip,
    SymmetricalSwitch,
    DeadEnd,
    Curve,
}

impl TrackKind {
    pub const ALL: [TrackKind; 8] = [
        TrackKind::Straight,
        TrackKind::SimpleSwitch,
        TrackKind::DiamondCrossing,
        TrackKind::SingleSlip,
        TrackKind::DoubleSlip,
        TrackKind::SymmetricalSwitch,
        TrackKind::DeadEnd,
        TrackKind::Curve,
    ];
}

/// A track element placed on a cell: element kind plus clockwise quarter-turn
/// rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CellType {
    pub kind: TrackKind,
    pub rotation: u8,
}

impl CellType {
    pub fn new(kind: TrackKind, rotation: u8) -> CellType {
        debug_assert!(rotation < 4);
        CellType { kind, rotation }
    }

    pub fn matrix(self) -> TransitionMatrix {
        transitions_of(self.kind, self.rotation)
    }
}

/// 4x4 boolean transition matrix packed into 16 bits: bit (incoming * 4 +
/// outgoing) is set when a train entering with `incoming` heading may leave
/// toward `outgoing`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TransitionMatrix(pub u16);

impl TransitionMatrix {
    pub const EMPTY: TransitionMatrix = TransitionMatrix(0);

    pub fn allows(self, incoming: Heading, outgoing: Heading) -> bool {
        self.0 & (1 << (incoming.index() * 4 + outgoing.index())) != 0
    }

    pub fn set(&mut self, incoming: Heading, outgoing: Heading) {
        self.0 |= 1 << (incoming.index() * 4 + outgoing.index());
    }

    /// Outgoing headings allowed for a train that entered with `incoming`,
    /// in N, E, S, W order.
    pub fn outgoing(self, incoming: Heading) -> impl Iterator<Item = Heading> {
        Heading::ALL
            .into_iter()
            .filter(move |&o| self.allows(incoming, o))
    }

    pub fn row_is_empty(self, incoming: Heading) -> bool {
        self.0 >> (incoming.index() * 4) & 0xf == 0
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// The matrix of the same element rotated one quarter-turn clockwise:
    /// both axes shift cyclically.
    pub fn rotated_cw(self) -> TransitionMatrix {
        let mut out = TransitionMatrix::EMPTY;
        for incoming in Heading::ALL {
            for outgoing in Heading::ALL {
                if self.allows(incoming, outgoing) {
                    out.set(incoming.rotate_cw(1), outgoing.rotate_cw(1));
                }
            }
        }
        out
    }
}

/// Train identifier, unique within an infrastructure.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
pub struct TrainId(pub u32);

impl std::fmt::Display for TrainId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "t{}", self.0)
    }
}

/// A train placed during generation: where it starts (with its initial
/// heading), where it must go, and how fast it moves. Speed 1/n means the
/// train needs `n` time steps per cell, so `steps_per_cell` stores n.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainSpec {
    pub id: TrainId,
    pub origin: Waypoint,
    pub target: Cell,
    pub steps_per_cell: u32,
    pub origin_city: u32,
    pub target_city: u32,
}

impl TrainSpec {
    pub fn speed(&self) -> f64 {
        1.0 / self.steps_per_cell as f64
    }
}

/// A generated city: a bundle of parallel rails joined by switch fans, with
/// one port track per side.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct City {
    pub id: u32,
    pub center: Cell,
    /// Straight cells of each parallel rail; trains may start or end here.
    pub rail_cells: Vec<Vec<Cell>>,
    pub port_west: Cell,
    pub port_east: Cell,
    /// Inclusive bounding box (top-left, bottom-right) of the city footprint.
    pub bounds: (Cell, Cell),
}

/// A complete generated railway: grid of track elements, the cities and
/// trains placed on it, and the parameters plus seed that produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Infrastructure {
    pub version: u32,
    pub infra_id: u32,
    pub width: u32,
    pub height: u32,
    /// Row-major grid of optional track elements.
    pub cells: Vec<Option<CellType>>,
    pub cities: Vec<City>,
    pub trains: Vec<TrainSpec>,
    pub params: InfraParams,
    pub seed: u64,
}

impl Infrastructure {
    pub fn cell_at(&self, cell: Cell) -> Option<CellType> {
        if cell.row >= self.height || cell.col >= self.width {
            return None;
        }
        self.cells[(cell.row * self.width + cell.col) as usize]
    }

    pub fn track_cell_count(&self) -> usize {
        self.cells.iter().filter(|c| c.is_some()).count()
    }

    pub fn train(&self, id: TrainId) -> Option<&TrainSpec> {
        self.trains.iter().find(|t| t.id == id)
    }
}
