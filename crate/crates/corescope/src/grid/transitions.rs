//! Transition matrices of the eight track elements.
//!
//! Each element is described by the pairs of cell sides its track connects.
//! A train entering through side X moves in direction opposite(X) and leaves
//! through the paired side Y moving toward Y. A dead end pairs a side with
//! itself, which yields the heading-reversal transition.

use super::{Heading, TrackKind, TransitionMatrix};

/// Connected side pairs of each element at rotation 0.
fn base_pairs(kind: TrackKind) -> &'static [(Heading, Heading)] {
    use Heading::*;
    match kind {
        TrackKind::Straight => &[(North, South)],
        TrackKind::Curve => &[(North, East)],
        TrackKind::SimpleSwitch => &[(North, South), (North, East)],
        TrackKind::DiamondCrossing => &[(North, South), (East, West)],
        TrackKind::SingleSlip => &[(North, South), (East, West), (North, East)],
        TrackKind::DoubleSlip => &[(North, South), (East, West), (North, East), (South, West)],
        TrackKind::SymmetricalSwitch => &[(North, East), (North, West)],
        TrackKind::DeadEnd => &[(North, North)],
    }
}

fn matrix_from_pairs(pairs: &[(Heading, Heading)]) -> TransitionMatrix {
    let mut m = TransitionMatrix::EMPTY;
    for &(x, y) in pairs {
        m.set(x.opposite(), y);
        m.set(y.opposite(), x);
    }
    m
}

/// The 4x4 transition matrix of `kind` rotated by `rotation` clockwise
/// quarter-turns. Total over all valid inputs.
pub fn transitions_of(kind: TrackKind, rotation: u8) -> TransitionMatrix {
    let mut m = matrix_from_pairs(base_pairs(kind));
    for _ in 0..rotation % 4 {
        m = m.rotated_cw();
    }
    m
}
