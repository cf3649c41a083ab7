//! Minimal SVG rendering of an infrastructure for visual inspection.

use std::collections::BTreeSet;
use std::fmt::Write;

use super::{Heading, Infrastructure};

const CELL: f64 = 12.0;

fn side_midpoint(side: Heading, x: f64, y: f64) -> (f64, f64) {
    match side {
        Heading::North => (x + CELL / 2.0, y),
        Heading::East => (x + CELL, y + CELL / 2.0),
        Heading::South => (x + CELL / 2.0, y + CELL),
        Heading::West => (x, y + CELL / 2.0),
    }
}

/// Render the track layout, city boxes, and train endpoints as a standalone
/// SVG document.
pub fn render_svg(infra: &Infrastructure) -> String {
    let w = infra.width as f64 * CELL;
    let h = infra.height as f64 * CELL;
    let mut s = String::new();
    let _ = write!(
        s,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" \
         viewBox=\"0 0 {w} {h}\">\n<rect width=\"{w}\" height=\"{h}\" fill=\"#fafaf7\"/>\n"
    );

    for city in &infra.cities {
        let (tl, br) = city.bounds;
        let x = tl.col as f64 * CELL;
        let y = tl.row as f64 * CELL;
        let bw = (br.col - tl.col + 1) as f64 * CELL;
        let bh = (br.row - tl.row + 1) as f64 * CELL;
        let _ = write!(
            s,
            "<rect x=\"{x}\" y=\"{y}\" width=\"{bw}\" height=\"{bh}\" \
             fill=\"#dce9f7\" stroke=\"#9db8d6\" stroke-width=\"0.5\"/>\n"
        );
    }

    for row in 0..infra.height {
        for col in 0..infra.width {
            let cell = super::Cell::new(row, col);
            let Some(ct) = infra.cell_at(cell) else {
                continue;
            };
            let x = col as f64 * CELL;
            let y = row as f64 * CELL;
            let cx = x + CELL / 2.0;
            let cy = y + CELL / 2.0;
            let matrix = ct.matrix();
            let mut pairs: BTreeSet<(usize, usize)> = BTreeSet::new();
            for incoming in Heading::ALL {
                for outgoing in matrix.outgoing(incoming) {
                    let a = incoming.opposite().index();
                    let b = outgoing.index();
                    pairs.insert((a.min(b), a.max(b)));
                }
            }
            for (a, b) in pairs {
                let sa = Heading::from_index(a);
                let sb = Heading::from_index(b);
                let (x1, y1) = side_midpoint(sa, x, y);
                let (x2, y2) = side_midpoint(sb, x, y);
                if sa == sb {
                    let _ = write!(
                        s,
                        "<path d=\"M {x1} {y1} L {cx} {cy}\" stroke=\"#444\" \
                         stroke-width=\"1.6\" fill=\"none\"/>\n\
                         <circle cx=\"{cx}\" cy=\"{cy}\" r=\"1.8\" fill=\"#444\"/>\n"
                    );
                } else if sa.opposite() == sb {
                    let _ = write!(
                        s,
                        "<path d=\"M {x1} {y1} L {x2} {y2}\" stroke=\"#444\" \
                         stroke-width=\"1.6\" fill=\"none\"/>\n"
                    );
                } else {
                    let _ = write!(
                        s,
                        "<path d=\"M {x1} {y1} Q {cx} {cy} {x2} {y2}\" stroke=\"#444\" \
                         stroke-width=\"1.6\" fill=\"none\"/>\n"
                    );
                }
            }
        }
    }

    for train in &infra.trains {
        let ox = train.origin.cell.col as f64 * CELL + CELL / 2.0;
        let oy = train.origin.cell.row as f64 * CELL + CELL / 2.0;
        let tx = train.target.col as f64 * CELL + CELL / 2.0;
        let ty = train.target.row as f64 * CELL + CELL / 2.0;
        let hue = (train.id.0 as u64 * 47) % 360;
        let _ = write!(
            s,
            "<circle cx=\"{ox}\" cy=\"{oy}\" r=\"3.2\" fill=\"hsl({hue},70%,45%)\" \
             fill-opacity=\"0.85\"><title>{} origin</title></circle>\n\
             <rect x=\"{rx}\" y=\"{ry}\" width=\"6.4\" height=\"6.4\" fill=\"none\" \
             stroke=\"hsl({hue},70%,45%)\" stroke-width=\"1.4\"><title>{} target</title></rect>\n",
            train.id,
            train.id,
            rx = tx - 3.2,
            ry = ty - 3.2,
        );
    }

    s.push_str("</svg>\n");
    s
}
