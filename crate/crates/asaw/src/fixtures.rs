//! Hand-digitized walks used by examples, tests and self-tests.

use crate::lattice::{pt, Plaquette, Point};
use crate::walks::Walk;

/// Expands a corner path with axis-parallel segments into unit steps.
pub fn expand_corners(corners: &[[i64; 2]]) -> Walk {
    let mut pts = vec![pt(&corners[0])];
    for c in corners.windows(2) {
        let (a, b) = (pt(&c[0]), pt(&c[1]));
        let diff = b.sub(&a);
        let axis = if diff.get(0) != 0 { 0 } else { 1 };
        let s = diff.get(axis).signum();
        let mut cur: Point = a;
        while cur != b {
            cur = cur.shifted(axis, s);
            pts.push(cur);
        }
    }
    Walk::new(pts).expect("corner path is a walk")
}

/// A 30-step walk with seven adjacent edge pairs.
pub fn fig1_walk() -> Walk {
    expand_corners(&[
        [0, 0], [0, 1], [1, 1], [1, 0], [3, 0], [3, 1], [2, 1], [2, 2], [1, 2], [1, 3], [3, 3],
        [3, 2], [4, 2], [4, 1], [6, 1], [6, 3], [5, 3], [5, 4], [8, 4], [8, 3], [7, 3], [7, 0],
        [8, 0],
    ])
}

/// A walk before and after a single flip, with the flipped plaquette.
pub fn flip_example() -> (Walk, Plaquette, Walk) {
    let before = expand_corners(&[[0, 0], [0, 1], [1, 1], [1, 2], [2, 2], [2, 1], [3, 1], [3, 3], [4, 3]]);
    let after = expand_corners(&[[0, 0], [0, 1], [1, 1], [1, 3], [2, 3], [2, 1], [3, 1], [3, 3], [4, 3]]);
    (before, Plaquette::new(pt(&[1, 2]), 0, 1).unwrap(), after)
}
