//! Walks as vertex sequences, their classification, adjacency extraction and surgery.

use crate::error::{AsawError, Result};
use crate::flips::is_flippable;
use crate::lattice::{plaquette_of_segments, Plaquette, Point, Symmetry, Transform, UnitEdge};
use std::collections::{BTreeSet, HashSet};
use std::fmt;

#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Walk {
    pts: Vec<Point>,
}

impl Walk {
    pub fn new(pts: Vec<Point>) -> Result<Walk> {
        let first = pts.first().ok_or_else(|| AsawError::InvalidWalk("no vertices".into()))?;
        let d = first.dim();
        for (i, p) in pts.iter().enumerate() {
            if p.dim() != d {
                return Err(AsawError::DimensionMismatch(d, p.dim()));
            }
            if i > 0 && pts[i - 1] == *p {
                return Err(AsawError::InvalidWalk(format!("repeated vertex at step {i}")));
            }
        }
        Ok(Walk { pts })
    }

    /// Builds a walk without validation; callers guarantee the invariants.
    #[inline]
    pub(crate) fn from_vec_unchecked(pts: Vec<Point>) -> Walk {
        Walk { pts }
    }

    pub fn zero(d: usize) -> Walk {
        Walk { pts: vec![Point::origin(d)] }
    }

    pub fn single(p: Point) -> Walk {
        Walk { pts: vec![p] }
    }

    pub fn from_coords(c: &[&[i64]]) -> Result<Walk> {
        Walk::new(c.iter().map(|x| Point::new(x)).collect())
    }

    /// Parses `"0,0;1,0;1,1"`.
    pub fn parse(s: &str) -> Result<Walk> {
        let pts: Result<Vec<Point>> = s.split(';').map(Point::parse).collect();
        Walk::new(pts?)
    }

    pub fn to_text(&self) -> String {
        let parts: Vec<String> = self.pts.iter().map(|p| p.to_string()).collect();
        parts.join(";")
    }

    /// Number of steps.
    #[inline]
    pub fn len(&self) -> usize {
        self.pts.len() - 1
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.pts.len() == 1
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.pts[0].dim()
    }

    #[inline]
    pub fn vertices(&self) -> &[Point] {
        &self.pts
    }

    #[inline]
    pub fn vertex(&self, i: usize) -> Point {
        self.pts[i]
    }

    #[inline]
    pub fn start(&self) -> Point {
        self.pts[0]
    }

    #[inline]
    pub fn end(&self) -> Point {
        *self.pts.last().unwrap()
    }

    pub fn into_vec(self) -> Vec<Point> {
        self.pts
    }

    /// Increments `ω_{i+1} − ω_i`.
    pub fn steps(&self) -> impl Iterator<Item = Point> + '_ {
        self.pts.windows(2).map(|w| w[1].sub(&w[0]))
    }

    /// Distinct unit edges traversed by the walk.
    pub fn unit_edges(&self) -> Vec<UnitEdge> {
        let mut seen = BTreeSet::new();
        let mut out = Vec::new();
        for w in self.pts.windows(2) {
            if w[1].sub(&w[0]).l1() == 1 {
                let e = UnitEdge::new_unchecked(w[0], w[1]);
                if seen.insert(e) {
                    out.push(e);
                }
            }
        }
        out
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.pts.contains(p)
    }

    pub fn translated(&self, x: &Point) -> Walk {
        Walk { pts: self.pts.iter().map(|p| p.add(x)).collect() }
    }

    /// Translates so that the initial vertex is the origin.
    pub fn rooted(&self) -> Walk {
        self.translated(&self.start().neg())
    }

    pub fn reflected(&self, axis: usize) -> Walk {
        self.apply(&Symmetry::Reflect(axis))
    }

    pub fn is_self_avoiding(&self) -> bool {
        let mut seen = HashSet::with_capacity(self.pts.len());
        self.pts.iter().all(|p| seen.insert(*p))
    }

    pub fn is_polygon(&self) -> bool {
        let n = self.len();
        if n <= 2 || self.pts[0] != self.pts[n] {
            return false;
        }
        let mut seen = HashSet::with_capacity(n);
        self.pts[..n].iter().all(|p| seen.insert(*p))
    }
}

impl Transform for Walk {
    fn apply(&self, s: &Symmetry) -> Walk {
        Walk { pts: self.pts.iter().map(|p| p.apply(s)).collect() }
    }
}

impl fmt::Display for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_text())
    }
}

impl fmt::Debug for Walk {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Walk[{}]", self.to_text())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct WalkClass {
    pub self_avoiding: bool,
    pub polygon: bool,
    pub bridge: bool,
    pub half_space: bool,
    pub span: i64,
    pub bridge_point: Option<usize>,
}

/// First-coordinate span `max π₁ − min π₁`.
pub fn span(w: &Walk) -> i64 {
    let xs = w.vertices().iter().map(|p| p.get(0));
    xs.clone().max().unwrap() - xs.min().unwrap()
}

pub fn is_half_space(w: &Walk) -> bool {
    let x0 = w.start().get(0);
    w.vertices()[1..].iter().all(|p| p.get(0) > x0) && w.is_self_avoiding()
}

pub fn is_bridge(w: &Walk) -> bool {
    let xn = w.end().get(0);
    is_half_space(w) && w.vertices().iter().all(|p| p.get(0) <= xn)
}

/// Maximal index attaining the maximal first coordinate.
pub fn bridge_point(w: &Walk) -> usize {
    let m = w.vertices().iter().map(|p| p.get(0)).max().unwrap();
    w.vertices().iter().rposition(|p| p.get(0) == m).unwrap()
}

pub fn classify(w: &Walk) -> WalkClass {
    let self_avoiding = w.is_self_avoiding();
    let polygon = w.is_polygon();
    let half_space = self_avoiding && is_half_space(w);
    let bridge = half_space && is_bridge(w);
    WalkClass {
        self_avoiding,
        polygon,
        bridge,
        half_space,
        span: span(w),
        bridge_point: if half_space { Some(bridge_point(w)) } else { None },
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AdjPairs {
    pub pair_count: usize,
    pub plaquettes: BTreeSet<Plaquette>,
}

/// Unordered pairs of distinct unit edges of `w` spanning a plaquette.
pub fn adj_pairs(w: &Walk) -> AdjPairs {
    let edges = w.unit_edges();
    let mut pair_count = 0;
    let mut plaquettes = BTreeSet::new();
    for a in 0..edges.len() {
        for b in a + 1..edges.len() {
            let (e, f) = (&edges[a], &edges[b]);
            if let Some(p) = plaquette_of_segments(&e.lo(), &e.hi(), &f.lo(), &f.hi()) {
                pair_count += 1;
                plaquettes.insert(p);
            }
        }
    }
    AdjPairs { pair_count, plaquettes }
}

/// Number of pairs `(f₁, f₂)` with `f₁` an edge of `w1`, `f₂` an edge of `w2`, spanning a plaquette.
pub fn cross_pair_count(w1: &Walk, w2: &Walk) -> usize {
    let e1 = w1.unit_edges();
    let e2 = w2.unit_edges();
    let mut n = 0;
    for e in &e1 {
        for f in &e2 {
            if plaquette_of_segments(&e.lo(), &e.hi(), &f.lo(), &f.hi()).is_some() {
                n += 1;
            }
        }
    }
    n
}

/// Plaquettes spanned by an edge of `w1` and an edge of `w2`; optionally only
/// those flippable for `w2`.
pub fn adj_between(w1: &Walk, w2: &Walk, flippable_only: bool) -> BTreeSet<Plaquette> {
    let e1 = w1.unit_edges();
    let e2 = w2.unit_edges();
    let mut out = BTreeSet::new();
    for e in &e1 {
        for f in &e2 {
            if let Some(p) = plaquette_of_segments(&e.lo(), &e.hi(), &f.lo(), &f.hi()) {
                if !flippable_only || is_flippable(&p, w2) {
                    out.insert(p);
                }
            }
        }
    }
    out
}

/// `w1 ∘ w2`: `w2` translated to start at the end of `w1`, then appended.
pub fn concat(w1: &Walk, w2: &Walk) -> Result<Walk> {
    if w1.dim() != w2.dim() {
        return Err(AsawError::DimensionMismatch(w1.dim(), w2.dim()));
    }
    let shift = w1.end().sub(&w2.start());
    let mut pts = w1.vertices().to_vec();
    pts.extend(w2.vertices()[1..].iter().map(|p| p.add(&shift)));
    Ok(Walk { pts })
}

pub fn reverse(w: &Walk) -> Walk {
    let mut pts = w.vertices().to_vec();
    pts.reverse();
    Walk { pts }
}

/// `(ω_i, …, ω_j)`, kept in place (not re-rooted).
pub fn subwalk(w: &Walk, i: usize, j: usize) -> Result<Walk> {
    if i > j || j > w.len() {
        return Err(AsawError::OutOfRange(format!("subwalk [{i},{j}] of a {}-step walk", w.len())));
    }
    Ok(Walk { pts: w.vertices()[i..=j].to_vec() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig1_walk;
    use crate::lattice::pt;

    #[test]
    fn figure_one_pairs() {
        let w = fig1_walk();
        assert_eq!(w.len(), 30);
        assert!(w.is_self_avoiding());
        assert_eq!(adj_pairs(&w).pair_count, 7);
    }

    #[test]
    fn classify_examples() {
        let c = classify(&Walk::parse("0,0;1,0").unwrap());
        assert!(c.bridge && c.half_space && c.self_avoiding);
        assert_eq!((c.span, c.bridge_point), (1, Some(1)));
        let c = classify(&Walk::parse("0,0;1,0;2,0;2,1;1,1").unwrap());
        assert!(c.half_space && !c.bridge);
        assert_eq!((c.span, c.bridge_point), (2, Some(3)));
        let c = classify(&Walk::parse("0,0;1,0;1,1;0,1;0,0").unwrap());
        assert!(c.polygon && !c.self_avoiding && !c.half_space);
    }

    #[test]
    fn adjacency_examples() {
        assert_eq!(adj_pairs(&Walk::parse("0,0;0,1;1,1;1,0").unwrap()).pair_count, 1);
        let sq = adj_pairs(&Walk::parse("0,0;1,0;1,1;0,1;0,0").unwrap());
        assert_eq!((sq.pair_count, sq.plaquettes.len()), (2, 1));
        let w1 = Walk::parse("0,0;0,1").unwrap();
        let w2 = Walk::parse("1,0;1,1").unwrap();
        let a = adj_between(&w1, &w2, false);
        assert_eq!(a.into_iter().collect::<Vec<_>>(), vec![Plaquette::new(pt(&[0, 0]), 0, 1).unwrap()]);
        let w = fig1_walk();
        assert_eq!(adj_between(&w, &w, false), adj_pairs(&w).plaquettes);
        let far = Walk::parse("5,5;5,6").unwrap();
        assert!(adj_between(&w1, &far, false).is_empty());
    }

    #[test]
    fn surgery() {
        let a = Walk::parse("0,0;1,0").unwrap();
        let b = Walk::parse("0,0;0,1").unwrap();
        assert_eq!(concat(&a, &b).unwrap(), Walk::parse("0,0;1,0;1,1").unwrap());
        assert_eq!(concat(&a, &Walk::zero(2)).unwrap(), a);
        assert!(is_bridge(&concat(&a, &a).unwrap()));
        let w = Walk::parse("0,0;1,0;1,1").unwrap();
        assert_eq!(reverse(&w), Walk::parse("1,1;1,0;0,0").unwrap());
        assert_eq!(reverse(&reverse(&w)), w);
        assert_eq!(subwalk(&w, 0, 1).unwrap(), a);
        assert_eq!(subwalk(&w, 0, 2).unwrap(), w);
        assert!(subwalk(&w, 1, 3).is_err());
        let f = fig1_walk();
        assert_eq!(adj_pairs(&reverse(&f)).pair_count, 7);
        for m in 0..=f.len() {
            let head = subwalk(&f, 0, m).unwrap();
            let tail = subwalk(&f, m, f.len()).unwrap().rooted();
            assert_eq!(concat(&head, &tail).unwrap(), f);
        }
        assert_eq!(Walk::parse(&f.to_text()).unwrap(), f);
        assert!(Walk::parse("0,0;0,0").is_err());
    }
}
