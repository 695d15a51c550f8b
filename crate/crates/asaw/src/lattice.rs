//! Points, unit edges and plaquettes of the hypercubic lattice Z^d.
//!
//! Axes are indexed from 0; axis 0 is the first coordinate direction.

use crate::error::{AsawError, Result};
use std::fmt;

/// Largest supported dimension. Points are stored inline so they are `Copy`.
pub const MAX_DIM: usize = 8;

#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Point {
    d: u8,
    c: [i64; MAX_DIM],
}

impl Point {
    pub fn new(coords: &[i64]) -> Point {
        assert!(
            (1..=MAX_DIM).contains(&coords.len()),
            "dimension {} outside 1..={MAX_DIM}",
            coords.len()
        );
        let mut c = [0; MAX_DIM];
        c[..coords.len()].copy_from_slice(coords);
        Point { d: coords.len() as u8, c }
    }

    pub fn origin(d: usize) -> Point {
        Point::new(&vec![0; d])
    }

    /// The unit vector along `axis`, scaled by `sign`.
    pub fn unit(d: usize, axis: usize, sign: i64) -> Point {
        let mut p = Point::origin(d);
        p.c[axis] = sign;
        p
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d as usize
    }

    #[inline]
    pub fn coords(&self) -> &[i64] {
        &self.c[..self.d as usize]
    }

    #[inline]
    pub fn get(&self, axis: usize) -> i64 {
        self.c[axis]
    }

    #[inline]
    pub fn is_origin(&self) -> bool {
        self.c.iter().all(|&x| x == 0)
    }

    #[inline]
    pub fn add(&self, o: &Point) -> Point {
        let mut r = *self;
        for i in 0..MAX_DIM {
            r.c[i] += o.c[i];
        }
        r
    }

    #[inline]
    pub fn sub(&self, o: &Point) -> Point {
        let mut r = *self;
        for i in 0..MAX_DIM {
            r.c[i] -= o.c[i];
        }
        r
    }

    #[inline]
    pub fn neg(&self) -> Point {
        let mut r = *self;
        for i in 0..MAX_DIM {
            r.c[i] = -r.c[i];
        }
        r
    }

    /// `self + delta * e_axis`.
    #[inline]
    pub fn shifted(&self, axis: usize, delta: i64) -> Point {
        let mut r = *self;
        r.c[axis] += delta;
        r
    }

    pub fn with(&self, axis: usize, value: i64) -> Point {
        let mut r = *self;
        r.c[axis] = value;
        r
    }

    #[inline]
    pub fn l1(&self) -> i64 {
        self.c.iter().map(|x| x.abs()).sum()
    }

    #[inline]
    pub fn linf(&self) -> i64 {
        self.c.iter().map(|x| x.abs()).max().unwrap_or(0)
    }

    #[inline]
    pub fn l2sq(&self) -> i64 {
        self.c.iter().map(|x| x * x).sum()
    }

    /// If `self` is `±e_i`, returns `(i, ±1)`.
    #[inline]
    pub fn unit_axis(&self) -> Option<(usize, i64)> {
        if self.l1() != 1 {
            return None;
        }
        (0..self.dim()).find(|&i| self.c[i] != 0).map(|i| (i, self.c[i]))
    }

    pub fn cwise_min(&self, o: &Point) -> Point {
        let mut r = *self;
        for i in 0..MAX_DIM {
            r.c[i] = r.c[i].min(o.c[i]);
        }
        r
    }

    pub fn parse(s: &str) -> Result<Point> {
        let coords: std::result::Result<Vec<i64>, _> =
            s.split(',').map(|t| t.trim().parse::<i64>()).collect();
        let coords = coords.map_err(|_| AsawError::Parse(format!("bad point '{s}'")))?;
        if coords.is_empty() || coords.len() > MAX_DIM {
            return Err(AsawError::BadDimension(coords.len()));
        }
        Ok(Point::new(&coords))
    }
}

impl fmt::Display for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.coords().iter().map(|x| x.to_string()).collect();
        write!(f, "{}", parts.join(","))
    }
}

impl fmt::Debug for Point {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

/// An undirected nearest-neighbour edge, stored with the smaller endpoint first.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct UnitEdge {
    a: Point,
    b: Point,
}

impl UnitEdge {
    pub fn new(u: Point, v: Point) -> Result<UnitEdge> {
        if u.dim() != v.dim() {
            return Err(AsawError::DimensionMismatch(u.dim(), v.dim()));
        }
        if u.sub(&v).l1() != 1 {
            return Err(AsawError::Domain(format!("{u:?}-{v:?} is not a unit edge")));
        }
        Ok(UnitEdge::new_unchecked(u, v))
    }

    #[inline]
    pub(crate) fn new_unchecked(u: Point, v: Point) -> UnitEdge {
        if u <= v {
            UnitEdge { a: u, b: v }
        } else {
            UnitEdge { a: v, b: u }
        }
    }

    #[inline]
    pub fn lo(&self) -> Point {
        self.a
    }

    #[inline]
    pub fn hi(&self) -> Point {
        self.b
    }

    #[inline]
    pub fn axis(&self) -> usize {
        self.b.sub(&self.a).unit_axis().expect("unit edge").0
    }

    pub fn dim(&self) -> usize {
        self.a.dim()
    }

    pub fn contains(&self, p: &Point) -> bool {
        self.a == *p || self.b == *p
    }
}

/// Unit square spanned by axes `i < j` at its coordinatewise-minimal vertex.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Debug)]
pub struct Plaquette {
    base: Point,
    i: u8,
    j: u8,
}

impl Plaquette {
    pub fn new(base: Point, i: usize, j: usize) -> Result<Plaquette> {
        if i >= j || j >= base.dim() {
            return Err(AsawError::Domain(format!("bad plaquette axes ({i},{j})")));
        }
        Ok(Plaquette { base, i: i as u8, j: j as u8 })
    }

    #[inline]
    pub fn base(&self) -> Point {
        self.base
    }

    #[inline]
    pub fn axes(&self) -> (usize, usize) {
        (self.i as usize, self.j as usize)
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Vertices in cyclic order around the square.
    pub fn vertices(&self) -> [Point; 4] {
        let (i, j) = self.axes();
        let b = self.base;
        [b, b.shifted(i, 1), b.shifted(i, 1).shifted(j, 1), b.shifted(j, 1)]
    }

    #[inline]
    pub fn contains(&self, p: &Point) -> bool {
        let (i, j) = self.axes();
        for k in 0..self.base.dim() {
            let off = p.get(k) - self.base.get(k);
            if k == i || k == j {
                if off != 0 && off != 1 {
                    return false;
                }
            } else if off != 0 {
                return false;
            }
        }
        true
    }

    pub fn edges(&self) -> [UnitEdge; 4] {
        let v = self.vertices();
        [
            UnitEdge::new_unchecked(v[0], v[1]),
            UnitEdge::new_unchecked(v[1], v[2]),
            UnitEdge::new_unchecked(v[2], v[3]),
            UnitEdge::new_unchecked(v[3], v[0]),
        ]
    }

    pub fn shares_vertex(&self, o: &Plaquette) -> bool {
        self.vertices().iter().any(|v| o.contains(v))
    }

    pub fn from_vertices(vs: &[Point; 4]) -> Option<Plaquette> {
        let mut base = vs[0];
        for v in vs.iter() {
            base = base.cwise_min(v);
        }
        let d = base.dim();
        let mut axes = Vec::new();
        for k in 0..d {
            if vs.iter().any(|v| v.get(k) != base.get(k)) {
                axes.push(k);
            }
        }
        if axes.len() != 2 {
            return None;
        }
        let p = Plaquette { base, i: axes[0] as u8, j: axes[1] as u8 };
        let mut seen = [false; 4];
        let pv = p.vertices();
        for v in vs.iter() {
            let idx = pv.iter().position(|w| w == v)?;
            if seen[idx] {
                return None;
            }
            seen[idx] = true;
        }
        Some(p)
    }
}

/// Returns the plaquette spanned by two unit edges, if their four endpoints form one.
pub fn plaquette_of_edges(e1: &UnitEdge, e2: &UnitEdge) -> Result<Option<Plaquette>> {
    if e1.dim() != e2.dim() {
        return Err(AsawError::DimensionMismatch(e1.dim(), e2.dim()));
    }
    Ok(plaquette_of_segments(&e1.a, &e1.b, &e2.a, &e2.b))
}

/// Plaquette test for two segments given by endpoints (orientation irrelevant).
/// Non-unit segments never span a plaquette.
#[inline]
pub fn plaquette_of_segments(u1: &Point, v1: &Point, u2: &Point, v2: &Point) -> Option<Plaquette> {
    let s1 = v1.sub(u1);
    let (a, _) = s1.unit_axis()?;
    let s2 = v2.sub(u2);
    let (a2, _) = s2.unit_axis()?;
    if a != a2 {
        return None;
    }
    let lo1 = if s1.get(a) > 0 { *u1 } else { *v1 };
    let lo2 = if s2.get(a) > 0 { *u2 } else { *v2 };
    let off = lo2.sub(&lo1);
    let (b, sign) = off.unit_axis()?;
    if b == a {
        return None;
    }
    let base = if sign > 0 { lo1 } else { lo2 };
    let (i, j) = if a < b { (a, b) } else { (b, a) };
    Some(Plaquette { base, i: i as u8, j: j as u8 })
}

/// A vertex or an edge whose incident plaquettes are requested.
#[derive(Clone, Copy, Debug)]
pub enum Site {
    Vertex(Point),
    Edge(UnitEdge),
}

/// All plaquettes containing the site, in canonical order.
pub fn incident_plaquettes(site: &Site) -> Vec<Plaquette> {
    let mut out = Vec::new();
    match site {
        Site::Vertex(p) => {
            let d = p.dim();
            for i in 0..d {
                for j in i + 1..d {
                    for si in [0, -1] {
                        for sj in [0, -1] {
                            let base = p.shifted(i, si).shifted(j, sj);
                            out.push(Plaquette { base, i: i as u8, j: j as u8 });
                        }
                    }
                }
            }
        }
        Site::Edge(e) => {
            let d = e.dim();
            let a = e.axis();
            for b in (0..d).filter(|&b| b != a) {
                for s in [0, -1] {
                    let base = e.lo().shifted(b, s);
                    let (i, j) = if a < b { (a, b) } else { (b, a) };
                    out.push(Plaquette { base, i: i as u8, j: j as u8 });
                }
            }
        }
    }
    out.sort();
    out
}

/// Lattice symmetries used by the path transformations.
#[derive(Clone, Copy, Debug)]
pub enum Symmetry {
    Translate(Point),
    /// Reflection in the coordinate hyperplane `{x : x_axis = 0}`.
    Reflect(usize),
}

pub trait Transform: Sized {
    fn apply(&self, s: &Symmetry) -> Self;
}

/// Free-function form of [`Transform::apply`].
pub fn apply_symmetry<T: Transform>(op: &Symmetry, target: &T) -> T {
    target.apply(op)
}

impl Transform for Point {
    fn apply(&self, s: &Symmetry) -> Point {
        match s {
            Symmetry::Translate(x) => self.add(x),
            Symmetry::Reflect(axis) => self.with(*axis, -self.get(*axis)),
        }
    }
}

impl Transform for UnitEdge {
    fn apply(&self, s: &Symmetry) -> UnitEdge {
        UnitEdge::new_unchecked(self.a.apply(s), self.b.apply(s))
    }
}

impl Transform for Plaquette {
    fn apply(&self, s: &Symmetry) -> Plaquette {
        match s {
            Symmetry::Translate(x) => Plaquette { base: self.base.add(x), ..*self },
            Symmetry::Reflect(_) => {
                let v = self.vertices().map(|p| p.apply(s));
                Plaquette::from_vertices(&v).expect("reflection preserves plaquettes")
            }
        }
    }
}

/// Convenience constructor: `pt(&[1, 2])`.
pub fn pt(c: &[i64]) -> Point {
    Point::new(c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(a: &[i64], b: &[i64]) -> UnitEdge {
        UnitEdge::new(pt(a), pt(b)).unwrap()
    }

    #[test]
    fn plaquette_examples() {
        let p = plaquette_of_edges(&edge(&[0, 0], &[0, 1]), &edge(&[1, 0], &[1, 1])).unwrap();
        assert_eq!(p, Some(Plaquette::new(pt(&[0, 0]), 0, 1).unwrap()));
        let p = plaquette_of_edges(&edge(&[0, 0], &[0, 1]), &edge(&[0, 1], &[1, 1])).unwrap();
        assert_eq!(p, None);
        let p = plaquette_of_edges(&edge(&[0, 0], &[0, 1]), &edge(&[2, 0], &[2, 1])).unwrap();
        assert_eq!(p, None);
        let e3 = UnitEdge::new(pt(&[0, 0, 0]), pt(&[1, 0, 0])).unwrap();
        assert!(plaquette_of_edges(&edge(&[0, 0], &[0, 1]), &e3).is_err());
    }

    #[test]
    fn incidence_counts() {
        assert_eq!(incident_plaquettes(&Site::Vertex(pt(&[0, 0]))).len(), 4);
        assert_eq!(incident_plaquettes(&Site::Edge(edge(&[0, 0], &[1, 0]))).len(), 2);
        assert_eq!(incident_plaquettes(&Site::Vertex(Point::origin(3))).len(), 12);
        for d in 2..=5usize {
            let v = incident_plaquettes(&Site::Vertex(Point::origin(d)));
            assert_eq!(v.len(), 2 * d * (d - 1));
            assert!(v.iter().all(|p| p.contains(&Point::origin(d))));
            let e = UnitEdge::new(Point::origin(d), Point::unit(d, d - 1, 1)).unwrap();
            let v = incident_plaquettes(&Site::Edge(e));
            assert_eq!(v.len(), 2 * (d - 1));
            assert!(v.iter().all(|p| p.contains(&e.lo()) && p.contains(&e.hi())));
        }
    }

    #[test]
    fn symmetries() {
        assert_eq!(pt(&[1, 2]).apply(&Symmetry::Translate(pt(&[0, 1]))), pt(&[1, 3]));
        assert_eq!(pt(&[3, -1]).apply(&Symmetry::Reflect(0)), pt(&[-3, -1]));
        let p = Plaquette::new(pt(&[2, 5]), 0, 1).unwrap();
        let r = p.apply(&Symmetry::Reflect(0));
        assert_eq!(r.base(), pt(&[-3, 5]));
        assert_eq!(r.apply(&Symmetry::Reflect(0)), p);
    }

    /// Brute-force four-distinct-vertices oracle for the plaquette relation.
    fn oracle(e1: &UnitEdge, e2: &UnitEdge) -> bool {
        let vs = [e1.lo(), e1.hi(), e2.lo(), e2.hi()];
        for x in 0..4 {
            for y in x + 1..4 {
                if vs[x] == vs[y] {
                    return false;
                }
            }
        }
        Plaquette::from_vertices(&vs).is_some()
    }

    #[test]
    fn plaquette_relation_matches_oracle_in_box() {
        let mut edges = Vec::new();
        for x in 0..5 {
            for y in 0..5 {
                let p = pt(&[x, y]);
                if x < 4 {
                    edges.push(UnitEdge::new(p, p.shifted(0, 1)).unwrap());
                }
                if y < 4 {
                    edges.push(UnitEdge::new(p, p.shifted(1, 1)).unwrap());
                }
            }
        }
        for a in &edges {
            for b in &edges {
                let p = plaquette_of_edges(a, b).unwrap();
                assert_eq!(p.is_some(), oracle(a, b));
                assert_eq!(p, plaquette_of_edges(b, a).unwrap());
                if let Some(p) = p {
                    assert!(p.contains(&a.lo()) && p.contains(&b.hi()));
                }
            }
        }
    }

    #[test]
    fn neighbourhood_size_r() {
        for d in 2..=4usize {
            let p = Plaquette::new(Point::origin(d), 0, 1).unwrap();
            let mut near = std::collections::BTreeSet::new();
            for v in p.vertices() {
                for q in incident_plaquettes(&Site::Vertex(v)) {
                    if q != p {
                        near.insert(q);
                    }
                }
            }
            assert_eq!(near.len(), 8 * (d - 1) * (d - 1), "d={d}");
        }
    }
}
