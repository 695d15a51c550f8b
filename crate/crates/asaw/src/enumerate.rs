//! Exhaustive depth-first enumeration with deterministic parallel reduction.
//!
//! Work is split by two-step prefixes; partial results are merged in canonical
//! prefix order so outputs do not depend on the number of threads.

use crate::error::{AsawError, Result};
use crate::interaction::{Memory, ModelParams};
use crate::lattice::{plaquette_of_segments, Point};
use crate::rational::{fmt_q, PowerCache, Q};
use crate::series::{Series, SpatialSeries};
use crate::stepdist::StepDistribution;
use crate::unfold::marked_count;
use crate::walks::Walk;
use num_bigint::BigInt;
use num_traits::{One, Zero};
use rayon::prelude::*;
use std::collections::{BTreeMap, HashMap, HashSet};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WalkFilter {
    All,
    SelfAvoiding,
    HalfSpace,
    Bridge,
}

impl WalkFilter {
    pub fn parse(s: &str) -> Result<WalkFilter> {
        match s {
            "walks" => Ok(WalkFilter::All),
            "saw" => Ok(WalkFilter::SelfAvoiding),
            "halfspace" => Ok(WalkFilter::HalfSpace),
            "bridges" => Ok(WalkFilter::Bridge),
            _ => Err(AsawError::Parse(format!("unknown walk class '{s}'"))),
        }
    }
}

/// A walk handed to visitors.
pub struct Visit<'a> {
    pub pts: &'a [Point],
    /// Adjacent pairs within the walk (tracked for self-avoiding filters).
    pub adj: usize,
    /// Adjacent pairs between the memory and the walk.
    pub cross: usize,
    /// Whether the walk is a bridge (meaningful under the half-space filters).
    pub bridge: bool,
}

impl Visit<'_> {
    pub fn len(&self) -> usize {
        self.pts.len() - 1
    }

    pub fn is_empty(&self) -> bool {
        self.pts.len() == 1
    }

    pub fn end(&self) -> Point {
        *self.pts.last().unwrap()
    }

    pub fn walk(&self) -> Walk {
        Walk::from_vec_unchecked(self.pts.to_vec())
    }
}

/// Largest walk length admitted by the exhaustive enumerators.
pub fn enumeration_cap(dist: &StepDistribution, filter: WalkFilter) -> usize {
    let s = dist.support().len() as f64;
    if dist.is_nearest_neighbour() && dist.dim() == 2 {
        return if filter == WalkFilter::All { 10 } else { 14 };
    }
    if dist.range_bound() == 1 && dist.dim() == 2 {
        return 7;
    }
    let budget = 2e8_f64;
    let mut n = 0usize;
    let mut count = 1.0;
    loop {
        let next = count * if n == 0 { s } else if filter == WalkFilter::All { s } else { s - 1.0 };
        if next > budget {
            break;
        }
        count = next;
        n += 1;
    }
    n.max(2)
}

/// Configuration of a single enumeration run.
#[derive(Clone)]
pub struct EnumSpec {
    pub n_max: usize,
    pub filter: WalkFilter,
    pub memory: Memory,
    pub endpoint_exempt: bool,
}

impl EnumSpec {
    pub fn new(n_max: usize, filter: WalkFilter) -> EnumSpec {
        EnumSpec { n_max, filter, memory: Memory::empty(), endpoint_exempt: false }
    }
}

struct Engine<'a> {
    steps: Vec<Point>,
    spec: &'a EnumSpec,
    avoid: HashSet<Point>,
    mem_edges: Vec<(Point, Point)>,
    saw: bool,
    half: bool,
}

struct Frame {
    pts: Vec<Point>,
    adj: Vec<usize>,
    cross: Vec<usize>,
    maxx: Vec<i64>,
}

impl<'a> Engine<'a> {
    fn new(p: &ModelParams, spec: &'a EnumSpec) -> Result<Engine<'a>> {
        let cap = enumeration_cap(p.dist(), spec.filter);
        if spec.n_max > cap {
            return Err(AsawError::CapExceeded(format!("n_max {} exceeds cap {cap}", spec.n_max)));
        }
        if p.dist().uniform_probability().is_none() {
            return Err(AsawError::Domain("enumeration requires a uniform step distribution".into()));
        }
        let origin = Point::origin(p.d());
        let mut avoid: HashSet<Point> = spec.memory.vertices().iter().copied().collect();
        avoid.remove(&origin);
        let mem_edges = spec
            .memory
            .walk()
            .map(|w| w.vertices().windows(2).filter(|e| e[1].sub(&e[0]).l1() == 1).map(|e| (e[0], e[1])).collect())
            .unwrap_or_default();
        Ok(Engine {
            steps: p.dist().support().iter().map(|(x, _)| *x).collect(),
            spec,
            avoid,
            mem_edges,
            saw: spec.filter != WalkFilter::All,
            half: matches!(spec.filter, WalkFilter::HalfSpace | WalkFilter::Bridge),
        })
    }

    fn root(&self, d: usize) -> Frame {
        Frame { pts: vec![Point::origin(d)], adj: vec![0], cross: vec![0], maxx: vec![0] }
    }

    /// Tries to extend the frame by one step. Returns `Some(terminal)` if accepted.
    #[inline]
    fn push(&self, f: &mut Frame, step: &Point) -> Option<bool> {
        let u = *f.pts.last().unwrap();
        let v = u.add(step);
        if self.half && v.get(0) <= 0 {
            return None;
        }
        if self.saw && f.pts.contains(&v) {
            return None;
        }
        let mut terminal = false;
        if self.avoid.contains(&v) {
            if !self.spec.endpoint_exempt {
                return None;
            }
            terminal = true;
        }
        let mut adj = *f.adj.last().unwrap();
        let mut cross = *f.cross.last().unwrap();
        if self.saw && step.l1() == 1 {
            let n = f.pts.len();
            for t in 0..n.saturating_sub(2) {
                if plaquette_of_segments(&f.pts[t], &f.pts[t + 1], &u, &v).is_some() {
                    adj += 1;
                }
            }
            for (a, b) in &self.mem_edges {
                if plaquette_of_segments(a, b, &u, &v).is_some() {
                    cross += 1;
                }
            }
        }
        let mx = (*f.maxx.last().unwrap()).max(v.get(0));
        f.pts.push(v);
        f.adj.push(adj);
        f.cross.push(cross);
        f.maxx.push(mx);
        Some(terminal)
    }

    fn pop(&self, f: &mut Frame) {
        f.pts.pop();
        f.adj.pop();
        f.cross.pop();
        f.maxx.pop();
    }

    #[inline]
    fn emit<A, V: Fn(&mut A, &Visit)>(&self, f: &Frame, acc: &mut A, visit: &V) {
        let bridge = self.half && f.pts.last().unwrap().get(0) == *f.maxx.last().unwrap();
        if self.spec.filter == WalkFilter::Bridge && !bridge && f.pts.len() > 1 {
            return;
        }
        let v = Visit { pts: &f.pts, adj: *f.adj.last().unwrap(), cross: *f.cross.last().unwrap(), bridge: bridge || f.pts.len() == 1 };
        visit(acc, &v);
    }

    fn dfs<A, V: Fn(&mut A, &Visit)>(&self, f: &mut Frame, acc: &mut A, visit: &V) {
        self.emit(f, acc, visit);
        if f.pts.len() > self.spec.n_max {
            return;
        }
        for s in &self.steps {
            if let Some(terminal) = self.push(f, s) {
                if terminal {
                    self.emit(f, acc, visit);
                } else {
                    self.dfs(f, acc, visit);
                }
                self.pop(f);
            }
        }
    }

    /// Prefixes of length ≤ 2 in canonical order, with a flag for whether they may be extended.
    fn prefixes(&self, d: usize) -> Vec<(Vec<Point>, bool)> {
        let mut out = Vec::new();
        let mut f = self.root(d);
        let depth = self.spec.n_max.min(2);
        self.collect_prefixes(&mut f, depth, &mut out);
        out
    }

    fn collect_prefixes(&self, f: &mut Frame, depth: usize, out: &mut Vec<(Vec<Point>, bool)>) {
        if f.pts.len() - 1 == depth {
            out.push((f.pts.clone(), true));
            return;
        }
        for s in &self.steps {
            if let Some(terminal) = self.push(f, s) {
                if terminal {
                    out.push((f.pts.clone(), false));
                } else {
                    self.collect_prefixes(f, depth, out);
                }
                self.pop(f);
            }
        }
    }

    /// Rebuilds a frame along a prefix (recomputing the incremental counters).
    fn frame_for(&self, prefix: &[Point]) -> Frame {
        let d = prefix[0].dim();
        let mut f = self.root(d);
        for w in prefix.windows(2) {
            self.push(&mut f, &w[1].sub(&w[0])).expect("prefix was accepted before");
        }
        f
    }
}

/// Visits every admissible walk once, sequentially, in canonical depth-first order.
pub fn enumerate_walks<F: FnMut(&Visit)>(p: &ModelParams, n_max: usize, filter: WalkFilter, mut visitor: F) -> Result<()> {
    let spec = EnumSpec::new(n_max, filter);
    enumerate_with(p, &spec, &mut visitor)
}

pub fn enumerate_with<F: FnMut(&Visit)>(p: &ModelParams, spec: &EnumSpec, visitor: &mut F) -> Result<()> {
    let eng = Engine::new(p, spec)?;
    let mut f = eng.root(p.d());
    let cell = std::cell::RefCell::new(visitor);
    let vis = |_: &mut (), v: &Visit| (cell.borrow_mut())(v);
    eng.dfs(&mut f, &mut (), &vis);
    Ok(())
}

/// Parallel fold over all admissible walks. Returns one accumulator per work unit,
/// in canonical order: first the walks shorter than the prefix depth, then one per prefix.
pub fn enumerate_fold<A, I, V>(p: &ModelParams, spec: &EnumSpec, init: I, visit: V) -> Result<Vec<A>>
where
    A: Send,
    I: Fn() -> A + Sync,
    V: Fn(&mut A, &Visit) + Sync,
{
    let eng = Engine::new(p, spec)?;
    let d = p.d();
    let depth = spec.n_max.min(2);
    // Walks strictly shorter than the prefix depth are visited up front.
    let mut head = init();
    {
        let mut f = eng.root(d);
        short_walks(&eng, &mut f, depth, &mut head, &visit);
    }
    let prefixes = eng.prefixes(d);
    let mut parts: Vec<A> = prefixes
        .par_iter()
        .map(|(pre, extend)| {
            let mut acc = init();
            let mut f = eng.frame_for(pre);
            if *extend {
                eng.dfs(&mut f, &mut acc, &visit);
            } else {
                eng.emit(&f, &mut acc, &visit);
            }
            acc
        })
        .collect();
    let mut out = Vec::with_capacity(parts.len() + 1);
    out.push(head);
    out.append(&mut parts);
    Ok(out)
}

fn short_walks<A, V: Fn(&mut A, &Visit)>(eng: &Engine, f: &mut Frame, depth: usize, acc: &mut A, visit: &V) {
    if f.pts.len() - 1 >= depth {
        return;
    }
    eng.emit(f, acc, visit);
    for s in &eng.steps {
        if let Some(terminal) = eng.push(f, s) {
            if !terminal {
                short_walks(eng, f, depth, acc, visit);
            }
            eng.pop(f);
        }
    }
}

/// Counts of walks by `(length, exponent)`; the weight of a class is `pⁿ (1+κ)^e`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct AdjTally {
    rows: Vec<Vec<u64>>,
}

impl AdjTally {
    pub fn add(&mut self, n: usize, e: usize) {
        if self.rows.len() <= n {
            self.rows.resize(n + 1, Vec::new());
        }
        let r = &mut self.rows[n];
        if r.len() <= e {
            r.resize(e + 1, 0);
        }
        r[e] += 1;
    }

    pub fn merge(&mut self, o: &AdjTally) {
        for (n, row) in o.rows.iter().enumerate() {
            for (e, &c) in row.iter().enumerate() {
                if c > 0 {
                    if self.rows.len() <= n {
                        self.rows.resize(n + 1, Vec::new());
                    }
                    let r = &mut self.rows[n];
                    if r.len() <= e {
                        r.resize(e + 1, 0);
                    }
                    r[e] += c;
                }
            }
        }
    }

    pub fn count(&self, n: usize) -> u64 {
        self.rows.get(n).map(|r| r.iter().sum()).unwrap_or(0)
    }

    pub fn max_len(&self) -> usize {
        self.rows.len().saturating_sub(1)
    }

    /// `Σ_e count(n, e) (1+κ)^e · pⁿ`.
    pub fn weight(&self, n: usize, step_prob: &Q, powers: &mut PowerCache) -> Q {
        let Some(row) = self.rows.get(n) else { return Q::zero() };
        let mut s = Q::zero();
        for (e, &c) in row.iter().enumerate() {
            if c > 0 {
                s += powers.get(e) * Q::from_integer(BigInt::from(c));
            }
        }
        s * num_traits::pow(step_prob.clone(), n)
    }
}

fn step_prob(p: &ModelParams) -> Q {
    p.dist().uniform_probability().expect("uniform distribution").clone()
}

/// Walk counts by length and adjacency, independent of κ.
#[derive(Clone, Debug, Default)]
pub struct MassCounts {
    pub c: AdjTally,
    pub b: AdjTally,
    pub h: AdjTally,
    /// Half-space walks split by the number of marked plaquettes.
    pub hk: BTreeMap<usize, AdjTally>,
}

impl MassCounts {
    fn merge(&mut self, o: &MassCounts) {
        self.c.merge(&o.c);
        self.b.merge(&o.b);
        self.h.merge(&o.h);
        for (k, t) in &o.hk {
            self.hk.entry(*k).or_default().merge(t);
        }
    }
}

/// Enumerates self-avoiding walks once, recording counts needed for any κ.
pub fn mass_counts(p: &ModelParams, n_max: usize, with_marked: bool) -> Result<MassCounts> {
    let spec = EnumSpec::new(n_max, WalkFilter::SelfAvoiding);
    let parts = enumerate_fold(p, &spec, MassCounts::default, |acc, v| {
        let n = v.len();
        acc.c.add(n, v.adj);
        let x0 = v.pts[0].get(0);
        let half = v.pts[1..].iter().all(|q| q.get(0) > x0);
        if half {
            acc.h.add(n, v.adj);
            let xn = v.end().get(0);
            if v.pts.iter().all(|q| q.get(0) <= xn) {
                acc.b.add(n, v.adj);
            }
            if with_marked {
                let k = marked_count(v.pts);
                acc.hk.entry(k).or_default().add(n, v.adj);
            }
        }
    })?;
    let mut total = MassCounts::default();
    for part in &parts {
        total.merge(part);
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassRow {
    pub n: usize,
    pub c: Q,
    pub b: Q,
    pub h: Q,
    pub h_k: BTreeMap<usize, Q>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MassTable {
    pub rows: Vec<MassRow>,
}

impl MassCounts {
    pub fn table(&self, p: &ModelParams, n_max: usize) -> MassTable {
        let sp = step_prob(p);
        let mut pc = PowerCache::new(p.kappa(), 2 * n_max + 2);
        let rows = (0..=n_max)
            .map(|n| MassRow {
                n,
                c: self.c.weight(n, &sp, &mut pc),
                b: self.b.weight(n, &sp, &mut pc),
                h: self.h.weight(n, &sp, &mut pc),
                h_k: self
                    .hk
                    .iter()
                    .filter(|(_, t)| t.count(n) > 0)
                    .map(|(k, t)| (*k, t.weight(n, &sp, &mut pc)))
                    .collect(),
            })
            .collect();
        MassTable { rows }
    }
}

/// Exact `c_n`, `b_n`, `h_n` and `h_n^k` for `0 ≤ n ≤ n_max`.
pub fn mass_table(p: &ModelParams, n_max: usize) -> Result<MassTable> {
    Ok(mass_counts(p, n_max, true)?.table(p, n_max))
}

impl MassTable {
    pub fn c(&self) -> Vec<Q> {
        self.rows.iter().map(|r| r.c.clone()).collect()
    }

    pub fn b(&self) -> Vec<Q> {
        self.rows.iter().map(|r| r.b.clone()).collect()
    }

    pub fn h(&self) -> Vec<Q> {
        self.rows.iter().map(|r| r.h.clone()).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,c_n,b_n,h_n\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{},{}\n", r.n, fmt_q(&r.c), fmt_q(&r.b), fmt_q(&r.h)));
        }
        s
    }
}

/// Generic class sums `Σ_{|ω| = n} W_κ(ω)` over a walk class (no adjacency for `All`).
pub fn class_series(p: &ModelParams, n_max: usize, filter: WalkFilter) -> Result<Vec<Q>> {
    let spec = EnumSpec::new(n_max, filter);
    let parts = enumerate_fold(p, &spec, AdjTally::default, |acc, v| acc.add(v.len(), v.adj))?;
    let mut t = AdjTally::default();
    for part in &parts {
        t.merge(part);
    }
    let sp = step_prob(p);
    let mut pc = PowerCache::new(p.kappa(), 2 * n_max + 2);
    Ok((0..=n_max).map(|n| t.weight(n, &sp, &mut pc)).collect())
}

type EndpointTally = HashMap<Point, AdjTally>;

fn endpoint_series(p: &ModelParams, spec: &EnumSpec, min_length: usize) -> Result<SpatialSeries> {
    let parts = enumerate_fold(p, spec, EndpointTally::new, |acc, v| {
        if v.len() >= min_length {
            acc.entry(v.end()).or_default().add(v.len(), v.adj + v.cross);
        }
    })?;
    let mut total: BTreeMap<Point, AdjTally> = BTreeMap::new();
    for part in &parts {
        let mut keys: Vec<&Point> = part.keys().collect();
        keys.sort();
        for x in keys {
            total.entry(*x).or_default().merge(&part[x]);
        }
    }
    let sp = step_prob(p);
    let mut pc = PowerCache::new(p.kappa(), 4 * spec.n_max + 8);
    let mut out = SpatialSeries::new(spec.n_max);
    for (x, t) in total {
        let coeffs = (0..=spec.n_max).map(|n| t.weight(n, &sp, &mut pc)).collect();
        out.insert(x, Series::from_coeffs(coeffs, spec.n_max));
    }
    out.prune();
    Ok(out)
}

/// `[zⁿ] G(x) = Σ_{SAW ω: o→x, |ω|=n} W_κ(ω)`.
pub fn two_point_coeffs(p: &ModelParams, order: usize) -> Result<SpatialSeries> {
    endpoint_series(p, &EnumSpec::new(order, WalkFilter::SelfAvoiding), 0)
}

/// Two-point coefficients with a memory: walks from o avoiding η after step 0
/// (except at the final vertex when `endpoint_exempt`), weighted by `W_κ(ω; η)`.
pub fn memory_two_point_coeffs(
    p: &ModelParams,
    eta: &Memory,
    order: usize,
    endpoint_exempt: bool,
    min_length: usize,
) -> Result<SpatialSeries> {
    let spec = EnumSpec { n_max: order, filter: WalkFilter::SelfAvoiding, memory: eta.clone(), endpoint_exempt };
    endpoint_series(p, &spec, min_length)
}

/// Susceptibility polynomial of the model on the torus `(Z/side)^d`.
pub fn torus_susceptibility(p: &ModelParams, side: i64, order: usize) -> Result<Series> {
    if side < 3 {
        return Err(AsawError::Domain(format!("torus side {side} < 3")));
    }
    if side > 4 {
        return Err(AsawError::CapExceeded(format!("torus side {side} > 4")));
    }
    let d = p.d();
    let volume = side.pow(d as u32) as usize;
    if volume > 64 {
        return Err(AsawError::CapExceeded(format!("torus volume {volume} > 64")));
    }
    let order = order.min(volume - 1);
    let sp = step_prob(p);
    let steps: Vec<Point> = p.dist().support().iter().map(|(x, _)| *x).collect();
    let origin = Point::origin(d);
    let mut tally = AdjTally::default();
    let mut pts = vec![origin];
    let mut used: u64 = 1 << torus_index(&origin, side);
    let mut edges: Vec<(Point, usize)> = Vec::new();
    let mut adjs: Vec<usize> = vec![0];
    torus_dfs(&mut pts, &mut used, &mut edges, &mut adjs, &steps, order, side, &mut tally);
    let mut pc = PowerCache::new(p.kappa(), 4 * order + 4);
    let coeffs = (0..=order).map(|n| tally.weight(n, &sp, &mut pc)).collect();
    Ok(Series::from_coeffs(coeffs, order))
}

fn torus_wrap(x: &Point, side: i64) -> Point {
    let c: Vec<i64> = x.coords().iter().map(|v| v.rem_euclid(side)).collect();
    Point::new(&c)
}

fn torus_index(x: &Point, side: i64) -> usize {
    x.coords().iter().rev().fold(0usize, |acc, &v| acc * side as usize + v as usize)
}

/// Two torus edges `(lo, axis)` are adjacent when parallel and offset by `±e_b`, `b ≠ axis`.
fn torus_adjacent(e: &(Point, usize), f: &(Point, usize), side: i64) -> bool {
    if e.1 != f.1 {
        return false;
    }
    let d = e.0.dim();
    let diff = f.0.sub(&e.0);
    let mut off_axis = None;
    for k in 0..d {
        let r = diff.get(k).rem_euclid(side);
        if r == 0 {
            continue;
        }
        if off_axis.is_some() || k == e.1 || (r != 1 && r != side - 1) {
            return false;
        }
        off_axis = Some(k);
    }
    off_axis.is_some()
}

#[allow(clippy::too_many_arguments)]
fn torus_dfs(
    pts: &mut Vec<Point>,
    used: &mut u64,
    edges: &mut Vec<(Point, usize)>,
    adjs: &mut Vec<usize>,
    steps: &[Point],
    order: usize,
    side: i64,
    tally: &mut AdjTally,
) {
    let depth = pts.len() - 1;
    tally.add(depth, *adjs.last().unwrap());
    if depth == order {
        return;
    }
    let cur = *pts.last().unwrap();
    for s in steps {
        let v = torus_wrap(&cur.add(s), side);
        let vi = torus_index(&v, side);
        if *used >> vi & 1 == 1 {
            continue;
        }
        let mut a = *adjs.last().unwrap();
        let edge = s.unit_axis().map(|(axis, sg)| (if sg > 0 { cur } else { v }, axis));
        if let Some(e) = &edge {
            a += edges.iter().filter(|f| torus_adjacent(f, e, side)).count();
            edges.push(*e);
        }
        pts.push(v);
        *used |= 1 << vi;
        adjs.push(a);
        torus_dfs(pts, used, edges, adjs, steps, order, side, tally);
        adjs.pop();
        *used &= !(1 << vi);
        pts.pop();
        if edge.is_some() {
            edges.pop();
        }
    }
}

/// Sum of `z^{|ω|}` weights over a finite list of walks, as a polynomial.
pub fn weights_to_series(weights: &[(usize, Q)], order: usize) -> Series {
    let mut s = Series::zero(order);
    for (n, w) in weights {
        if *n <= order {
            *s.coeff_mut(*n) += w;
        }
    }
    s
}

/// Convenience: `(1+κ)^e pⁿ` for a uniform distribution.
pub fn class_weight(p: &ModelParams, n: usize, e: usize) -> Q {
    crate::rational::one_plus_pow(p.kappa(), e as i64) * num_traits::pow(step_prob(p), n)
}

pub fn one() -> Q {
    Q::one()
}
