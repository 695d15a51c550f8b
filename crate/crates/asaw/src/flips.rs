//! Plaquette flips, greedy disjoint selection, and memory-guided inversion.

use crate::error::{AsawError, Result};
use crate::enumerate::{enumerate_fold, EnumSpec, WalkFilter};
use crate::interaction::{asaw_weight, ceil_alpha, ModelParams};
use crate::lattice::{Plaquette, Point, UnitEdge};
use crate::rational::Q;
use crate::walks::{adj_between, Walk};
use std::collections::{BTreeSet, HashSet};

/// A set of pairwise vertex-disjoint plaquettes.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlipSet {
    plaquettes: Vec<Plaquette>,
}

impl FlipSet {
    pub fn new<I: IntoIterator<Item = Plaquette>>(items: I) -> Result<FlipSet> {
        let mut plaquettes: Vec<Plaquette> = items.into_iter().collect();
        plaquettes.sort();
        plaquettes.dedup();
        for a in 0..plaquettes.len() {
            for b in a + 1..plaquettes.len() {
                if plaquettes[a].shares_vertex(&plaquettes[b]) {
                    return Err(AsawError::NotDisjoint);
                }
            }
        }
        Ok(FlipSet { plaquettes })
    }

    pub fn empty() -> FlipSet {
        FlipSet::default()
    }

    pub fn plaquettes(&self) -> &[Plaquette] {
        &self.plaquettes
    }

    pub fn len(&self) -> usize {
        self.plaquettes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plaquettes.is_empty()
    }
}

/// Index `i` such that exactly `ω_i, ω_{i+1}` lie in `P` and form a unit edge.
pub fn flippable_index(p: &Plaquette, w: &Walk) -> Option<usize> {
    let mut hits = [0usize; 3];
    let mut count = 0;
    for (j, v) in w.vertices().iter().enumerate() {
        if p.contains(v) {
            if count == 2 {
                return None;
            }
            hits[count] = j;
            count += 1;
        }
    }
    if count != 2 || hits[1] != hits[0] + 1 {
        return None;
    }
    let i = hits[0];
    if w.vertex(i + 1).sub(&w.vertex(i)).l1() != 1 {
        return None;
    }
    Some(i)
}

pub fn is_flippable(p: &Plaquette, w: &Walk) -> bool {
    flippable_index(p, w).is_some()
}

/// The two vertices of `P` opposite to the edge `(u, v)`, ordered as `(u', v')`.
fn detour(p: &Plaquette, u: &Point, v: &Point) -> (Point, Point) {
    let (i, j) = p.axes();
    let along = v.sub(u).unit_axis().expect("unit edge").0;
    let other = if along == i { j } else { i };
    let s = if u.get(other) == p.base().get(other) { 1 } else { -1 };
    (u.shifted(other, s), v.shifted(other, s))
}

/// Replaces the unique edge of `w` in `P` by the other three sides; identity if not flippable.
pub fn flip(p: &Plaquette, w: &Walk) -> Walk {
    match flippable_index(p, w) {
        None => w.clone(),
        Some(i) => flip_at(p, w, i),
    }
}

fn flip_at(p: &Plaquette, w: &Walk, i: usize) -> Walk {
    let pts = w.vertices();
    let (u, v) = (pts[i], pts[i + 1]);
    let (a, b) = detour(p, &u, &v);
    let mut out = Vec::with_capacity(pts.len() + 2);
    out.extend_from_slice(&pts[..=i]);
    out.push(a);
    out.push(b);
    out.extend_from_slice(&pts[i + 1..]);
    Walk::from_vec_unchecked(out)
}

/// Applies all flips of a disjoint set; the result does not depend on the order.
pub fn flip_set(b: &FlipSet, w: &Walk) -> Walk {
    let mut cur = w.clone();
    for p in b.plaquettes() {
        cur = flip(p, &cur);
    }
    cur
}

/// Greedy pairwise-disjoint subset of `a`, scanned in canonical order.
pub fn greedy_disjoint<'a, I>(a: I) -> Vec<Plaquette>
where
    I: IntoIterator<Item = &'a Plaquette>,
{
    let sorted: BTreeSet<Plaquette> = a.into_iter().copied().collect();
    let mut chosen: Vec<Plaquette> = Vec::new();
    for p in sorted {
        if chosen.iter().all(|c| !c.shares_vertex(&p)) {
            chosen.push(p);
        }
    }
    chosen
}

/// The committed choice: the first `⌈α|A|⌉` plaquettes of the greedy pass.
pub fn committed_choice(a: &BTreeSet<Plaquette>, d: usize) -> Vec<Plaquette> {
    let need = ceil_alpha(d, a.len());
    let mut g = greedy_disjoint(a.iter());
    assert!(g.len() >= need, "greedy selection below the guaranteed fraction");
    g.truncate(need);
    g
}

/// Recovers `(ω, B)` from `flip_B(ω)` and a memory `η` such that `η ∘ ω` is self-avoiding
/// and every plaquette of `B` is spanned by an edge of `η` and an edge of `ω`.
pub fn unflip_with_memory(flipped: &Walk, eta: &Walk) -> Result<(Walk, FlipSet)> {
    let eta_edges: HashSet<UnitEdge> = eta.unit_edges().into_iter().collect();
    let pts = flipped.vertices();
    let n = flipped.len();
    let shared: Vec<bool> = (0..n)
        .map(|t| {
            pts[t + 1].sub(&pts[t]).l1() == 1 && eta_edges.contains(&UnitEdge::new_unchecked(pts[t], pts[t + 1]))
        })
        .collect();
    let mut windows: Vec<(usize, Plaquette)> = Vec::new();
    let mut t = 0;
    while t < n {
        if !shared[t] {
            t += 1;
            continue;
        }
        let mut end = t;
        while end + 1 < n && shared[end + 1] {
            end += 1;
        }
        let run = end - t + 1;
        // A detour occupies edges [s, s+2]; its middle edge lies in η, and possibly one side.
        let candidates: Vec<usize> = match run {
            1 => vec![t.wrapping_sub(1)],
            2 => vec![t.wrapping_sub(1), t],
            _ => return Err(AsawError::NoPreimage(format!("{run} consecutive memory edges at step {t}"))),
        };
        let mut found = None;
        for s in candidates {
            if s == usize::MAX || s + 3 > n {
                continue;
            }
            if s + 2 < end || s > t {
                continue;
            }
            let quad = [pts[s], pts[s + 1], pts[s + 2], pts[s + 3]];
            if let Some(p) = Plaquette::from_vertices(&quad) {
                found = Some((s, p));
                break;
            }
        }
        let (s, p) = found.ok_or_else(|| AsawError::NoPreimage(format!("no plaquette around step {t}")))?;
        windows.push((s, p));
        t = end + 1;
    }
    let mut out = Vec::with_capacity(pts.len());
    let mut k = 0;
    let mut i = 0;
    while i < pts.len() {
        out.push(pts[i]);
        if k < windows.len() && windows[k].0 == i {
            i += 3;
            k += 1;
        } else {
            i += 1;
        }
    }
    let walk = Walk::new(out)?;
    let set = FlipSet::new(windows.iter().map(|w| w.1))?;
    for p in set.plaquettes() {
        if !is_flippable(p, &walk) {
            return Err(AsawError::NoPreimage("recovered plaquette is not flippable".into()));
        }
    }
    if flip_set(&set, &walk) != *flipped {
        return Err(AsawError::NoPreimage("re-flip does not reproduce the input".into()));
    }
    Ok((walk, set))
}

/// Counts from the exhaustive flip suite; every failure field should be zero.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FlipSuiteReport {
    pub walks: usize,
    pub flips: usize,
    pub pairs: usize,
    pub memory_cases: usize,
    pub adjacency_sets: usize,
    pub endpoint_failures: usize,
    pub saw_failures: usize,
    pub inversion_failures: usize,
    pub commute_failures: usize,
    pub ratio_failures: usize,
    pub memory_failures: usize,
    pub greedy_failures: usize,
}

impl FlipSuiteReport {
    pub fn ok(&self) -> bool {
        self.endpoint_failures
            + self.saw_failures
            + self.inversion_failures
            + self.commute_failures
            + self.ratio_failures
            + self.memory_failures
            + self.greedy_failures
            == 0
    }

    fn merge(&mut self, o: &FlipSuiteReport) {
        self.walks += o.walks;
        self.flips += o.flips;
        self.pairs += o.pairs;
        self.memory_cases += o.memory_cases;
        self.adjacency_sets += o.adjacency_sets;
        self.endpoint_failures += o.endpoint_failures;
        self.saw_failures += o.saw_failures;
        self.inversion_failures += o.inversion_failures;
        self.commute_failures += o.commute_failures;
        self.ratio_failures += o.ratio_failures;
        self.memory_failures += o.memory_failures;
        self.greedy_failures += o.greedy_failures;
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "walks": self.walks,
            "flips": self.flips,
            "pairs": self.pairs,
            "memory_cases": self.memory_cases,
            "adjacency_sets": self.adjacency_sets,
            "endpoint_failures": self.endpoint_failures,
            "saw_failures": self.saw_failures,
            "inversion_failures": self.inversion_failures,
            "commute_failures": self.commute_failures,
            "ratio_failures": self.ratio_failures,
            "memory_failures": self.memory_failures,
            "greedy_failures": self.greedy_failures,
            "ok": self.ok(),
        })
    }
}

/// Plaquettes whose base lies in the bounding box of `w` widened by one.
pub fn nearby_plaquettes(w: &Walk) -> Vec<Plaquette> {
    let d = w.dim();
    let mut lo = w.start();
    let mut hi = w.start();
    for p in w.vertices() {
        for a in 0..d {
            lo = lo.with(a, lo.get(a).min(p.get(a)));
            hi = hi.with(a, hi.get(a).max(p.get(a)));
        }
    }
    let mut bases = vec![lo];
    for a in 0..d {
        bases = bases
            .into_iter()
            .flat_map(|b| (lo.get(a) - 1..=hi.get(a)).map(move |c| b.with(a, c)))
            .collect();
    }
    let mut out = Vec::new();
    for b in &bases {
        for i in 0..d {
            for j in i + 1..d {
                out.push(Plaquette::new(*b, i, j).expect("axes in range"));
            }
        }
    }
    out
}

/// Removes the detour through `p` from a flipped walk, if there is one.
fn undo_flip(p: &Plaquette, flipped: &Walk) -> Option<Walk> {
    let pts = flipped.vertices();
    let i = (0..pts.len().saturating_sub(3)).find(|&i| (i..i + 4).all(|t| p.contains(&pts[t])))?;
    let mut out = pts[..=i].to_vec();
    out.extend_from_slice(&pts[i + 3..]);
    Some(Walk::from_vec_unchecked(out))
}

fn disjoint_subsets(items: &[Plaquette]) -> Vec<Vec<Plaquette>> {
    (0u64..1 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect::<Vec<_>>())
        .filter(|s| s.iter().enumerate().all(|(i, a)| s[i + 1..].iter().all(|b| !a.shares_vertex(b))))
        .collect()
}

fn flip_checks(p: &ModelParams, w: &Walk, lambda_inv: &Q, r: &mut FlipSuiteReport) {
    r.walks += 1;
    let weight = asaw_weight(p, w);
    let flippable: Vec<Plaquette> = nearby_plaquettes(w).into_iter().filter(|q| is_flippable(q, w)).collect();
    for q in &flippable {
        let f = flip(q, w);
        r.flips += 1;
        if f.start() != w.start() || f.end() != w.end() || f.len() != w.len() + 2 {
            r.endpoint_failures += 1;
        }
        if !f.is_self_avoiding() {
            r.saw_failures += 1;
        }
        if undo_flip(q, &f).as_ref() != Some(w) {
            r.inversion_failures += 1;
        }
        if asaw_weight(p, &f) < &weight * lambda_inv {
            r.ratio_failures += 1;
        }
    }
    for (i, a) in flippable.iter().enumerate() {
        for b in &flippable[i + 1..] {
            if a.shares_vertex(b) {
                continue;
            }
            r.pairs += 1;
            if flip(a, &flip(b, w)) != flip(b, &flip(a, w)) {
                r.commute_failures += 1;
            }
        }
    }
    // Memory round trip: split w into η ∘ ω and flip ω at disjoint plaquettes shared with η.
    for m in 1..w.len() {
        let eta = Walk::from_vec_unchecked(w.vertices()[..=m].to_vec());
        let omega = Walk::from_vec_unchecked(w.vertices()[m..].to_vec());
        let shared: Vec<Plaquette> = adj_between(&eta, &omega, true).into_iter().collect();
        r.adjacency_sets += 1;
        if greedy_disjoint(shared.iter()).len() < ceil_alpha(w.dim(), shared.len()) {
            r.greedy_failures += 1;
        }
        for b in disjoint_subsets(&shared) {
            r.memory_cases += 1;
            let set = FlipSet::new(b).expect("disjoint by construction");
            let flipped = flip_set(&set, &omega);
            match unflip_with_memory(&flipped, &eta) {
                Ok((back, got)) if back == omega && got == set => {}
                _ => r.memory_failures += 1,
            }
        }
    }
}

/// Endpoint and self-avoidance preservation, inversion, commutativity, the weight
/// ratio bound `W(flip ω) ≥ λ⁻¹ W(ω)` and the memory round trip, over every
/// nearest-neighbour self-avoiding walk with at most `max_n` steps.
pub fn flip_suite(p: &ModelParams, max_n: usize) -> Result<FlipSuiteReport> {
    if !p.dist().is_nearest_neighbour() {
        return Err(AsawError::Domain("flips are defined for nearest-neighbour walks only".into()));
    }
    let lambda_inv = p.lambda().recip();
    let spec = EnumSpec::new(max_n, WalkFilter::SelfAvoiding);
    let parts = enumerate_fold(p, &spec, FlipSuiteReport::default, |r, v| flip_checks(p, &v.walk(), &lambda_inv, r))?;
    let mut out = FlipSuiteReport::default();
    for r in &parts {
        out.merge(r);
    }
    Ok(out)
}

/// Largest number of plaquettes spanned by the two halves of a split that are not
/// flippable for the second half, over walks and over polygons.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SplitAdjacencyReport {
    pub walks: usize,
    pub polygons: usize,
    pub splits: usize,
    pub max_walk: usize,
    pub max_polygon: usize,
    pub k0: usize,
}

impl SplitAdjacencyReport {
    pub fn ok(&self) -> bool {
        self.max_walk <= self.k0 && self.max_polygon <= 2 * self.k0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "walks": self.walks,
            "polygons": self.polygons,
            "splits": self.splits,
            "max_walk": self.max_walk,
            "max_polygon": self.max_polygon,
            "k0": self.k0,
            "ok": self.ok(),
        })
    }
}

/// Non-flippable plaquettes in `adj(ω_{[0,m]}, ω_{[m,n]})` for a split at `m`.
pub fn nonflippable_at_split(w: &Walk, m: usize) -> usize {
    let head = Walk::from_vec_unchecked(w.vertices()[..=m].to_vec());
    let tail = Walk::from_vec_unchecked(w.vertices()[m..].to_vec());
    adj_between(&head, &tail, false).into_iter().filter(|q| !is_flippable(q, &tail)).count()
}

/// Every split of every self-avoiding walk and polygon with at most `max_n` steps.
pub fn split_adjacency_suite(p: &ModelParams, max_n: usize) -> Result<SplitAdjacencyReport> {
    if !p.dist().is_nearest_neighbour() {
        return Err(AsawError::Domain("flips are defined for nearest-neighbour walks only".into()));
    }
    let spec = EnumSpec::new(max_n, WalkFilter::SelfAvoiding);
    let parts = enumerate_fold(p, &spec, SplitAdjacencyReport::default, |r, v| {
        let w = v.walk();
        let mut visit = |w: &Walk, polygon: bool| {
            for m in 0..=w.len() {
                let c = nonflippable_at_split(w, m);
                r.splits += 1;
                if polygon {
                    r.max_polygon = r.max_polygon.max(c);
                } else {
                    r.max_walk = r.max_walk.max(c);
                }
            }
        };
        r.walks += 1;
        visit(&w, false);
        if w.len() + 1 <= max_n && w.len() >= 3 && w.end().sub(&w.start()).l1() == 1 {
            let mut pts = w.vertices().to_vec();
            pts.push(w.start());
            r.polygons += 1;
            visit(&Walk::from_vec_unchecked(pts), true);
        }
    })?;
    let mut out = SplitAdjacencyReport { k0: p.k0(), ..Default::default() };
    for r in &parts {
        out.walks += r.walks;
        out.polygons += r.polygons;
        out.splits += r.splits;
        out.max_walk = out.max_walk.max(r.max_walk);
        out.max_polygon = out.max_polygon.max(r.max_polygon);
    }
    Ok(out)
}

/// Outcome of the greedy selection on seeded random plaquette sets.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GreedyReport {
    pub trials: usize,
    pub failures: usize,
    pub min_surplus: i64,
}

impl GreedyReport {
    pub fn ok(&self) -> bool {
        self.failures == 0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({ "trials": self.trials, "failures": self.failures, "min_surplus": self.min_surplus, "ok": self.ok() })
    }
}

/// Draws `trials` random plaquette sets in a `box_side`-box of dimension `d` and
/// compares the greedy selection with `⌈α|A|⌉`.
pub fn greedy_random_suite(d: usize, trials: usize, box_side: i64, seed: u64) -> Result<GreedyReport> {
    use rand::{Rng, SeedableRng};
    if d < 2 || d > crate::lattice::MAX_DIM {
        return Err(AsawError::BadDimension(d));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut report = GreedyReport { min_surplus: i64::MAX, ..Default::default() };
    for _ in 0..trials {
        let size = rng.gen_range(1..=100usize);
        let mut a = BTreeSet::new();
        for _ in 0..size {
            let c: Vec<i64> = (0..d).map(|_| rng.gen_range(0..box_side)).collect();
            let i = rng.gen_range(0..d - 1);
            let j = rng.gen_range(i + 1..d);
            a.insert(Plaquette::new(Point::new(&c), i, j)?);
        }
        let got = greedy_disjoint(a.iter());
        let need = ceil_alpha(d, a.len());
        let disjoint = got.iter().enumerate().all(|(i, x)| got[i + 1..].iter().all(|y| !x.shares_vertex(y)));
        report.trials += 1;
        report.min_surplus = report.min_surplus.min(got.len() as i64 - need as i64);
        if got.len() < need || !disjoint {
            report.failures += 1;
        }
    }
    Ok(report)
}
