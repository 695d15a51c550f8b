//! Bridge decomposition of half-space walks, classical and multivalued unfolding,
//! refolding, the split map for general walks, and distinct-part partitions.

use crate::error::{AsawError, Result};
use crate::flips::{committed_choice, flip_set, is_flippable, unflip_with_memory, FlipSet};
use crate::interaction::{alpha, ModelParams};
use crate::lattice::{Plaquette, Point, Symmetry, Transform};
use crate::rational::{one_plus_pow, pow, q, Q};
use crate::walks::{adj_between, bridge_point, concat, is_half_space, reverse, span, Walk};
use num_bigint::BigUint;
use num_traits::{One, ToPrimitive, Zero};
use std::collections::BTreeSet;

/// Splits a half-space walk at its bridge point. The remainder is translated to
/// start at the origin but not reflected.
pub fn split_first_bridge(w: &Walk) -> Result<(Walk, Walk)> {
    if !is_half_space(w) {
        return Err(AsawError::NotHalfSpace);
    }
    let bp = bridge_point(w);
    let pts = w.vertices();
    let bridge = Walk::from_vec_unchecked(pts[..=bp].to_vec());
    let shift = pts[bp].neg();
    let rest = Walk::from_vec_unchecked(pts[bp..].iter().map(|p| p.add(&shift)).collect());
    Ok((bridge, rest))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnfoldResult {
    /// The bridges `ω^{b_i}`, each rooted at the origin.
    pub bridges: Vec<Walk>,
    pub spans: Vec<i64>,
    /// Marked plaquettes of each stage, placed where the bridge sits in the unfolded walk.
    pub marked_sets: Vec<BTreeSet<Plaquette>>,
    pub unfolded: Walk,
}

impl UnfoldResult {
    pub fn depth(&self) -> usize {
        self.bridges.len()
    }

    /// `adj_Φ̄(ω)`: the union of all marked sets.
    pub fn marked(&self) -> BTreeSet<Plaquette> {
        self.marked_sets.iter().flat_map(|s| s.iter().copied()).collect()
    }
}

fn unfold_impl(w: &Walk, marked: bool) -> Result<UnfoldResult> {
    if !is_half_space(w) {
        return Err(AsawError::NotHalfSpace);
    }
    let d = w.dim();
    let mut stage = w.rooted();
    let mut bridges = Vec::new();
    let mut spans = Vec::new();
    let mut marked_sets = Vec::new();
    let mut offset = Point::origin(d);
    let mut unfolded = Walk::zero(d);
    loop {
        let (b, rest) = split_first_bridge(&stage)?;
        let mut set = BTreeSet::new();
        if marked && !rest.is_empty() {
            let tail = rest.translated(&b.end());
            set = adj_between(&tail, &b, true).into_iter().map(|p| p.apply(&Symmetry::Translate(offset))).collect();
        }
        spans.push(span(&b));
        unfolded = concat(&unfolded, &b)?;
        offset = unfolded.end();
        bridges.push(b);
        marked_sets.push(set);
        if rest.is_empty() {
            break;
        }
        stage = rest.reflected(0);
    }
    Ok(UnfoldResult { bridges, spans, marked_sets, unfolded })
}

/// `Ψ(ω)`: reflects successive remainders until the walk is a concatenation of bridges.
pub fn classical_unfold(w: &Walk) -> Result<UnfoldResult> {
    unfold_impl(w, false)
}

/// Classical unfolding that also records the plaquettes flippable for each bridge
/// and spanned by one of its edges and an edge of the remainder.
pub fn marked_unfold(w: &Walk) -> Result<UnfoldResult> {
    unfold_impl(w, true)
}

/// `|adj_Φ̄(ω)|` for a half-space walk given by its vertices; zero for other walks.
pub fn marked_count(pts: &[Point]) -> usize {
    let w = Walk::from_vec_unchecked(pts.to_vec());
    marked_unfold(&w).map(|r| r.marked().len()).unwrap_or(0)
}

/// `⌈δ α k⌉` in dimension `d`.
pub fn flip_budget(d: usize, delta: &Q, k: usize) -> usize {
    let x = delta * alpha(d) * Q::from_integer(k.into());
    x.ceil().to_integer().to_usize().expect("small budget")
}

fn subsets_of_size<T: Copy>(items: &[T], size: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(size);
    fn rec<T: Copy>(items: &[T], start: usize, size: usize, cur: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if cur.len() == size {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            if items.len() - i < size - cur.len() {
                break;
            }
            cur.push(items[i]);
            rec(items, i + 1, size, cur, out);
            cur.pop();
        }
    }
    rec(items, 0, size, &mut cur, &mut out);
    out
}

/// All subsets of `items`, in the order of their bitmasks.
pub fn all_subsets<T: Copy>(items: &[T]) -> Vec<Vec<T>> {
    (0u64..1 << items.len())
        .map(|mask| items.iter().enumerate().filter(|(i, _)| mask >> i & 1 == 1).map(|(_, p)| *p).collect())
        .collect()
}

/// One image of the multivalued unfolding together with the flips that produced it.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct UnfoldImage {
    pub walk: Walk,
    pub flips: FlipSet,
}

/// `Φ(ω)`: flips of `Ψ(ω)` over every `⌈δαk⌉`-subset of the committed disjoint choice.
pub fn multivalued_unfold(w: &Walk, delta: &Q) -> Result<Vec<UnfoldImage>> {
    if *delta <= Q::zero() || *delta >= q(1, 2) {
        return Err(AsawError::Domain("delta must lie in (0, 1/2)".into()));
    }
    let r = marked_unfold(w)?;
    let marked = r.marked();
    let chosen = committed_choice(&marked, w.dim());
    let size = flip_budget(w.dim(), delta, marked.len());
    subsets_of_size(&chosen, size)
        .into_iter()
        .map(|b| {
            let set = FlipSet::new(b)?;
            Ok(UnfoldImage { walk: flip_set(&set, &r.unfolded), flips: set })
        })
        .collect()
}

/// Inverts the unfolding: cuts at the last visits of the partial-span planes, then
/// rebuilds from the last bridge backwards, undoing flips against each remainder.
pub fn refold(unfolded: &Walk, spans: &[i64]) -> Result<Walk> {
    let bad = |m: &str| AsawError::NoPreimage(format!("inconsistent spans: {m}"));
    if spans.is_empty() || spans.windows(2).any(|s| s[0] <= s[1]) || spans.iter().any(|&s| s <= 0) {
        if !(spans.len() == 1 && spans[0] == 0 && unfolded.is_empty()) {
            return Err(bad("not strictly decreasing positive"));
        }
    }
    if spans.iter().sum::<i64>() != span(unfolded) {
        return Err(bad("sum differs from the span"));
    }
    let pts = unfolded.vertices();
    let x0 = pts[0].get(0);
    let mut cuts = vec![0usize];
    let mut level = x0;
    for s in &spans[..spans.len() - 1] {
        level += s;
        let c = pts.iter().rposition(|p| p.get(0) == level).ok_or_else(|| bad("plane not visited"))?;
        if c <= *cuts.last().unwrap() {
            return Err(bad("cuts out of order"));
        }
        cuts.push(c);
    }
    cuts.push(pts.len() - 1);
    let pieces: Vec<Walk> = cuts
        .windows(2)
        .map(|c| Walk::from_vec_unchecked(pts[c[0]..=c[1]].to_vec()).rooted())
        .collect();
    let mut stage = pieces.last().unwrap().clone();
    for piece in pieces[..pieces.len() - 1].iter().rev() {
        let memory = stage.reflected(0).translated(&piece.end());
        let (bridge, _) = unflip_with_memory(piece, &memory)?;
        if bridge.end() != piece.end() {
            return Err(bad("unflip moved the endpoint"));
        }
        stage = concat(&bridge, &stage.reflected(0))?;
    }
    let out = stage.translated(&pts[0]);
    let check = classical_unfold(&out.rooted()).map_err(|_| bad("result is not a half-space walk"))?;
    if check.spans != spans {
        return Err(bad("spans of the result differ"));
    }
    Ok(out)
}

/// An image of the split map: two half-space walks.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct SplitImage {
    pub first: Walk,
    pub second: Walk,
}

/// Data of the split of a walk at the maximal index minimizing the first coordinate.
#[derive(Clone, Debug)]
pub struct Split {
    pub m: usize,
    /// `π₁` is constant along the walk.
    pub degenerate: bool,
    /// `(o, e₁)` followed by the reversed head, translated so that `ω_m ↦ e₁`.
    pub head: Walk,
    /// The tail `ω_{[m,n]}`, rooted at the origin.
    pub tail: Walk,
    /// Candidate plaquettes, flippable for the head, in head coordinates.
    pub marked: BTreeSet<Plaquette>,
}

pub fn split_walk(w: &Walk) -> Result<Split> {
    if !w.is_self_avoiding() {
        return Err(AsawError::InvalidWalk(format!("{w} is not self-avoiding")));
    }
    let w = w.rooted();
    let d = w.dim();
    let pts = w.vertices();
    let lo = pts.iter().map(|p| p.get(0)).min().unwrap();
    let hi = pts.iter().map(|p| p.get(0)).max().unwrap();
    let m = pts.iter().rposition(|p| p.get(0) == lo).unwrap();
    let e1 = Point::unit(d, 0, 1);
    let x = e1.sub(&pts[m]);
    let w1 = Walk::from_vec_unchecked(pts[..=m].to_vec());
    let w2 = Walk::from_vec_unchecked(pts[m..].to_vec());
    let mut head_pts = vec![Point::origin(d)];
    head_pts.extend(reverse(&w1).vertices().iter().map(|p| p.add(&x)));
    let head = Walk::from_vec_unchecked(head_pts);
    let marked = adj_between(&w2, &w1, true)
        .into_iter()
        .map(|p| p.apply(&Symmetry::Translate(x)))
        .filter(|p| is_flippable(p, &head))
        .collect();
    Ok(Split { m, degenerate: lo == hi, head, tail: w2.rooted(), marked })
}

/// Images of the split map: the head flipped over every `⌈δαk⌉`-subset of the committed choice.
pub fn theorem_split_map(w: &Walk, delta: &Q) -> Result<Vec<SplitImage>> {
    let s = split_walk(w)?;
    let chosen = committed_choice(&s.marked, w.dim());
    let size = flip_budget(w.dim(), delta, s.marked.len());
    subsets_of_size(&chosen, size)
        .into_iter()
        .map(|b| {
            let set = FlipSet::new(b)?;
            Ok(SplitImage { first: flip_set(&set, &s.head), second: s.tail.clone() })
        })
        .collect()
}

/// Recovers the walk from an image of the split map.
pub fn split_reconstruct(img: &SplitImage) -> Result<Walk> {
    let d = img.first.dim();
    let x = img.first.end();
    let e1 = Point::unit(d, 0, 1);
    let memory = img.second.translated(&e1);
    let (head, _) = unflip_with_memory(&img.first, &memory)?;
    if head.len() == 0 || head.vertex(1) != e1 {
        return Err(AsawError::NoPreimage("head does not start with (o, e1)".into()));
    }
    let shift = x.neg();
    let w1 = reverse(&Walk::from_vec_unchecked(head.vertices()[1..].to_vec())).translated(&shift);
    let w2 = img.second.translated(&w1.end());
    let mut pts = w1.into_vec();
    pts.extend_from_slice(&w2.vertices()[1..]);
    Walk::new(pts)
}

/// Number of partitions of `n` into distinct parts.
pub fn distinct_partitions(n: usize) -> BigUint {
    distinct_partitions_table(n).pop().unwrap()
}

/// `P(0), …, P(n)` by the subset-sum recurrence over parts.
pub fn distinct_partitions_table(n: usize) -> Vec<BigUint> {
    let mut t = vec![BigUint::zero(); n + 1];
    t[0] = BigUint::one();
    for k in 1..=n {
        for s in (k..=n).rev() {
            let (lo, hi) = t.split_at_mut(s);
            if !lo[s - k].is_zero() {
                hi[0] += &lo[s - k];
            }
        }
    }
    t
}

/// Natural logarithm of a big unsigned integer.
pub fn ln_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    if bits <= 1000 {
        return x.to_f64().unwrap().ln();
    }
    let shift = bits - 64;
    (x >> shift).to_f64().unwrap().ln() + shift as f64 * std::f64::consts::LN_2
}

/// `|log P(n) / (π √(n/3)) − 1|`.
pub fn hardy_ramanujan_error(n: usize, pn: &BigUint) -> f64 {
    (ln_big(pn) / (std::f64::consts::PI * (n as f64 / 3.0).sqrt()) - 1.0).abs()
}

/// `2δ (λ (1+κ)^{4(d−1)})² (1+κ)^{1/(δα)}`.
pub fn decay_bracket(p: &ModelParams, delta: &Q) -> Q {
    let d = p.d() as i64;
    let inv = (delta * alpha(p.d())).recip();
    let e = inv.to_integer().to_i64().expect("dyadic delta gives an integer exponent");
    debug_assert!(inv.is_integer());
    let inner = p.lambda() * one_plus_pow(p.kappa(), 4 * (d - 1));
    q(2, 1) * delta * &inner * &inner * one_plus_pow(p.kappa(), e)
}

/// Largest `2^{-j}`, `j ≥ 2`, with the decay bracket below one, if any up to `2^{-40}`.
pub fn delta_default(p: &ModelParams) -> Option<Q> {
    (2..=40).map(|j| pow(&q(1, 2), j)).find(|delta| decay_bracket(p, delta) < Q::one())
}

/// Exact form of the per-walk weight transfer: `W(ω) ≤ (1+κ)^{k + r k₀} λ^{b} W(ω′)`.
pub fn weight_transfer_holds(p: &ModelParams, w: &Walk, r: usize, k: usize, b: usize, image: &Walk) -> bool {
    use crate::interaction::asaw_weight;
    let lhs = asaw_weight(p, w);
    let rhs = one_plus_pow(p.kappa(), (k + r * p.k0()) as i64) * pow(&p.lambda(), b as i64) * asaw_weight(p, image);
    lhs <= rhs
}

/// Strictly decreasing sequences of positive integers summing to `total`.
pub fn decreasing_span_sequences(total: i64) -> Vec<Vec<i64>> {
    fn rec(left: i64, max: i64, cur: &mut Vec<i64>, out: &mut Vec<Vec<i64>>) {
        if left == 0 {
            out.push(cur.clone());
            return;
        }
        for s in (1..=left.min(max)).rev() {
            cur.push(s);
            rec(left - s, s - 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(total, total, &mut Vec::new(), &mut out);
    out
}

/// Half-space walks `ω` with `Ψ(ω) = bridge`, found by trying every span sequence.
pub fn psi_preimages(bridge: &Walk) -> Vec<Walk> {
    let mut out = Vec::new();
    for spans in decreasing_span_sequences(span(bridge)) {
        if let Ok(w) = refold(bridge, &spans) {
            if classical_unfold(&w).map(|r| r.unfolded == *bridge).unwrap_or(false) {
                out.push(w);
            }
        }
    }
    out
}

/// Binomial coefficient as a big integer.
pub fn binomial(n: usize, k: usize) -> BigUint {
    if k > n {
        return BigUint::zero();
    }
    let mut acc = BigUint::one();
    for i in 0..k {
        acc = acc * BigUint::from(n - i) / BigUint::from(i + 1);
    }
    acc
}

/// Counts from the exhaustive multivalued unfolding suite.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UnfoldSuiteReport {
    pub delta: Q,
    pub walks: usize,
    pub images: usize,
    pub max_marked: usize,
    pub refold_failures: usize,
    pub bridge_failures: usize,
    pub count_failures: usize,
    pub transfer_failures: usize,
    pub shared_images: usize,
}

impl UnfoldSuiteReport {
    pub fn ok(&self) -> bool {
        self.refold_failures + self.bridge_failures + self.count_failures + self.transfer_failures + self.shared_images == 0
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "delta": crate::rational::fmt_q(&self.delta),
            "walks": self.walks,
            "images": self.images,
            "max_marked": self.max_marked,
            "refold_failures": self.refold_failures,
            "bridge_failures": self.bridge_failures,
            "count_failures": self.count_failures,
            "transfer_failures": self.transfer_failures,
            "shared_images": self.shared_images,
            "ok": self.ok(),
        })
    }
}

/// Every half-space walk with at most `max_n` steps: `Φ` refolds back, lands in
/// bridges of the predicted length, has `C(⌈αk⌉, ⌈δαk⌉)` images, satisfies the
/// weight transfer bound, and no two walks of equal length and span share an image.
pub fn unfold_suite(p: &ModelParams, max_n: usize, delta: &Q) -> Result<UnfoldSuiteReport> {
    use crate::enumerate::{enumerate_fold, EnumSpec, WalkFilter};
    use std::collections::BTreeMap;
    let d = p.d();
    let spec = EnumSpec::new(max_n, WalkFilter::HalfSpace);
    type Part = (UnfoldSuiteReport, Vec<((usize, i64), Walk, Walk)>);
    let parts: Vec<Part> = enumerate_fold(
        p,
        &spec,
        || (UnfoldSuiteReport::default(), Vec::new()),
        |(r, seen): &mut Part, v| {
            let w = v.walk();
            let Ok(m) = marked_unfold(&w) else {
                r.refold_failures += 1;
                return;
            };
            let k = m.marked().len();
            let b = flip_budget(d, delta, k);
            let imgs = match multivalued_unfold(&w, delta) {
                Ok(i) => i,
                Err(_) => {
                    r.refold_failures += 1;
                    return;
                }
            };
            r.walks += 1;
            r.max_marked = r.max_marked.max(k);
            let a = crate::interaction::ceil_alpha(d, k);
            if BigUint::from(imgs.len()) != binomial(a, b) {
                r.count_failures += 1;
            }
            for img in imgs {
                r.images += 1;
                if !crate::walks::is_bridge(&img.walk) || img.walk.len() != w.len() + 2 * b {
                    r.bridge_failures += 1;
                }
                if refold(&img.walk, &m.spans).ok().as_ref() != Some(&w) {
                    r.refold_failures += 1;
                }
                if !weight_transfer_holds(p, &w, m.depth(), k, b, &img.walk) {
                    r.transfer_failures += 1;
                }
                seen.push(((w.len(), span(&w)), img.walk, w.clone()));
            }
        },
    )?;
    let mut out = UnfoldSuiteReport { delta: delta.clone(), ..Default::default() };
    let mut owner: BTreeMap<((usize, i64), Walk), Walk> = BTreeMap::new();
    for (r, seen) in parts {
        out.walks += r.walks;
        out.images += r.images;
        out.max_marked = out.max_marked.max(r.max_marked);
        out.refold_failures += r.refold_failures;
        out.bridge_failures += r.bridge_failures;
        out.count_failures += r.count_failures;
        out.transfer_failures += r.transfer_failures;
        for (key, img, src) in seen {
            if let Some(prev) = owner.insert((key, img), src.clone()) {
                if prev != src {
                    out.shared_images += 1;
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stepdist::make_nearest_neighbour;

    fn w(s: &str) -> Walk {
        Walk::parse(s).unwrap()
    }

    #[test]
    fn split_examples() {
        let (b, r) = split_first_bridge(&w("0,0;1,0;2,0;2,1;1,1")).unwrap();
        assert_eq!(b, w("0,0;1,0;2,0;2,1"));
        assert_eq!(r, w("0,0;-1,0"));
        let br = w("0,0;1,0;1,1;2,1");
        let (b, r) = split_first_bridge(&br).unwrap();
        assert_eq!((b, r.len()), (br, 0));
        assert!(split_first_bridge(&w("0,0;0,1")).is_err());
    }

    #[test]
    fn unfold_examples() {
        let h = w("0,0;1,0;2,0;2,1;1,1");
        let r = classical_unfold(&h).unwrap();
        assert_eq!(r.unfolded, w("0,0;1,0;2,0;2,1;3,1"));
        assert_eq!(r.spans, vec![2, 1]);
        assert_eq!(refold(&r.unfolded, &r.spans).unwrap(), h);
        let br = w("0,0;1,0;1,1;2,1");
        let r = classical_unfold(&br).unwrap();
        assert_eq!((r.unfolded.clone(), r.depth()), (br.clone(), 1));
        assert!(marked_unfold(&br).unwrap().marked().is_empty());
        assert_eq!(refold(&br, &[2]).unwrap(), br);
        assert!(refold(&br, &[1, 1]).is_err());
    }

    #[test]
    fn partitions() {
        let t = distinct_partitions_table(10);
        let got: Vec<u64> = t.iter().map(|x| x.to_u64().unwrap()).collect();
        assert_eq!(got, vec![1, 1, 1, 2, 2, 3, 4, 5, 6, 8, 10]);
        // Subset-sum oracle.
        for n in 0..=12usize {
            let count = (0u32..1 << n).filter(|m| (0..n).filter(|i| m >> i & 1 == 1).map(|i| i + 1).sum::<usize>() == n).count();
            assert_eq!(distinct_partitions(n), BigUint::from(count));
        }
        assert_eq!(decreasing_span_sequences(6).len(), 4);
    }

    #[test]
    fn split_map_examples() {
        let delta = q(1, 4);
        let hs = w("0,0;1,0;1,1");
        let imgs = theorem_split_map(&hs, &delta).unwrap();
        assert_eq!(imgs, vec![SplitImage { first: w("0,0;1,0"), second: hs.clone() }]);
        let s = split_walk(&w("0,0;0,1")).unwrap();
        assert_eq!(s.m, 1);
        assert!(s.degenerate);
        assert_eq!(s.head, w("0,0;1,0;1,-1"));
        for img in theorem_split_map(&w("0,0;0,1"), &delta).unwrap() {
            assert_eq!(split_reconstruct(&img).unwrap(), w("0,0;0,1"));
        }
    }

    #[test]
    fn default_delta_nearest_neighbour() {
        let p = ModelParams::new(Q::zero(), make_nearest_neighbour(2).unwrap()).unwrap();
        assert_eq!(delta_default(&p), Some(pow(&q(1, 2), 10)));
        assert_eq!(flip_budget(2, &q(1, 4), 9), 1);
        assert_eq!(flip_budget(2, &q(1, 4), 0), 0);
        assert_eq!(binomial(5, 2), BigUint::from(10u32));
    }

    #[test]
    fn suite_small() {
        let p = ModelParams::new(q(1, 100000), make_nearest_neighbour(2).unwrap()).unwrap();
        let r = unfold_suite(&p, 6, &q(1, 4)).unwrap();
        assert!(r.ok(), "{r:?}");
        assert!(r.images >= r.walks);
    }
}
