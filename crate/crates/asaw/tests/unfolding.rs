use asaw::enumerate::{enumerate_walks, WalkFilter};
use asaw::interaction::{alpha, ModelParams};
use asaw::rational::{q, Q};
use asaw::stepdist::make_nearest_neighbour;
use asaw::unfold::*;
use asaw::walks::{is_bridge, span, Walk};
use num_traits::{ToPrimitive, Zero};
use std::collections::{BTreeMap, BTreeSet};

fn nn(k: Q) -> ModelParams {
    ModelParams::new(k, make_nearest_neighbour(2).unwrap()).unwrap()
}

fn walks(filter: WalkFilter, n: usize) -> Vec<Walk> {
    let mut out = Vec::new();
    enumerate_walks(&nn(Q::zero()), n, filter, |v| out.push(v.walk())).unwrap();
    out
}

#[test]
fn classical_unfolding_suite() {
    for w in walks(WalkFilter::HalfSpace, 10) {
        let r = classical_unfold(&w).unwrap();
        assert!(is_bridge(&r.unfolded) || w.is_empty());
        assert_eq!(r.unfolded.len(), w.len());
        assert!(r.spans.windows(2).all(|s| s[0] > s[1]));
        assert_eq!(r.spans.iter().sum::<i64>(), span(&r.unfolded));
        assert!((r.depth() as f64) <= 1.5 * (w.len() as f64).sqrt() || w.len() < 2);
        assert_eq!(r.spans[0], span(&w));
        assert_eq!(refold(&r.unfolded, &r.spans).unwrap(), w);
        let m = marked_unfold(&w).unwrap();
        assert!(m.marked_sets.last().unwrap().is_empty());
        for p in m.marked() {
            assert!(asaw::flips::is_flippable(&p, &r.unfolded), "{w} {p:?}");
        }
    }
}

#[test]
fn preimages_bounded_by_partitions() {
    for b in walks(WalkFilter::Bridge, 10) {
        if b.is_empty() {
            continue;
        }
        let pre = psi_preimages(&b);
        assert!(!pre.is_empty());
        assert!(pre.len() <= distinct_partitions(b.len()).to_usize().unwrap());
    }
}

#[test]
fn multivalued_unfolding_suite() {
    let delta = q(1, 4);
    let mut images: BTreeMap<(usize, Vec<i64>), BTreeSet<Walk>> = BTreeMap::new();
    let mut by_span: BTreeMap<(usize, i64), BTreeMap<Walk, Walk>> = BTreeMap::new();
    let mut span_collisions = 0;
    for w in walks(WalkFilter::HalfSpace, 8) {
        let m = marked_unfold(&w).unwrap();
        let k = m.marked().len();
        let imgs = multivalued_unfold(&w, &delta).unwrap();
        let a = (alpha(2) * Q::from_integer(k.into())).ceil().to_integer().to_usize().unwrap();
        let b = flip_budget(2, &delta, k);
        assert_eq!(imgs.len(), binomial(a, b).to_usize().unwrap());
        let key = (w.len(), m.spans.clone());
        for img in &imgs {
            assert!(is_bridge(&img.walk));
            assert_eq!(img.walk.len(), w.len() + 2 * b);
            assert_eq!(refold(&img.walk, &m.spans).unwrap(), w);
            assert!(images.entry(key.clone()).or_default().insert(img.walk.clone()), "image shared within a span sequence");
            if let Some(prev) = by_span.entry((w.len(), span(&w))).or_default().insert(img.walk.clone(), w.clone()) {
                if prev != w {
                    span_collisions += 1;
                }
            }
        }
    }
    assert_eq!(span_collisions, 0);
}
