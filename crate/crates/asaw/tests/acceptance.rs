//! Acceptance gate: one line per criterion, non-zero exit if any fails.

use asaw::analysis::{
    asm_memory_pool, asm_per_walk_suite, kappa_thresholds, torus_chi_derivative_check, zc_lace, zc_ratio, Thresholds,
};
use asaw::enumerate::{class_series, enumerate_walks, WalkFilter};
use asaw::flips::{flip_suite, greedy_disjoint, greedy_random_suite, split_adjacency_suite};
use asaw::greens::asymptotic_ratio;
use asaw::interaction::{asaw_weight, ceil_alpha, interaction_product, ModelParams};
use asaw::lace::{diagram_check, recursion_residual};
use asaw::lattice::Point;
use asaw::rational::{fmt_q, q, qi, Q};
use asaw::stepdist::{make_nearest_neighbour, make_spread_out, Shape};
use asaw::unfold::{delta_default, distinct_partitions, hardy_ramanujan_error, marked_unfold, unfold_suite};
use asaw::walks::{adj_between, Walk};
use num_traits::Zero;
use std::time::Instant;

fn nn(kappa: Q) -> ModelParams {
    ModelParams::new(kappa, make_nearest_neighbour(2).unwrap()).unwrap()
}

fn thresholds() -> Thresholds {
    kappa_thresholds(&make_nearest_neighbour(2).unwrap())
}

type Outcome = (bool, String);

fn residuals() -> Outcome {
    let spread = ModelParams::new(q(1, 10), make_spread_out(2, 1, Shape::Uniform).unwrap()).unwrap();
    let runs = [(nn(Q::zero()), 8), (nn(q(1, 10)), 8), (spread, 6)];
    let mut ok = true;
    let mut parts = Vec::new();
    for (p, order) in &runs {
        let r = recursion_residual(p, *order).unwrap();
        ok &= r.is_zero();
        parts.push(format!("{} kappa={} order={} max|res|={}", p.dist().label(), fmt_q(p.kappa()), order, fmt_q(&r.max_abs())));
    }
    (ok, parts.join("; "))
}

fn interaction_identity() -> Outcome {
    let mut checked = 0usize;
    let mut bad = 0usize;
    for k in [Q::zero(), q(1, 10), q(1, 3)] {
        let p = nn(k);
        let mut walks = Vec::new();
        enumerate_walks(&p, 6, WalkFilter::All, |v| {
            if v.len() == 6 {
                walks.push(v.walk())
            }
        })
        .unwrap();
        for w in &walks {
            let expect = if w.is_self_avoiding() { asaw_weight(&p, w) } else { Q::zero() };
            checked += 1;
            if interaction_product(&p, w) != expect {
                bad += 1;
            }
        }
    }
    (bad == 0 && checked == 3 * 4096, format!("{checked} walks, {bad} mismatches"))
}

fn bridge_supermultiplicativity() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Q::zero(), q(1, 10), q(1, 4)] {
        let b = class_series(&nn(k.clone()), 12, WalkFilter::Bridge).unwrap();
        let fails = (1..12).flat_map(|n| (1..=12 - n).map(move |m| (n, m))).filter(|&(n, m)| b[n + m] < &b[n] * &b[m]).count();
        ok &= fails == 0;
        parts.push(format!("kappa={} b12={} failures={fails}", fmt_q(&k), fmt_q(&b[12])));
    }
    (ok, parts.join("; "))
}

fn flip_suites() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Q::zero(), q(1, 10), qi(1)] {
        let r = flip_suite(&nn(k.clone()), 8).unwrap();
        ok &= r.ok();
        parts.push(format!(
            "kappa={}: {} walks, {} flips, {} pairs, {} memory cases, failures {}",
            fmt_q(&k),
            r.walks,
            r.flips,
            r.pairs,
            r.memory_cases,
            r.endpoint_failures + r.saw_failures + r.inversion_failures + r.commute_failures + r.ratio_failures + r.memory_failures
        ));
    }
    (ok, parts.join("; "))
}

fn split_adjacency() -> Outcome {
    let r = split_adjacency_suite(&nn(Q::zero()), 10).unwrap();
    (
        r.ok(),
        format!("{} walks, {} polygons, {} splits, max {} (walks, k0={}), max {} (polygons)", r.walks, r.polygons, r.splits, r.max_walk, r.k0, r.max_polygon),
    )
}

fn greedy() -> Outcome {
    let g = greedy_random_suite(2, 10_000, 10, 2024).unwrap();
    // Adjacency sets arising from splits (criteria 4 and 5) and from unfolding (criterion 7).
    let p = nn(Q::zero());
    let mut sets = 0usize;
    let mut short = 0usize;
    let mut probe = |a: &std::collections::BTreeSet<asaw::lattice::Plaquette>| {
        sets += 1;
        if greedy_disjoint(a.iter()).len() < ceil_alpha(2, a.len()) {
            short += 1;
        }
    };
    enumerate_walks(&p, 10, WalkFilter::SelfAvoiding, |v| {
        let w = v.walk();
        for m in 0..=w.len() {
            let head = Walk::new(w.vertices()[..=m].to_vec()).unwrap();
            let tail = Walk::new(w.vertices()[m..].to_vec()).unwrap();
            probe(&adj_between(&head, &tail, false));
            probe(&adj_between(&head, &tail, true));
        }
    })
    .unwrap();
    enumerate_walks(&p, 8, WalkFilter::HalfSpace, |v| probe(&marked_unfold(&v.walk()).unwrap().marked())).unwrap();
    (
        g.ok() && short == 0,
        format!("{} random sets (min surplus {}), {} enumerated sets, {} short", g.trials, g.min_surplus, sets, short),
    )
}

fn unfolding(t: &Thresholds) -> Outcome {
    let delta = delta_default(&nn(Q::zero())).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Q::zero(), t.kappa_decay.clone()] {
        let r = unfold_suite(&nn(k.clone()), 8, &delta).unwrap();
        ok &= r.ok();
        parts.push(format!("kappa={} {}", fmt_q(&k), r.to_json()));
    }
    (ok, parts.join("; "))
}

fn asm(t: &Thresholds) -> Outcome {
    let p = nn(&t.kappa_asm / qi(2));
    let pool = asm_memory_pool(&p, 5).unwrap();
    let r = asm_per_walk_suite(&p, &pool, 7).unwrap();
    let min = r.min_ratio.as_ref().map(|m| format!("{:.6}", asaw::rational::to_f64(m))).unwrap_or_default();
    (
        r.ok(),
        format!("kappa={} {} memories, {} pairs, max budget {}, min rhs/lhs {min}, {} violations", fmt_q(p.kappa()), r.memories, r.pairs_checked, r.max_budget, r.violations.len()),
    )
}

fn diagrams() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Q::zero(), q(1, 10)] {
        let r = diagram_check(&nn(k.clone()), &[2, 3], 8).unwrap();
        ok &= r.ok();
        parts.push(format!(
            "kappa={}: {} walks, {} coefficients, {} lace-edge and {} coefficient violations",
            fmt_q(&k),
            r.walks_checked,
            r.coefficients_compared,
            r.lace_edge_violations,
            r.coefficient_violations.len()
        ));
    }
    (ok, parts.join("; "))
}

fn hardy_ramanujan() -> Outcome {
    let e: Vec<f64> = [100usize, 1000, 10_000].iter().map(|&n| hardy_ramanujan_error(n, &distinct_partitions(n))).collect();
    (e[0] > e[1] && e[1] > e[2] && e[2] <= 0.1, format!("errors {:.4} {:.4} {:.4}", e[0], e[1], e[2]))
}

fn torus(t: &Thresholds) -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for k in [Q::zero(), &t.kappa_asm / qi(2)] {
        let p = nn(k.clone());
        let r = torus_chi_derivative_check(&p, 3, 8, &[p.z0(), qi(1), q(3, 2)]).unwrap();
        ok &= r.ok();
        let held = r.points.iter().filter(|x| x.holds).count();
        parts.push(format!("kappa={}: {held}/{} points", fmt_q(&k), r.points.len()));
    }
    (ok, parts.join("; "))
}

fn critical_points() -> Outcome {
    let p = nn(Q::zero());
    let r = zc_ratio(&p, 8).unwrap();
    let l = zc_lace(&p, 8).unwrap();
    let rel = ((l - r) / r).abs();
    (r > 1.0 && l > 1.0 && rel <= 0.10, format!("zc_ratio {r:.5}, zc_lace {l:.5}, relative gap {rel:.4}"))
}

fn greens() -> Outcome {
    let so = make_spread_out(5, 3, Shape::Uniform).unwrap();
    let mut ok = true;
    let mut parts = Vec::new();
    for r in [10i64, 15, 20] {
        let (ratio, _) = asymptotic_ratio(&so, &Point::origin(5).with(0, r)).unwrap();
        ok &= (ratio - 1.0).abs() <= 0.2;
        parts.push(format!("d=5 L=3 |x|={r}: {ratio:.4}"));
    }
    let (ratio, _) = asymptotic_ratio(&make_nearest_neighbour(3).unwrap(), &Point::origin(3).with(0, 20)).unwrap();
    ok &= (ratio - 1.0).abs() <= 0.15;
    parts.push(format!("d=3 nn |x|=20: {ratio:.4}"));
    (ok, parts.join("; "))
}

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

fn determinism(t: &Thresholds, first: &[String; 3]) -> Outcome {
    let run = |threads: usize| -> [String; 3] {
        in_pool(threads, || [residuals().1, bridge_supermultiplicativity().1, unfolding(t).1])
    };
    let one = run(1);
    let four = run(4);
    let same = one == four && one == *first;
    let diffs: Vec<usize> = (0..3).filter(|&i| one[i] != four[i] || one[i] != first[i]).collect();
    (same, format!("criteria 1, 3, 7 with 1 and 4 threads; differing: {diffs:?}"))
}

fn main() {
    let t = thresholds();
    let mut failures = 0;
    let mut report = |n: usize, name: &str, f: &mut dyn FnMut() -> Outcome| -> String {
        let start = Instant::now();
        let (ok, detail) = f();
        if !ok {
            failures += 1;
        }
        println!("criterion {n:>2} {} {name}: {detail} [{:.1}s]", if ok { "PASS" } else { "FAIL" }, start.elapsed().as_secs_f64());
        detail
    };
    let c1 = report(1, "lace expansion residual", &mut residuals);
    report(2, "interaction product identity", &mut interaction_identity);
    let c3 = report(3, "bridge supermultiplicativity", &mut bridge_supermultiplicativity);
    report(4, "flip suite", &mut flip_suites);
    report(5, "non-flippable plaquettes at splits", &mut split_adjacency);
    report(6, "greedy disjoint selection", &mut greedy);
    let c7 = report(7, "multivalued unfolding", &mut || unfolding(&t));
    report(8, "per-walk averaged submultiplicativity", &mut || asm(&t));
    report(9, "diagrammatic bounds", &mut diagrams);
    report(10, "distinct partitions asymptotics", &mut hardy_ramanujan);
    report(11, "torus derivative bound", &mut || torus(&t));
    report(12, "critical point cross-validation", &mut critical_points);
    report(13, "random walk Green's function asymptotics", &mut greens);
    let first = [c1, c3, c7];
    report(14, "thread-count determinism", &mut || determinism(&t, &first));
    if failures > 0 {
        println!("{failures} criteria failed");
        std::process::exit(1);
    }
    println!("all 14 criteria passed");
}
