//! Sufficient κ thresholds, connective-constant and critical-point estimators, the
//! resummed `Π̃`, the torus derivative bound, and the averaged submultiplicativity checks.

use crate::enumerate::{class_series, enumerate_walks, mass_table, memory_two_point_coeffs, torus_susceptibility, two_point_coeffs, WalkFilter};
use crate::error::{AsawError, Result};
use crate::flips::{committed_choice, flip_set, FlipSet};
use crate::interaction::{alpha, asaw_weight, conditional_weight, k0, Memory, ModelParams};
use crate::lace::pi_coeffs;
use crate::lattice::{Plaquette, Point};
use crate::rational::{fmt_q, one_plus_pow, pow, q, to_f64, Q};
use crate::series::{Series, SpatialSeries};
use crate::stepdist::StepDistribution;
use crate::unfold::all_subsets;
use crate::walks::{adj_between, reverse, Walk};
use num_bigint::BigInt;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use std::collections::{BTreeSet, HashSet};
use std::sync::Arc;

/// Number of bisection steps below the leading binary digit of a threshold.
pub const THRESHOLD_BITS: u32 = 24;

/// Exponents above this are certified through `(1+κ)^e ≤ 1/(1 − eκ)` instead of expanded.
pub const EXACT_EXPONENT_CAP: u64 = 1 << 17;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Thresholds {
    pub kappa_asm: Q,
    pub delta_default: Q,
    pub kappa_decay: Q,
    /// Whether `kappa_decay` was certified by exact expansion (otherwise by the `1/(1 − eκ)` bound).
    pub decay_exact: bool,
}

impl Thresholds {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "kappa_asm": fmt_q(&self.kappa_asm),
            "kappa_asm_float": to_f64(&self.kappa_asm),
            "delta_default": fmt_q(&self.delta_default),
            "kappa_decay": fmt_q(&self.kappa_decay),
            "kappa_decay_float": to_f64(&self.kappa_decay),
            "decay_exact": self.decay_exact,
        })
    }
}

/// `(1+κ)^{1/α} < 1 + z₀² p₁² (1+κ)^{−(2d−4)}` with `z₀ = (1+κ)^{−2(d−1)}`.
pub fn asm_condition(d: usize, p1: &Q, kappa: &Q) -> bool {
    let inv_alpha = alpha(d).recip().to_integer().to_i64().unwrap();
    let lhs = one_plus_pow(kappa, inv_alpha);
    let rhs = Q::one() + p1 * p1 * one_plus_pow(kappa, -(6 * d as i64 - 8));
    lhs < rhs
}

/// Largest `2^{-j}`, `j ≥ 2`, with `2δλ₀² < 1`, where `λ₀ = p₁^{-2}` is `λ` at `κ = 0`.
pub fn delta_at_zero(p1: &Q) -> Q {
    let lambda0 = (p1 * p1).recip();
    let base = q(2, 1) * &lambda0 * &lambda0;
    let mut delta = q(1, 4);
    while &base * &delta >= Q::one() {
        delta /= q(2, 1);
    }
    delta
}

/// `2δ(λ(1+κ)^{4(d−1)})²(1+κ)^{1/(δα)} < 1`; returns `(holds, exact)`.
pub fn decay_condition(d: usize, p1: &Q, delta: &Q, kappa: &Q) -> (bool, bool) {
    let dd = d as i64;
    let lambda = (p1 * p1).recip() * one_plus_pow(kappa, 2 * dd - 4);
    let inner = lambda * one_plus_pow(kappa, 4 * (dd - 1));
    let pre = q(2, 1) * delta * &inner * &inner;
    let e = (delta * alpha(d)).recip();
    debug_assert!(e.is_integer());
    let e = e.to_integer();
    match e.to_u64() {
        Some(small) if small <= EXACT_EXPONENT_CAP => {
            // pre · ((b+a)/b)^e < 1 compared on integers, avoiding gcd reductions in the power.
            let (a, b) = (kappa.numer(), kappa.denom());
            let lhs = pre.numer() * num_traits::pow(b + a, small as usize);
            let rhs = pre.denom() * num_traits::pow(b.clone(), small as usize);
            (lhs < rhs, true)
        }
        _ => {
            let ek = Q::from_integer(e) * kappa;
            if ek >= Q::one() {
                return (false, false);
            }
            (pre / (Q::one() - ek) < Q::one(), false)
        }
    }
}

/// Largest dyadic `κ ≤ 1` satisfying a condition that is monotone (true below, false above).
/// The result is exact to `THRESHOLD_BITS` binary digits below its leading digit, so the
/// condition fails at `2κ`.
pub fn largest_dyadic<F: Fn(&Q) -> bool>(cond: F) -> Option<Q> {
    if cond(&Q::one()) {
        return Some(Q::one());
    }
    let half = q(1, 2);
    let mut lo = half.clone();
    let mut j = 1;
    while !cond(&lo) {
        lo *= &half;
        j += 1;
        if j > 400 {
            return None;
        }
    }
    let mut hi = &lo * q(2, 1);
    for _ in 0..THRESHOLD_BITS {
        let mid = (&lo + &hi) * &half;
        if cond(&mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(lo)
}

/// Sufficient thresholds for the averaged submultiplicativity and the unfolding decay bound.
pub fn kappa_thresholds(dist: &StepDistribution) -> Thresholds {
    let d = dist.dim();
    let p1 = dist.p1().clone();
    let kappa_asm = largest_dyadic(|k| asm_condition(d, &p1, k)).expect("κ = 0 satisfies the condition strictly");
    let delta = delta_at_zero(&p1);
    let kappa_decay = largest_dyadic(|k| decay_condition(d, &p1, &delta, k).0).expect("κ = 0 satisfies the condition strictly");
    let decay_exact = decay_condition(d, &p1, &delta, &kappa_decay).1;
    Thresholds { kappa_asm, delta_default: delta, kappa_decay, decay_exact }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CriticalEstimates {
    pub mu_bridge_lower: Q,
    pub mu_ratio: Vec<Q>,
    pub zc_lace: f64,
    pub zc_ratio: f64,
}

impl CriticalEstimates {
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "mu_bridge_lower": fmt_q(&self.mu_bridge_lower),
            "mu_bridge_lower_float": to_f64(&self.mu_bridge_lower),
            "mu_ratio": self.mu_ratio.iter().map(fmt_q).collect::<Vec<_>>(),
            "zc_lace": self.zc_lace,
            "zc_ratio": self.zc_ratio,
        })
    }
}

/// A dyadic rational `r ≤ x^{1/n}`, within `2^{-bits}` of it.
pub fn nth_root_lower(x: &Q, n: usize, bits: u32) -> Q {
    if n == 0 || !x.is_positive() {
        return Q::zero();
    }
    // ⌊x · 2^{n·bits}⌋^{1/n} / 2^bits.
    let scale = BigInt::one() << (n as u64 * bits as u64);
    let scaled = (x * Q::from_integer(scale)).floor().to_integer();
    let root = scaled.nth_root(n as u32);
    Q::new(root, BigInt::one() << bits)
}

/// `max_{n ≤ N} b_n^{1/n}` as a certified rational lower bound.
pub fn bridge_lower_bound(b: &[Q]) -> Q {
    let mut best = Q::zero();
    for (n, bn) in b.iter().enumerate().skip(1) {
        let r = nth_root_lower(bn, n, 32);
        debug_assert!(pow(&r, n as i64) <= *bn);
        if r > best {
            best = r;
        }
    }
    best
}

/// `μ` extrapolated from the ratios: `n r_n − (n−1) r_{n−1}` averaged over the last two `n`
/// to cancel the parity oscillation.
pub fn extrapolate_ratio(ratios: &[f64]) -> Result<f64> {
    let m = ratios.len();
    if m < 3 {
        return Err(AsawError::Domain("need at least three ratios".into()));
    }
    let lin = |i: usize| -> f64 {
        let n = (i + 1) as f64;
        n * ratios[i] - (n - 1.0) * ratios[i - 1]
    };
    Ok((lin(m - 1) + lin(m - 2)) / 2.0)
}

/// `Σ_{k=1}^{K} Π^{∗k}` truncated at `N`.
pub fn pi_tilde(pi: &SpatialSeries, folds: usize, order: usize) -> SpatialSeries {
    let base = truncate(pi, order);
    let mut acc = base.clone();
    let mut power = base.clone();
    for _ in 2..=folds {
        power = power.convolve(&base);
        if power.is_zero() {
            break;
        }
        acc.add_assign(&power);
    }
    acc.prune();
    acc
}

fn truncate(s: &SpatialSeries, order: usize) -> SpatialSeries {
    let order = order.min(s.order());
    let mut out = SpatialSeries::new(order);
    for (x, c) in s.entries() {
        out.insert(*x, c.truncate(order));
    }
    out.prune();
    out
}

/// `1 − z − z Σ_x Π̃_z(x)` as a polynomial.
pub fn critical_bracket(pt: &SpatialSeries) -> Series {
    let order = pt.order() + 1;
    let total = pt.total();
    let mut f = Series::one(order);
    f.sub_assign(&Series::monomial(order, 1, Q::one()));
    let mut shifted = Series::zero(order);
    for n in 0..=pt.order() {
        *shifted.coeff_mut(n + 1) = total.coeff(n).clone();
    }
    f.sub_assign(&shifted);
    f
}

/// Bisection root of `f` on `[lo, hi]` to `2^{-40}`, in exact dyadic arithmetic.
pub fn bisect_root(f: &Series, lo: &Q, hi: &Q) -> Result<Q> {
    let (mut a, mut b) = (lo.clone(), hi.clone());
    let fa = f.eval(&a);
    let fb = f.eval(&b);
    if fa.is_zero() {
        return Ok(a);
    }
    if fb.is_zero() {
        return Ok(b);
    }
    if fa.is_positive() == fb.is_positive() {
        return Err(AsawError::Numerical(format!("no sign change on [{}, {}]", fmt_q(lo), fmt_q(hi))));
    }
    let sa = fa.is_positive();
    let tol = pow(&q(1, 2), 40);
    while &b - &a > tol {
        let mid = (&a + &b) / q(2, 1);
        let fm = f.eval(&mid);
        if fm.is_zero() {
            return Ok(mid);
        }
        if fm.is_positive() == sa {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok((a + b) / q(2, 1))
}

/// Sign changes of `f` on a uniform grid of `steps` intervals over `[lo, hi]`.
pub fn sign_changes(f: &Series, lo: f64, hi: f64, steps: usize) -> usize {
    let vals: Vec<f64> = (0..=steps).map(|i| f.eval_f64(lo + (hi - lo) * i as f64 / steps as f64)).collect();
    vals.windows(2).filter(|w| (w[0] > 0.0) != (w[1] > 0.0)).count()
}

/// Both critical-point estimators and the connective-constant proxies.
pub fn critical_estimates(p: &ModelParams, order: usize) -> Result<CriticalEstimates> {
    let table = mass_table(p, order)?;
    let c = table.c();
    let b = table.b();
    let mu_ratio: Vec<Q> = (1..order).map(|n| &c[n + 1] / &c[n]).collect();
    let ratios: Vec<f64> = mu_ratio.iter().map(to_f64).collect();
    let zc_ratio = 1.0 / extrapolate_ratio(&ratios)?;
    let zc_lace = zc_lace(p, order)?;
    Ok(CriticalEstimates { mu_bridge_lower: bridge_lower_bound(&b), mu_ratio, zc_lace, zc_ratio })
}

/// Ratio-method estimate `1/μ` from the `c_n` up to `order`.
pub fn zc_ratio(p: &ModelParams, order: usize) -> Result<f64> {
    let c = mass_table(p, order)?.c();
    let ratios: Vec<f64> = (1..order).map(|n| to_f64(&(&c[n + 1] / &c[n]))).collect();
    Ok(1.0 / extrapolate_ratio(&ratios)?)
}

/// Root of `1 − z − zΣΠ̃` on `[z₀, 2]` with `Π` from the lace expansion at `order`.
pub fn zc_lace(p: &ModelParams, order: usize) -> Result<f64> {
    let pi = pi_coeffs(p, 0, order)?;
    let pt = pi_tilde(&pi, order.div_ceil(2), order);
    let f = critical_bracket(&pt);
    Ok(to_f64(&bisect_root(&f, &p.z0(), &q(2, 1))?))
}

/// `(λ_z, μ_z)` from a truncated `Π̃`.
pub fn lambda_mu(pt: &SpatialSeries, sigma2: &Q, z: &Q) -> (f64, f64) {
    let m2 = pt.second_moment().eval(z);
    let tot = pt.total().eval(z);
    let lambda = Q::one() / (Q::one() + z * m2 / sigma2);
    let mu = Q::one() - &lambda * (Q::one() - z - z * tot);
    (to_f64(&lambda), to_f64(&mu))
}

/// `G − δ − Π̃ − zD∗(δ + Π̃)∗G`.
pub fn lsd_residual(p: &ModelParams, g: &SpatialSeries, pt: &SpatialSeries) -> SpatialSeries {
    let order = g.order().min(pt.order());
    let delta = SpatialSeries::delta(p.d(), order);
    let mut dp = delta.clone();
    dp.add_assign(pt);
    let zd = crate::lace::step_series(p.dist(), order);
    let mut r = truncate(g, order);
    r.sub_assign(&delta);
    r.sub_assign(&truncate(pt, order));
    r.sub_assign(&zd.convolve(&dp).convolve(g));
    r.prune();
    r
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusPoint {
    pub z: Q,
    pub lhs: Q,
    pub rhs: Q,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TorusReport {
    pub side: i64,
    pub chi: Series,
    pub points: Vec<TorusPoint>,
    /// `−(1/χ)′` as a formal series equals `χ′ · (1/χ)²`.
    pub derivative_forms_agree: bool,
}

impl TorusReport {
    pub fn ok(&self) -> bool {
        self.derivative_forms_agree && self.points.iter().all(|p| p.holds)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "side": self.side,
            "chi": self.chi.to_strings(),
            "derivative_forms_agree": self.derivative_forms_agree,
            "points": self.points.iter().map(|p| serde_json::json!({
                "z": fmt_q(&p.z), "lhs": fmt_q(&p.lhs), "rhs": fmt_q(&p.rhs),
                "lhs_float": to_f64(&p.lhs), "rhs_float": to_f64(&p.rhs), "holds": p.holds,
            })).collect::<Vec<_>>(),
        })
    }
}

/// `χ′_Λ(z)/χ_Λ(z)² ≤ (1+κ)^{k₀}/z₀` at each grid point `z ≥ z₀`.
pub fn torus_chi_derivative_check(p: &ModelParams, side: i64, order: usize, z_grid: &[Q]) -> Result<TorusReport> {
    let chi = torus_susceptibility(p, side, order)?;
    let d_chi = chi.derivative();
    let z0 = p.z0();
    let rhs = one_plus_pow(p.kappa(), p.k0() as i64) / &z0;
    let mut points = Vec::new();
    for z in z_grid {
        if *z < z0 {
            return Err(AsawError::Domain(format!("grid point {} below z₀", fmt_q(z))));
        }
        let c = chi.eval(z);
        let lhs = d_chi.eval(z) / (&c * &c);
        points.push(TorusPoint { z: z.clone(), holds: lhs <= rhs, lhs, rhs: rhs.clone() });
    }
    let inv = chi.inverse().ok_or_else(|| AsawError::Domain("χ has no constant term".into()))?;
    let series_form = -&inv.derivative();
    let quotient = d_chi.mul_trunc(&inv.mul_trunc(&inv));
    // The derivative of a series truncated at N is reliable up to N − 1.
    let n = series_form.order().min(quotient.order()).saturating_sub(1);
    let derivative_forms_agree = series_form.truncate(n) == quotient.truncate(n);
    Ok(TorusReport { side, chi, points, derivative_forms_agree })
}

#[derive(Clone, Debug, PartialEq)]
pub enum GammaStatus {
    Holds,
    /// The truncated susceptibility is only a lower approximation, so a failure refutes nothing.
    Inconclusive,
}

#[derive(Clone, Debug, PartialEq)]
pub struct GammaPoint {
    pub z: Q,
    pub chi: Q,
    pub rhs: f64,
    pub margin: f64,
    pub status: GammaStatus,
}

/// Tolerance added to `zc_lace` to form the upper proxy for `z_c`.
pub const ZC_TOLERANCE: f64 = 0.05;

/// Truncated `χ(z)` against `(1+κ)^{−k₀} z₀/(z_c − z)` with `z_c ← zc_upper`.
pub fn gamma_lower_bound_check(p: &ModelParams, order: usize, z_grid: &[Q], zc_upper: f64) -> Result<Vec<GammaPoint>> {
    let c = class_series(p, order, WalkFilter::SelfAvoiding)?;
    let chi = Series::from_coeffs(c, order);
    let z0 = p.z0();
    let pref = to_f64(&(&z0 / one_plus_pow(p.kappa(), p.k0() as i64)));
    let mut out = Vec::new();
    for z in z_grid {
        if *z < z0 || to_f64(z) >= zc_upper {
            return Err(AsawError::Domain(format!("grid point {} outside [z₀, z_c)", fmt_q(z))));
        }
        let val = chi.eval(z);
        let rhs = pref / (zc_upper - to_f64(z));
        let margin = to_f64(&val) - rhs;
        let status = if margin >= 0.0 { GammaStatus::Holds } else { GammaStatus::Inconclusive };
        out.push(GammaPoint { z: z.clone(), chi: val, rhs, margin, status });
    }
    Ok(out)
}

/// Memories used by the averaged submultiplicativity checks: self-avoiding walks ending at
/// `o` with at most `max_len` steps, and the 4-step polygons through `o`.
pub fn asm_memory_pool(p: &ModelParams, max_len: usize) -> Result<Vec<Memory>> {
    let mut walks = Vec::new();
    enumerate_walks(p, max_len, WalkFilter::SelfAvoiding, |v| walks.push(v.walk()))?;
    let mut pool: Vec<Memory> = walks.iter().map(|w| Memory::new(reverse(w)).expect("reversed SAW ends at o")).collect();
    let d = p.d();
    let o = Point::origin(d);
    for i in 0..d {
        for j in i + 1..d {
            for (si, sj) in [(0, 0), (-1, 0), (0, -1), (-1, -1)] {
                let base = o.shifted(i, si).shifted(j, sj);
                let pl = Plaquette::new(base, i, j)?;
                let vs = pl.vertices();
                let start = vs.iter().position(|v| *v == o).unwrap();
                for dir in [1usize, 3] {
                    let pts: Vec<Point> = (0..=4).map(|k| vs[(start + dir * k) % 4]).collect();
                    pool.push(Memory::new(Walk::new(pts)?)?);
                }
            }
        }
    }
    Ok(pool)
}

/// `ω_{[1,n]} ∩ η = ∅`.
pub fn admissible(w: &Walk, eta: &HashSet<Point>) -> bool {
    w.vertices()[1..].iter().all(|v| !eta.contains(v))
}

#[derive(Clone, Debug, PartialEq)]
pub struct AsmWalkCheck {
    pub lhs: Q,
    pub rhs: Q,
    pub k: usize,
    pub budget: usize,
    pub holds: bool,
}

/// `z^{|ω|} W(ω; η) ≤ (1+κ)^{k₀} Σ_{B ⊆ adj*} z^{|ω_B|} W(ω_B)` with `adj*` the committed
/// choice from the plaquettes of `adj(η, ω)` flippable for `ω`.
pub fn asm_walk_check(p: &ModelParams, eta: &Memory, w: &Walk, z: &Q) -> AsmWalkCheck {
    let lhs = pow(z, w.len() as i64) * conditional_weight(p, w, eta);
    let adj1: BTreeSet<Plaquette> = match eta.walk() {
        Some(m) => adj_between(m, w, true),
        None => BTreeSet::new(),
    };
    let star = committed_choice(&adj1, p.d());
    let mut sum = Q::zero();
    for b in all_subsets(&star) {
        let image = flip_set(&FlipSet::new(b).expect("committed choice is disjoint"), w);
        sum += pow(z, image.len() as i64) * asaw_weight(p, &image);
    }
    let rhs = one_plus_pow(p.kappa(), k0(p.d()) as i64) * sum;
    AsmWalkCheck { holds: lhs <= rhs, lhs, rhs, k: adj1.len(), budget: star.len() }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AsmReport {
    pub memories: usize,
    pub pairs_checked: u64,
    pub max_budget: usize,
    pub max_k: usize,
    pub violations: Vec<(String, String)>,
    /// Smallest `rhs/lhs` over all pairs with `lhs > 0`.
    pub min_ratio: Option<Q>,
}

impl AsmReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// The per-walk inequality over every memory of the pool and every admissible SAW with at
/// most `max_len` steps, at `z = z₀`.
pub fn asm_per_walk_suite(p: &ModelParams, pool: &[Memory], max_len: usize) -> Result<AsmReport> {
    let mut walks = Vec::new();
    enumerate_walks(p, max_len, WalkFilter::SelfAvoiding, |v| walks.push(v.walk()))?;
    let z = p.z0();
    let parts: Vec<AsmReport> = pool
        .par_iter()
        .map(|eta| {
            let set: HashSet<Point> = eta.vertices().iter().copied().collect();
            let mut rep = AsmReport { memories: 1, ..Default::default() };
            for w in walks.iter().filter(|w| admissible(w, &set)) {
                let c = asm_walk_check(p, eta, w, &z);
                rep.pairs_checked += 1;
                rep.max_budget = rep.max_budget.max(c.budget);
                rep.max_k = rep.max_k.max(c.k);
                if !c.holds {
                    rep.violations.push((eta.walk().map(|m| m.to_text()).unwrap_or_default(), w.to_text()));
                }
                if c.lhs.is_positive() {
                    let r = &c.rhs / &c.lhs;
                    if rep.min_ratio.as_ref().is_none_or(|m| r < *m) {
                        rep.min_ratio = Some(r);
                    }
                }
            }
            rep
        })
        .collect();
    let mut out = AsmReport::default();
    for r in parts {
        out.memories += r.memories;
        out.pairs_checked += r.pairs_checked;
        out.max_budget = out.max_budget.max(r.max_budget);
        out.max_k = out.max_k.max(r.max_k);
        out.violations.extend(r.violations);
        if let Some(m) = r.min_ratio {
            if out.min_ratio.as_ref().is_none_or(|o| m < *o) {
                out.min_ratio = Some(m);
            }
        }
    }
    Ok(out)
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct AggregatedAsmReport {
    pub memories: usize,
    pub points_checked: usize,
    pub extended_order: usize,
    pub violations: Vec<(String, Point)>,
}

/// `Σ_{n ≤ N} z₀ⁿ [zⁿ]G^η(x) ≤ (1+κ)^{k₀} Σ_{n ≤ N′} z₀ⁿ [zⁿ]G(x)` with
/// `N′ = N + 2·budget`, for every memory and every `x` reached with memory.
pub fn asm_aggregated_check(p: &ModelParams, pool: &[Memory], order: usize, budget: usize) -> Result<AggregatedAsmReport> {
    let extended = order + 2 * budget;
    let g = two_point_coeffs(p, extended)?;
    let z = p.z0();
    let factor = one_plus_pow(p.kappa(), p.k0() as i64);
    let shared = Arc::new(g);
    let parts: Vec<Result<AggregatedAsmReport>> = pool
        .par_iter()
        .map(|eta| {
            let ge = memory_two_point_coeffs(p, eta, order, false, 0)?;
            let mut rep = AggregatedAsmReport { memories: 1, ..Default::default() };
            for (x, s) in ge.entries() {
                let lhs = s.eval(&z);
                let rhs = shared.get(x).map(|gs| gs.eval(&z)).unwrap_or_else(Q::zero) * &factor;
                rep.points_checked += 1;
                if lhs > rhs {
                    rep.violations.push((eta.walk().map(|m| m.to_text()).unwrap_or_default(), *x));
                }
            }
            Ok(rep)
        })
        .collect();
    let mut out = AggregatedAsmReport { extended_order: extended, ..Default::default() };
    for r in parts {
        let r = r?;
        out.memories += r.memories;
        out.points_checked += r.points_checked;
        out.violations.extend(r.violations);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lace::recursion_residual;
    use crate::stepdist::{make_nearest_neighbour, make_spread_out, Shape};

    fn nn(k: Q) -> ModelParams {
        ModelParams::new(k, make_nearest_neighbour(2).unwrap()).unwrap()
    }

    #[test]
    fn thresholds_nearest_neighbour() {
        let d = make_nearest_neighbour(2).unwrap();
        let t = kappa_thresholds(&d);
        let p1 = d.p1().clone();
        assert!(t.kappa_asm.is_positive());
        assert!(asm_condition(2, &p1, &t.kappa_asm));
        assert!(!asm_condition(2, &p1, &(&t.kappa_asm * q(2, 1))));
        assert!(asm_condition(2, &p1, &Q::zero()));
        assert_eq!(t.delta_default, pow(&q(1, 2), 10));
        assert!(t.decay_exact);
        assert!(decay_condition(2, &p1, &t.delta_default, &t.kappa_decay).0);
        assert!(!decay_condition(2, &p1, &t.delta_default, &(&t.kappa_decay * q(2, 1))).0);
        // (1+κ)^{9216} < 2 puts κ near ln 2 / 9216.
        let kd = to_f64(&t.kappa_decay);
        assert!(kd > 7.0e-5 && kd < 7.6e-5, "{kd}");
        let p = ModelParams::new(Q::zero(), d).unwrap();
        assert_eq!(crate::unfold::delta_default(&p), Some(t.delta_default.clone()));
    }

    #[test]
    fn thresholds_monotone_in_p1() {
        let ks: Vec<Q> =
            (1..=3).map(|l| kappa_thresholds(&make_spread_out(2, l, Shape::Uniform).unwrap()).kappa_asm).collect();
        assert!(ks[0] >= ks[1] && ks[1] >= ks[2]);
        assert!(ks.iter().all(|k| k.is_positive()));
        let t = kappa_thresholds(&make_spread_out(2, 1, Shape::Uniform).unwrap());
        assert!(!t.decay_exact);
        assert!(t.kappa_decay.is_positive());
    }

    #[test]
    fn dyadic_roots() {
        let r = nth_root_lower(&q(27, 8), 3, 10);
        assert_eq!(r, q(3, 2));
        let r = nth_root_lower(&q(2, 1), 2, 20);
        assert!(&r * &r <= q(2, 1));
        let up = &r + pow(&q(1, 2), 20);
        assert!(&up * &up > q(2, 1));
    }

    #[test]
    fn pi_tilde_examples() {
        let o = Point::origin(2);
        let mut pi = SpatialSeries::new(8);
        pi.add_coeff(o, 2, &q(-1, 3));
        let pt = pi_tilde(&pi, 4, 8);
        for k in 1..=4 {
            assert_eq!(pt.coeff(&o, 2 * k), pow(&q(-1, 3), k as i64));
        }
        let (l, m) = lambda_mu(&SpatialSeries::new(4), &q(1, 1), &q(3, 2));
        assert_eq!((l, m), (1.0, 1.5));
    }

    #[test]
    fn lsd_and_bracket() {
        let p = nn(q(1, 10));
        let g = two_point_coeffs(&p, 6).unwrap();
        let pi = pi_coeffs(&p, 0, 6).unwrap();
        assert!(recursion_residual(&p, 6).unwrap().is_zero());
        let pt = pi_tilde(&pi, 3, 6);
        assert!(lsd_residual(&p, &g, &pt).is_zero());
        let o = Point::origin(2);
        assert_eq!(pt.coeff(&o, 2), pi.coeff(&o, 2));
    }

    #[test]
    fn critical_points_nearest_neighbour() {
        let p = nn(Q::zero());
        let est = critical_estimates(&p, 8).unwrap();
        assert!(est.zc_lace > 1.0 && est.zc_ratio > 1.0);
        assert!((est.zc_lace - est.zc_ratio).abs() / est.zc_ratio <= 0.10, "{est:?}");
        let mu_lower = to_f64(&est.mu_bridge_lower);
        assert!(est.mu_ratio.iter().all(|r| to_f64(r) >= mu_lower));
        let pi = pi_coeffs(&p, 0, 8).unwrap();
        let f = critical_bracket(&pi_tilde(&pi, 4, 8));
        assert_eq!(sign_changes(&f, 1.0, 2.0, 2000), 1);
        let (_, mu) = lambda_mu(&pi_tilde(&pi, 4, 8), p.dist().sigma2(), &Q::from_float(est.zc_lace).unwrap());
        assert!((mu - 1.0).abs() < 1e-9);
    }

    #[test]
    fn torus_bound() {
        let kasm = kappa_thresholds(&make_nearest_neighbour(2).unwrap()).kappa_asm;
        for k in [Q::zero(), kasm / q(2, 1)] {
            let p = nn(k);
            let grid = [p.z0(), q(1, 1), q(3, 2)];
            let rep = torus_chi_derivative_check(&p, 3, 8, &grid).unwrap();
            assert!(rep.ok(), "{rep:?}");
            assert_eq!(*rep.chi.coeff(0), q(1, 1));
        }
    }

    #[test]
    fn gamma_bound() {
        let p = nn(Q::zero());
        let zc = zc_lace(&p, 8).unwrap() + ZC_TOLERANCE;
        let pts = gamma_lower_bound_check(&p, 12, &[q(1, 1), q(5, 4), q(11, 8)], zc).unwrap();
        assert_eq!(pts[0].status, GammaStatus::Holds);
        assert!(pts[0].margin > 1.0);
        assert!(gamma_lower_bound_check(&p, 12, &[q(1, 2)], zc).is_err());
    }

    #[test]
    fn asm_small() {
        let kasm = kappa_thresholds(&make_nearest_neighbour(2).unwrap()).kappa_asm;
        let p = nn(kasm / q(2, 1));
        let pool = asm_memory_pool(&p, 3).unwrap();
        assert_eq!(pool.len(), 1 + 4 + 12 + 36 + 8);
        let rep = asm_per_walk_suite(&p, &pool, 5).unwrap();
        assert!(rep.ok(), "{:?}", &rep.violations[..rep.violations.len().min(4)]);
        let agg = asm_aggregated_check(&p, &pool, 4, rep.max_budget).unwrap();
        assert!(agg.violations.is_empty(), "{agg:?}");
    }
}
