//! Simple random walk two-point function: exact transition series, Fourier quadrature of
//! `C_μ(x)`, and comparison with the continuum constant `a_d / (σ² ⟦x⟧^{d−2})`.

use crate::error::{AsawError, Result};
use crate::lattice::{Point, MAX_DIM};
use crate::rational::{to_f64, Q};
use crate::series::SpatialSeries;
use crate::stepdist::StepDistribution;
use num_traits::Zero;
use rayon::prelude::*;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::sync::OnceLock;

/// `[zⁿ]` at `x` is the `n`-step transition probability from `o` to `x`.
pub fn srw_series_coeffs(dist: &StepDistribution, order: usize) -> Result<SpatialSeries> {
    let reach = dist.range_bound() as f64 * order as f64;
    let points = (2.0 * reach + 1.0).powi(dist.dim() as i32);
    if points > 5e6 {
        return Err(AsawError::CapExceeded(format!("{points:.0} lattice points at order {order}")));
    }
    let o = Point::origin(dist.dim());
    let mut out = SpatialSeries::new(order);
    let mut layer: BTreeMap<Point, Q> = BTreeMap::from([(o, Q::from_integer(1.into()))]);
    out.add_coeff(o, 0, &layer[&o]);
    for n in 1..=order {
        let mut next: BTreeMap<Point, Q> = BTreeMap::new();
        for (x, px) in &layer {
            for (s, ps) in dist.support() {
                let e = next.entry(x.add(s)).or_insert_with(Q::zero);
                *e += px * ps;
            }
        }
        for (x, p) in &next {
            out.add_coeff(*x, n, p);
        }
        layer = next;
    }
    Ok(out)
}

/// `Σ_{n ≤ N} μⁿ [zⁿ] C(x)` in floating point.
pub fn truncated_series(s: &SpatialSeries, x: &Point, mu: f64) -> f64 {
    s.get(x).map(|c| c.eval_f64(mu)).unwrap_or(0.0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct GreenEstimate {
    pub x: Point,
    pub mu: f64,
    pub value: f64,
    pub quadrature_order: usize,
    pub error_proxy: f64,
}

/// Gauss–Legendre nodes and weights on `[−1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        xs[i] = -z;
        xs[n - 1 - i] = z;
        ws[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        ws[n - 1 - i] = ws[i];
    }
    (xs, ws)
}

/// How `D̂` factorizes over coordinates.
#[derive(Clone, Debug)]
enum Symbol {
    /// `D̂(k) = (1/d) Σ cos kᵢ`.
    NearestNeighbour,
    /// Uniform on the punctured cube of side `2L+1`: `D̂ = (Π Kᵢ − 1)/((2L+1)^d − 1)`.
    Cube(i64),
    Generic(Vec<(Vec<i64>, f64)>),
}

fn symbol_of(dist: &StepDistribution) -> Symbol {
    let d = dist.dim() as u32;
    let l = dist.range_bound();
    if dist.is_nearest_neighbour() {
        Symbol::NearestNeighbour
    } else if dist.uniform_probability().is_some() && dist.support().len() as i64 == (2 * l + 1).pow(d) - 1 {
        Symbol::Cube(l)
    } else {
        Symbol::Generic(dist.support().iter().map(|(x, p)| (x.coords().to_vec(), to_f64(p))).collect())
    }
}

/// `Σ_{|y| ≤ L} cos(k y)`.
fn dirichlet(l: i64, k: f64) -> f64 {
    (-l..=l).map(|y| (k * y as f64).cos()).sum()
}

struct Integrand<'a> {
    d: usize,
    mu: f64,
    x: &'a [i64],
    symbol: &'a Symbol,
}

impl Integrand<'_> {
    fn dhat(&self, k: &[f64]) -> f64 {
        match self.symbol {
            Symbol::NearestNeighbour => k.iter().map(|v| v.cos()).sum::<f64>() / self.d as f64,
            Symbol::Cube(l) => {
                let side = (2 * l + 1) as f64;
                let n = side.powi(self.d as i32) - 1.0;
                (k.iter().map(|v| dirichlet(*l, *v)).product::<f64>() - 1.0) / n
            }
            Symbol::Generic(sup) => sup
                .iter()
                .map(|(y, p)| p * y.iter().zip(k).map(|(a, b)| (*a as f64 * b).cos()).product::<f64>())
                .sum(),
        }
    }

    /// Tensor-product Gauss–Legendre over the box `lo + [0, side]^d`.
    fn cube(&self, lo: &[f64], side: f64, base_nodes: usize) -> f64 {
        let d = self.d;
        // Extra nodes along coordinates where cos(kᵢ xᵢ) oscillates.
        let rules: Vec<(Vec<f64>, Vec<f64>)> = (0..d)
            .map(|i| {
                let n = base_nodes + (self.x[i].unsigned_abs() as f64 * side * 0.6).ceil() as usize;
                let (t, w) = gauss_legendre(n);
                let nodes = t.iter().map(|t| lo[i] + side * (t + 1.0) / 2.0).collect();
                let weights = w.iter().map(|w| w * side / 2.0).collect();
                (nodes, weights)
            })
            .collect();
        let cos_tab: Vec<Vec<f64>> =
            (0..d).map(|i| rules[i].0.iter().map(|k| (k * self.x[i] as f64).cos()).collect()).collect();
        // Per-coordinate factors of D̂: cos kᵢ (summed) or the Dirichlet kernel (multiplied).
        let sym_tab: Vec<Vec<f64>> = (0..d)
            .map(|i| {
                rules[i]
                    .0
                    .iter()
                    .map(|&k| match self.symbol {
                        Symbol::Cube(l) => dirichlet(*l, k),
                        _ => k.cos(),
                    })
                    .collect()
            })
            .collect();
        let cube_norm = match self.symbol {
            Symbol::Cube(l) => ((2 * l + 1) as f64).powi(d as i32) - 1.0,
            _ => 1.0,
        };
        let mut idx = vec![0usize; d];
        let mut k = vec![0.0; d];
        let mut total = 0.0;
        loop {
            let mut w = 1.0;
            let mut c = 1.0;
            let mut sum = 0.0;
            let mut prod = 1.0;
            for i in 0..d {
                w *= rules[i].1[idx[i]];
                c *= cos_tab[i][idx[i]];
                sum += sym_tab[i][idx[i]];
                prod *= sym_tab[i][idx[i]];
            }
            let dhat = match self.symbol {
                Symbol::NearestNeighbour => sum / d as f64,
                Symbol::Cube(_) => (prod - 1.0) / cube_norm,
                Symbol::Generic(_) => {
                    for i in 0..d {
                        k[i] = rules[i].0[idx[i]];
                    }
                    self.dhat(&k)
                }
            };
            total += w * c / (1.0 - self.mu * dhat);
            let mut i = 0;
            while i < d {
                idx[i] += 1;
                if idx[i] < rules[i].0.len() {
                    break;
                }
                idx[i] = 0;
                i += 1;
            }
            if i == d {
                break;
            }
        }
        total
    }
}

fn pairwise_sum(v: &[f64]) -> f64 {
    match v.len() {
        0 => 0.0,
        1 => v[0],
        n => pairwise_sum(&v[..n / 2]) + pairwise_sum(&v[n / 2..]),
    }
}

/// `∫_{[0,1]^d} |u|^{-2} du` via the scaling of dyadic shells.
fn inverse_square_cube_integral(d: usize) -> f64 {
    static CACHE: [OnceLock<f64>; MAX_DIM + 1] = [const { OnceLock::new() }; MAX_DIM + 1];
    *CACHE[d].get_or_init(|| inverse_square_uncached(d))
}

fn inverse_square_uncached(d: usize) -> f64 {
    let sym = Symbol::NearestNeighbour;
    let zeros = vec![0i64; d];
    let it = Integrand { d, mu: 0.0, x: &zeros, symbol: &sym };
    let shell: f64 = shell_corners(d)
        .iter()
        .map(|c| {
            let lo: Vec<f64> = c.iter().map(|&b| if b { 0.5 } else { 0.0 }).collect();
            gl_inverse_square(&it, &lo, 0.5, 16)
        })
        .sum();
    shell / (1.0 - 0.5f64.powi(d as i32 - 2))
}

fn gl_inverse_square(it: &Integrand<'_>, lo: &[f64], side: f64, n: usize) -> f64 {
    let (t, w) = gauss_legendre(n);
    let d = it.d;
    let mut idx = vec![0usize; d];
    let mut total = 0.0;
    loop {
        let mut wt = 1.0;
        let mut r2 = 0.0;
        for i in 0..d {
            let k = lo[i] + side * (t[idx[i]] + 1.0) / 2.0;
            wt *= w[idx[i]] * side / 2.0;
            r2 += k * k;
        }
        total += wt / r2;
        let mut i = 0;
        while i < d {
            idx[i] += 1;
            if idx[i] < n {
                break;
            }
            idx[i] = 0;
            i += 1;
        }
        if i == d {
            return total;
        }
    }
}

/// The `2^d − 1` corners of a dyadic shell (true = upper half in that coordinate).
fn shell_corners(d: usize) -> Vec<Vec<bool>> {
    (1u32..1 << d).map(|m| (0..d).map(|i| m >> i & 1 == 1).collect()).collect()
}

fn quadrature_level(dist: &StepDistribution, mu: f64, x: &Point, level: usize) -> f64 {
    let d = dist.dim();
    let symbol = symbol_of(dist);
    let it = Integrand { d, mu, x: x.coords(), symbol: &symbol };
    let base_nodes = 6 + 2 * level;
    let reach = x.linf().max(1) as f64;
    let shells = ((PI * reach / 0.25).log2().ceil() as usize).max(4) + level;
    let cells: Vec<(usize, Vec<bool>)> =
        (0..shells).flat_map(|j| shell_corners(d).into_iter().map(move |c| (j, c))).collect();
    let parts: Vec<f64> = cells
        .par_iter()
        .map(|(j, corner)| {
            let side = PI / 2f64.powi(*j as i32 + 1);
            let lo: Vec<f64> = corner.iter().map(|&b| if b { side } else { 0.0 }).collect();
            it.cube(&lo, side, base_nodes)
        })
        .collect();
    let h = PI / 2f64.powi(shells as i32);
    let inner = if mu < 1.0 {
        it.cube(&vec![0.0; d], h, base_nodes)
    } else {
        // 1 − D̂(k) ≈ σ²|k|²/(2d) and cos(k·x) ≈ 1 on the innermost cube.
        let c = to_f64(dist.sigma2()) / (2.0 * d as f64);
        h.powi(d as i32 - 2) * inverse_square_cube_integral(d) / c
    };
    (pairwise_sum(&parts) + inner) / PI.powi(d as i32)
}

/// `C_μ(x)` by Fourier inversion; `error_proxy` is the change from the previous refinement.
pub fn green_quadrature(dist: &StepDistribution, mu: f64, x: &Point, refinement: usize) -> Result<GreenEstimate> {
    if !(0.0..=1.0).contains(&mu) {
        return Err(AsawError::Domain(format!("mu = {mu} outside [0, 1]")));
    }
    if mu == 1.0 && dist.dim() <= 2 {
        return Err(AsawError::Domain("C_1 diverges for d ≤ 2".into()));
    }
    if x.dim() != dist.dim() {
        return Err(AsawError::BadDimension(x.dim()));
    }
    let refinement = refinement.max(2);
    let levels: Vec<f64> = (refinement - 2..=refinement).map(|l| quadrature_level(dist, mu, x, l)).collect();
    let prev = (levels[1] - levels[0]).abs();
    let proxy = (levels[2] - levels[1]).abs();
    let scale = levels[2].abs().max(1e-300);
    if proxy > 4.0 * prev && proxy > 1e-10 * scale {
        return Err(AsawError::Domain(format!("quadrature refinement not converging ({prev:e} → {proxy:e})")));
    }
    Ok(GreenEstimate { x: *x, mu, value: levels[2], quadrature_order: 6 + 2 * refinement, error_proxy: proxy })
}

/// `Γ(k/2)` for a positive integer `k`.
pub fn gamma_half(k: usize) -> f64 {
    match k {
        1 => PI.sqrt(),
        2 => 1.0,
        _ => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
    }
}

/// `a_d = d Γ(d/2 − 1) / (2 π^{d/2})`.
pub fn a_d(d: usize) -> f64 {
    d as f64 * gamma_half(d - 2) / (2.0 * PI.powf(d as f64 / 2.0))
}

/// `⟦x⟧ = max{‖x‖₂, 1}`.
pub fn bracket(x: &Point) -> f64 {
    (x.l2sq() as f64).sqrt().max(1.0)
}

pub const DEFAULT_REFINEMENT: usize = 3;

/// `C₁(x) σ² ⟦x⟧^{d−2} / a_d` with the estimate used.
pub fn asymptotic_ratio(dist: &StepDistribution, x: &Point) -> Result<(f64, GreenEstimate)> {
    let d = dist.dim();
    if d < 3 {
        return Err(AsawError::BadDimension(d));
    }
    let est = green_quadrature(dist, 1.0, x, DEFAULT_REFINEMENT)?;
    let ratio = est.value * to_f64(dist.sigma2()) * bracket(x).powi(d as i32 - 2) / a_d(d);
    Ok((ratio, est))
}

/// Least-squares slope of `log (f∗g)(x)` against `log ⟦x⟧` for `f = g = ⟦·⟧^{−a}` on the box
/// `‖y‖∞ ≤ half_side`, with `x = r e₁` for each `r` in `radii`.
pub fn convolution_decay_slope(d: usize, a: f64, half_side: i64, radii: &[i64]) -> f64 {
    let f = |c: &[i64]| -> f64 {
        let r2: i64 = c.iter().map(|v| v * v).sum();
        (r2 as f64).sqrt().max(1.0).powf(-a)
    };
    let values: Vec<f64> = radii
        .par_iter()
        .map(|&r| {
            let mut y = vec![-half_side; d];
            let mut acc = 0.0;
            loop {
                let mut diff = y.clone();
                diff[0] -= r;
                if diff.iter().all(|v| v.abs() <= half_side) {
                    acc += f(&y) * f(&diff);
                }
                let mut i = 0;
                while i < d {
                    y[i] += 1;
                    if y[i] <= half_side {
                        break;
                    }
                    y[i] = -half_side;
                    i += 1;
                }
                if i == d {
                    return acc;
                }
            }
        })
        .collect();
    let xs: Vec<f64> = radii.iter().map(|&r| (r.max(1) as f64).ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}
