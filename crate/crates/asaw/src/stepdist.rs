//! Step distributions with exact rational probabilities and the a priori walk measure.

use crate::error::{AsawError, Result};
use crate::lattice::{Point, MAX_DIM};
use crate::rational::{q, Q};
use crate::walks::Walk;
use num_traits::{One, Zero};
use std::collections::HashMap;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    /// `h` constant on the closed unit cube: uniform on `{x ≠ o : ‖x‖∞ ≤ L}`.
    Uniform,
}

#[derive(Clone, Debug)]
pub struct StepDistribution {
    d: usize,
    support: Vec<(Point, Q)>,
    index: HashMap<Point, usize>,
    p1: Q,
    sigma2: Q,
    range_bound: i64,
    uniform: Option<Q>,
    label: String,
}

impl StepDistribution {
    fn build(d: usize, mut support: Vec<(Point, Q)>, label: String) -> Result<StepDistribution> {
        support.sort_by(|a, b| a.0.cmp(&b.0));
        let total: Q = support.iter().map(|(_, p)| p.clone()).sum();
        if total.is_zero() {
            return Err(AsawError::Domain("normalizer is zero".into()));
        }
        if !total.is_one() {
            for (_, p) in support.iter_mut() {
                *p = &*p / &total;
            }
        }
        let index = support.iter().enumerate().map(|(i, (x, _))| (*x, i)).collect::<HashMap<_, _>>();
        let e1 = Point::unit(d, 0, 1);
        let p1 = index.get(&e1).map(|&i| support[i].1.clone()).unwrap_or_else(Q::zero);
        if p1.is_zero() {
            return Err(AsawError::Domain("D(e1) = 0".into()));
        }
        let sigma2 = support.iter().map(|(x, p)| p * Q::from_integer(x.l2sq().into())).sum();
        let range_bound = support.iter().map(|(x, _)| x.linf()).max().unwrap_or(0);
        let first = support[0].1.clone();
        let uniform = support.iter().all(|(_, p)| *p == first).then_some(first);
        Ok(StepDistribution { d, support, index, p1, sigma2, range_bound, uniform, label })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    /// Support points with probabilities, in lexicographic order.
    pub fn support(&self) -> &[(Point, Q)] {
        &self.support
    }

    pub fn prob(&self, x: &Point) -> Option<&Q> {
        self.index.get(x).map(|&i| &self.support[i].1)
    }

    pub fn p1(&self) -> &Q {
        &self.p1
    }

    pub fn sigma2(&self) -> &Q {
        &self.sigma2
    }

    pub fn range_bound(&self) -> i64 {
        self.range_bound
    }

    /// The common probability when D is uniform on its support.
    pub fn uniform_probability(&self) -> Option<&Q> {
        self.uniform.as_ref()
    }

    pub fn is_nearest_neighbour(&self) -> bool {
        self.range_bound == 1 && self.support.len() == 2 * self.d
    }

    /// `nn` or `spread:L=<int>,shape=uniform`.
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Characteristic function `D̂(k) = Σ_x D(x) cos(k·x)`.
    pub fn fourier(&self, k: &[f64]) -> f64 {
        let mut s = 0.0;
        for (x, p) in &self.support {
            let dot: f64 = x.coords().iter().zip(k).map(|(a, b)| *a as f64 * b).sum();
            s += crate::rational::to_f64(p) * dot.cos();
        }
        s
    }
}

pub fn make_nearest_neighbour(d: usize) -> Result<StepDistribution> {
    if !(2..=MAX_DIM).contains(&d) {
        return Err(AsawError::BadDimension(d));
    }
    let p = q(1, 2 * d as i64);
    let mut support = Vec::new();
    for axis in 0..d {
        for s in [-1, 1] {
            support.push((Point::unit(d, axis, s), p.clone()));
        }
    }
    StepDistribution::build(d, support, "nn".into())
}

pub fn make_spread_out(d: usize, l: i64, shape: Shape) -> Result<StepDistribution> {
    if !(2..=MAX_DIM).contains(&d) {
        return Err(AsawError::BadDimension(d));
    }
    if l < 1 {
        return Err(AsawError::Domain(format!("spread-out range L={l} must be ≥ 1")));
    }
    let Shape::Uniform = shape;
    let side = 2 * l + 1;
    let count = side.pow(d as u32) - 1;
    let p = q(1, count);
    let mut support = Vec::with_capacity(count as usize);
    let mut c = vec![-l; d];
    loop {
        let x = Point::new(&c);
        if !x.is_origin() {
            support.push((x, p.clone()));
        }
        let mut k = 0;
        while k < d {
            c[k] += 1;
            if c[k] <= l {
                break;
            }
            c[k] = -l;
            k += 1;
        }
        if k == d {
            break;
        }
    }
    StepDistribution::build(d, support, format!("spread:L={l},shape=uniform"))
}

/// Parses `nn` or `spread:L=<int>,shape=uniform`.
pub fn parse_distribution(d: usize, spec: &str) -> Result<StepDistribution> {
    let spec = spec.trim();
    if spec == "nn" {
        return make_nearest_neighbour(d);
    }
    let rest = spec
        .strip_prefix("spread:")
        .ok_or_else(|| AsawError::Parse(format!("unknown distribution '{spec}'")))?;
    let mut l = None;
    let mut shape = Shape::Uniform;
    for kv in rest.split(',') {
        match kv.split_once('=') {
            Some(("L", v)) => l = Some(v.parse::<i64>().map_err(|_| AsawError::Parse(format!("bad L '{v}'")))?),
            Some(("shape", "uniform")) => shape = Shape::Uniform,
            _ => return Err(AsawError::Parse(format!("bad distribution field '{kv}'"))),
        }
    }
    let l = l.ok_or_else(|| AsawError::Parse("spread-out distribution needs L".into()))?;
    make_spread_out(d, l, shape)
}

/// `P_n(ω) = Π D(ω_{i+1} − ω_i)`; zero when a step leaves the support.
pub fn apriori_weight(dist: &StepDistribution, w: &Walk) -> Q {
    if let Some(p) = dist.uniform_probability() {
        if w.steps().all(|s| dist.prob(&s).is_some()) {
            return num_traits::pow(p.clone(), w.len());
        }
        return Q::zero();
    }
    let mut acc = Q::one();
    for s in w.steps() {
        match dist.prob(&s) {
            Some(p) => acc *= p,
            None => return Q::zero(),
        }
    }
    acc
}
