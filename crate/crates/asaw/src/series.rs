//! Truncated power series in `z` with exact rational coefficients, and their
//! lattice-indexed counterparts.

use crate::lattice::Point;
use crate::rational::{fmt_q, to_f64, Q};
use num_traits::{One, Signed, Zero};
use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Series {
    coeffs: Vec<Q>,
}

impl Series {
    pub fn zero(order: usize) -> Series {
        Series { coeffs: vec![Q::zero(); order + 1] }
    }

    pub fn one(order: usize) -> Series {
        let mut s = Series::zero(order);
        s.coeffs[0] = Q::one();
        s
    }

    /// `c · z^k`, truncated.
    pub fn monomial(order: usize, k: usize, c: Q) -> Series {
        let mut s = Series::zero(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    pub fn from_coeffs(mut coeffs: Vec<Q>, order: usize) -> Series {
        coeffs.resize(order + 1, Q::zero());
        Series { coeffs }
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[Q] {
        &self.coeffs
    }

    pub fn coeff(&self, n: usize) -> &Q {
        &self.coeffs[n]
    }

    pub fn coeff_mut(&mut self, n: usize) -> &mut Q {
        &mut self.coeffs[n]
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_zero())
    }

    /// Lowest power with a nonzero coefficient.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn truncate(&self, order: usize) -> Series {
        Series::from_coeffs(self.coeffs[..=order.min(self.order())].to_vec(), order)
    }

    pub fn scale(&self, c: &Q) -> Series {
        Series { coeffs: self.coeffs.iter().map(|x| x * c).collect() }
    }

    /// Multiplies by `z^k`, truncating.
    pub fn shift(&self, k: usize) -> Series {
        let n = self.order();
        let mut out = Series::zero(n);
        for i in 0..=n {
            if i + k <= n {
                out.coeffs[i + k] = self.coeffs[i].clone();
            }
        }
        out
    }

    pub fn add_assign(&mut self, o: &Series) {
        for (a, b) in self.coeffs.iter_mut().zip(&o.coeffs) {
            *a += b;
        }
    }

    pub fn sub_assign(&mut self, o: &Series) {
        for (a, b) in self.coeffs.iter_mut().zip(&o.coeffs) {
            *a -= b;
        }
    }

    /// Truncated product; the order is the smaller of the two.
    pub fn mul_trunc(&self, o: &Series) -> Series {
        let n = self.order().min(o.order());
        let mut out = Series::zero(n);
        for i in 0..=n {
            if self.coeffs[i].is_zero() {
                continue;
            }
            for j in 0..=n - i {
                if !o.coeffs[j].is_zero() {
                    out.coeffs[i + j] += &self.coeffs[i] * &o.coeffs[j];
                }
            }
        }
        out
    }

    /// Multiplicative inverse when the constant term is nonzero.
    pub fn inverse(&self) -> Option<Series> {
        let c0 = self.coeffs[0].clone();
        if c0.is_zero() {
            return None;
        }
        let n = self.order();
        let inv0 = c0.recip();
        let mut out = Series::zero(n);
        out.coeffs[0] = inv0.clone();
        for k in 1..=n {
            let mut acc = Q::zero();
            for j in 1..=k {
                acc += &self.coeffs[j] * &out.coeffs[k - j];
            }
            out.coeffs[k] = -acc * &inv0;
        }
        Some(out)
    }

    pub fn derivative(&self) -> Series {
        let n = self.order();
        let mut out = Series::zero(n);
        for k in 1..=n {
            out.coeffs[k - 1] = &self.coeffs[k] * Q::from_integer(k.into());
        }
        out
    }

    /// Exact evaluation at a rational point (Horner).
    pub fn eval(&self, z: &Q) -> Q {
        let mut acc = Q::zero();
        for c in self.coeffs.iter().rev() {
            acc = acc * z + c;
        }
        acc
    }

    pub fn eval_f64(&self, z: f64) -> f64 {
        let mut acc = 0.0;
        for c in self.coeffs.iter().rev() {
            acc = acc * z + to_f64(c);
        }
        acc
    }

    pub fn max_abs(&self) -> Q {
        self.coeffs.iter().map(|c| c.abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn to_strings(&self) -> Vec<String> {
        self.coeffs.iter().map(fmt_q).collect()
    }
}

impl Add for &Series {
    type Output = Series;
    fn add(self, o: &Series) -> Series {
        let n = self.order().min(o.order());
        let mut out = self.truncate(n);
        out.add_assign(o);
        out
    }
}

impl Sub for &Series {
    type Output = Series;
    fn sub(self, o: &Series) -> Series {
        let n = self.order().min(o.order());
        let mut out = self.truncate(n);
        out.sub_assign(o);
        out
    }
}

impl Mul for &Series {
    type Output = Series;
    fn mul(self, o: &Series) -> Series {
        self.mul_trunc(o)
    }
}

impl Neg for &Series {
    type Output = Series;
    fn neg(self) -> Series {
        Series { coeffs: self.coeffs.iter().map(|c| -c).collect() }
    }
}

/// Finite-support map `Point → Series`; absent points are zero.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SpatialSeries {
    order: usize,
    entries: BTreeMap<Point, Series>,
}

impl SpatialSeries {
    pub fn new(order: usize) -> SpatialSeries {
        SpatialSeries { order, entries: BTreeMap::new() }
    }

    /// `δ_{o,x}` as a constant series.
    pub fn delta(d: usize, order: usize) -> SpatialSeries {
        let mut s = SpatialSeries::new(order);
        s.entries.insert(Point::origin(d), Series::one(order));
        s
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn entries(&self) -> &BTreeMap<Point, Series> {
        &self.entries
    }

    pub fn get(&self, x: &Point) -> Option<&Series> {
        self.entries.get(x)
    }

    /// Coefficient of `z^n` at `x` (zero when absent).
    pub fn coeff(&self, x: &Point, n: usize) -> Q {
        self.entries.get(x).map(|s| s.coeff(n).clone()).unwrap_or_else(Q::zero)
    }

    pub fn add_coeff(&mut self, x: Point, n: usize, c: &Q) {
        if n > self.order || c.is_zero() {
            return;
        }
        let order = self.order;
        *self.entries.entry(x).or_insert_with(|| Series::zero(order)).coeff_mut(n) += c;
    }

    pub fn insert(&mut self, x: Point, s: Series) {
        self.entries.insert(x, s.truncate(self.order));
    }

    /// Drops identically-zero entries.
    pub fn prune(&mut self) {
        self.entries.retain(|_, s| !s.is_zero());
    }

    pub fn is_zero(&self) -> bool {
        self.entries.values().all(|s| s.is_zero())
    }

    pub fn max_abs(&self) -> Q {
        self.entries.values().map(|s| s.max_abs()).max().unwrap_or_else(Q::zero)
    }

    pub fn add_assign(&mut self, o: &SpatialSeries) {
        for (x, s) in &o.entries {
            let order = self.order;
            self.entries.entry(*x).or_insert_with(|| Series::zero(order)).add_assign(&s.truncate(order));
        }
    }

    pub fn sub_assign(&mut self, o: &SpatialSeries) {
        for (x, s) in &o.entries {
            let order = self.order;
            self.entries.entry(*x).or_insert_with(|| Series::zero(order)).sub_assign(&s.truncate(order));
        }
    }

    pub fn scale(&self, c: &Q) -> SpatialSeries {
        SpatialSeries {
            order: self.order,
            entries: self.entries.iter().map(|(x, s)| (*x, s.scale(c))).collect(),
        }
    }

    /// Multiplies every entry by `z^k`.
    pub fn shift(&self, k: usize) -> SpatialSeries {
        SpatialSeries { order: self.order, entries: self.entries.iter().map(|(x, s)| (*x, s.shift(k))).collect() }
    }

    /// Spatial convolution combined with the truncated series product.
    pub fn convolve(&self, o: &SpatialSeries) -> SpatialSeries {
        let order = self.order.min(o.order);
        let mut out = SpatialSeries::new(order);
        for (x, a) in &self.entries {
            if a.is_zero() {
                continue;
            }
            for (y, b) in &o.entries {
                if b.is_zero() {
                    continue;
                }
                let prod = a.mul_trunc(b);
                if prod.is_zero() {
                    continue;
                }
                out.entries.entry(x.add(y)).or_insert_with(|| Series::zero(order)).add_assign(&prod);
            }
        }
        out.prune();
        out
    }

    /// `Σ_x` of all entries.
    pub fn total(&self) -> Series {
        let mut s = Series::zero(self.order);
        for v in self.entries.values() {
            s.add_assign(v);
        }
        s
    }

    /// `Σ_x ‖x‖₂² · entry(x)`.
    pub fn second_moment(&self) -> Series {
        let mut s = Series::zero(self.order);
        for (x, v) in &self.entries {
            s.add_assign(&v.scale(&Q::from_integer(x.l2sq().into())));
        }
        s
    }

    pub fn to_json(&self) -> serde_json::Value {
        let mut m = serde_json::Map::new();
        for (x, s) in &self.entries {
            m.insert(x.to_string(), serde_json::Value::from(s.to_strings()));
        }
        serde_json::Value::Object(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::pt;
    use crate::rational::{q, qi};

    #[test]
    fn arithmetic() {
        let a = Series::from_coeffs(vec![qi(1), qi(2), qi(3)], 3);
        let b = Series::from_coeffs(vec![qi(1), qi(-1)], 3);
        let p = &a * &b;
        assert_eq!(p.coeffs(), &[qi(1), qi(1), qi(1), qi(-3)]);
        let inv = b.inverse().unwrap();
        assert_eq!(inv.coeffs(), &[qi(1), qi(1), qi(1), qi(1)]);
        assert_eq!((&b * &inv), Series::one(3));
        assert_eq!(a.eval(&q(1, 2)), q(11, 4));
        assert_eq!(a.derivative().coeffs(), &[qi(2), qi(6), qi(0), qi(0)]);
        assert_eq!(a.shift(2).coeffs(), &[qi(0), qi(0), qi(1), qi(2)]);
        assert_eq!(a.valuation(), Some(0));
        assert!((a.eval_f64(0.5) - 2.75).abs() < 1e-15);
    }

    #[test]
    fn spatial_convolution() {
        let mut a = SpatialSeries::new(4);
        a.add_coeff(pt(&[1, 0]), 1, &q(1, 2));
        a.add_coeff(pt(&[-1, 0]), 1, &q(1, 2));
        let aa = a.convolve(&a);
        assert_eq!(aa.coeff(&pt(&[0, 0]), 2), q(1, 2));
        assert_eq!(aa.coeff(&pt(&[2, 0]), 2), q(1, 4));
        assert_eq!(aa.total().coeff(2).clone(), qi(1));
        let d = SpatialSeries::delta(2, 4);
        assert_eq!(d.convolve(&a), a);
        assert_eq!(aa.second_moment().coeff(2).clone(), qi(2));
    }
}
