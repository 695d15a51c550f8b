//! Exact rational helpers on top of `num-rational`.

use crate::error::{AsawError, Result};
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

pub type Q = BigRational;

pub fn q(n: i64, d: i64) -> Q {
    Q::new(BigInt::from(n), BigInt::from(d))
}

pub fn qi(n: i64) -> Q {
    Q::from_integer(BigInt::from(n))
}

/// Parses `"p/q"`, `"p"` or a plain integer into an exact rational.
pub fn parse_q(s: &str) -> Result<Q> {
    let s = s.trim();
    let bad = || AsawError::Parse(format!("malformed rational '{s}'"));
    match s.split_once('/') {
        Some((n, d)) => {
            let n: BigInt = n.trim().parse().map_err(|_| bad())?;
            let d: BigInt = d.trim().parse().map_err(|_| bad())?;
            if d.is_zero() {
                return Err(bad());
            }
            Ok(Q::new(n, d))
        }
        None => Ok(Q::from_integer(s.parse().map_err(|_| bad())?)),
    }
}

/// Serializes as `"p/q"` (always with an explicit denominator).
pub fn fmt_q(x: &Q) -> String {
    format!("{}/{}", x.numer(), x.denom())
}

pub fn pow(x: &Q, e: i64) -> Q {
    if e >= 0 {
        num_traits::pow(x.clone(), e as usize)
    } else {
        num_traits::pow(x.recip(), (-e) as usize)
    }
}

/// `(1+κ)^e` for a nonnegative κ.
pub fn one_plus_pow(kappa: &Q, e: i64) -> Q {
    pow(&(Q::one() + kappa), e)
}

pub fn to_f64(x: &Q) -> f64 {
    if let Some(v) = x.to_f64() {
        if v.is_finite() {
            return v;
        }
    }
    // Fall back to scaled integer division for huge numerators/denominators.
    let nb = x.numer().bits() as i64;
    let db = x.denom().bits() as i64;
    let shift = nb - db - 60;
    let (n, d) = if shift > 0 {
        (x.numer().clone(), x.denom().clone() << shift as usize)
    } else {
        (x.numer().clone() << (-shift) as usize, x.denom().clone())
    };
    let r = (n / d).to_f64().unwrap_or(0.0);
    r * 2f64.powi(shift as i32)
}

pub fn abs(x: &Q) -> Q {
    x.abs()
}

/// Caches `(1+κ)^e` for small nonnegative exponents.
#[derive(Clone, Debug)]
pub struct PowerCache {
    powers: Vec<Q>,
}

impl PowerCache {
    pub fn new(kappa: &Q, max_exp: usize) -> Self {
        let base = Q::one() + kappa;
        let mut powers = Vec::with_capacity(max_exp + 1);
        let mut cur = Q::one();
        for _ in 0..=max_exp {
            powers.push(cur.clone());
            cur *= &base;
        }
        PowerCache { powers }
    }

    pub fn get(&mut self, e: usize) -> &Q {
        while self.powers.len() <= e {
            let base = &self.powers[1];
            let next = self.powers.last().unwrap() * base;
            self.powers.push(next);
        }
        &self.powers[e]
    }

    pub fn get_owned(&self, e: usize) -> Q {
        if e < self.powers.len() {
            self.powers[e].clone()
        } else {
            let base = &self.powers[1];
            num_traits::pow(base.clone(), e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_roundtrip() {
        assert_eq!(parse_q("1/10").unwrap(), q(1, 10));
        assert_eq!(parse_q("3").unwrap(), qi(3));
        assert_eq!(parse_q(" -2/4 ").unwrap(), q(-1, 2));
        assert!(parse_q("1/0").is_err());
        assert!(parse_q("a/b").is_err());
        assert_eq!(fmt_q(&q(6, 4)), "3/2");
        assert_eq!(fmt_q(&qi(4)), "4/1");
    }

    #[test]
    fn powers() {
        assert_eq!(pow(&q(1, 2), -3), qi(8));
        assert_eq!(one_plus_pow(&q(1, 10), 2), q(121, 100));
        let mut c = PowerCache::new(&q(1, 3), 2);
        assert_eq!(c.get(5).clone(), pow(&q(4, 3), 5));
        assert_eq!(c.get_owned(9), pow(&q(4, 3), 9));
    }

    #[test]
    fn huge_to_f64() {
        let x = pow(&q(3, 2), 3000) / pow(&q(3, 2), 2999);
        assert!((to_f64(&x) - 1.5).abs() < 1e-12);
        let y = Q::new(BigInt::from(1) << 2000usize, (BigInt::from(1) << 1999usize) * 3);
        assert!((to_f64(&y) - 2.0 / 3.0).abs() < 1e-12);
    }
}
