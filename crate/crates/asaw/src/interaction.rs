//! Model parameters, walk weights, memories and the pair interaction.

use crate::error::{AsawError, Result};
use crate::lattice::{plaquette_of_segments, Point};
use crate::rational::{one_plus_pow, pow, q, Q};
use crate::stepdist::{apriori_weight, StepDistribution};
use crate::walks::{adj_pairs, cross_pair_count, Walk};
use num_traits::{One, Zero};
use std::sync::Arc;

#[derive(Clone, Debug)]
pub struct ModelParams {
    kappa: Q,
    dist: Arc<StepDistribution>,
}

impl ModelParams {
    pub fn new(kappa: Q, dist: StepDistribution) -> Result<ModelParams> {
        ModelParams::with_shared(kappa, Arc::new(dist))
    }

    pub fn with_shared(kappa: Q, dist: Arc<StepDistribution>) -> Result<ModelParams> {
        if kappa < Q::zero() {
            return Err(AsawError::Domain("kappa must be nonnegative".into()));
        }
        Ok(ModelParams { kappa, dist })
    }

    pub fn with_kappa(&self, kappa: Q) -> ModelParams {
        ModelParams { kappa, dist: self.dist.clone() }
    }

    pub fn kappa(&self) -> &Q {
        &self.kappa
    }

    pub fn dist(&self) -> &StepDistribution {
        &self.dist
    }

    pub fn shared_dist(&self) -> Arc<StepDistribution> {
        self.dist.clone()
    }

    pub fn d(&self) -> usize {
        self.dist.dim()
    }

    /// `k₀ = 2d(d−1)`.
    pub fn k0(&self) -> usize {
        k0(self.d())
    }

    /// `α = 1/(1 + 8(d−1)²)`.
    pub fn alpha(&self) -> Q {
        alpha(self.d())
    }

    /// `λ = p₁⁻² (1+κ)^{2d−4}`.
    pub fn lambda(&self) -> Q {
        pow(self.dist.p1(), -2) * one_plus_pow(&self.kappa, 2 * self.d() as i64 - 4)
    }

    /// `z₀ = (1+κ)^{−2(d−1)}`.
    pub fn z0(&self) -> Q {
        one_plus_pow(&self.kappa, -2 * (self.d() as i64 - 1))
    }

    pub fn one_plus_kappa(&self) -> Q {
        Q::one() + &self.kappa
    }
}

pub fn k0(d: usize) -> usize {
    2 * d * (d - 1)
}

pub fn alpha(d: usize) -> Q {
    q(1, 1 + 8 * (d as i64 - 1).pow(2))
}

/// `⌈α k⌉` for the dimension `d`.
pub fn ceil_alpha(d: usize, k: usize) -> usize {
    let r = 1 + 8 * (d - 1) * (d - 1);
    k.div_ceil(r)
}

/// A previously traversed walk ending at the origin, a polygon rooted there, or nothing.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Memory {
    walk: Option<Walk>,
}

impl Memory {
    pub fn empty() -> Memory {
        Memory { walk: None }
    }

    pub fn new(walk: Walk) -> Result<Memory> {
        let o = Point::origin(walk.dim());
        let ok = if walk.is_polygon() {
            walk.start() == o
        } else {
            walk.end() == o && walk.is_self_avoiding()
        };
        if !ok {
            return Err(AsawError::InvalidWalk(format!("{walk} is not a memory")));
        }
        Ok(Memory { walk: Some(walk) })
    }

    pub fn walk(&self) -> Option<&Walk> {
        self.walk.as_ref()
    }

    pub fn is_empty(&self) -> bool {
        self.walk.is_none()
    }

    /// Vertices of the memory (empty for the empty memory).
    pub fn vertices(&self) -> &[Point] {
        self.walk.as_ref().map(|w| w.vertices()).unwrap_or(&[])
    }
}

/// `W_κ(ω) = (1+κ)^{#adjacent pairs} P_n(ω)` (no self-avoidance indicator).
pub fn asaw_weight(p: &ModelParams, w: &Walk) -> Q {
    let a = apriori_weight(p.dist(), w);
    if a.is_zero() {
        return a;
    }
    a * one_plus_pow(p.kappa(), adj_pairs(w).pair_count as i64)
}

/// `W_κ(ω; η)`: the weight with an extra `(1+κ)` per adjacent pair between η and ω.
pub fn conditional_weight(p: &ModelParams, w: &Walk, eta: &Memory) -> Q {
    let base = asaw_weight(p, w);
    match eta.walk() {
        None => base,
        Some(m) => base * one_plus_pow(p.kappa(), cross_pair_count(m, w) as i64),
    }
}

/// Value class of `U_st`: coincidence, adjacent-edge plaquette, or nothing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UKind {
    Zero,
    Return,
    Plaquette,
}

/// Classifies `U_st` on a vertex slice; requires `t > s + 1`.
#[inline]
pub fn u_kind(pts: &[Point], s: usize, t: usize) -> UKind {
    if pts[s] == pts[t] {
        UKind::Return
    } else if t >= s + 3 && plaquette_of_segments(&pts[s], &pts[s + 1], &pts[t - 1], &pts[t]).is_some() {
        UKind::Plaquette
    } else {
        UKind::Zero
    }
}

/// `U_ij(ω)`: `1` on a return, `−κ` when steps `i` and `j−1` are adjacent unit edges, else `0`.
pub fn u_ij(p: &ModelParams, w: &Walk, i: usize, j: usize) -> Result<Q> {
    if i >= j || j > w.len() || j <= i + 1 {
        return Err(AsawError::OutOfRange(format!("U_{{{i},{j}}} on a {}-step walk", w.len())));
    }
    Ok(match u_kind(w.vertices(), i, j) {
        UKind::Return => Q::one(),
        UKind::Plaquette => -p.kappa().clone(),
        UKind::Zero => Q::zero(),
    })
}

/// `r_κ(x) = 1{x = o} + κ 1{‖x‖∞ = 1}`.
pub fn r_kappa(p: &ModelParams, x: &Point) -> Q {
    if x.is_origin() {
        Q::one()
    } else if x.linf() == 1 {
        p.kappa().clone()
    } else {
        Q::zero()
    }
}

/// `Π_{j>i+1} (1 − U_ij(ω)) · P_n(ω)`.
pub fn interaction_product(p: &ModelParams, w: &Walk) -> Q {
    let pts = w.vertices();
    let n = w.len();
    let mut plaq = 0i64;
    for i in 0..n {
        for j in i + 2..=n {
            match u_kind(pts, i, j) {
                UKind::Return => return Q::zero(),
                UKind::Plaquette => plaq += 1,
                UKind::Zero => {}
            }
        }
    }
    apriori_weight(p.dist(), w) * one_plus_pow(p.kappa(), plaq)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::fig1_walk;
    use crate::lattice::pt;
    use crate::stepdist::make_nearest_neighbour;
    use crate::walks::{concat, subwalk};

    fn params(k: Q) -> ModelParams {
        ModelParams::new(k, make_nearest_neighbour(2).unwrap()).unwrap()
    }

    #[test]
    fn constants() {
        let p = params(q(1, 10));
        assert_eq!(p.k0(), 4);
        assert_eq!(p.alpha(), q(1, 9));
        assert_eq!(p.lambda(), q(16, 1));
        assert_eq!(p.z0(), q(100, 121));
        assert_eq!(ceil_alpha(2, 9), 1);
        assert_eq!(ceil_alpha(2, 10), 2);
        assert_eq!(ceil_alpha(2, 0), 0);
        assert!(ModelParams::new(q(-1, 2), make_nearest_neighbour(2).unwrap()).is_err());
    }

    #[test]
    fn weights() {
        let k = q(1, 7);
        let p = params(k.clone());
        assert_eq!(asaw_weight(&p, &Walk::parse("0,0;1,0;2,0").unwrap()), q(1, 16));
        assert_eq!(asaw_weight(&p, &Walk::parse("0,0;0,1;1,1;1,0").unwrap()), (Q::one() + &k) / Q::from_integer(64.into()));
        assert_eq!(asaw_weight(&p, &fig1_walk()), one_plus_pow(&k, 7) * pow(&q(1, 4), 30));
        let w = Walk::parse("0,0;0,1;1,1").unwrap();
        assert_eq!(conditional_weight(&p, &w, &Memory::empty()), asaw_weight(&p, &w));
        let eta = Memory::new(Walk::parse("1,0;0,0").unwrap()).unwrap();
        assert_eq!(conditional_weight(&p, &w, &eta), asaw_weight(&p, &w) * (Q::one() + &k));
    }

    #[test]
    fn conditional_factorization_on_figure_walk() {
        let p = params(q(2, 5));
        let f = fig1_walk();
        for m in 0..=f.len() {
            let head = subwalk(&f, 0, m).unwrap();
            let shift = head.end().neg();
            let eta = Memory::new(head.translated(&shift)).unwrap();
            let tail = subwalk(&f, m, f.len()).unwrap().translated(&shift);
            assert_eq!(concat(&head, &tail).unwrap(), f);
            let lhs = asaw_weight(&p, &f);
            let rhs = asaw_weight(&p, eta.walk().unwrap()) * conditional_weight(&p, &tail, &eta);
            assert_eq!(lhs, rhs, "split {m}");
        }
    }

    #[test]
    fn u_and_r() {
        let k = q(1, 3);
        let p = params(k.clone());
        let back = Walk::parse("0,0;1,0;0,0").unwrap();
        assert_eq!(u_ij(&p, &back, 0, 2).unwrap(), Q::one());
        let u = Walk::parse("0,0;0,1;1,1;1,0").unwrap();
        assert_eq!(u_ij(&p, &u, 0, 3).unwrap(), -k.clone());
        let line = Walk::parse("0,0;1,0;2,0;3,0").unwrap();
        assert_eq!(u_ij(&p, &line, 0, 3).unwrap(), Q::zero());
        assert!(u_ij(&p, &line, 0, 1).is_err());
        assert_eq!(r_kappa(&p, &pt(&[0, 0])), Q::one());
        assert_eq!(r_kappa(&p, &pt(&[1, 0])), k);
        assert_eq!(r_kappa(&p, &pt(&[1, 1])), k);
        assert_eq!(r_kappa(&p, &pt(&[2, 0])), Q::zero());
        assert_eq!(interaction_product(&p, &back), Q::zero());
        assert_eq!(interaction_product(&p, &fig1_walk()), asaw_weight(&p, &fig1_walk()));
    }

    #[test]
    fn memories() {
        assert!(Memory::new(Walk::parse("1,0;0,0").unwrap()).is_ok());
        assert!(Memory::new(Walk::parse("0,0;1,0;1,1;0,1;0,0").unwrap()).is_ok());
        assert!(Memory::new(Walk::parse("0,0;1,0").unwrap()).is_err());
    }
}
