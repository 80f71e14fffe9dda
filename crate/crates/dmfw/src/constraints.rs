//! Bounded convex constraint sets with linear minimization, Euclidean
//! projection, membership testing and exact diameters.
//!
//! Ties in the linear minimization oracle are broken deterministically:
//! lowest coordinate index first, positive sign preferred. The zero
//! direction therefore yields a canonical vertex (`+r e_0` on the L1 ball),
//! which also serves as the deterministic initializer used across the
//! crate.

use rand::Rng;

use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ConstraintKind<T> {
    L1Ball { radius: T },
    L2Ball { radius: T },
    Simplex,
    Box { lo: T, hi: T },
}

/// Descriptor of a bounded convex feasible region in `R^dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConstraintSet<T> {
    kind: ConstraintKind<T>,
    dim: usize,
}

impl<T: Real> ConstraintSet<T> {
    pub fn new(kind: ConstraintKind<T>, dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidSize("constraint set needs dim >= 1".into()));
        }
        match kind {
            ConstraintKind::L1Ball { radius } | ConstraintKind::L2Ball { radius } => {
                if !(radius > T::zero() && radius.is_finite()) {
                    return Err(Error::InvalidArgument(
                        "ball radius must be positive and finite".into(),
                    ));
                }
            }
            ConstraintKind::Box { lo, hi } => {
                if !(lo < hi && lo.is_finite() && hi.is_finite()) {
                    return Err(Error::InvalidArgument("box needs finite lo < hi".into()));
                }
            }
            ConstraintKind::Simplex => {}
        }
        Ok(Self { kind, dim })
    }

    pub fn l1_ball(radius: T, dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::L1Ball { radius }, dim)
    }

    pub fn l2_ball(radius: T, dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::L2Ball { radius }, dim)
    }

    pub fn simplex(dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::Simplex, dim)
    }

    pub fn boxed(lo: T, hi: T, dim: usize) -> Result<Self> {
        Self::new(ConstraintKind::Box { lo, hi }, dim)
    }

    pub fn kind(&self) -> ConstraintKind<T> {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    fn check_dim(&self, v: &[T]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::InvalidArgument(format!(
                "expected a vector of dim {}, got {}",
                self.dim,
                v.len()
            )));
        }
        Ok(())
    }

    /// `argmin_{v in K} <direction, v>` with the deterministic tie-break.
    pub fn lmo(&self, direction: &[T]) -> Result<Vec<T>> {
        self.check_dim(direction)?;
        if !linalg::all_finite(direction) {
            return Err(Error::NonFinite("lmo direction".into()));
        }
        Ok(match self.kind {
            ConstraintKind::L1Ball { radius } => {
                // Best vertex is -sign(d_k) r e_k at the largest |d_k|.
                let mut best = 0usize;
                for k in 1..self.dim {
                    if direction[k].abs() > direction[best].abs() {
                        best = k;
                    }
                }
                let mut v = vec![T::zero(); self.dim];
                v[best] = if direction[best] > T::zero() {
                    -radius
                } else {
                    radius
                };
                v
            }
            ConstraintKind::L2Ball { radius } => {
                let n = linalg::norm(direction);
                if n == T::zero() {
                    let mut v = vec![T::zero(); self.dim];
                    v[0] = radius;
                    v
                } else {
                    direction.iter().map(|&d| -radius * d / n).collect()
                }
            }
            ConstraintKind::Simplex => {
                let mut best = 0usize;
                for k in 1..self.dim {
                    if direction[k] < direction[best] {
                        best = k;
                    }
                }
                let mut v = vec![T::zero(); self.dim];
                v[best] = T::one();
                v
            }
            ConstraintKind::Box { lo, hi } => direction
                .iter()
                .map(|&d| if d > T::zero() { lo } else { hi })
                .collect(),
        })
    }

    /// Euclidean projection onto the set. Members are returned unchanged.
    pub fn project(&self, point: &[T]) -> Result<Vec<T>> {
        self.check_dim(point)?;
        if !linalg::all_finite(point) {
            return Err(Error::NonFinite("projection input".into()));
        }
        if self.contains(point, T::zero()) {
            return Ok(point.to_vec());
        }
        Ok(match self.kind {
            ConstraintKind::L1Ball { radius } => {
                let abs: Vec<T> = point.iter().map(|x| x.abs()).collect();
                let theta = simplex_threshold(&abs, radius);
                point
                    .iter()
                    .map(|&x| x.signum() * (x.abs() - theta).max(T::zero()))
                    .collect()
            }
            ConstraintKind::L2Ball { radius } => {
                let n = linalg::norm(point);
                point.iter().map(|&x| x * radius / n).collect()
            }
            ConstraintKind::Simplex => {
                let theta = simplex_threshold(point, T::one());
                point.iter().map(|&x| (x - theta).max(T::zero())).collect()
            }
            ConstraintKind::Box { lo, hi } => point.iter().map(|&x| x.max(lo).min(hi)).collect(),
        })
    }

    /// True iff the defining constraints hold within `tol`.
    pub fn contains(&self, point: &[T], tol: T) -> bool {
        if point.len() != self.dim || !linalg::all_finite(point) {
            return false;
        }
        match self.kind {
            ConstraintKind::L1Ball { radius } => {
                point.iter().map(|x| x.abs()).sum::<T>() <= radius + tol
            }
            ConstraintKind::L2Ball { radius } => linalg::norm(point) <= radius + tol,
            ConstraintKind::Simplex => {
                point.iter().all(|&x| x >= -tol)
                    && (point.iter().copied().sum::<T>() - T::one()).abs() <= tol
            }
            ConstraintKind::Box { lo, hi } => point.iter().all(|&x| x >= lo - tol && x <= hi + tol),
        }
    }

    /// Exact Euclidean diameter `sup_{x,y in K} ||x - y||`.
    pub fn diameter(&self) -> T {
        match self.kind {
            ConstraintKind::L1Ball { radius } | ConstraintKind::L2Ball { radius } => {
                T::of(2.0) * radius
            }
            ConstraintKind::Simplex => {
                if self.dim == 1 {
                    T::zero()
                } else {
                    T::of(2.0).sqrt()
                }
            }
            ConstraintKind::Box { lo, hi } => (hi - lo) * T::from_usize(self.dim).unwrap().sqrt(),
        }
    }

    /// The tie-break vertex for the zero direction; the deterministic
    /// initializer used by oracles and agents.
    pub fn canonical_vertex(&self) -> Vec<T> {
        self.lmo(&vec![T::zero(); self.dim])
            .expect("zero direction is finite")
    }

    /// A uniformly chosen extreme point (seeded caller-side).
    pub fn random_vertex<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        match self.kind {
            ConstraintKind::L1Ball { radius } => {
                let k = rng.random_range(0..self.dim);
                let sign = if rng.random_range(0..2) == 0 {
                    T::one()
                } else {
                    -T::one()
                };
                let mut v = vec![T::zero(); self.dim];
                v[k] = sign * radius;
                v
            }
            ConstraintKind::L2Ball { radius } => {
                let mut v: Vec<T> = (0..self.dim).map(|_| T::standard_normal(rng)).collect();
                let n = linalg::norm(&v);
                if n == T::zero() {
                    v[0] = radius;
                } else {
                    for x in &mut v {
                        *x = *x * radius / n;
                    }
                }
                v
            }
            ConstraintKind::Simplex => {
                let k = rng.random_range(0..self.dim);
                let mut v = vec![T::zero(); self.dim];
                v[k] = T::one();
                v
            }
            ConstraintKind::Box { lo, hi } => (0..self.dim)
                .map(|_| if rng.random_range(0..2) == 0 { lo } else { hi })
                .collect(),
        }
    }

    /// A generic interior-ish member: a Gaussian sample projected onto the
    /// set. Used for fuzzing and for gradient-bound estimation.
    pub fn sample_member<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<T> {
        let z: Vec<T> = (0..self.dim).map(|_| T::standard_normal(rng)).collect();
        self.project(&z).expect("gaussian sample is finite")
    }

    /// Enumerates the extreme points of polytope sets, for brute-force
    /// oracles in tests. Errors on the L2 ball (not a polytope) and on
    /// boxes too large to enumerate.
    pub fn vertices(&self) -> Result<Vec<Vec<T>>> {
        match self.kind {
            ConstraintKind::L1Ball { radius } => {
                let mut out = Vec::with_capacity(2 * self.dim);
                for k in 0..self.dim {
                    for sign in [T::one(), -T::one()] {
                        let mut v = vec![T::zero(); self.dim];
                        v[k] = sign * radius;
                        out.push(v);
                    }
                }
                Ok(out)
            }
            ConstraintKind::Simplex => Ok((0..self.dim)
                .map(|k| {
                    let mut v = vec![T::zero(); self.dim];
                    v[k] = T::one();
                    v
                })
                .collect()),
            ConstraintKind::Box { lo, hi } => {
                if self.dim > 20 {
                    return Err(Error::InvalidArgument(
                        "box vertex enumeration capped at dim 20".into(),
                    ));
                }
                let mut out = Vec::with_capacity(1 << self.dim);
                for mask in 0..(1usize << self.dim) {
                    out.push(
                        (0..self.dim)
                            .map(|k| if mask >> k & 1 == 1 { hi } else { lo })
                            .collect(),
                    );
                }
                Ok(out)
            }
            ConstraintKind::L2Ball { .. } => Err(Error::InvalidArgument(
                "the L2 ball has no finite vertex set".into(),
            )),
        }
    }
}

/// Soft-threshold level for projecting `v` onto `{x >= 0, sum x = budget}`
/// restricted to the case `sum max(v,0) > budget` (callers short-circuit
/// members). Standard sort-and-scan, O(d log d).
fn simplex_threshold<T: Real>(v: &[T], budget: T) -> T {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cumsum = T::zero();
    let mut theta = T::zero();
    for (k, &uk) in u.iter().enumerate() {
        cumsum += uk;
        let candidate = (cumsum - budget) / T::from_usize(k + 1).unwrap();
        if uk - candidate > T::zero() {
            theta = candidate;
        } else {
            break;
        }
    }
    theta
}
