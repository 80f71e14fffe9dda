//! Scalar abstraction: all numeric code is generic over `f32`/`f64`.

use rand::distr::uniform::SampleUniform;
use rand::Rng;
use rand_distr::StandardNormal;

/// Floating-point scalar for vectors, matrices and losses.
pub trait Real:
    num_traits::Float
    + num_traits::FromPrimitive
    + num_traits::NumAssign
    + SampleUniform
    + core::iter::Sum
    + core::fmt::Debug
    + core::fmt::Display
    + core::fmt::LowerExp
    + Send
    + Sync
    + 'static
{
    /// Converts an `f64` literal; panics only if the target type cannot
    /// represent any finite approximation (never for f32/f64).
    fn of(v: f64) -> Self;

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Membership slack used wherever iterates are checked against the
    /// constraint set. Sized for accumulation over ~1e3 convex blends.
    fn feasibility_tol() -> Self;
}

impl Real for f64 {
    fn of(v: f64) -> Self {
        v
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn feasibility_tol() -> Self {
        1e-9
    }
}

impl Real for f32 {
    fn of(v: f64) -> Self {
        v as f32
    }

    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        rng.sample(StandardNormal)
    }

    fn feasibility_tol() -> Self {
        1e-4
    }
}
