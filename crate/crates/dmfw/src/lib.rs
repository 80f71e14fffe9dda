//! Decentralized meta Frank-Wolfe over gossip networks.
//!
//! A multi-agent simulator and library for online, projection-free,
//! possibly non-convex constrained optimization. Each of `n` agents runs
//! `L` inner conditional-gradient iterations per round, exchanging iterates
//! and gradient-tracking messages with its neighbours through a doubly
//! stochastic gossip matrix. Inner descent directions come from per-slot
//! online linear optimization oracles (OGD or follow-the-perturbed-leader),
//! so the whole pipeline needs nothing but linear minimization over the
//! constraint set. A stochastic-gradient mode adds a variance-reduction
//! mixing step; a centralized single-agent baseline supports
//! approximation-ratio studies.
//!
//! Core math is generic over the scalar type (`f32`/`f64`) via [`Real`];
//! the crate root exposes `f64` aliases for the common types.

pub mod checks;
pub mod constraints;
pub mod engine;
pub mod error;
pub mod linalg;
pub mod losses;
pub mod metrics;
pub mod oracles;
pub mod rng;
pub mod scalar;
pub mod topology;

pub use error::{Error, Result};
pub use scalar::Real;

/// Default scalar used by the CLI and the experiment configs.
pub type Scalar = f64;

pub type Topology = topology::Topology;
pub type GossipMatrix = topology::GossipMatrix<Scalar>;
pub type ConstraintSet = constraints::ConstraintSet<Scalar>;
pub type OracleState = oracles::OracleState<Scalar>;
pub type OracleLog = oracles::OracleLog<Scalar>;
pub type LossStream = losses::LossStream<Scalar>;
pub type Schedule = engine::Schedule<Scalar>;
pub type RunConfig = engine::RunConfig<Scalar>;
pub type Engine = engine::Engine<Scalar>;
pub type RoundState = engine::RoundState<Scalar>;
pub type MetricsRecord = metrics::MetricsRecord<Scalar>;
pub type MetricsSeries = metrics::MetricsSeries<Scalar>;
pub type DiagnosticConstants = metrics::DiagnosticConstants<Scalar>;
