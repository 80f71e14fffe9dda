//! The synchronous multi-agent round engine.
//!
//! Each round has two phases. In the decision phase every agent runs `L`
//! conditional-gradient inner iterations in lockstep: pull a direction
//! from the slot's online oracle, gossip-average the neighbours' iterates,
//! and blend `x_{l+1} = (1 - eta_l) y_l + eta_l v_l`; the round's decision
//! is one of the `L` iterates chosen uniformly at random. In the feedback
//! phase the local gradients are propagated through the gradient-tracking
//! recursion `g_{l+1} = (grad f(x_{l+1}) - grad f(x_l)) + d_l` with
//! `d_l = sum_j W_ij g_{j,l}`, and each slot oracle receives its linear
//! cost. The stochastic mode runs the same recursions on noisy gradients
//! and feeds the variance-reduced mix
//! `a_l = (1 - rho_l) a_{l-1} + rho_l d_l` instead.
//!
//! Both gossip sums (iterates and gradient messages) mix with the full
//! doubly stochastic row, self-weight included; the tracking recursion
//! then conserves the network-average gradient exactly, which the engine
//! asserts live along with iterate feasibility and the mean-iterate
//! averaging identity.

// The round loop advances several per-agent row stacks in lockstep;
// indexed loops keep the barrier structure visible.
#![allow(clippy::needless_range_loop)]

use rand::Rng;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::{LossSpec, LossStream};
use crate::metrics::{MetricsCollector, MetricsSeries};
use crate::oracles::{OracleKind, OracleParams, OracleState};
use crate::rng::{
    mix, substream, SHARED_AGENT, TAG_CHOICE, TAG_INIT, TAG_ORACLE, TAG_SGRAD, TAG_STREAM,
    TAG_TOPOLOGY,
};
use crate::scalar::Real;
use crate::topology::{build_gossip_matrix, build_topology, GossipMatrix, TopologyKind};

/// Inner-iteration step sizes: `eta_l = min(1, A / l^alpha)` for the
/// conditional-gradient blend and `rho_l = min(1, 2 / (l+3)^(2 alpha/3))`
/// for the variance-reduction mix. Both are non-increasing in `l` and lie
/// in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule<T> {
    l: usize,
    a: T,
    alpha: T,
}

impl<T: Real> Schedule<T> {
    pub fn new(l: usize, a: T, alpha: T) -> Result<Self> {
        if l < 1 {
            return Err(Error::Config("schedule needs L >= 1".into()));
        }
        if !(a > T::zero() && a.is_finite()) {
            return Err(Error::Config(format!(
                "step amplitude A must be positive and finite, got {a}"
            )));
        }
        if !(alpha > T::zero() && alpha < T::one()) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        Ok(Self { l, a, alpha })
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn a(&self) -> T {
        self.a
    }

    pub fn alpha(&self) -> T {
        self.alpha
    }

    pub fn eta(&self, ell: usize) -> T {
        debug_assert!(ell >= 1);
        let base = T::from_usize(ell).unwrap().powf(self.alpha);
        T::one().min(self.a / base)
    }

    pub fn rho(&self, ell: usize) -> T {
        debug_assert!(ell >= 1);
        let exponent = T::of(2.0) * self.alpha / T::of(3.0);
        let base = T::from_usize(ell + 3).unwrap().powf(exponent);
        T::one().min(T::of(2.0) / base)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Exact local gradients fed straight to the oracles.
    Exact,
    /// Stochastic gradient estimates with the variance-reduction mix.
    Stochastic,
    /// Single omniscient agent optimizing the network-average loss; the
    /// reference for approximation-ratio studies. Always exact-gradient.
    CentralizedBaseline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitPolicy {
    /// Start every round at the set's deterministic canonical vertex.
    CanonicalVertex,
    /// Start at a per-(agent, round) seeded random vertex.
    SeededRandomVertex,
}

/// Everything needed to reproduce a run.
#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub mode: Mode,
    pub topology_kind: TopologyKind,
    pub n_agents: usize,
    pub constraint: ConstraintSet<T>,
    pub loss: LossSpec<T>,
    pub oracle_kind: OracleKind,
    /// Zero entries are resolved to defaults: `step_scale = D / G`,
    /// `perturbation = G sqrt(T)`.
    pub oracle_params: OracleParams<T>,
    pub horizon: usize,
    pub l: usize,
    pub a: T,
    pub alpha: T,
    pub master_seed: u64,
    pub init_policy: InitPolicy,
    /// Drop the agent index from oracle/choice/init substreams so that all
    /// agents (and the centralized baseline) draw identically.
    pub shared_seeds: bool,
    /// In stochastic mode, also run the exact gradient-tracking recursion
    /// (never fed to oracles) so metrics can measure the mixing error.
    pub shadow_exact: bool,
    pub per_ell_diagnostics: bool,
    pub check_invariants: bool,
}

impl<T: Real> RunConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.horizon < 1 {
            return Err(Error::Config("horizon T must be >= 1".into()));
        }
        let min_agents = if self.mode == Mode::CentralizedBaseline {
            1
        } else {
            2
        };
        if self.n_agents < min_agents {
            return Err(Error::Config(format!(
                "need at least {min_agents} agents for this mode, got {}",
                self.n_agents
            )));
        }
        Schedule::new(self.l, self.a, self.alpha)?;
        if self.oracle_params.step_scale < T::zero() || !self.oracle_params.step_scale.is_finite() {
            return Err(Error::Config(
                "oracle step_scale must be >= 0 and finite".into(),
            ));
        }
        if self.oracle_params.perturbation < T::zero()
            || !self.oracle_params.perturbation.is_finite()
        {
            return Err(Error::Config(
                "oracle perturbation must be >= 0 and finite".into(),
            ));
        }
        Ok(())
    }
}

/// Per-agent per-round trajectory. Row `k` of `x` holds the inner iterate
/// with 1-based index `k+1`; `g` and `d` hold the gradient-tracking
/// messages actually used by the algorithm (the noisy versions in
/// stochastic mode), and `shadow_d` the exact tracking vectors when the
/// shadow recursion is enabled. `a_tilde` row 0 is the zero vector.
#[derive(Debug, Clone)]
pub struct AgentRoundState<T> {
    pub x: Vec<Vec<T>>,
    pub y: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
    pub g: Vec<Vec<T>>,
    pub d: Vec<Vec<T>>,
    pub a_tilde: Vec<Vec<T>>,
    pub shadow_d: Option<Vec<Vec<T>>>,
    /// 1-based index of the iterate played this round.
    pub chosen_ell: usize,
    pub decision: Vec<T>,
}

/// Snapshot of one completed round across all agents.
#[derive(Debug, Clone)]
pub struct RoundState<T> {
    pub t: usize,
    pub agents: Vec<AgentRoundState<T>>,
    /// Max over inner iterations of
    /// `|| xbar_{l+1} - xbar_l - eta_l (mean v - xbar_l) ||`.
    pub averaging_residual_max: T,
    /// Max over inner iterations of
    /// `|| mean_i g_{i,l} - mean_i grad_i(x_{i,l}) ||` (against the
    /// gradients the algorithm used).
    pub tracking_residual_max: T,
    /// Mean over (agent, slot) of the oracles' average regret so far.
    pub oracle_avg_regret: T,
}

/// Per-agent stacks of per-inner-iteration row vectors.
type AgentRows<T> = Vec<Vec<Vec<T>>>;

impl<T: Real> RoundState<T> {
    pub fn n_agents(&self) -> usize {
        self.agents.len()
    }

    /// `xbar_l` for 1-based inner index `ell`.
    pub fn mean_iterate(&self, ell: usize) -> Vec<T> {
        let rows: Vec<&[T]> = self
            .agents
            .iter()
            .map(|a| a.x[ell - 1].as_slice())
            .collect();
        linalg::mean_rows(&rows)
    }
}

/// The simulator: owns the gossip matrix, loss stream and oracle bank, and
/// advances one round at a time.
pub struct Engine<T: Real> {
    w: GossipMatrix<T>,
    set: ConstraintSet<T>,
    stream: LossStream<T>,
    schedule: Schedule<T>,
    oracles: Vec<Vec<OracleState<T>>>,
    oracle_params: OracleParams<T>,
    stochastic: bool,
    centralized: bool,
    shadow_exact: bool,
    init_policy: InitPolicy,
    shared_seeds: bool,
    per_ell_diagnostics: bool,
    check_invariants: bool,
    master_seed: u64,
    n: usize,
    rounds_run: usize,
}

impl<T: Real> Engine<T> {
    pub fn from_config(cfg: &RunConfig<T>) -> Result<Self> {
        cfg.validate()?;
        let centralized = cfg.mode == Mode::CentralizedBaseline;
        let stochastic = cfg.mode == Mode::Stochastic;
        let set = cfg.constraint.clone();
        let stream = LossStream::new(
            cfg.loss.clone(),
            cfg.n_agents,
            set.dim(),
            cfg.horizon,
            mix(cfg.master_seed, &[TAG_STREAM]),
            &set,
        )?;
        let schedule = Schedule::new(cfg.l, cfg.a, cfg.alpha)?;

        let (w, n) = if centralized {
            (GossipMatrix::single(), 1)
        } else {
            let topo = build_topology(
                cfg.topology_kind,
                cfg.n_agents,
                mix(cfg.master_seed, &[TAG_TOPOLOGY]),
            )?;
            (build_gossip_matrix(&topo)?, cfg.n_agents)
        };

        let oracle_params = OracleParams {
            step_scale: if cfg.oracle_params.step_scale > T::zero() {
                cfg.oracle_params.step_scale
            } else {
                set.diameter() / stream.g_lip().max(T::of(1e-12))
            },
            perturbation: if cfg.oracle_params.perturbation > T::zero() {
                cfg.oracle_params.perturbation
            } else {
                stream.g_lip() * T::from_usize(cfg.horizon).unwrap().sqrt()
            },
        };

        let shared = cfg.shared_seeds;
        let oracles = (0..n)
            .map(|i| {
                (1..=schedule.l())
                    .map(|ell| {
                        let agent_part = if shared { SHARED_AGENT } else { i as u64 };
                        let seed = mix(cfg.master_seed, &[TAG_ORACLE, agent_part, ell as u64]);
                        OracleState::new(cfg.oracle_kind, &set, oracle_params, seed).without_log()
                    })
                    .collect()
            })
            .collect();

        Ok(Self {
            w,
            set,
            stream,
            schedule,
            oracles,
            oracle_params,
            stochastic,
            centralized,
            shadow_exact: cfg.shadow_exact && stochastic,
            init_policy: cfg.init_policy,
            shared_seeds: shared,
            per_ell_diagnostics: cfg.per_ell_diagnostics,
            check_invariants: cfg.check_invariants,
            master_seed: cfg.master_seed,
            n,
            rounds_run: 0,
        })
    }

    pub fn n_agents(&self) -> usize {
        self.n
    }

    pub fn horizon(&self) -> usize {
        self.stream.horizon()
    }

    pub fn set(&self) -> &ConstraintSet<T> {
        &self.set
    }

    pub fn stream(&self) -> &LossStream<T> {
        &self.stream
    }

    pub fn gossip(&self) -> &GossipMatrix<T> {
        &self.w
    }

    pub fn schedule(&self) -> &Schedule<T> {
        &self.schedule
    }

    /// Oracle parameters after zero-default resolution.
    pub fn oracle_params(&self) -> OracleParams<T> {
        self.oracle_params
    }

    pub fn is_centralized(&self) -> bool {
        self.centralized
    }

    fn agent_part(&self, i: usize) -> u64 {
        if self.shared_seeds {
            SHARED_AGENT
        } else {
            i as u64
        }
    }

    fn exact_gradient(&self, i: usize, t: usize, x: &[T]) -> Result<Vec<T>> {
        if self.centralized {
            self.stream.global_gradient(t, x)
        } else {
            self.stream.gradient(i, t, x)
        }
    }

    fn used_gradient(&self, i: usize, t: usize, ell_row: usize, x: &[T]) -> Result<Vec<T>> {
        if self.stochastic {
            let seed = mix(
                self.master_seed,
                &[TAG_SGRAD, i as u64, t as u64, ell_row as u64],
            );
            self.stream.stochastic_gradient(i, t, x, seed)
        } else {
            self.exact_gradient(i, t, x)
        }
    }

    /// Runs round `t` (rounds must be advanced in order starting at 1).
    pub fn run_round(&mut self, t: usize) -> Result<RoundState<T>> {
        if t != self.rounds_run + 1 {
            return Err(Error::InvalidArgument(format!(
                "rounds must run in order; expected {}, got {t}",
                self.rounds_run + 1
            )));
        }
        if t > self.stream.horizon() {
            return Err(Error::IndexOutOfRange(format!(
                "round {t} beyond horizon {}",
                self.stream.horizon()
            )));
        }
        let n = self.n;
        let l = self.schedule.l();
        let dim = self.set.dim();
        let feas_tol = T::feasibility_tol();
        // Live-abort thresholds for the algebraic identities: far above
        // honest float error, far below anything a logic bug produces.
        let avg_abort =
            (T::of(1e-6) * (T::one() + self.set.diameter())).max(T::epsilon() * T::of(1e4));
        let track_abort =
            (T::of(1e-6) * (T::one() + self.stream.g_lip())).max(T::epsilon() * T::of(1e4));

        // Phase 1: decisions.
        let mut x: AgentRows<T> = (0..n)
            .map(|i| {
                let first = match self.init_policy {
                    InitPolicy::CanonicalVertex => self.set.canonical_vertex(),
                    InitPolicy::SeededRandomVertex => {
                        let mut r =
                            substream(self.master_seed, &[TAG_INIT, self.agent_part(i), t as u64]);
                        self.set.random_vertex(&mut r)
                    }
                };
                let mut rows = Vec::with_capacity(l + 1);
                rows.push(first);
                rows
            })
            .collect();
        let mut y: AgentRows<T> = vec![Vec::with_capacity(l); n];
        let mut v: AgentRows<T> = vec![Vec::with_capacity(l); n];
        let mut averaging_residual_max = T::zero();

        for ell in 1..=l {
            let eta = self.schedule.eta(ell);
            for i in 0..n {
                let vi = self.oracles[i][ell - 1].next_vector(&self.set)?;
                v[i].push(vi);
            }
            // Synchronous barrier: every blend below reads the finished
            // iterates of inner step `ell`.
            {
                let rows: Vec<&[T]> = (0..n).map(|j| x[j][ell - 1].as_slice()).collect();
                for i in 0..n {
                    y[i].push(self.w.weighted_row_sum(i, &rows));
                }
            }
            for i in 0..n {
                let next = linalg::blend(&y[i][ell - 1], &v[i][ell - 1], eta);
                x[i].push(next);
            }

            if self.check_invariants {
                for i in 0..n {
                    for (name, point) in [
                        ("x", &x[i][ell]),
                        ("y", &y[i][ell - 1]),
                        ("v", &v[i][ell - 1]),
                    ] {
                        if !self.set.contains(point, feas_tol) {
                            return Err(Error::InvariantViolation(format!(
                                "iterate {name} left the feasible set at t={t}, ell={ell}, agent={i}"
                            )));
                        }
                    }
                }
                // Mean-iterate averaging identity: double stochasticity of
                // W makes the network mean evolve like a single
                // conditional-gradient step toward the mean direction.
                let prev_rows: Vec<&[T]> = (0..n).map(|j| x[j][ell - 1].as_slice()).collect();
                let next_rows: Vec<&[T]> = (0..n).map(|j| x[j][ell].as_slice()).collect();
                let v_rows: Vec<&[T]> = (0..n).map(|j| v[j][ell - 1].as_slice()).collect();
                let xbar_prev = linalg::mean_rows(&prev_rows);
                let xbar_next = linalg::mean_rows(&next_rows);
                let vbar = linalg::mean_rows(&v_rows);
                let mut residual = T::zero();
                for k in 0..dim {
                    let expect = xbar_prev[k] + eta * (vbar[k] - xbar_prev[k]);
                    let err = xbar_next[k] - expect;
                    residual += err * err;
                }
                let residual = residual.sqrt();
                averaging_residual_max = averaging_residual_max.max(residual);
                if residual > avg_abort {
                    return Err(Error::InvariantViolation(format!(
                        "mean-iterate averaging identity violated at t={t}, ell={ell}: residual {residual}"
                    )));
                }
            }
        }

        // Uniform choice of the played iterate.
        let mut chosen = Vec::with_capacity(n);
        let mut decisions = Vec::with_capacity(n);
        for i in 0..n {
            let mut r = substream(
                self.master_seed,
                &[TAG_CHOICE, self.agent_part(i), t as u64],
            );
            let ell_star = r.random_range(1..=l);
            chosen.push(ell_star);
            decisions.push(x[i][ell_star - 1].clone());
        }

        // Phase 2: gradient tracking and oracle feedback. Each inner point
        // is evaluated once; in stochastic mode the draw seed is keyed by
        // (agent, t, point index), so both uses of a point within the
        // recursion see the same realization.
        let mut grads: AgentRows<T> = Vec::with_capacity(n);
        for (i, xi) in x.iter().enumerate() {
            let mut gi = Vec::with_capacity(l + 1);
            for (k, xk) in xi.iter().enumerate() {
                gi.push(self.used_gradient(i, t, k, xk)?);
            }
            grads.push(gi);
        }
        let shadow_grads: Option<AgentRows<T>> = if self.shadow_exact {
            let mut all = Vec::with_capacity(n);
            for (i, xi) in x.iter().enumerate() {
                let mut gi = Vec::with_capacity(l + 1);
                for xk in xi.iter() {
                    gi.push(self.exact_gradient(i, t, xk)?);
                }
                all.push(gi);
            }
            Some(all)
        } else {
            None
        };

        let mut g: AgentRows<T> = (0..n)
            .map(|i| {
                let mut rows = Vec::with_capacity(l + 1);
                rows.push(grads[i][0].clone());
                rows
            })
            .collect();
        let mut d: AgentRows<T> = vec![Vec::with_capacity(l); n];
        let mut a_tilde: AgentRows<T> = if self.stochastic {
            (0..n)
                .map(|_| {
                    let mut rows = Vec::with_capacity(l + 1);
                    rows.push(vec![T::zero(); dim]);
                    rows
                })
                .collect()
        } else {
            vec![Vec::new(); n]
        };
        let (mut shadow_g, mut shadow_d): (AgentRows<T>, AgentRows<T>) =
            if let Some(sg) = &shadow_grads {
                (
                    (0..n)
                        .map(|i| {
                            let mut rows = Vec::with_capacity(l + 1);
                            rows.push(sg[i][0].clone());
                            rows
                        })
                        .collect(),
                    vec![Vec::with_capacity(l); n],
                )
            } else {
                (Vec::new(), Vec::new())
            };
        let mut tracking_residual_max = T::zero();

        for ell in 1..=l {
            {
                let rows: Vec<&[T]> = (0..n).map(|j| g[j][ell - 1].as_slice()).collect();
                for i in 0..n {
                    d[i].push(self.w.weighted_row_sum(i, &rows));
                }
            }
            for i in 0..n {
                let mut next = linalg::sub(&grads[i][ell], &grads[i][ell - 1]);
                linalg::add_scaled(&mut next, T::one(), &d[i][ell - 1]);
                g[i].push(next);
            }
            if self.stochastic {
                let rho = self.schedule.rho(ell);
                for i in 0..n {
                    let mixed = linalg::blend(&a_tilde[i][ell - 1], &d[i][ell - 1], rho);
                    a_tilde[i].push(mixed);
                }
            }
            if let Some(sg) = &shadow_grads {
                let new_rows: Vec<Vec<T>> = {
                    let rows: Vec<&[T]> = (0..n).map(|j| shadow_g[j][ell - 1].as_slice()).collect();
                    (0..n).map(|i| self.w.weighted_row_sum(i, &rows)).collect()
                };
                for (i, row) in new_rows.into_iter().enumerate() {
                    let mut next = linalg::sub(&sg[i][ell], &sg[i][ell - 1]);
                    linalg::add_scaled(&mut next, T::one(), &row);
                    shadow_d[i].push(row);
                    shadow_g[i].push(next);
                }
            }

            if self.check_invariants {
                // Tracking conservation: column stochasticity of W keeps
                // the tracking mean equal to the mean of the gradients in
                // play at every inner step.
                let g_rows: Vec<&[T]> = (0..n).map(|j| g[j][ell].as_slice()).collect();
                let grad_rows: Vec<&[T]> = (0..n).map(|j| grads[j][ell].as_slice()).collect();
                let g_mean = linalg::mean_rows(&g_rows);
                let grad_mean = linalg::mean_rows(&grad_rows);
                let residual = linalg::dist(&g_mean, &grad_mean);
                tracking_residual_max = tracking_residual_max.max(residual);
                if residual > track_abort {
                    return Err(Error::InvariantViolation(format!(
                        "gradient-tracking conservation violated at t={t}, ell={ell}: residual {residual}"
                    )));
                }
            }

            for i in 0..n {
                let cost = if self.stochastic {
                    a_tilde[i][ell].clone()
                } else {
                    d[i][ell - 1].clone()
                };
                self.oracles[i][ell - 1].feedback(&self.set, &cost)?;
            }
        }

        // Regret snapshot across the oracle bank.
        let mut regret_sum = T::zero();
        for bank in &self.oracles {
            for oracle in bank {
                regret_sum += oracle.average_regret_so_far(&self.set)?;
            }
        }
        let oracle_avg_regret = regret_sum / T::from_usize(n * l).unwrap();

        let agents = (0..n)
            .map(|i| AgentRoundState {
                x: std::mem::take(&mut x[i]),
                y: std::mem::take(&mut y[i]),
                v: std::mem::take(&mut v[i]),
                g: std::mem::take(&mut g[i]),
                d: std::mem::take(&mut d[i]),
                a_tilde: std::mem::take(&mut a_tilde[i]),
                shadow_d: if self.shadow_exact {
                    Some(std::mem::take(&mut shadow_d[i]))
                } else {
                    None
                },
                chosen_ell: chosen[i],
                decision: std::mem::take(&mut decisions[i]),
            })
            .collect();

        self.rounds_run = t;
        Ok(RoundState {
            t,
            agents,
            averaging_residual_max,
            tracking_residual_max,
            oracle_avg_regret,
        })
    }

    /// Drives all rounds through the metrics collector.
    pub fn run_all(&mut self) -> Result<MetricsSeries<T>> {
        let mut collector = MetricsCollector::new(self.per_ell_diagnostics, self.centralized);
        for t in 1..=self.stream.horizon() {
            let round = self.run_round(t)?;
            collector.push(&round, &self.stream, &self.set)?;
        }
        collector.finish(&self.set, &self.stream, &self.w, &self.schedule)
    }
}

/// Builds an engine from the config and runs every round, returning the
/// metrics series. Deterministic in `master_seed`.
pub fn run_experiment<T: Real>(cfg: &RunConfig<T>) -> Result<MetricsSeries<T>> {
    let mut engine = Engine::from_config(cfg)?;
    engine.run_all()
}

/// Runs the single-agent centralized reference for `cfg`: same constraint
/// set, schedule, horizon and oracle kind, but one agent holding the
/// network-average loss directly.
pub fn run_centralized_baseline<T: Real>(cfg: &RunConfig<T>) -> Result<MetricsSeries<T>> {
    let mut baseline = cfg.clone();
    baseline.mode = Mode::CentralizedBaseline;
    run_experiment(&baseline)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::LossKind;

    fn quad_config(mode: Mode, n: usize, horizon: usize, l: usize) -> RunConfig<f64> {
        RunConfig {
            mode,
            topology_kind: TopologyKind::Complete,
            n_agents: n,
            constraint: ConstraintSet::l1_ball(1.0, 4).unwrap(),
            loss: LossSpec {
                kind: LossKind::Quadratic { drift: 0.01 },
                noise_sigma: 0.0,
                identical_across_agents: false,
            },
            oracle_kind: OracleKind::Ogd,
            oracle_params: OracleParams {
                step_scale: 0.0,
                perturbation: 0.0,
            },
            horizon,
            l,
            a: 1.0,
            alpha: 0.5,
            master_seed: 77,
            init_policy: InitPolicy::CanonicalVertex,
            shared_seeds: false,
            shadow_exact: false,
            per_ell_diagnostics: true,
            check_invariants: true,
        }
    }

    #[test]
    fn schedule_validates_parameters() {
        assert!(Schedule::new(0, 1.0, 0.5).is_err());
        assert!(Schedule::new(10, 0.0, 0.5).is_err());
        let err = Schedule::new(10, 1.0, 1.5).unwrap_err();
        assert!(err.to_string().contains("alpha must lie in (0,1)"));
        assert!(Schedule::new(10, 1.0, 0.5).is_ok());
    }

    #[test]
    fn schedule_values_are_monotone_in_unit_interval() {
        let s = Schedule::new(200, 1.0, 0.75).unwrap();
        let mut prev_eta = f64::INFINITY;
        let mut prev_rho = f64::INFINITY;
        for ell in 1..=200 {
            let eta = s.eta(ell);
            let rho = s.rho(ell);
            assert!(eta > 0.0 && eta <= 1.0);
            assert!(rho > 0.0 && rho <= 1.0);
            assert!(eta <= prev_eta);
            assert!(rho <= prev_rho);
            prev_eta = eta;
            prev_rho = rho;
        }
        // At alpha = 3/4 the first mixing weight is exactly 1, so the
        // first mixed vector equals the first tracking vector.
        assert_eq!(s.rho(1), 1.0);
        // eta_1 = min(1, A) = 1 for A = 1.
        assert_eq!(s.eta(1), 1.0);
    }

    #[test]
    fn rho_is_clamped_for_small_alpha() {
        let s = Schedule::new(10, 1.0, 0.3).unwrap();
        assert_eq!(s.rho(1), 1.0);
    }

    #[test]
    fn rounds_must_run_in_order() {
        let mut e = Engine::from_config(&quad_config(Mode::Exact, 3, 3, 5)).unwrap();
        assert!(e.run_round(2).is_err());
        e.run_round(1).unwrap();
        assert!(e.run_round(3).is_err());
        e.run_round(2).unwrap();
        e.run_round(3).unwrap();
        assert!(e.run_round(4).is_err());
    }

    #[test]
    fn eta_one_degenerates_to_oracle_outputs() {
        // With A large enough that eta_l = 1, each new iterate is exactly
        // the oracle output regardless of the gossip blend.
        let mut cfg = quad_config(Mode::Exact, 3, 2, 6);
        cfg.a = 1e9;
        let mut e = Engine::from_config(&cfg).unwrap();
        for t in 1..=2 {
            let round = e.run_round(t).unwrap();
            for agent in &round.agents {
                for ell in 1..=6usize {
                    assert_eq!(agent.x[ell], agent.v[ell - 1]);
                }
            }
        }
    }

    #[test]
    fn single_agent_reduces_to_centralized_conditional_gradient() {
        // With W = [1] the gossip blend is the identity and the tracking
        // vector is the local gradient itself; cross-check the whole round
        // against a hand-rolled single-agent loop.
        let mut cfg = quad_config(Mode::CentralizedBaseline, 1, 2, 8);
        cfg.shared_seeds = true;
        let mut e = Engine::from_config(&cfg).unwrap();
        let set = e.set().clone();
        let params = e.oracle_params();
        let stream = e.stream().clone();
        let schedule = *e.schedule();
        let mut oracles: Vec<OracleState<f64>> = (1..=schedule.l())
            .map(|ell| {
                let seed = mix(cfg.master_seed, &[TAG_ORACLE, SHARED_AGENT, ell as u64]);
                OracleState::new(OracleKind::Ogd, &set, params, seed)
            })
            .collect();

        for t in 1..=2 {
            let round = e.run_round(t).unwrap();
            let agent = &round.agents[0];
            // Hand loop.
            let mut xs = vec![set.canonical_vertex()];
            let mut vs: Vec<Vec<f64>> = Vec::new();
            for ell in 1..=schedule.l() {
                let v = oracles[ell - 1].next_vector(&set).unwrap();
                let next = linalg::blend(xs.last().unwrap(), &v, schedule.eta(ell));
                vs.push(v);
                xs.push(next);
            }
            for (a, b) in xs.iter().zip(&agent.x) {
                assert_eq!(a, b);
            }
            let grads: Vec<Vec<f64>> = xs
                .iter()
                .map(|xk| stream.global_gradient(t, xk).unwrap())
                .collect();
            let mut gk = grads[0].clone();
            for ell in 1..=schedule.l() {
                let dvec = gk.clone();
                assert_eq!(&agent.d[ell - 1], &dvec);
                let mut next = linalg::sub(&grads[ell], &grads[ell - 1]);
                linalg::add_scaled(&mut next, 1.0, &dvec);
                oracles[ell - 1].feedback(&set, &dvec).unwrap();
                gk = next;
            }
        }
    }

    #[test]
    fn symmetric_agents_stay_bit_identical() {
        let mut cfg = quad_config(Mode::Exact, 2, 3, 10);
        cfg.loss.identical_across_agents = true;
        cfg.shared_seeds = true;
        let mut e = Engine::from_config(&cfg).unwrap();
        for t in 1..=3 {
            let round = e.run_round(t).unwrap();
            let (first, rest) = round.agents.split_first().unwrap();
            for other in rest {
                assert_eq!(first.x, other.x);
                assert_eq!(first.y, other.y);
                assert_eq!(first.v, other.v);
                assert_eq!(first.d, other.d);
                assert_eq!(first.chosen_ell, other.chosen_ell);
                assert_eq!(first.decision, other.decision);
            }
        }
    }

    #[test]
    fn identity_residuals_are_float_noise() {
        let mut cfg = quad_config(Mode::Exact, 4, 4, 12);
        cfg.topology_kind = TopologyKind::Cycle;
        let mut e = Engine::from_config(&cfg).unwrap();
        for t in 1..=4 {
            let round = e.run_round(t).unwrap();
            assert!(round.averaging_residual_max <= 1e-12);
            assert!(round.tracking_residual_max <= 1e-12);
        }
    }

    #[test]
    fn stochastic_round_populates_mixing_state() {
        let mut cfg = quad_config(Mode::Stochastic, 3, 2, 7);
        cfg.loss.noise_sigma = 0.5;
        cfg.alpha = 0.75;
        cfg.shadow_exact = true;
        let mut e = Engine::from_config(&cfg).unwrap();
        let round = e.run_round(1).unwrap();
        for agent in &round.agents {
            assert_eq!(agent.a_tilde.len(), 8);
            assert_eq!(agent.a_tilde[0], vec![0.0; 4]);
            // rho_1 = 1 at alpha = 3/4: first mix equals the first
            // tracking vector.
            assert_eq!(agent.a_tilde[1], agent.d[0]);
            assert!(agent.shadow_d.is_some());
        }
    }

    #[test]
    fn sigma_zero_stochastic_matches_exact_tracking() {
        let mut stoch = quad_config(Mode::Stochastic, 3, 3, 9);
        stoch.alpha = 0.75;
        let mut exact = stoch.clone();
        exact.mode = Mode::Exact;
        let mut es = Engine::from_config(&stoch).unwrap();
        let mut ee = Engine::from_config(&exact).unwrap();
        for t in 1..=3 {
            let rs = es.run_round(t).unwrap();
            let re = ee.run_round(t).unwrap();
            for (a, b) in rs.agents.iter().zip(&re.agents) {
                // With sigma = 0 the noisy recursion is the exact one.
                assert_eq!(a.g[0], b.g[0]);
                assert_eq!(a.d[0], b.d[0]);
                // rho_1 = 1 forces the first fed cost to agree too.
                assert_eq!(a.a_tilde[1], b.d[0]);
            }
        }
    }

    #[test]
    fn determinism_same_config_same_series() {
        let cfg = quad_config(Mode::Exact, 3, 4, 6);
        let s1 = run_experiment(&cfg).unwrap();
        let s2 = run_experiment(&cfg).unwrap();
        assert_eq!(s1.records.len(), s2.records.len());
        for (a, b) in s1.records.iter().zip(&s2.records) {
            assert_eq!(a.mean_loss, b.mean_loss);
            assert_eq!(a.mean_gap_running, b.mean_gap_running);
            assert_eq!(a.per_agent_gap, b.per_agent_gap);
        }
    }

    #[test]
    fn ftpl_oracles_run_deterministically_through_the_engine() {
        let mut cfg = quad_config(Mode::Exact, 3, 5, 8);
        cfg.oracle_kind = OracleKind::Ftpl;
        let s1 = run_experiment(&cfg).unwrap();
        let s2 = run_experiment(&cfg).unwrap();
        for (a, b) in s1.records.iter().zip(&s2.records) {
            assert_eq!(a.per_agent_gap, b.per_agent_gap);
        }
        // Perturbed-leader plays are vertices; the blended iterates still
        // satisfy every live feasibility check (invariants are on).
        assert_eq!(s1.records.len(), 5);
    }

    #[test]
    fn whole_pipeline_runs_on_f32() {
        let cfg: RunConfig<f32> = RunConfig {
            mode: Mode::Exact,
            topology_kind: TopologyKind::Cycle,
            n_agents: 3,
            constraint: ConstraintSet::l1_ball(1.0f32, 4).unwrap(),
            loss: LossSpec {
                kind: LossKind::Quadratic { drift: 0.01 },
                noise_sigma: 0.0,
                identical_across_agents: false,
            },
            oracle_kind: OracleKind::Ogd,
            oracle_params: OracleParams {
                step_scale: 0.0,
                perturbation: 0.0,
            },
            horizon: 4,
            l: 6,
            a: 1.0,
            alpha: 0.5,
            master_seed: 77,
            init_policy: InitPolicy::CanonicalVertex,
            shared_seeds: false,
            shadow_exact: false,
            per_ell_diagnostics: true,
            check_invariants: true,
        };
        let series = run_experiment(&cfg).unwrap();
        assert_eq!(series.records.len(), 4);
        for r in &series.records {
            assert!(r.mean_gap_running.is_finite());
            for &g in &r.per_agent_gap {
                assert!(g >= -f32::feasibility_tol());
            }
        }
    }

    #[test]
    fn config_validation_errors() {
        let mut cfg = quad_config(Mode::Exact, 3, 0, 5);
        assert!(cfg.validate().is_err());
        cfg.horizon = 5;
        cfg.n_agents = 1;
        assert!(cfg.validate().is_err());
        cfg.n_agents = 3;
        cfg.alpha = 1.5;
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("alpha must lie in (0,1)"));
    }
}
