//! Omniscient measurement layer.
//!
//! Agents only ever see their local losses; the metrics here evaluate the
//! network-average objective `F^t` and its gradient directly. The central
//! quantity is the conditional-gradient stationarity gap
//! `max_{o in K} <grad F^t(x), x - o>`, zero exactly at first-order
//! stationary points of the constrained problem. Per-inner-iteration
//! diagnostics track consensus spread, gradient-tracking error and (in
//! stochastic shadow runs) the variance-reduction mixing error.

use crate::constraints::ConstraintSet;
use crate::engine::{RoundState, Schedule};
use crate::error::{Error, Result};
use crate::linalg;
use crate::losses::LossStream;
use crate::scalar::Real;
use crate::topology::{second_eigenvalue_magnitude, GossipMatrix};

/// `<grad, x> - <grad, lmo(grad)> = max_{o in K} <grad, x - o>`.
/// Nonnegative (up to float noise) whenever `x` is feasible.
pub fn fw_gap<T: Real>(grad: &[T], x: &[T], set: &ConstraintSet<T>) -> Result<T> {
    let o = set.lmo(grad)?;
    Ok(linalg::dot(grad, x) - linalg::dot(grad, &o))
}

/// Everything measured about one round.
#[derive(Debug, Clone)]
pub struct MetricsRecord<T> {
    pub t: usize,
    /// `F^t(x_i^t)` per agent.
    pub per_agent_loss: Vec<T>,
    /// Stationarity gap at each agent's played decision.
    pub per_agent_gap: Vec<T>,
    pub mean_loss: T,
    pub mean_gap: T,
    /// Exact prefix averages of the per-round means.
    pub mean_loss_running: T,
    pub mean_gap_running: T,
    pub max_gap_agents: T,
    /// `delta_p[l-1] = max_i ||y_{i,l} - xbar_l||` (empty when per-inner
    /// diagnostics are disabled).
    pub delta_p: Vec<T>,
    /// `delta_d[l-1] = max_i ||d_{i,l} - (1/n) sum_j grad f_j^t(y_{j,l})||`,
    /// measured against the exact tracking vectors when a shadow recursion
    /// is available.
    pub delta_d: Vec<T>,
    /// `vr_error[l-1] = mean_i ||a_{i,l} - d_{i,l}||^2` against the exact
    /// shadow tracking vectors; present only in stochastic shadow runs.
    pub vr_error: Option<Vec<T>>,
    /// Mean over (agent, slot) of the oracles' average regret so far.
    pub oracle_regret_snapshot: T,
}

/// Derived constants reported alongside a run.
#[derive(Debug, Clone, Copy)]
pub struct DiagnosticConstants<T> {
    pub diameter: T,
    pub beta: T,
    pub g_lip: T,
    pub lambda2: T,
    /// Constant fit of `l * delta_p_l` over the settled inner iterations.
    pub cp_fit: T,
    /// Same fit for the tracking error envelope.
    pub cd_fit: T,
    /// `B = 4 C_d + 2 beta (2 C_p + A D)`.
    pub b_bound: T,
    /// `Q = 48 (beta~^2 + beta^2)(2 C_p + A D)^2 + 4 sigma^2 + 2 B^2`,
    /// with the estimate's Lipschitz constant equal to `beta` (additive
    /// noise).
    pub q_bound: T,
}

/// All per-round records of a run plus the derived constants.
#[derive(Debug, Clone)]
pub struct MetricsSeries<T> {
    pub records: Vec<MetricsRecord<T>>,
    pub constants: DiagnosticConstants<T>,
}

impl<T: Real> MetricsSeries<T> {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn final_record(&self) -> Option<&MetricsRecord<T>> {
        self.records.last()
    }

    /// Max over rounds of `delta_p` per inner iteration.
    pub fn delta_p_envelope(&self) -> Vec<T> {
        envelope_max(self.records.iter().map(|r| &r.delta_p))
    }

    /// Max over rounds of `delta_d` per inner iteration.
    pub fn delta_d_envelope(&self) -> Vec<T> {
        envelope_max(self.records.iter().map(|r| &r.delta_d))
    }

    /// Mean over rounds of the variance-reduction error per inner
    /// iteration (empty unless shadow data was recorded).
    pub fn vr_error_mean(&self) -> Vec<T> {
        let rows: Vec<&Vec<T>> = self
            .records
            .iter()
            .filter_map(|r| r.vr_error.as_ref())
            .collect();
        if rows.is_empty() {
            return Vec::new();
        }
        let l = rows[0].len();
        let inv = T::one() / T::from_usize(rows.len()).unwrap();
        (0..l)
            .map(|k| rows.iter().map(|r| r[k]).sum::<T>() * inv)
            .collect()
    }
}

fn envelope_max<'a, T: Real>(rows: impl Iterator<Item = &'a Vec<T>>) -> Vec<T> {
    let mut out: Vec<T> = Vec::new();
    for row in rows {
        if out.is_empty() {
            out = row.clone();
        } else {
            for (o, &v) in out.iter_mut().zip(row) {
                *o = o.max(v);
            }
        }
    }
    out
}

/// Accumulates per-round records and running prefix sums.
pub struct MetricsCollector<T> {
    records: Vec<MetricsRecord<T>>,
    loss_sum: T,
    gap_sum: T,
    per_ell: bool,
    centralized: bool,
}

impl<T: Real> MetricsCollector<T> {
    pub fn new(per_ell: bool, centralized: bool) -> Self {
        Self {
            records: Vec::new(),
            loss_sum: T::zero(),
            gap_sum: T::zero(),
            per_ell,
            centralized,
        }
    }

    /// Assembles the record for a completed round; a pure read of the
    /// round snapshot.
    pub fn push(
        &mut self,
        round: &RoundState<T>,
        stream: &LossStream<T>,
        set: &ConstraintSet<T>,
    ) -> Result<&MetricsRecord<T>> {
        let t = round.t;
        let n = round.n_agents();
        let inv_n = T::one() / T::from_usize(n).unwrap();

        let mut per_agent_loss = Vec::with_capacity(n);
        let mut per_agent_gap = Vec::with_capacity(n);
        for agent in &round.agents {
            per_agent_loss.push(stream.global_evaluate(t, &agent.decision)?);
            let grad = stream.global_gradient(t, &agent.decision)?;
            per_agent_gap.push(fw_gap(&grad, &agent.decision, set)?);
        }
        let mean_loss = per_agent_loss.iter().copied().sum::<T>() * inv_n;
        let mean_gap = per_agent_gap.iter().copied().sum::<T>() * inv_n;
        let max_gap_agents = per_agent_gap
            .iter()
            .copied()
            .fold(T::neg_infinity(), |a, b| a.max(b));
        self.loss_sum += mean_loss;
        self.gap_sum += mean_gap;
        let count = T::from_usize(self.records.len() + 1).unwrap();

        let l = round.agents[0].y.len();
        let (mut delta_p, mut delta_d) = (Vec::new(), Vec::new());
        let mut vr_error: Option<Vec<T>> = None;
        if self.per_ell {
            delta_p.reserve(l);
            delta_d.reserve(l);
            let has_shadow = round.agents.iter().all(|a| a.shadow_d.is_some());
            let has_mixing = round.agents.iter().all(|a| !a.a_tilde.is_empty());
            let mut vr = if has_shadow && has_mixing {
                Some(Vec::with_capacity(l))
            } else {
                None
            };
            for ell in 1..=l {
                let xbar = round.mean_iterate(ell);
                let mut worst_p = T::zero();
                for agent in &round.agents {
                    worst_p = worst_p.max(linalg::dist(&agent.y[ell - 1], &xbar));
                }
                delta_p.push(worst_p);

                // Network-average exact gradient at the gossip blends.
                let mut ref_grad = vec![T::zero(); set.dim()];
                for (i, agent) in round.agents.iter().enumerate() {
                    let gi = if self.centralized {
                        stream.global_gradient(t, &agent.y[ell - 1])?
                    } else {
                        stream.gradient(i, t, &agent.y[ell - 1])?
                    };
                    linalg::add_scaled(&mut ref_grad, inv_n, &gi);
                }
                let mut worst_d = T::zero();
                for agent in &round.agents {
                    let d_used = agent
                        .shadow_d
                        .as_ref()
                        .map(|s| &s[ell - 1])
                        .unwrap_or(&agent.d[ell - 1]);
                    worst_d = worst_d.max(linalg::dist(d_used, &ref_grad));
                }
                delta_d.push(worst_d);

                if let Some(vr) = vr.as_mut() {
                    let mut acc = T::zero();
                    for agent in &round.agents {
                        let shadow = agent.shadow_d.as_ref().expect("checked above");
                        let diff = linalg::dist(&agent.a_tilde[ell], &shadow[ell - 1]);
                        acc += diff * diff;
                    }
                    vr.push(acc * inv_n);
                }
            }
            vr_error = vr;
        }

        self.records.push(MetricsRecord {
            t,
            per_agent_loss,
            per_agent_gap,
            mean_loss,
            mean_gap,
            mean_loss_running: self.loss_sum / count,
            mean_gap_running: self.gap_sum / count,
            max_gap_agents,
            delta_p,
            delta_d,
            vr_error,
            oracle_regret_snapshot: round.oracle_avg_regret,
        });
        Ok(self.records.last().unwrap())
    }

    pub fn finish(
        self,
        set: &ConstraintSet<T>,
        stream: &LossStream<T>,
        w: &GossipMatrix<T>,
        schedule: &Schedule<T>,
    ) -> Result<MetricsSeries<T>> {
        let mut series = MetricsSeries {
            records: self.records,
            constants: DiagnosticConstants {
                diameter: set.diameter(),
                beta: stream.beta(),
                g_lip: stream.g_lip(),
                lambda2: second_eigenvalue_magnitude(w)?,
                cp_fit: T::zero(),
                cd_fit: T::zero(),
                b_bound: T::zero(),
                q_bound: T::zero(),
            },
        };
        let cp = fit_inverse_constant(&series.delta_p_envelope());
        let cd = fit_inverse_constant(&series.delta_d_envelope());
        let beta = series.constants.beta;
        let ad = schedule.a() * series.constants.diameter;
        let reach = T::of(2.0) * cp + ad;
        let b = T::of(4.0) * cd + T::of(2.0) * beta * reach;
        let sigma = stream.noise_sigma();
        let q = T::of(48.0) * (beta * beta + beta * beta) * reach * reach
            + T::of(4.0) * sigma * sigma
            + T::of(2.0) * b * b;
        series.constants.cp_fit = cp;
        series.constants.cd_fit = cd;
        series.constants.b_bound = b;
        series.constants.q_bound = q;
        Ok(series)
    }
}

/// Least-squares constant `c` for the model `value_l ~ c / l`, fitted on
/// the transformed series `l * value_l` over the settled inner iterations
/// (the first few are transient). Zero when no diagnostics were recorded.
fn fit_inverse_constant<T: Real>(envelope: &[T]) -> T {
    if envelope.is_empty() {
        return T::zero();
    }
    let lo = 5usize.min(envelope.len());
    let vals: Vec<T> = (lo..=envelope.len())
        .map(|ell| T::from_usize(ell).unwrap() * envelope[ell - 1])
        .collect();
    vals.iter().copied().sum::<T>() / T::from_usize(vals.len()).unwrap()
}

/// Elementwise ratio of running mean losses `A(t)`; entries where the
/// baseline running loss is not strictly positive are NaN (undefined).
pub fn approximation_ratio<T: Real>(
    decentralized: &MetricsSeries<T>,
    baseline: &MetricsSeries<T>,
) -> Result<Vec<T>> {
    if decentralized.len() != baseline.len() {
        return Err(Error::InvalidArgument(format!(
            "series length mismatch: {} vs {}",
            decentralized.len(),
            baseline.len()
        )));
    }
    Ok(decentralized
        .records
        .iter()
        .zip(&baseline.records)
        .map(|(d, b)| {
            if b.mean_loss_running > T::zero() {
                d.mean_loss_running / b.mean_loss_running
            } else {
                T::nan()
            }
        })
        .collect())
}

/// Least-squares slope of `log(value)` against `log(index)`; the
/// empirical decay exponent of a rate series.
pub fn rate_fit<T: Real>(points: &[(T, T)]) -> Result<T> {
    if points.len() < 5 {
        return Err(Error::InvalidArgument(format!(
            "rate fit needs at least 5 points, got {}",
            points.len()
        )));
    }
    for &(idx, val) in points {
        if !(idx > T::zero() && val > T::zero()) {
            return Err(Error::InvalidArgument(
                "rate fit needs strictly positive indices and values".into(),
            ));
        }
    }
    let n = T::from_usize(points.len()).unwrap();
    let lx: Vec<T> = points.iter().map(|&(i, _)| i.ln()).collect();
    let ly: Vec<T> = points.iter().map(|&(_, v)| v.ln()).collect();
    let mx = lx.iter().copied().sum::<T>() / n;
    let my = ly.iter().copied().sum::<T>() / n;
    let mut num = T::zero();
    let mut den = T::zero();
    for (x, y) in lx.iter().zip(&ly) {
        num += (*x - mx) * (*y - my);
        den += (*x - mx) * (*x - mx);
    }
    if den == T::zero() {
        return Err(Error::InvalidArgument(
            "rate fit needs at least two distinct indices".into(),
        ));
    }
    Ok(num / den)
}
