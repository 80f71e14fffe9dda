//! Online linear optimization oracles.
//!
//! Each inner iteration slot of each agent owns one oracle instance. Per
//! round the oracle is asked for a point of the constraint set, then later
//! receives the round's linear cost `<cost, .>` as feedback. Two learners
//! are provided:
//!
//! * `Ogd` — projected online gradient descent with the anytime step
//!   `gamma_k = step_scale / sqrt(k)`;
//! * `Ftpl` — follow-the-perturbed-leader: plays
//!   `lmo(accumulated_cost + z)` with a fresh coordinate-wise uniform
//!   perturbation `z in [0, perturbation]^dim` per call, which keeps the
//!   learner projection-free.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::constraints::ConstraintSet;
use crate::error::{Error, Result};
use crate::linalg;
use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OracleKind {
    Ogd,
    Ftpl,
}

/// Scale parameters; zeros are resolved by the engine to defaults derived
/// from the set diameter, the gradient bound and the horizon.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleParams<T> {
    pub step_scale: T,
    pub perturbation: T,
}

/// Record of a played/cost history; every played vector is feasible.
#[derive(Debug, Clone, Default)]
pub struct OracleLog<T> {
    played: Vec<Vec<T>>,
    costs: Vec<Vec<T>>,
}

impl<T: Real> OracleLog<T> {
    pub fn new() -> Self {
        Self {
            played: Vec::new(),
            costs: Vec::new(),
        }
    }

    pub fn push(&mut self, played: Vec<T>, cost: Vec<T>) {
        self.played.push(played);
        self.costs.push(cost);
    }

    pub fn len(&self) -> usize {
        debug_assert_eq!(self.played.len(), self.costs.len());
        self.played.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn played(&self) -> &[Vec<T>] {
        &self.played
    }

    pub fn costs(&self) -> &[Vec<T>] {
        &self.costs
    }
}

/// Average regret of a played sequence against the best fixed comparator,
/// `(1/T) (sum_t <u_t, d_t> - min_{u*} sum_t <u*, d_t>)`; the comparator
/// minimum is one LMO call on the summed costs.
pub fn average_regret<T: Real>(log: &OracleLog<T>, set: &ConstraintSet<T>) -> Result<T> {
    if log.is_empty() {
        return Err(Error::InvalidArgument(
            "average_regret needs a non-empty log".into(),
        ));
    }
    let dim = set.dim();
    let mut play_sum = T::zero();
    let mut cost_sum = vec![T::zero(); dim];
    for (u, d) in log.played().iter().zip(log.costs()) {
        play_sum += linalg::dot(u, d);
        linalg::add_scaled(&mut cost_sum, T::one(), d);
    }
    let best = set.lmo(&cost_sum)?;
    let t = T::from_usize(log.len()).unwrap();
    Ok((play_sum - linalg::dot(&best, &cost_sum)) / t)
}

/// One online linear learner bound to a constraint set.
#[derive(Debug, Clone)]
pub struct OracleState<T> {
    kind: OracleKind,
    /// OGD iterate; always a member of the set.
    current: Vec<T>,
    /// FTPL cumulative cost.
    accumulated_cost: Vec<T>,
    step_count: usize,
    rng: ChaCha8Rng,
    params: OracleParams<T>,
    last_played: Vec<T>,
    // Compact regret accumulators (the full log is optional).
    played_cost_sum: T,
    cost_sum: Vec<T>,
    log: Option<OracleLog<T>>,
}

impl<T: Real> OracleState<T> {
    /// A fresh oracle initialized at the set's canonical vertex. The full
    /// played/cost log is kept; engines that only need regret snapshots
    /// call [`OracleState::without_log`].
    pub fn new(
        kind: OracleKind,
        set: &ConstraintSet<T>,
        params: OracleParams<T>,
        seed: u64,
    ) -> Self {
        let start = set.canonical_vertex();
        Self {
            kind,
            current: start.clone(),
            accumulated_cost: vec![T::zero(); set.dim()],
            step_count: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            params,
            last_played: start,
            played_cost_sum: T::zero(),
            cost_sum: vec![T::zero(); set.dim()],
            log: Some(OracleLog::new()),
        }
    }

    pub fn without_log(mut self) -> Self {
        self.log = None;
        self
    }

    pub fn kind(&self) -> OracleKind {
        self.kind
    }

    pub fn step_count(&self) -> usize {
        self.step_count
    }

    pub fn log(&self) -> Option<&OracleLog<T>> {
        self.log.as_ref()
    }

    /// The point played this round; always a member of the set.
    pub fn next_vector(&mut self, set: &ConstraintSet<T>) -> Result<Vec<T>> {
        let v = match self.kind {
            OracleKind::Ogd => self.current.clone(),
            OracleKind::Ftpl => {
                let mut perturbed = self.accumulated_cost.clone();
                if self.params.perturbation > T::zero() {
                    for p in perturbed.iter_mut() {
                        *p += self.rng.random_range(T::zero()..self.params.perturbation);
                    }
                }
                set.lmo(&perturbed)?
            }
        };
        self.last_played = v.clone();
        Ok(v)
    }

    /// Receives the round's linear cost `<cost, .>`.
    pub fn feedback(&mut self, set: &ConstraintSet<T>, cost: &[T]) -> Result<()> {
        if !linalg::all_finite(cost) {
            return Err(Error::NonFinite("oracle cost".into()));
        }
        match self.kind {
            OracleKind::Ogd => {
                let k = T::from_usize(self.step_count + 1).unwrap();
                let gamma = self.params.step_scale / k.sqrt();
                let mut target = self.current.clone();
                linalg::add_scaled(&mut target, -gamma, cost);
                self.current = set.project(&target)?;
            }
            OracleKind::Ftpl => {
                linalg::add_scaled(&mut self.accumulated_cost, T::one(), cost);
            }
        }
        self.step_count += 1;
        self.played_cost_sum += linalg::dot(&self.last_played, cost);
        linalg::add_scaled(&mut self.cost_sum, T::one(), cost);
        if let Some(log) = self.log.as_mut() {
            log.push(self.last_played.clone(), cost.to_vec());
        }
        Ok(())
    }

    /// Average regret over the feedback received so far, computed from the
    /// compact accumulators (no log required).
    pub fn average_regret_so_far(&self, set: &ConstraintSet<T>) -> Result<T> {
        if self.step_count == 0 {
            return Err(Error::InvalidArgument(
                "oracle has received no feedback".into(),
            ));
        }
        let best = set.lmo(&self.cost_sum)?;
        let t = T::from_usize(self.step_count).unwrap();
        Ok((self.played_cost_sum - linalg::dot(&best, &self.cost_sum)) / t)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn l1(dim: usize) -> ConstraintSet<f64> {
        ConstraintSet::l1_ball(1.0, dim).unwrap()
    }

    fn params(step: f64, pert: f64) -> OracleParams<f64> {
        OracleParams {
            step_scale: step,
            perturbation: pert,
        }
    }

    #[test]
    fn ogd_starts_at_canonical_vertex() {
        let set = l1(2);
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(1.0, 0.0), 0);
        assert_eq!(o.next_vector(&set).unwrap(), vec![1.0, 0.0]);
    }

    #[test]
    fn ogd_feedback_is_projected_gradient_step() {
        // current (1,0) on the unit L1 ball, cost (0,1), gamma_1 = 1:
        // project((1,-1)) = (0.5,-0.5).
        let set = l1(2);
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(1.0, 0.0), 0);
        o.next_vector(&set).unwrap();
        o.feedback(&set, &[0.0, 1.0]).unwrap();
        let v = o.next_vector(&set).unwrap();
        assert!((v[0] - 0.5).abs() < 1e-12 && (v[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn ogd_hand_step_on_l2_ball() {
        let set = ConstraintSet::l2_ball(1.0, 2).unwrap();
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(0.5, 0.0), 0);
        o.next_vector(&set).unwrap();
        o.feedback(&set, &[1.0, 0.0]).unwrap();
        // (1,0) - 0.5*(1,0) = (0.5,0), already inside.
        assert_eq!(o.next_vector(&set).unwrap(), vec![0.5, 0.0]);
    }

    #[test]
    fn zero_cost_leaves_ogd_in_place() {
        let set = l1(3);
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(1.0, 0.0), 0);
        let before = o.next_vector(&set).unwrap();
        o.feedback(&set, &[0.0; 3]).unwrap();
        assert_eq!(o.next_vector(&set).unwrap(), before);
    }

    #[test]
    fn ftpl_accumulates_costs() {
        let set = l1(2);
        let mut o = OracleState::new(OracleKind::Ftpl, &set, params(0.0, 0.1), 9);
        o.next_vector(&set).unwrap();
        o.feedback(&set, &[1.0, 2.0]).unwrap();
        o.feedback(&set, &[0.5, -1.0]).unwrap();
        assert_eq!(o.accumulated_cost, vec![1.5, 1.0]);
        assert_eq!(o.step_count(), 2);
    }

    #[test]
    fn ftpl_zero_accumulated_plays_lmo_of_perturbation() {
        // With zero accumulated cost and nonnegative perturbations the play
        // is a minimizing vertex of the perturbation itself.
        let set = l1(3);
        let mut o = OracleState::new(OracleKind::Ftpl, &set, params(0.0, 1.0), 3);
        let v = o.next_vector(&set).unwrap();
        assert!(set.contains(&v, 0.0));
        let nonzero: Vec<_> = v.iter().filter(|x| **x != 0.0).collect();
        assert_eq!(nonzero.len(), 1);
    }

    #[test]
    fn determinism_same_seed_same_plays() {
        let set = l1(4);
        let costs: Vec<Vec<f64>> = (0..20)
            .map(|k| (0..4).map(|j| ((k * 7 + j * 3) % 5) as f64 - 2.0).collect())
            .collect();
        let mut plays = Vec::new();
        for _ in 0..2 {
            let mut o = OracleState::new(OracleKind::Ftpl, &set, params(0.0, 2.0), 1234);
            let mut seq = Vec::new();
            for c in &costs {
                seq.push(o.next_vector(&set).unwrap());
                o.feedback(&set, c).unwrap();
            }
            plays.push(seq);
        }
        assert_eq!(plays[0], plays[1]);
    }

    #[test]
    fn played_vectors_stay_feasible() {
        let set = ConstraintSet::simplex(5).unwrap();
        for kind in [OracleKind::Ogd, OracleKind::Ftpl] {
            let mut o = OracleState::new(kind, &set, params(0.7, 1.3), 5);
            let mut rng = crate::rng::substream(11, &[0]);
            for _ in 0..100 {
                let v = o.next_vector(&set).unwrap();
                assert!(set.contains(&v, 1e-9));
                let cost: Vec<f64> = (0..5).map(|_| f64::standard_normal(&mut rng)).collect();
                o.feedback(&set, &cost).unwrap();
            }
        }
    }

    #[test]
    fn feedback_rejects_non_finite_costs() {
        let set = l1(2);
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(1.0, 0.0), 0);
        assert!(o.feedback(&set, &[f64::NAN, 0.0]).is_err());
    }

    #[test]
    fn average_regret_examples() {
        let set = ConstraintSet::<f64>::l1_ball(1.0, 1).unwrap();
        // Single best-response step has zero regret.
        let mut log = OracleLog::new();
        log.push(set.lmo(&[1.0]).unwrap(), vec![1.0]);
        let r: f64 = average_regret(&log, &set).unwrap();
        assert!(r.abs() < 1e-15);

        // All-zero costs give zero regret.
        let mut log = OracleLog::new();
        log.push(vec![1.0], vec![0.0]);
        log.push(vec![-1.0], vec![0.0]);
        assert_eq!(average_regret(&log, &set).unwrap(), 0.0);

        // T=2, played (1),(1), costs (1),(-1): regret (1 - 1 - 0)/2 = 0.
        let mut log = OracleLog::new();
        log.push(vec![1.0], vec![1.0]);
        log.push(vec![1.0], vec![-1.0]);
        assert_eq!(average_regret(&log, &set).unwrap(), 0.0);

        let empty: OracleLog<f64> = OracleLog::new();
        assert!(average_regret(&empty, &set).is_err());
    }

    #[test]
    fn compact_accumulators_match_log_regret() {
        let set = l1(3);
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(0.5, 0.0), 0);
        let mut rng = crate::rng::substream(21, &[0]);
        for _ in 0..37 {
            o.next_vector(&set).unwrap();
            let cost: Vec<f64> = (0..3).map(|_| f64::standard_normal(&mut rng)).collect();
            o.feedback(&set, &cost).unwrap();
        }
        let from_log = average_regret(o.log().unwrap(), &set).unwrap();
        let from_acc = o.average_regret_so_far(&set).unwrap();
        assert!((from_log - from_acc).abs() < 1e-12);
    }

    #[test]
    fn ogd_average_regret_meets_classical_bound() {
        // Adversarial-ish bounded costs with ||d|| <= g on a set of
        // diameter dd: with step_scale = dd/g the classical guarantee is
        // avg regret <= 1.5 g dd / sqrt(T).
        let set = l1(4);
        let g = 2.0;
        let dd = set.diameter();
        let t_max = 1000;
        let mut o = OracleState::new(OracleKind::Ogd, &set, params(dd / g, 0.0), 0);
        let mut rng = crate::rng::substream(77, &[1]);
        for _ in 0..t_max {
            o.next_vector(&set).unwrap();
            let mut cost: Vec<f64> = (0..4).map(|_| f64::standard_normal(&mut rng)).collect();
            let n = crate::linalg::norm(&cost);
            for c in &mut cost {
                *c *= g / n;
            }
            o.feedback(&set, &cost).unwrap();
        }
        let avg = o.average_regret_so_far(&set).unwrap();
        assert!(
            avg <= 1.5 * g * dd / (t_max as f64).sqrt(),
            "avg regret {avg}"
        );
    }

    #[test]
    fn ftpl_regret_shrinks_with_horizon() {
        // Amplitude scaled as g sqrt(T); mean average regret over seeds at
        // T=1600 should be well below the mean at T=400.
        let set = l1(3);
        let g = 1.0;
        let run = |t_max: usize, seed: u64| -> f64 {
            let mut o = OracleState::new(
                OracleKind::Ftpl,
                &set,
                params(0.0, g * (t_max as f64).sqrt()),
                seed,
            );
            let mut rng = crate::rng::substream(seed, &[2]);
            for _ in 0..t_max {
                o.next_vector(&set).unwrap();
                let mut cost: Vec<f64> = (0..3).map(|_| f64::standard_normal(&mut rng)).collect();
                let n = crate::linalg::norm(&cost);
                for c in &mut cost {
                    *c *= g / n;
                }
                o.feedback(&set, &cost).unwrap();
            }
            o.average_regret_so_far(&set).unwrap()
        };
        let mean = |t_max: usize| -> f64 { (0..50).map(|s| run(t_max, s)).sum::<f64>() / 50.0 };
        let short = mean(400);
        let long = mean(1600);
        assert!(long <= 0.6 * short, "short {short}, long {long}");
    }
}
