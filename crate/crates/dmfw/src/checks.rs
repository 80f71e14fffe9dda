//! Self-contained invariant suites, shared by the CLI `validate`
//! subcommand and the acceptance tests. Each check returns `Err` with the
//! violated invariant named, so failures are directly actionable.

use crate::constraints::ConstraintSet;
use crate::engine::{Engine, InitPolicy, Mode, RunConfig};
use crate::linalg;
use crate::losses::{LossKind, LossSpec};
use crate::oracles::{OracleKind, OracleParams};
use crate::rng::substream;
use crate::scalar::Real;
use crate::topology::{
    build_gossip_matrix, build_topology, second_eigenvalue_magnitude, GossipMatrix, Topology,
    TopologyKind,
};

pub type CheckResult = Result<(), String>;

/// The topology grid exercised by the gossip suite.
pub const GOSSIP_GRID_SIZES: [usize; 6] = [2, 3, 5, 7, 13, 20];

pub fn gossip_grid_kinds() -> Vec<TopologyKind> {
    vec![
        TopologyKind::Complete,
        TopologyKind::Cycle,
        TopologyKind::Line,
        TopologyKind::Star,
        TopologyKind::ErdosRenyi { p: 0.4 },
    ]
}

/// Structural checks on one gossip matrix: exact symmetry, doubly
/// stochastic rows/columns within 1e-12, the edge sparsity pattern, entry
/// range, a contractive second eigenvalue, and the spectral contraction of
/// repeated averaging.
pub fn gossip_matrix_invariants(w: &GossipMatrix<f64>, topo: &Topology) -> CheckResult {
    let n = w.n();
    for i in 0..n {
        for j in 0..n {
            if w.get(i, j) != w.get(j, i) {
                return Err(format!("symmetric: W[{i}][{j}] != W[{j}][{i}]"));
            }
            if !(0.0..=1.0).contains(&w.get(i, j)) {
                return Err(format!("entry range: W[{i}][{j}] = {}", w.get(i, j)));
            }
            if i != j && !topo.has_edge(i, j) && w.get(i, j) != 0.0 {
                return Err(format!(
                    "sparsity pattern: W[{i}][{j}] nonzero off the edge set"
                ));
            }
        }
    }
    for i in 0..n {
        let row: f64 = (0..n).map(|j| w.get(i, j)).sum();
        if (row - 1.0).abs() > 1e-12 {
            return Err(format!("doubly stochastic: row {i} sums to {row}"));
        }
        let col: f64 = (0..n).map(|j| w.get(j, i)).sum();
        if (col - 1.0).abs() > 1e-12 {
            return Err(format!("doubly stochastic: column {i} sums to {col}"));
        }
    }
    let slem = second_eigenvalue_magnitude(w).map_err(|e| format!("second eigenvalue: {e}"))?;
    if slem.is_nan() || slem >= 1.0 {
        return Err(format!(
            "second eigenvalue magnitude not contractive: {slem}"
        ));
    }

    // Repeated averaging contracts the disagreement at rate |lambda_2|.
    let mut rng = substream(1, &[n as u64]);
    let x0: Vec<f64> = (0..n).map(|_| f64::standard_normal(&mut rng)).collect();
    let mean = x0.iter().sum::<f64>() / n as f64;
    let dev0: f64 = x0
        .iter()
        .map(|v| (v - mean) * (v - mean))
        .sum::<f64>()
        .sqrt();
    let mut x = x0;
    for k in 1..=100usize {
        x = w.apply(&x);
        let dev: f64 = x
            .iter()
            .map(|v| (v - mean) * (v - mean))
            .sum::<f64>()
            .sqrt();
        if dev > slem.powi(k as i32) * dev0 + 1e-9 {
            return Err(format!(
                "spectral contraction: step {k} deviation {dev} exceeds |lambda2|^k bound"
            ));
        }
    }
    Ok(())
}

/// The full gossip suite over the topology grid. With `corrupt` set, a
/// doctored matrix (one row rescaled to sum 0.9) is checked instead — the
/// negative fixture proving the checker actually bites.
pub fn gossip_grid_check(corrupt: bool) -> CheckResult {
    if corrupt {
        let topo = build_topology(TopologyKind::Cycle, 5, 0).map_err(|e| e.to_string())?;
        let w: GossipMatrix<f64> = build_gossip_matrix(&topo).map_err(|e| e.to_string())?;
        let corrupted = w.scaled_row_fixture(0, 0.9);
        return gossip_matrix_invariants(&corrupted, &topo);
    }
    for kind in gossip_grid_kinds() {
        for n in GOSSIP_GRID_SIZES {
            let topo = build_topology(kind, n, 1234).map_err(|e| format!("{kind:?} n={n}: {e}"))?;
            let w = build_gossip_matrix(&topo).map_err(|e| format!("{kind:?} n={n}: {e}"))?;
            gossip_matrix_invariants(&w, &topo).map_err(|e| format!("{kind:?} n={n}: {e}"))?;
        }
    }
    Ok(())
}

fn polytope_zoo() -> Vec<ConstraintSet<f64>> {
    let mut sets = Vec::new();
    for dim in 1..=6 {
        sets.push(ConstraintSet::l1_ball(1.3, dim).unwrap());
        sets.push(ConstraintSet::boxed(-0.7, 1.1, dim).unwrap());
        if dim >= 2 {
            sets.push(ConstraintSet::simplex(dim).unwrap());
        }
    }
    sets
}

/// Exact agreement of the LMO with vertex enumeration over 1000 random
/// directions per polytope.
pub fn lmo_bruteforce_check() -> CheckResult {
    for set in polytope_zoo() {
        let verts = set.vertices().map_err(|e| e.to_string())?;
        let mut rng = substream(5, &[set.dim() as u64]);
        for case in 0..1000 {
            let dir: Vec<f64> = (0..set.dim())
                .map(|_| f64::standard_normal(&mut rng))
                .collect();
            let v = set.lmo(&dir).map_err(|e| e.to_string())?;
            let val = linalg::dot(&dir, &v);
            let best = verts
                .iter()
                .map(|u| linalg::dot(&dir, u))
                .fold(f64::INFINITY, f64::min);
            if val != best {
                return Err(format!(
                    "lmo vs brute force: {:?} dim {} case {case}: {val} vs {best}",
                    set.kind(),
                    set.dim()
                ));
            }
            if !set.contains(&v, 1e-9) {
                return Err(format!("lmo output infeasible on {:?}", set.kind()));
            }
        }
    }
    Ok(())
}

/// Feasibility, idempotence and optimality of the Euclidean projection
/// over 1000 random points per set (optimality against 100 random
/// members each).
pub fn projection_check() -> CheckResult {
    let mut sets = polytope_zoo();
    sets.push(ConstraintSet::l2_ball(0.9, 4).unwrap());
    for set in sets {
        let mut rng = substream(6, &[set.dim() as u64]);
        let members: Vec<Vec<f64>> = (0..100).map(|_| set.sample_member(&mut rng)).collect();
        for case in 0..1000 {
            let p: Vec<f64> = (0..set.dim())
                .map(|_| 3.0 * f64::standard_normal(&mut rng))
                .collect();
            let q = set.project(&p).map_err(|e| e.to_string())?;
            if !set.contains(&q, 1e-9) {
                return Err(format!(
                    "projection feasibility on {:?} case {case}",
                    set.kind()
                ));
            }
            let q2 = set.project(&q).map_err(|e| e.to_string())?;
            if linalg::dist(&q, &q2) > 1e-10 {
                return Err(format!(
                    "projection idempotence on {:?} case {case}",
                    set.kind()
                ));
            }
            let dq = linalg::dist(&p, &q);
            for m in &members {
                if dq > linalg::dist(&p, m) + 1e-9 {
                    return Err(format!(
                        "projection optimality on {:?} case {case}: member closer than projection",
                        set.kind()
                    ));
                }
            }
        }
    }
    Ok(())
}

/// Central finite differences against the analytic gradients, all loss
/// kinds, 100 fuzzed (agent, t, x) triples each.
pub fn gradient_check() -> CheckResult {
    let set = ConstraintSet::l1_ball(1.0, 5).unwrap();
    let kinds: Vec<(&str, LossKind<f64>)> = vec![
        ("quadratic", LossKind::Quadratic { drift: 0.02 }),
        ("smooth_l1_regression", LossKind::SmoothL1Regression),
        (
            "sin_quadratic",
            LossKind::SinQuadratic {
                curvature: 0.5,
                frequency: 1.5,
                drift: 0.02,
            },
        ),
    ];
    let h = 1e-5;
    for (name, kind) in kinds {
        let stream = crate::losses::LossStream::new(
            LossSpec {
                kind,
                noise_sigma: 0.0,
                identical_across_agents: false,
            },
            3,
            5,
            6,
            77,
            &set,
        )
        .map_err(|e| e.to_string())?;
        let mut rng = substream(7, &[0]);
        for case in 0..100usize {
            let agent = case % 3;
            let t = 1 + case % 6;
            let x = set.sample_member(&mut rng);
            let g = stream.gradient(agent, t, &x).map_err(|e| e.to_string())?;
            for k in 0..5 {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[k] += h;
                xm[k] -= h;
                let fd = (stream.evaluate(agent, t, &xp).map_err(|e| e.to_string())?
                    - stream.evaluate(agent, t, &xm).map_err(|e| e.to_string())?)
                    / (2.0 * h);
                if (g[k] - fd).abs() / g[k].abs().max(1.0) > 1e-4 {
                    return Err(format!(
                        "gradient finite differences: {name} case {case} coord {k}: {} vs {fd}",
                        g[k]
                    ));
                }
            }
        }
    }
    Ok(())
}

fn identity_probe_config() -> RunConfig<f64> {
    RunConfig {
        mode: Mode::Exact,
        topology_kind: TopologyKind::Cycle,
        n_agents: 6,
        constraint: ConstraintSet::l1_ball(1.0, 8).unwrap(),
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
        horizon: 50,
        l: 50,
        a: 1.0,
        alpha: 0.5,
        master_seed: 2024,
        init_policy: InitPolicy::SeededRandomVertex,
        shared_seeds: false,
        shadow_exact: false,
        per_ell_diagnostics: false,
        check_invariants: true,
    }
}

/// Max residual of the mean-iterate averaging identity over a 50x50
/// six-agent cycle run; must be float noise (<= 1e-10).
pub fn averaging_identity_check() -> CheckResult {
    let mut engine = Engine::from_config(&identity_probe_config()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in 1..=50 {
        let round = engine.run_round(t).map_err(|e| e.to_string())?;
        worst = worst.max(round.averaging_residual_max);
    }
    if worst > 1e-10 {
        return Err(format!("averaging identity residual {worst} exceeds 1e-10"));
    }
    Ok(())
}

/// Max deviation of the tracking mean from the mean gradient on the same
/// probe run; must stay below 1e-9.
pub fn tracking_conservation_check() -> CheckResult {
    let mut engine = Engine::from_config(&identity_probe_config()).map_err(|e| e.to_string())?;
    let mut worst: f64 = 0.0;
    for t in 1..=50 {
        let round = engine.run_round(t).map_err(|e| e.to_string())?;
        worst = worst.max(round.tracking_residual_max);
    }
    if worst > 1e-9 {
        return Err(format!(
            "tracking conservation residual {worst} exceeds 1e-9"
        ));
    }
    Ok(())
}

/// Consensus and tracking error envelopes must decay across inner
/// iterations: `delta_p` at l=64 within a quarter of its value at l=8 and
/// `delta_d` within 0.35x, on a cycle(6) quadratic run with L=128.
pub fn decay_check() -> CheckResult {
    let cfg = RunConfig {
        mode: Mode::Exact,
        topology_kind: TopologyKind::Cycle,
        n_agents: 6,
        constraint: ConstraintSet::l1_ball(1.0, 8).unwrap(),
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
        horizon: 10,
        l: 128,
        a: 1.0,
        alpha: 0.95,
        master_seed: 31,
        init_policy: InitPolicy::SeededRandomVertex,
        shared_seeds: false,
        shadow_exact: false,
        per_ell_diagnostics: true,
        check_invariants: true,
    };
    let series = crate::engine::run_experiment(&cfg).map_err(|e| e.to_string())?;
    let dp = series.delta_p_envelope();
    let dd = series.delta_d_envelope();
    let p_ratio: f64 = dp[63] / dp[7];
    if p_ratio.is_nan() || p_ratio > 0.25 {
        return Err(format!(
            "consensus decay: delta_p(64)/delta_p(8) = {p_ratio} > 0.25 ({} / {})",
            dp[63], dp[7]
        ));
    }
    let d_ratio: f64 = dd[63] / dd[7];
    if d_ratio.is_nan() || d_ratio > 0.35 {
        return Err(format!(
            "tracking decay: delta_d(64)/delta_d(8) = {d_ratio} > 0.35 ({} / {})",
            dd[63], dd[7]
        ));
    }
    Ok(())
}

/// Differential check of the stochastic path at sigma = 0 against the
/// exact path: the noisy tracking recursion degenerates to the exact one,
/// the first fed costs coincide (rho_1 = 1 at alpha = 3/4), and decisions
/// agree whenever the played index lies in the prefix driven only by the
/// first oracle slot.
pub fn sigma_zero_differential_check() -> CheckResult {
    let mut stoch_cfg = identity_probe_config();
    stoch_cfg.mode = Mode::Stochastic;
    stoch_cfg.alpha = 0.75;
    stoch_cfg.horizon = 12;
    stoch_cfg.l = 16;
    stoch_cfg.shadow_exact = true;
    let mut exact_cfg = stoch_cfg.clone();
    exact_cfg.mode = Mode::Exact;
    exact_cfg.shadow_exact = false;

    let mut stoch = Engine::from_config(&stoch_cfg).map_err(|e| e.to_string())?;
    let mut exact = Engine::from_config(&exact_cfg).map_err(|e| e.to_string())?;
    for t in 1..=12 {
        let rs = stoch.run_round(t).map_err(|e| e.to_string())?;
        let re = exact.run_round(t).map_err(|e| e.to_string())?;
        for (i, (a, b)) in rs.agents.iter().zip(&re.agents).enumerate() {
            for ell in 0..16 {
                if linalg::dist(&a.d[ell], a.shadow_d.as_ref().unwrap()[ell].as_slice()) > 1e-9 {
                    return Err(format!(
                        "sigma-zero differential: noisy tracking differs from exact shadow at t={t}, agent={i}, ell={}",
                        ell + 1
                    ));
                }
            }
            if linalg::dist(&a.a_tilde[1], &b.d[0]) > 1e-9 {
                return Err(format!(
                    "sigma-zero differential: first fed cost mismatch at t={t}, agent={i}"
                ));
            }
            if a.chosen_ell <= 2 && linalg::dist(&a.decision, &b.decision) > 1e-9 {
                return Err(format!(
                    "sigma-zero differential: decisions diverge at t={t}, agent={i}, ell*={}",
                    a.chosen_ell
                ));
            }
        }
    }
    Ok(())
}

/// Determinism probe: two runs from one config must produce identical
/// records.
pub fn determinism_check() -> CheckResult {
    let mut small = identity_probe_config();
    small.horizon = 5;
    small.l = 10;
    let a = crate::engine::run_experiment(&small).map_err(|e| e.to_string())?;
    let b = crate::engine::run_experiment(&small).map_err(|e| e.to_string())?;
    for (ra, rb) in a.records.iter().zip(&b.records) {
        if ra.mean_loss != rb.mean_loss || ra.mean_gap_running != rb.mean_gap_running {
            return Err(format!("determinism: records differ at t={}", ra.t));
        }
    }
    Ok(())
}

/// The full validate battery in display order. `corrupt_gossip` swaps the
/// gossip suite for its negative fixture.
pub fn standard_suites(corrupt_gossip: bool) -> Vec<(&'static str, CheckResult)> {
    vec![
        ("gossip matrix", gossip_grid_check(corrupt_gossip)),
        ("lmo brute force", lmo_bruteforce_check()),
        ("projection", projection_check()),
        ("gradient finite differences", gradient_check()),
        ("averaging identity", averaging_identity_check()),
        ("tracking conservation", tracking_conservation_check()),
        ("consensus and tracking decay", decay_check()),
        ("sigma-zero differential", sigma_zero_differential_check()),
        ("determinism", determinism_check()),
    ]
}
