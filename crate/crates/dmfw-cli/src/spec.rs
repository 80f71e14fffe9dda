//! Experiment config files: a TOML surface mapped onto the engine's run
//! config. Unknown keys are rejected so misconfigured sweeps fail loudly.

use serde::{Deserialize, Serialize};

use dmfw::constraints::ConstraintSet;
use dmfw::engine::{InitPolicy, Mode, RunConfig};
use dmfw::losses::{LossKind, LossSpec};
use dmfw::oracles::{OracleKind, OracleParams};
use dmfw::topology::TopologyKind;

pub const DEFAULT_SWEEP_CAP: usize = 10_000;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub name: String,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    pub run: RunSection,
    pub topology: TopologySection,
    pub constraint: ConstraintSection,
    pub loss: LossSection,
    pub oracle: OracleSection,
    pub schedule: ScheduleSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
}

fn default_output_dir() -> String {
    "runs".into()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub mode: String,
    pub horizon: usize,
    pub master_seed: u64,
    #[serde(default = "default_init_policy")]
    pub init_policy: String,
    #[serde(default)]
    pub shared_seeds: bool,
    #[serde(default)]
    pub shadow_exact: bool,
    #[serde(default = "default_true")]
    pub per_ell_diagnostics: bool,
    #[serde(default = "default_true")]
    pub check_invariants: bool,
}

fn default_init_policy() -> String {
    "canonical_vertex".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySection {
    pub kind: String,
    pub n: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConstraintSection {
    pub kind: String,
    pub dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub radius: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lo: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hi: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LossSection {
    pub kind: String,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default)]
    pub identical_across_agents: bool,
    #[serde(default = "default_drift")]
    pub drift: f64,
    #[serde(default = "default_curvature")]
    pub curvature: f64,
    #[serde(default = "default_frequency")]
    pub frequency: f64,
}

fn default_drift() -> f64 {
    0.01
}

fn default_curvature() -> f64 {
    0.5
}

fn default_frequency() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleSection {
    pub kind: String,
    /// 0 resolves to D / G.
    #[serde(default)]
    pub step_scale: f64,
    /// 0 resolves to G sqrt(T).
    #[serde(default)]
    pub perturbation: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub l: usize,
    pub a: f64,
    pub alpha: f64,
}

/// Optional sweep lists; empty or missing lists fall back to the base
/// value and do not contribute to the cross product.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    #[serde(default)]
    pub topology: Vec<String>,
    #[serde(default)]
    pub n: Vec<usize>,
    #[serde(default)]
    pub seed: Vec<u64>,
    #[serde(default)]
    pub oracle: Vec<String>,
    #[serde(default)]
    pub mode: Vec<String>,
    #[serde(default)]
    pub alpha: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_points: Option<usize>,
}

impl ExperimentSpec {
    pub fn parse(text: &str) -> Result<Self, String> {
        let spec: ExperimentSpec = toml::from_str(text).map_err(|e| e.to_string())?;
        spec.validate_surface()?;
        Ok(spec)
    }

    fn validate_surface(&self) -> Result<(), String> {
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
        {
            return Err(format!(
                "name {:?} is not filesystem-safe (use [A-Za-z0-9._-])",
                self.name
            ));
        }
        Ok(())
    }

    /// Maps the surface onto the engine config, validating every field.
    pub fn to_run_config(&self) -> Result<RunConfig<f64>, String> {
        let mode = parse_mode(&self.run.mode)?;
        let topology_kind = parse_topology(&self.topology.kind, self.topology.p)?;
        let constraint = self.parse_constraint()?;
        let loss_kind = match self.loss.kind.as_str() {
            "quadratic" => LossKind::Quadratic {
                drift: self.loss.drift,
            },
            "smooth_l1_regression" => LossKind::SmoothL1Regression,
            "sin_quadratic" => LossKind::SinQuadratic {
                curvature: self.loss.curvature,
                frequency: self.loss.frequency,
                drift: self.loss.drift,
            },
            other => return Err(format!("unknown loss kind {other:?}")),
        };
        let oracle_kind = parse_oracle(&self.oracle.kind)?;
        let init_policy = match self.run.init_policy.as_str() {
            "canonical_vertex" => InitPolicy::CanonicalVertex,
            "seeded_random_vertex" => InitPolicy::SeededRandomVertex,
            other => return Err(format!("unknown init policy {other:?}")),
        };
        let cfg = RunConfig {
            mode,
            topology_kind,
            n_agents: self.topology.n,
            constraint,
            loss: LossSpec {
                kind: loss_kind,
                noise_sigma: self.loss.noise_sigma,
                identical_across_agents: self.loss.identical_across_agents,
            },
            oracle_kind,
            oracle_params: OracleParams {
                step_scale: self.oracle.step_scale,
                perturbation: self.oracle.perturbation,
            },
            horizon: self.run.horizon,
            l: self.schedule.l,
            a: self.schedule.a,
            alpha: self.schedule.alpha,
            master_seed: self.run.master_seed,
            init_policy,
            shared_seeds: self.run.shared_seeds,
            shadow_exact: self.run.shadow_exact,
            per_ell_diagnostics: self.run.per_ell_diagnostics,
            check_invariants: self.run.check_invariants,
        };
        cfg.validate().map_err(|e| e.to_string())?;
        Ok(cfg)
    }

    fn parse_constraint(&self) -> Result<ConstraintSet<f64>, String> {
        let c = &self.constraint;
        match c.kind.as_str() {
            "l1_ball" => {
                let r = c.radius.ok_or("l1_ball needs `radius`")?;
                ConstraintSet::l1_ball(r, c.dim).map_err(|e| e.to_string())
            }
            "l2_ball" => {
                let r = c.radius.ok_or("l2_ball needs `radius`")?;
                ConstraintSet::l2_ball(r, c.dim).map_err(|e| e.to_string())
            }
            "simplex" => ConstraintSet::simplex(c.dim).map_err(|e| e.to_string()),
            "box" => {
                let lo = c.lo.ok_or("box needs `lo`")?;
                let hi = c.hi.ok_or("box needs `hi`")?;
                ConstraintSet::boxed(lo, hi, c.dim).map_err(|e| e.to_string())
            }
            other => Err(format!("unknown constraint kind {other:?}")),
        }
    }

    /// Expands the sweep cross product into named point specs (sweep
    /// section stripped). An absent or entirely-empty sweep yields the
    /// base spec alone, under its own name.
    pub fn expand_sweep(&self) -> Result<Vec<(String, ExperimentSpec)>, String> {
        let sweep = self.sweep.clone().unwrap_or_default();
        let cap = sweep.max_points.unwrap_or(DEFAULT_SWEEP_CAP);

        let topologies: Vec<Option<String>> = expand_axis(&sweep.topology);
        let ns: Vec<Option<usize>> = expand_axis(&sweep.n);
        let seeds: Vec<Option<u64>> = expand_axis(&sweep.seed);
        let oracles: Vec<Option<String>> = expand_axis(&sweep.oracle);
        let modes: Vec<Option<String>> = expand_axis(&sweep.mode);
        let alphas: Vec<Option<f64>> = expand_axis(&sweep.alpha);

        let total =
            topologies.len() * ns.len() * seeds.len() * oracles.len() * modes.len() * alphas.len();
        if total > cap {
            return Err(format!(
                "sweep cross product has {total} points, cap is {cap}"
            ));
        }

        let mut points = Vec::with_capacity(total);
        for topo in &topologies {
            for n in &ns {
                for seed in &seeds {
                    for oracle in &oracles {
                        for mode in &modes {
                            for alpha in &alphas {
                                let mut point = self.clone();
                                point.sweep = None;
                                let mut tags: Vec<String> = Vec::new();
                                if let Some(v) = topo {
                                    point.topology.kind = v.clone();
                                    tags.push(format!("topology={v}"));
                                }
                                if let Some(v) = n {
                                    point.topology.n = *v;
                                    tags.push(format!("n={v}"));
                                }
                                if let Some(v) = seed {
                                    point.run.master_seed = *v;
                                    tags.push(format!("seed={v}"));
                                }
                                if let Some(v) = oracle {
                                    point.oracle.kind = v.clone();
                                    tags.push(format!("oracle={v}"));
                                }
                                if let Some(v) = mode {
                                    point.run.mode = v.clone();
                                    tags.push(format!("mode={v}"));
                                }
                                if let Some(v) = alpha {
                                    point.schedule.alpha = *v;
                                    tags.push(format!("alpha={v}"));
                                }
                                let name = if tags.is_empty() {
                                    self.name.clone()
                                } else {
                                    format!("{}__{}", self.name, tags.join("__"))
                                };
                                points.push((name, point));
                            }
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("spec serializes")
    }
}

fn expand_axis<V: Clone>(values: &[V]) -> Vec<Option<V>> {
    if values.is_empty() {
        vec![None]
    } else {
        values.iter().cloned().map(Some).collect()
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "exact" => Ok(Mode::Exact),
        "stochastic" => Ok(Mode::Stochastic),
        "centralized_baseline" => Ok(Mode::CentralizedBaseline),
        other => Err(format!("unknown mode {other:?}")),
    }
}

fn parse_topology(s: &str, p: Option<f64>) -> Result<TopologyKind, String> {
    match s {
        "complete" => Ok(TopologyKind::Complete),
        "cycle" => Ok(TopologyKind::Cycle),
        "line" => Ok(TopologyKind::Line),
        "star" => Ok(TopologyKind::Star),
        "erdos_renyi" => {
            let p = p.ok_or("erdos_renyi needs `p`")?;
            Ok(TopologyKind::ErdosRenyi { p })
        }
        other => Err(format!("unknown topology kind {other:?}")),
    }
}

fn parse_oracle(s: &str) -> Result<OracleKind, String> {
    match s {
        "ogd" => Ok(OracleKind::Ogd),
        "ftpl" => Ok(OracleKind::Ftpl),
        other => Err(format!("unknown oracle kind {other:?}")),
    }
}
