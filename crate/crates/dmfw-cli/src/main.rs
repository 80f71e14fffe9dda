//! Experiment runner: single runs, sweeps, the invariant battery, and
//! plot-data reports.
//!
//! Exit codes: 0 success, 1 validation-suite failure, 2 usage/config
//! error, 3 runtime invariant violation.

mod csvio;
mod spec;

use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand};

use dmfw::engine::Engine;
use dmfw::metrics::{rate_fit, MetricsSeries};
use dmfw::Error as DmfwError;
use spec::ExperimentSpec;

const EXIT_OK: i32 = 0;
const EXIT_VALIDATION: i32 = 1;
const EXIT_CONFIG: i32 = 2;
const EXIT_INVARIANT: i32 = 3;

#[derive(Parser)]
#[command(
    name = "dmfw",
    version,
    about = "Decentralized meta Frank-Wolfe experiment runner"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a single experiment from a config file.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Master seed override.
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads (used by sweep; accepted here for symmetry).
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the cross product of a config's sweep lists.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
    },
    /// Run the invariant battery and report pass/fail per suite.
    Validate {
        /// Test fixture: corrupt a gossip matrix first to prove the
        /// checker bites.
        #[arg(long, hide = true)]
        inject_gossip_corruption: bool,
    },
    /// Emit plot data and fitted rate slopes for a finished run.
    Report {
        run_dir: PathBuf,
        /// A finished centralized-baseline run dir; adds the loss-ratio
        /// series.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.cmd {
        Cmd::Run {
            config,
            out,
            seed,
            jobs: _,
        } => cmd_run(&config, out.as_deref(), seed),
        Cmd::Sweep {
            config,
            out,
            seed,
            jobs,
        } => cmd_sweep(&config, out.as_deref(), seed, jobs),
        Cmd::Validate {
            inject_gossip_corruption,
        } => cmd_validate(inject_gossip_corruption),
        Cmd::Report { run_dir, baseline } => cmd_report(&run_dir, baseline.as_deref()),
    };
    std::process::exit(code);
}

fn load_spec(
    config_path: &Path,
    out_override: Option<&Path>,
    seed_override: Option<u64>,
) -> Result<ExperimentSpec, String> {
    let text = fs::read_to_string(config_path)
        .map_err(|e| format!("cannot read {}: {e}", config_path.display()))?;
    let mut spec =
        ExperimentSpec::parse(&text).map_err(|e| format!("{}: {e}", config_path.display()))?;
    if let Some(out) = out_override {
        spec.output_dir = out.display().to_string();
    }
    if let Some(seed) = seed_override {
        spec.run.master_seed = seed;
    }
    Ok(spec)
}

fn exit_code_for(err: &DmfwError) -> i32 {
    match err {
        DmfwError::InvariantViolation(_) => EXIT_INVARIANT,
        _ => EXIT_CONFIG,
    }
}

/// Runs one (already expanded) spec and writes its artifact directory.
fn execute_point(name: &str, point: &ExperimentSpec) -> Result<MetricsSeries<f64>, (i32, String)> {
    let cfg = point
        .to_run_config()
        .map_err(|e| (EXIT_CONFIG, format!("{name}: {e}")))?;
    let mut engine =
        Engine::from_config(&cfg).map_err(|e| (exit_code_for(&e), format!("{name}: {e}")))?;
    let resolved_params = engine.oracle_params();
    let series = engine
        .run_all()
        .map_err(|e| (exit_code_for(&e), format!("{name}: {e}")))?;

    let dir = Path::new(&point.output_dir).join(name);
    fs::create_dir_all(&dir)
        .map_err(|e| (EXIT_CONFIG, format!("cannot create {}: {e}", dir.display())))?;
    let io = |e: std::io::Error| (EXIT_CONFIG, format!("{name}: write failed: {e}"));
    csvio::write_metrics_csv(&dir.join("metrics.csv"), &series).map_err(io)?;
    csvio::write_diagnostics_csv(&dir.join("diagnostics.csv"), &series).map_err(io)?;
    csvio::write_constants_csv(&dir.join("constants.csv"), &series).map_err(io)?;

    // The resolved config reproduces this exact run: overrides applied,
    // auto-scaled oracle parameters made explicit, point name pinned.
    let mut resolved = point.clone();
    resolved.name = name.to_string();
    resolved.oracle.step_scale = resolved_params.step_scale;
    resolved.oracle.perturbation = resolved_params.perturbation;
    fs::write(dir.join("resolved_config.toml"), resolved.to_toml()).map_err(io)?;

    // Regression streams expose their synthetic series for inspection.
    if let Some(series_data) = engine.stream().regression_series() {
        let mut out = String::from("agent,k,value\n");
        for (agent, row) in series_data.iter().enumerate() {
            for (k, v) in row.iter().enumerate() {
                out.push_str(&format!("{agent},{k},{}\n", csvio::fmt_real(*v)));
            }
        }
        fs::write(dir.join("series.csv"), out).map_err(io)?;
    }
    Ok(series)
}

fn cmd_run(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> i32 {
    let spec = match load_spec(config_path, out, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    match execute_point(&spec.name, &spec) {
        Ok(series) => {
            let dir = Path::new(&spec.output_dir).join(&spec.name);
            println!(
                "run {} finished: {} rounds, final running gap {:.6e} -> {}",
                spec.name,
                series.len(),
                series
                    .final_record()
                    .map(|r| r.mean_gap_running)
                    .unwrap_or(f64::NAN),
                dir.display()
            );
            EXIT_OK
        }
        Err((code, msg)) => {
            eprintln!("error: {msg}");
            code
        }
    }
}

fn cmd_sweep(config_path: &Path, out: Option<&Path>, seed: Option<u64>, jobs: usize) -> i32 {
    let spec = match load_spec(config_path, out, seed) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let points = match spec.expand_sweep() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };

    // Point name and final running loss/gap per finished run, tagged with
    // the point index so output order is deterministic under --jobs.
    type SummaryRow = (String, f64, f64);
    type PointOutcome = (usize, Result<SummaryRow, (i32, String)>);
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<PointOutcome>> = Mutex::new(Vec::with_capacity(points.len()));
    let workers = jobs.max(1).min(points.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let idx = next.fetch_add(1, Ordering::SeqCst);
                if idx >= points.len() {
                    break;
                }
                let (name, point) = &points[idx];
                let outcome = execute_point(name, point).map(|series| {
                    let last = series.final_record().expect("horizon >= 1");
                    (name.clone(), last.mean_loss_running, last.mean_gap_running)
                });
                results.lock().unwrap().push((idx, outcome));
            });
        }
    });

    let mut results = results.into_inner().unwrap();
    results.sort_by_key(|(idx, _)| *idx);
    let mut summary = String::from("point,final_mean_loss_running,final_mean_gap_running\n");
    let mut failure: Option<(i32, String)> = None;
    for (_, outcome) in results {
        match outcome {
            Ok((name, loss, gap)) => {
                summary.push_str(&format!(
                    "{name},{},{}\n",
                    csvio::fmt_real(loss),
                    csvio::fmt_real(gap)
                ));
            }
            Err((code, msg)) => {
                eprintln!("error: {msg}");
                failure.get_or_insert((code, msg));
            }
        }
    }
    if let Some((code, _)) = failure {
        return code;
    }
    let summary_path = Path::new(&spec.output_dir)
        .join(&spec.name)
        .join("summary.csv");
    if let Some(parent) = summary_path.parent() {
        if let Err(e) = fs::create_dir_all(parent) {
            eprintln!("error: cannot create {}: {e}", parent.display());
            return EXIT_CONFIG;
        }
    }
    if let Err(e) = fs::write(&summary_path, summary) {
        eprintln!("error: cannot write {}: {e}", summary_path.display());
        return EXIT_CONFIG;
    }
    println!(
        "sweep {}: {} points -> {}",
        spec.name,
        points.len(),
        summary_path.display()
    );
    EXIT_OK
}

fn cmd_validate(inject_gossip_corruption: bool) -> i32 {
    let mut ok = true;
    for (name, outcome) in dmfw::checks::standard_suites(inject_gossip_corruption) {
        match outcome {
            Ok(()) => println!("PASS {name}"),
            Err(e) => {
                println!("FAIL {name}: {e}");
                ok = false;
            }
        }
    }
    if ok {
        EXIT_OK
    } else {
        EXIT_VALIDATION
    }
}

fn write_loglog(
    path: &Path,
    xs: &[f64],
    ys: &[f64],
    x_name: &str,
    y_name: &str,
) -> Result<(), String> {
    let mut out = format!("log10_{x_name},log10_{y_name}\n");
    for (&x, &y) in xs.iter().zip(ys) {
        if x > 0.0 && y > 0.0 {
            out.push_str(&format!(
                "{},{}\n",
                csvio::fmt_real(x.log10()),
                csvio::fmt_real(y.log10())
            ));
        }
    }
    fs::write(path, out).map_err(|e| format!("cannot write {}: {e}", path.display()))
}

fn report_slope(label: &str, ts: &[f64], values: &[f64]) {
    let points: Vec<(f64, f64)> = ts
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t > 0.0 && v > 0.0)
        .map(|(&t, &v)| (t, v))
        .collect();
    match rate_fit(&points) {
        Ok(slope) => println!("{label} rate slope: {slope:.4}"),
        Err(_) => println!("{label} rate slope: insufficient data"),
    }
}

fn cmd_report(run_dir: &Path, baseline: Option<&Path>) -> i32 {
    let metrics_path = run_dir.join("metrics.csv");
    let table = match csvio::Table::read(&metrics_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_CONFIG;
        }
    };
    let required = ["t", "mean_gap_running", "mean_loss_running"];
    let mut cols = Vec::new();
    for name in required {
        match table.column(name) {
            Ok(c) => cols.push(c),
            Err(e) => {
                eprintln!("error: {}: {e}", metrics_path.display());
                return EXIT_CONFIG;
            }
        }
    }
    let (ts, gaps, losses) = (&cols[0], &cols[1], &cols[2]);

    if let Err(e) = write_loglog(
        &run_dir.join("plotdata_gap.csv"),
        ts,
        gaps,
        "t",
        "mean_gap_running",
    ) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    if let Err(e) = write_loglog(
        &run_dir.join("plotdata_loss.csv"),
        ts,
        losses,
        "t",
        "mean_loss_running",
    ) {
        eprintln!("error: {e}");
        return EXIT_CONFIG;
    }
    report_slope("gap", ts, gaps);
    report_slope("loss", ts, losses);

    if let Some(base_dir) = baseline {
        let base_table = match csvio::Table::read(&base_dir.join("metrics.csv")) {
            Ok(t) => t,
            Err(e) => {
                eprintln!("error: {e}");
                return EXIT_CONFIG;
            }
        };
        let base_losses = match base_table.column("mean_loss_running") {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: baseline: {e}");
                return EXIT_CONFIG;
            }
        };
        if base_losses.len() != losses.len() {
            eprintln!(
                "error: baseline has {} rounds, run has {}",
                base_losses.len(),
                losses.len()
            );
            return EXIT_CONFIG;
        }
        let mut out = String::from("t,ratio\n");
        let mut last = f64::NAN;
        for ((&t, &l), &b) in ts.iter().zip(losses).zip(&base_losses) {
            let ratio = if b > 0.0 { l / b } else { f64::NAN };
            out.push_str(&format!("{t},{}\n", csvio::fmt_real(ratio)));
            last = ratio;
        }
        let path = run_dir.join("plotdata_ratio.csv");
        if let Err(e) = fs::write(&path, out) {
            eprintln!("error: cannot write {}: {e}", path.display());
            return EXIT_CONFIG;
        }
        println!("final loss ratio vs baseline: {last:.4}");
    }
    EXIT_OK
}
