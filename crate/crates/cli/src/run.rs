//! Runs a parsed experiment and writes its artifacts.
//!
//! Every run writes `summary.json` and `report.txt` into the output
//! directory, plus one CSV per seed (`seed_<k>.csv`) for the seeded modes and
//! `oracle.csv` for the oracle mode.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use recsim::check::{run_checks, CheckConfig, CheckReport};
use recsim::influence::{run_coupled, CoupledConfig, CoupledTrace};
use recsim::learn::{fmt_full, run_learning, Initial, LearnConfig, LearnTrace};
use recsim::optimize::{grid_oracle, grid_refine, solve_static, SolveConfig, SolveReport};
use recsim::{CostSeriesPolicy, InterestProfile, ModelSpec, RngStream, Strategy};
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, Mode, StartPoint};

pub const LEARN_STREAM: u64 = 7;
pub const COUPLED_STREAM: u64 = 8;
/// Share of a coupled run averaged into its steady state.
pub const STEADY_FRACTION: f64 = 0.1;

#[derive(Debug)]
pub enum RunError {
    Domain(recsim::Error),
    Io { path: PathBuf, source: std::io::Error },
}

impl std::fmt::Display for RunError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunError::Domain(e) => write!(f, "{e}"),
            RunError::Io { path, source } => write!(f, "{}: {source}", path.display()),
        }
    }
}

impl std::error::Error for RunError {}

impl From<recsim::Error> for RunError {
    fn from(e: recsim::Error) -> Self {
        RunError::Domain(e)
    }
}

#[derive(Debug)]
pub struct RunOutcome {
    pub summary: Value,
    pub report: String,
    pub files: Vec<PathBuf>,
    /// False only when a check-mode run found failing checks.
    pub checks_ok: bool,
}

/// Runs `f` for every seed on up to `jobs` worker threads; results keep seed order.
pub fn for_each_seed<T, F>(seeds: &[u64], jobs: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64) -> T + Sync,
{
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..seeds.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, seeds.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= seeds.len() {
                    break;
                }
                let value = f(seeds[i]);
                slots.lock().expect("worker panicked")[i] = Some(value);
            });
        }
    });
    slots
        .into_inner()
        .expect("worker panicked")
        .into_iter()
        .map(|v| v.expect("every seed ran"))
        .collect()
}

fn write(path: PathBuf, contents: &str, files: &mut Vec<PathBuf>) -> Result<(), RunError> {
    fs::write(&path, contents).map_err(|source| RunError::Io {
        path: path.clone(),
        source,
    })?;
    files.push(path);
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|a| format!("{a:.4}")).collect();
    format!("[{}]", parts.join(", "))
}

fn theta_of(config: &ExperimentConfig, spec: &ModelSpec) -> Result<InterestProfile, RunError> {
    let theta = config
        .theta
        .clone()
        .ok_or_else(|| recsim::Error::InvalidModel(format!("theta is required in {} mode", config.mode.as_str())))?;
    Ok(spec.interest(theta)?)
}

/// Runs the experiment and writes its artifacts into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, jobs: usize) -> Result<RunOutcome, RunError> {
    fs::create_dir_all(out).map_err(|source| RunError::Io {
        path: out.to_path_buf(),
        source,
    })?;
    let spec = config.model();
    let mut files = Vec::new();
    let mut report = format!(
        "experiment {} ({} mode), {} sites, {} topics, kappa {}, epsilon {}, cost {}\n",
        config.name,
        config.mode.as_str(),
        config.sites(),
        config.topics(),
        config.kappa,
        config.epsilon,
        match config.cost.horizon {
            Some(h) => format!("over sessions of at most {h} trials"),
            None => "full series".into(),
        }
    );
    let mut checks_ok = true;
    let results = match config.mode {
        Mode::Static => run_static(config, &spec, out, jobs, &mut files, &mut report)?,
        Mode::Oracle => run_oracle(config, &spec, out, &mut files, &mut report)?,
        Mode::Learn => run_learn(config, &spec, out, jobs, &mut files, &mut report)?,
        Mode::Coupled => run_coupled_mode(config, &spec, out, jobs, &mut files, &mut report)?,
        Mode::Check => {
            let (value, ok) = run_check(config, &spec, out, jobs, &mut files, &mut report)?;
            checks_ok = ok;
            value
        }
    };
    let summary = json!({
        "name": config.name,
        "mode": config.mode.as_str(),
        "seeds": config.seeds,
        "cost_horizon": config.cost.horizon,
        "results": results,
    });
    let text = serde_json::to_string_pretty(&summary).expect("summary serialises");
    write(out.join("summary.json"), &(text + "\n"), &mut files)?;
    write(out.join("report.txt"), &report, &mut files)?;
    Ok(RunOutcome {
        summary,
        report,
        files,
        checks_ok,
    })
}

fn oracle_point(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    theta: &InterestProfile,
) -> Result<Option<(Strategy, f64)>, RunError> {
    let Some(grid) = config.grid else { return Ok(None) };
    let (mut x, mut value) = grid_oracle(spec, theta, &config.cost, grid)?;
    if let Some(fine) = config.refine {
        (x, value) = grid_refine(spec, theta, &config.cost, &x, fine, grid)?;
    }
    Ok(Some((x, value)))
}

fn static_csv(report: &SolveReport) -> String {
    let sites = report.best_x.len();
    let mut out = String::from("start");
    for m in 1..=sites {
        let _ = write!(out, ",x_{m}");
    }
    out.push_str(",F,iterations,converged,aborted\n");
    for r in &report.runs {
        let _ = write!(out, "{}", r.start);
        for v in r.x.as_slice() {
            let _ = write!(out, ",{}", fmt_full(*v));
        }
        let _ = writeln!(
            out,
            ",{},{},{},{}",
            fmt_full(r.value),
            r.iterations,
            r.converged,
            r.aborted
        );
    }
    out
}

fn run_static(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    out: &Path,
    jobs: usize,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<Value, RunError> {
    let theta = theta_of(config, spec)?;
    let oracle = oracle_point(config, spec, &theta)?;
    let reports = for_each_seed(&config.seeds, jobs, |seed| {
        let solver = SolveConfig {
            seed,
            ..config.solver.clone()
        };
        solve_static(spec, &theta, &config.cost, &solver)
    });
    let mut per_seed = Vec::new();
    for (seed, result) in config.seeds.iter().zip(reports) {
        let mut r = result?;
        if let Some((_, value)) = &oracle {
            r = r.with_oracle(*value);
        }
        write(out.join(format!("seed_{seed}.csv")), &static_csv(&r), files)?;
        let near: Vec<Vec<f64>> = r
            .near_optimal
            .iter()
            .map(|&i| r.runs[i].x.as_slice().to_vec())
            .collect();
        let _ = writeln!(
            report,
            "seed {seed}: best_F {:.4} at {}, {} of {} starts converged, {} near-optimal endpoints{}",
            r.best_value,
            fmt_vec(r.best_x.as_slice()),
            r.runs.iter().filter(|s| s.converged).count(),
            r.runs.len(),
            near.len(),
            r.grid_gap.map_or(String::new(), |g| format!(", gap to oracle {g:+.4}"))
        );
        per_seed.push(json!({
            "seed": seed,
            "best_x": r.best_x.as_slice(),
            "best_F": r.best_value,
            "near_optimal_x": near,
            "oracle_gap": r.grid_gap,
        }));
    }
    let oracle_json = oracle.as_ref().map(|(x, v)| json!({"x": x.as_slice(), "F": v}));
    if let Some((x, v)) = &oracle {
        let _ = writeln!(report, "grid oracle: F {v:.4} at {}", fmt_vec(x.as_slice()));
    }
    Ok(json!({"per_seed": per_seed, "oracle": oracle_json}))
}

fn run_oracle(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    out: &Path,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<Value, RunError> {
    let theta = theta_of(config, spec)?;
    let config = ExperimentConfig {
        grid: Some(config.grid.unwrap_or(0.05)),
        ..config.clone()
    };
    let (x, value) = oracle_point(&config, spec, &theta)?.expect("grid is set");
    let mut csv = String::new();
    for m in 1..=x.len() {
        let _ = write!(csv, "x_{m},");
    }
    csv.push_str("F\n");
    for v in x.as_slice() {
        let _ = write!(csv, "{},", fmt_full(*v));
    }
    let _ = writeln!(csv, "{}", fmt_full(value));
    write(out.join("oracle.csv"), &csv, files)?;
    let _ = writeln!(
        report,
        "grid oracle at resolution {}{}: F {value:.4} at {}",
        config.grid.unwrap_or(0.05),
        config.refine.map_or(String::new(), |r| format!(", refined at {r}")),
        fmt_vec(x.as_slice())
    );
    Ok(json!({"x": x.as_slice(), "F": value, "grid": config.grid, "refine": config.refine}))
}

fn initial(start: &StartPoint, spec: &ModelSpec) -> Result<Initial, RunError> {
    Ok(match start {
        StartPoint::Random => Initial::Random,
        StartPoint::Uniform => Initial::Given(Strategy::uniform(spec.sites())),
        StartPoint::Given(x) => Initial::Given(spec.strategy(x.clone())?),
    })
}

fn run_learn(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    out: &Path,
    jobs: usize,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<Value, RunError> {
    let theta = theta_of(config, spec)?;
    let reference = config.reference.clone().map(|r| spec.strategy(r)).transpose()?;
    let learn = LearnConfig {
        initial: initial(&config.x0, spec)?,
        schedule: config
            .step
            .ok_or_else(|| recsim::Error::InvalidSchedule("learn mode needs a step schedule".into()))?,
        sessions: config.sessions,
        reference: reference.clone(),
        decimate: config.decimate,
        policy: config.cost,
    };
    let traces: Vec<recsim::Result<LearnTrace>> = for_each_seed(&config.seeds, jobs, |seed| {
        run_learning(spec, &theta, &learn, &mut RngStream::new(seed, LEARN_STREAM))
    });
    let s = config.sessions;
    let mut per_seed = Vec::new();
    for (seed, trace) in config.seeds.iter().zip(traces) {
        let trace = trace?;
        write(out.join(format!("seed_{seed}.csv")), &trace.to_csv(), files)?;
        let final_f = spec.net_revenue(&trace.final_x, &theta, &config.cost)?;
        let final_error = reference.as_ref().map(|r| trace.final_x.distance(r));
        let first = trace.window_error(1, s / 5);
        let last = trace.window_error(s * 8 / 10, s);
        let _ = writeln!(
            report,
            "seed {seed}: final x {}, F {final_f:.4}{}",
            fmt_vec(trace.final_x.as_slice()),
            match (final_error, first, last) {
                (Some(e), Some(a), Some(b)) => format!(", |x - x*| {e:.4} (window means {a:.4} -> {b:.4})"),
                (Some(e), _, _) => format!(", |x - x*| {e:.4}"),
                _ => String::new(),
            }
        );
        per_seed.push(json!({
            "seed": seed,
            "final_x": trace.final_x.as_slice(),
            "final_F": final_f,
            "final_error": final_error,
            "initial_window_error": first,
            "final_window_error": last,
        }));
    }
    Ok(json!({"per_seed": per_seed, "reference": config.reference}))
}

fn run_coupled_mode(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    out: &Path,
    jobs: usize,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<Value, RunError> {
    let influence = config
        .influence
        .clone()
        .ok_or_else(|| recsim::Error::InvalidModel("coupled mode needs an influence model".into()))?;
    for n in influence.inert_topics() {
        let _ = writeln!(
            report,
            "warning: topic {} is Type-B with beta = 1, its influence level is always 0",
            n + 1
        );
    }
    let x0 = match initial(&config.x0, spec)? {
        Initial::Given(x) => x,
        Initial::Random => {
            return Err(recsim::Error::InvalidModel("coupled runs need a given or uniform x0".into()).into())
        }
    };
    let theta0 = match &config.theta0 {
        Some(t) => spec.interest(t.clone())?,
        None => InterestProfile::uniform(spec.topics()),
    };
    let strategy_schedule = config
        .step
        .ok_or_else(|| recsim::Error::InvalidSchedule("coupled mode needs a strategy schedule".into()))?;
    let coupled = CoupledConfig {
        x0,
        theta0,
        strategy_schedule,
        interest_schedule: config.interest_step.unwrap_or(strategy_schedule),
        sessions: config.sessions,
        mode: config.coupling,
        decimate: config.decimate,
        policy: config.cost,
    };
    let traces: Vec<recsim::Result<CoupledTrace>> = for_each_seed(&config.seeds, jobs, |seed| {
        run_coupled(spec, &influence, &coupled, &mut RngStream::new(seed, COUPLED_STREAM))
    });
    let mut per_seed = Vec::new();
    for (seed, trace) in config.seeds.iter().zip(traces) {
        let trace = trace?;
        write(out.join(format!("seed_{seed}.csv")), &trace.to_csv(), files)?;
        let final_f = spec.net_revenue(&trace.final_x, &trace.final_theta, &config.cost)?;
        let steady = trace
            .steady_state(STEADY_FRACTION)
            .expect("runs record at least one session");
        let _ = writeln!(
            report,
            "seed {seed}: steady x {}, theta {}, F {:.4}",
            fmt_vec(&steady.x),
            fmt_vec(&steady.theta),
            steady.value
        );
        per_seed.push(json!({
            "seed": seed,
            "final_x": trace.final_x.as_slice(),
            "final_theta": trace.final_theta.as_slice(),
            "final_F": final_f,
            "steady_x": steady.x,
            "steady_theta": steady.theta,
            "steady_F": steady.value,
        }));
    }
    Ok(json!({"per_seed": per_seed, "steady_fraction": STEADY_FRACTION}))
}

fn check_csv(r: &CheckReport) -> String {
    let mut out = String::from("check,passed,failed,worst\n");
    for c in &r.checks {
        let _ = writeln!(out, "{},{},{},{}", c.name, c.passed, c.failed, fmt_full(c.worst));
    }
    out
}

fn run_check(
    config: &ExperimentConfig,
    spec: &ModelSpec,
    out: &Path,
    jobs: usize,
    files: &mut Vec<PathBuf>,
    report: &mut String,
) -> Result<(Value, bool), RunError> {
    let theta = theta_of(config, spec)?;
    // the estimator is unbiased for the full series only
    let policy = CostSeriesPolicy {
        horizon: None,
        ..config.cost
    };
    if config.cost.horizon.is_some() {
        report.push_str("checks evaluate the full cost series; the horizon applies to other modes only\n");
    }
    let reports = for_each_seed(&config.seeds, jobs, |seed| {
        let check = CheckConfig {
            seed,
            estimator_sessions: config.sessions,
            session_samples: config.sessions.min(CheckConfig::default().session_samples),
            policy,
            ..CheckConfig::default()
        };
        run_checks(spec, &theta, &check)
    });
    let mut all_ok = true;
    let mut per_seed = Vec::new();
    for (seed, r) in config.seeds.iter().zip(reports) {
        let r = r?;
        write(out.join(format!("seed_{seed}.csv")), &check_csv(&r), files)?;
        let _ = writeln!(
            report,
            "seed {seed}: {} checks passed, {} failed",
            r.passed(),
            r.failed()
        );
        for c in &r.checks {
            let _ = writeln!(
                report,
                "  {} {}: {} passed, {} failed, worst {:.3e}",
                if c.ok() { "ok  " } else { "FAIL" },
                c.name,
                c.passed,
                c.failed,
                c.worst
            );
        }
        all_ok &= r.all_ok();
        per_seed.push(json!({
            "seed": seed,
            "passed": r.passed(),
            "failed": r.failed(),
            "checks": r.checks.iter().map(|c| json!({
                "name": c.name, "passed": c.passed, "failed": c.failed, "worst": c.worst,
            })).collect::<Vec<_>>(),
        }));
    }
    Ok((json!({"per_seed": per_seed, "all_ok": all_ok}), all_ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_keep_order_under_any_job_count() {
        let seeds: Vec<u64> = (1..=13).collect();
        for jobs in [1, 3, 64] {
            assert_eq!(
                for_each_seed(&seeds, jobs, |s| s * s),
                seeds.iter().map(|s| s * s).collect::<Vec<_>>()
            );
        }
        assert!(for_each_seed(&[], 4, |s| s).is_empty());
    }
}
