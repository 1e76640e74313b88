//! Plain-text experiment configs.
//!
//! One `key = value` per line, `#` starts a comment. Vectors are comma or
//! whitespace separated. A matrix is written as `key =` followed by one
//! indented row per line:
//!
//! ```text
//! mode = static
//! publishing =
//!     0.25 0.25 0.25 0.25
//!     0.10 0.05 0.15 0.70
//! rewards = 150, 400
//! theta = 0.1, 0.2, 0.3, 0.4
//! ```
//!
//! `preset = <name>` loads a named config first; the remaining keys override it.

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use recsim::influence::{CouplingMode, InfluenceKind, InfluenceSpec};
use recsim::learn::StepSchedule;
use recsim::optimize::{AscentStep, SolveConfig};
use recsim::{CostSeriesPolicy, ModelSpec};

use crate::presets;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Static,
    Learn,
    Coupled,
    Oracle,
    Check,
}

impl Mode {
    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Static => "static",
            Mode::Learn => "learn",
            Mode::Coupled => "coupled",
            Mode::Oracle => "oracle",
            Mode::Check => "check",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "static" => Mode::Static,
            "learn" => Mode::Learn,
            "coupled" => Mode::Coupled,
            "oracle" => Mode::Oracle,
            "check" => Mode::Check,
            _ => return None,
        })
    }
}

/// Initial strategy of a learning or coupled run.
#[derive(Clone, Debug, PartialEq)]
pub enum StartPoint {
    Random,
    Uniform,
    Given(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub name: String,
    pub mode: Mode,
    pub publishing: Vec<Vec<f64>>,
    pub rewards: Vec<f64>,
    pub kappa: f64,
    pub epsilon: f64,
    pub cost: CostSeriesPolicy,
    pub theta: Option<Vec<f64>>,
    pub solver: SolveConfig,
    /// Lattice resolution for the grid oracle.
    pub grid: Option<f64>,
    /// Finer resolution for a local pass around the lattice optimum.
    pub refine: Option<f64>,
    pub x0: StartPoint,
    /// Uniform when absent.
    pub theta0: Option<Vec<f64>>,
    pub step: Option<StepSchedule>,
    pub interest_step: Option<StepSchedule>,
    pub coupling: CouplingMode,
    pub influence: Option<InfluenceSpec>,
    pub reference: Option<Vec<f64>>,
    pub sessions: u64,
    pub seeds: Vec<u64>,
    pub decimate: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn model(&self) -> ModelSpec {
        ModelSpec::new(self.publishing.clone(), self.rewards.clone(), self.kappa, self.epsilon)
            .expect("validated at parse time")
    }

    pub fn sites(&self) -> usize {
        self.publishing.len()
    }

    pub fn topics(&self) -> usize {
        self.publishing.first().map_or(0, Vec::len)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub key: String,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}: {}", self.key, self.message),
            None => write!(f, "{}: {}", self.key, self.message),
        }
    }
}

/// Every problem found in a config, in source order.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfigErrors(pub Vec<ConfigError>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, e) in self.0.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{e}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

const CHECK_SESSIONS: u64 = 1_000_000;

const KEYS: &[&str] = &[
    "preset",
    "name",
    "mode",
    "publishing",
    "rewards",
    "kappa",
    "epsilon",
    "cost_horizon",
    "series_tol",
    "series_cap",
    "theta",
    "starts",
    "ascent_step",
    "max_iters",
    "solver_tol",
    "near_margin",
    "grid",
    "refine",
    "x0",
    "theta0",
    "step_a0",
    "step_exponent",
    "interest_b0",
    "interest_exponent",
    "coupling",
    "influence",
    "xi",
    "beta",
    "v_floor",
    "reference",
    "sessions",
    "seeds",
    "decimate",
    "out",
];

#[derive(Clone, Debug)]
enum Value {
    Scalar(String),
    Matrix(Vec<String>),
}

#[derive(Clone, Debug)]
struct Entry {
    key: String,
    value: Value,
    line: usize,
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("")
}

fn lex(text: &str, errors: &mut Vec<ConfigError>) -> Vec<Entry> {
    let mut entries: Vec<Entry> = Vec::new();
    let mut block: Option<Entry> = None;
    for (i, raw) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = strip_comment(raw);
        if line.trim().is_empty() {
            continue;
        }
        let indented = line.starts_with(' ') || line.starts_with('\t');
        if indented {
            if let Some(Entry {
                value: Value::Matrix(rows),
                ..
            }) = block.as_mut()
            {
                rows.push(line.trim().to_string());
                continue;
            }
        }
        if let Some(done) = block.take() {
            entries.push(done);
        }
        let Some((key, value)) = line.split_once('=') else {
            errors.push(ConfigError {
                line: Some(line_no),
                key: line.trim().to_string(),
                message: "expected `key = value`".into(),
            });
            continue;
        };
        let key = key.trim().to_string();
        let value = value.trim();
        if value.is_empty() {
            block = Some(Entry {
                key,
                value: Value::Matrix(Vec::new()),
                line: line_no,
            });
        } else {
            entries.push(Entry {
                key,
                value: Value::Scalar(value.to_string()),
                line: line_no,
            });
        }
    }
    entries.extend(block);
    entries
}

/// Partially specified config; every field set by at most one entry.
#[derive(Default)]
struct Draft {
    name: Option<String>,
    mode: Option<Mode>,
    publishing: Option<Vec<Vec<f64>>>,
    rewards: Option<Vec<f64>>,
    kappa: Option<f64>,
    epsilon: Option<f64>,
    cost_horizon: Option<Option<u64>>,
    series_tol: Option<f64>,
    series_cap: Option<u64>,
    theta: Option<Vec<f64>>,
    starts: Option<usize>,
    ascent_step: Option<AscentStep>,
    max_iters: Option<usize>,
    solver_tol: Option<f64>,
    near_margin: Option<f64>,
    grid: Option<f64>,
    refine: Option<f64>,
    x0: Option<StartPoint>,
    theta0: Option<Vec<f64>>,
    step_a0: Option<f64>,
    step_exponent: Option<f64>,
    interest_b0: Option<f64>,
    interest_exponent: Option<f64>,
    coupling: Option<CouplingMode>,
    influence: Option<InfluenceKind>,
    xi: Option<Vec<f64>>,
    beta: Option<Vec<f64>>,
    v_floor: Option<f64>,
    reference: Option<Vec<f64>>,
    sessions: Option<u64>,
    seeds: Option<Vec<u64>>,
    decimate: Option<u64>,
    out: Option<PathBuf>,
    // source line of each key, for later validation messages
    lines: Vec<(String, usize)>,
}

impl Draft {
    fn line_of(&self, key: &str) -> Option<usize> {
        self.lines.iter().rev().find(|(k, _)| k == key).map(|(_, l)| *l)
    }
}

fn parse_f64(s: &str) -> Result<f64, String> {
    let v: f64 = s.trim().parse().map_err(|_| format!("`{s}` is not a number"))?;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(format!("`{s}` is not finite"))
    }
}

fn parse_u64(s: &str) -> Result<u64, String> {
    s.trim()
        .parse()
        .map_err(|_| format!("`{s}` is not a non-negative integer"))
}

fn parse_vec(s: &str) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(parse_f64)
        .collect::<Result<_, _>>()?;
    if v.is_empty() {
        Err("empty vector".into())
    } else {
        Ok(v)
    }
}

/// `1,2,5` or inclusive ranges such as `1-10`, mixed freely.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, String> {
    let mut seeds = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        if let Some((lo, hi)) = part.split_once('-') {
            let (lo, hi) = (parse_u64(lo)?, parse_u64(hi)?);
            if lo > hi {
                return Err(format!("seed range `{part}` is empty"));
            }
            seeds.extend(lo..=hi);
        } else {
            seeds.push(parse_u64(part)?);
        }
    }
    if seeds.is_empty() {
        return Err("no seeds given".into());
    }
    let mut seen = HashSet::new();
    if let Some(dup) = seeds.iter().find(|s| !seen.insert(**s)) {
        return Err(format!("seed {dup} listed twice"));
    }
    Ok(seeds)
}

fn scalar(entry: &Entry) -> Result<&str, String> {
    match &entry.value {
        Value::Scalar(s) => Ok(s),
        Value::Matrix(_) => Err("missing value".into()),
    }
}

fn apply(draft: &mut Draft, entry: &Entry) -> Result<(), String> {
    let value = || scalar(entry);
    match entry.key.as_str() {
        "name" => draft.name = Some(value()?.to_string()),
        "mode" => {
            let v = value()?;
            draft.mode = Some(
                Mode::parse(v)
                    .ok_or_else(|| format!("unknown mode `{v}`; expected static, learn, coupled, oracle or check"))?,
            )
        }
        "publishing" => {
            let Value::Matrix(rows) = &entry.value else {
                return Err("expects an indented block with one row per site".into());
            };
            if rows.is_empty() {
                return Err("matrix block has no rows".into());
            }
            draft.publishing = Some(rows.iter().map(|r| parse_vec(r)).collect::<Result<_, _>>()?);
        }
        "rewards" => draft.rewards = Some(parse_vec(value()?)?),
        "kappa" => draft.kappa = Some(parse_f64(value()?)?),
        "epsilon" => draft.epsilon = Some(parse_f64(value()?)?),
        "cost_horizon" => {
            let v = value()?;
            draft.cost_horizon = Some(if v == "full" { None } else { Some(parse_u64(v)?) });
        }
        "series_tol" => draft.series_tol = Some(parse_f64(value()?)?),
        "series_cap" => draft.series_cap = Some(parse_u64(value()?)?),
        "theta" => draft.theta = Some(parse_vec(value()?)?),
        "starts" => draft.starts = Some(parse_u64(value()?)? as usize),
        "ascent_step" => {
            let v = value()?;
            let (kind, size) = v
                .split_once(char::is_whitespace)
                .ok_or_else(|| format!("`{v}`: expected `fixed <size>` or `diminishing <a0>`"))?;
            let size = parse_f64(size)?;
            if !(size > 0.0) {
                return Err(format!("step size {size} must be positive"));
            }
            draft.ascent_step = Some(match kind {
                "fixed" => AscentStep::Fixed(size),
                "diminishing" => AscentStep::Diminishing { a0: size },
                _ => return Err(format!("unknown step rule `{kind}`; expected fixed or diminishing")),
            });
        }
        "max_iters" => draft.max_iters = Some(parse_u64(value()?)? as usize),
        "solver_tol" => draft.solver_tol = Some(parse_f64(value()?)?),
        "near_margin" => draft.near_margin = Some(parse_f64(value()?)?),
        "grid" => draft.grid = Some(parse_f64(value()?)?),
        "refine" => draft.refine = Some(parse_f64(value()?)?),
        "x0" => {
            let v = value()?;
            draft.x0 = Some(match v {
                "random" => StartPoint::Random,
                "uniform" => StartPoint::Uniform,
                _ => StartPoint::Given(parse_vec(v)?),
            });
        }
        "theta0" => draft.theta0 = Some(parse_vec(value()?)?),
        "step_a0" => draft.step_a0 = Some(parse_f64(value()?)?),
        "step_exponent" => draft.step_exponent = Some(parse_f64(value()?)?),
        "interest_b0" => draft.interest_b0 = Some(parse_f64(value()?)?),
        "interest_exponent" => draft.interest_exponent = Some(parse_f64(value()?)?),
        "coupling" => {
            draft.coupling = Some(match value()? {
                "two-timescale" => CouplingMode::TwoTimescale,
                "joint" => CouplingMode::Joint,
                v => return Err(format!("unknown coupling `{v}`; expected two-timescale or joint")),
            })
        }
        "influence" => {
            draft.influence = Some(match value()? {
                "A" | "a" => InfluenceKind::A,
                "B" | "b" => InfluenceKind::B,
                "none" => InfluenceKind::None,
                v => return Err(format!("unknown influence type `{v}`; expected A, B or none")),
            })
        }
        "xi" => draft.xi = Some(parse_vec(value()?)?),
        "beta" => draft.beta = Some(parse_vec(value()?)?),
        "v_floor" => draft.v_floor = Some(parse_f64(value()?)?),
        "reference" => draft.reference = Some(parse_vec(value()?)?),
        "sessions" => draft.sessions = Some(parse_u64(value()?)?),
        "seeds" => draft.seeds = Some(parse_seeds(value()?)?),
        "decimate" => draft.decimate = Some(parse_u64(value()?)?),
        "out" => draft.out = Some(PathBuf::from(value()?)),
        other => return Err(format!("unknown key `{other}`")),
    }
    Ok(())
}

/// Parses and validates a config, reporting every problem found.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let mut errors = Vec::new();
    let entries = lex(text, &mut errors);
    let mut draft = Draft::default();
    let mut seen: HashSet<&str> = HashSet::new();

    let preset = entries.iter().find(|e| e.key == "preset");
    if let Some(entry) = preset {
        match scalar(entry).and_then(|name| {
            presets::preset(name)
                .ok_or_else(|| format!("unknown preset `{name}`; known: {}", presets::NAMES.join(", ")))
        }) {
            Ok(base) => {
                let mut base_errors = Vec::new();
                for e in lex(&render(&base), &mut base_errors) {
                    apply(&mut draft, &e).expect("rendered presets are valid");
                }
            }
            Err(message) => {
                errors.push(ConfigError {
                    line: Some(entry.line),
                    key: "preset".into(),
                    message,
                });
                return Err(ConfigErrors(errors));
            }
        }
    }

    for entry in &entries {
        if !KEYS.contains(&entry.key.as_str()) {
            errors.push(ConfigError {
                line: Some(entry.line),
                key: entry.key.clone(),
                message: "unknown key".into(),
            });
            continue;
        }
        let key: &str = KEYS.iter().find(|k| **k == entry.key).unwrap();
        if !seen.insert(key) {
            errors.push(ConfigError {
                line: Some(entry.line),
                key: entry.key.clone(),
                message: "given more than once".into(),
            });
            continue;
        }
        if key == "preset" {
            continue;
        }
        draft.lines.push((entry.key.clone(), entry.line));
        if let Err(message) = apply(&mut draft, entry) {
            errors.push(ConfigError {
                line: Some(entry.line),
                key: entry.key.clone(),
                message,
            });
        }
    }

    let config = build(draft, &mut errors);
    match config {
        Some(c) if errors.is_empty() => Ok(c),
        _ => Err(ConfigErrors(errors)),
    }
}

fn build(d: Draft, errors: &mut Vec<ConfigError>) -> Option<ExperimentConfig> {
    let mut fail = |key: &str, message: String| {
        errors.push(ConfigError {
            line: d.line_of(key),
            key: key.to_string(),
            message,
        });
    };
    let mode = d.mode;
    if mode.is_none() && !d.lines.iter().any(|(k, _)| k == "mode") {
        fail("mode", "required but missing".into());
    }
    if d.publishing.is_none() && d.line_of("publishing").is_none() {
        fail("publishing", "required but missing".into());
    }
    if d.rewards.is_none() && d.line_of("rewards").is_none() {
        fail("rewards", "required but missing".into());
    }
    let kappa = d.kappa.unwrap_or(2.5);
    let epsilon = d.epsilon.unwrap_or(0.01);

    let (sites, topics) = match &d.publishing {
        Some(p) => {
            let n = p[0].len();
            if let Some(bad) = p.iter().position(|r| r.len() != n) {
                fail(
                    "publishing",
                    format!("row {} has {} entries, row 1 has {n}", bad + 1, p[bad].len()),
                );
            }
            (Some(p.len()), Some(n))
        }
        None => (None, None),
    };

    let mut check_len = |key: &str, v: Option<&Vec<f64>>, want: Option<usize>, what: &str| {
        if let (Some(v), Some(want)) = (v, want) {
            if v.len() != want {
                fail(key, format!("has {} entries but there are {want} {what}", v.len()));
                return false;
            }
        }
        true
    };
    let mut dims_ok = check_len("rewards", d.rewards.as_ref(), sites, "sites");
    dims_ok &= check_len("theta", d.theta.as_ref(), topics, "topics");
    dims_ok &= check_len("theta0", d.theta0.as_ref(), topics, "topics");
    dims_ok &= check_len("xi", d.xi.as_ref(), topics, "topics");
    dims_ok &= check_len("beta", d.beta.as_ref(), topics, "topics");
    dims_ok &= check_len("reference", d.reference.as_ref(), sites, "sites");
    if let Some(StartPoint::Given(x)) = &d.x0 {
        dims_ok &= check_len("x0", Some(x), sites, "sites");
    }

    if let Some(m) = sites {
        if !(0.0..=1.0).contains(&epsilon) || m as f64 * epsilon > 1.0 + 1e-12 {
            fail(
                "epsilon",
                format!("floor {epsilon} with {m} sites leaves no feasible strategy (needs M * epsilon <= 1)"),
            );
        }
    }
    let model = match (&d.publishing, &d.rewards) {
        (Some(p), Some(r)) if dims_ok => match ModelSpec::new(p.clone(), r.clone(), kappa, epsilon) {
            Ok(spec) => Some(spec),
            Err(recsim::Error::EmptyFeasibleSet { .. }) => None,
            Err(e) => {
                fail("publishing", e.to_string());
                None
            }
        },
        _ => None,
    };
    if let Some(spec) = &model {
        for (key, v) in [("theta", &d.theta), ("theta0", &d.theta0)] {
            if let Some(v) = v {
                if let Err(e) = spec.interest(v.clone()) {
                    fail(key, e.to_string());
                }
            }
        }
        for (key, v) in [
            ("reference", d.reference.as_ref()),
            (
                "x0",
                match &d.x0 {
                    Some(StartPoint::Given(x)) => Some(x),
                    _ => None,
                },
            ),
        ] {
            if let Some(v) = v {
                if let Err(e) = spec.strategy(v.clone()) {
                    fail(key, e.to_string());
                }
            }
        }
    }

    let defaults = CostSeriesPolicy::default();
    let cost = CostSeriesPolicy {
        tol_abs: d.series_tol.unwrap_or(defaults.tol_abs),
        l_max: d.series_cap.unwrap_or(defaults.l_max),
        horizon: d.cost_horizon.unwrap_or(None),
    };
    if let Err(e) = cost.validate() {
        let key = if cost.horizon == Some(0) {
            "cost_horizon"
        } else if !(cost.tol_abs > 0.0) {
            "series_tol"
        } else {
            "series_cap"
        };
        fail(key, e.to_string());
    }

    let solver_defaults = SolveConfig::default();
    let solver = SolveConfig {
        starts: d.starts.unwrap_or(solver_defaults.starts),
        step: d.ascent_step.unwrap_or(solver_defaults.step),
        max_iters: d.max_iters.unwrap_or(solver_defaults.max_iters),
        tol: d.solver_tol.unwrap_or(solver_defaults.tol),
        seed: solver_defaults.seed,
        near_margin: d.near_margin.unwrap_or(solver_defaults.near_margin),
    };
    if !(solver.tol > 0.0) {
        fail("solver_tol", format!("{} must be positive", solver.tol));
    }
    if solver.max_iters == 0 {
        fail("max_iters", "must be at least 1".into());
    }
    for (key, v) in [("grid", d.grid), ("refine", d.refine)] {
        if let Some(v) = v {
            if !(v > 0.0 && v <= 1.0) {
                fail(key, format!("resolution {v} must be in (0, 1]"));
            }
        }
    }

    let step = match (d.step_a0, d.step_exponent) {
        (Some(a0), Some(e)) => match StepSchedule::new(a0, e) {
            Ok(s) => Some(s),
            Err(err) => {
                fail("step_exponent", err.to_string());
                None
            }
        },
        (None, None) => None,
        (Some(_), None) => {
            fail("step_exponent", "required when step_a0 is given".into());
            None
        }
        (None, Some(_)) => {
            fail("step_a0", "required when step_exponent is given".into());
            None
        }
    };
    let interest_step = match (d.interest_b0, d.interest_exponent) {
        (Some(b0), Some(e)) => match StepSchedule::mixing(b0, e) {
            Ok(s) => Some(s),
            Err(err) => {
                fail("interest_exponent", err.to_string());
                None
            }
        },
        (None, None) => None,
        (Some(_), None) => {
            fail("interest_exponent", "required when interest_b0 is given".into());
            None
        }
        (None, Some(_)) => {
            fail("interest_b0", "required when interest_exponent is given".into());
            None
        }
    };

    let influence = match (d.influence, &d.xi, &d.beta) {
        (Some(kind), Some(xi), beta) => {
            let beta = beta.clone().unwrap_or_else(|| vec![1.0; xi.len()]);
            match InfluenceSpec::uniform_kind(kind, xi, &beta).and_then(|s| s.with_floor(d.v_floor.unwrap_or(0.0))) {
                Ok(s) => Some(s),
                Err(e) => {
                    fail("influence", e.to_string());
                    None
                }
            }
        }
        (Some(_), None, _) => {
            fail("xi", "required when influence is given".into());
            None
        }
        (None, Some(_), _) | (None, _, Some(_)) => {
            fail("influence", "required when xi or beta is given".into());
            None
        }
        (None, None, None) => None,
    };

    let seeds = d.seeds.clone().unwrap_or_else(|| vec![1]);
    let decimate = d.decimate.unwrap_or(1);
    if decimate == 0 {
        fail("decimate", "must be at least 1".into());
    }
    // check mode falls back to the estimator test's own sample size
    let sessions = match (d.sessions.unwrap_or(0), mode) {
        (0, Some(Mode::Check)) => CHECK_SESSIONS,
        (s, _) => s,
    };

    if let Some(mode) = mode {
        let need = |key: &str, present: bool, fail: &mut dyn FnMut(&str, String)| {
            if !present {
                fail(key, format!("required in {} mode", mode.as_str()));
            }
        };
        match mode {
            Mode::Static | Mode::Oracle | Mode::Check => {
                need("theta", d.theta.is_some() || d.line_of("theta").is_some(), &mut fail)
            }
            Mode::Learn => {
                need("theta", d.theta.is_some() || d.line_of("theta").is_some(), &mut fail);
                need(
                    "step_a0",
                    d.step_a0.is_some() || d.line_of("step_a0").is_some(),
                    &mut fail,
                );
            }
            Mode::Coupled => {
                need(
                    "influence",
                    d.influence.is_some() || d.line_of("influence").is_some(),
                    &mut fail,
                );
                need(
                    "step_a0",
                    d.step_a0.is_some() || d.line_of("step_a0").is_some(),
                    &mut fail,
                );
                if d.coupling != Some(CouplingMode::Joint) {
                    need(
                        "interest_b0",
                        d.interest_b0.is_some() || d.line_of("interest_b0").is_some(),
                        &mut fail,
                    );
                }
            }
        }
        if matches!(mode, Mode::Learn | Mode::Coupled | Mode::Check) && sessions == 0 {
            fail("sessions", format!("must be positive in {} mode", mode.as_str()));
        }
        if mode == Mode::Coupled && d.coupling == Some(CouplingMode::Joint) {
            if let Some(s) = &step {
                if s.at(1) > 1.0 {
                    fail(
                        "step_a0",
                        format!(
                            "joint coupling uses it as the interest mixing step, {} exceeds 1",
                            s.at(1)
                        ),
                    );
                }
            }
        }
    }

    Some(ExperimentConfig {
        name: d
            .name
            .clone()
            .unwrap_or_else(|| mode.map_or("experiment", |m| m.as_str()).to_string()),
        mode: mode?,
        publishing: d.publishing?,
        rewards: d.rewards?,
        kappa,
        epsilon,
        cost,
        theta: d.theta,
        solver,
        grid: d.grid,
        refine: d.refine,
        x0: d.x0.unwrap_or(match mode? {
            Mode::Coupled => StartPoint::Uniform,
            _ => StartPoint::Random,
        }),
        theta0: d.theta0,
        step,
        interest_step,
        coupling: d.coupling.unwrap_or(CouplingMode::TwoTimescale),
        influence,
        reference: d.reference,
        sessions,
        seeds,
        decimate,
        out: d.out,
    })
}

fn join(v: &[f64]) -> String {
    v.iter().map(|a| a.to_string()).collect::<Vec<_>>().join(", ")
}

/// Renders a config that [`parse_config`] reads back unchanged.
pub fn render(c: &ExperimentConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| out.push_str(&format!("{k} = {v}\n"));
    kv("name", c.name.clone());
    kv("mode", c.mode.as_str().into());
    kv("rewards", join(&c.rewards));
    kv("kappa", c.kappa.to_string());
    kv("epsilon", c.epsilon.to_string());
    kv("cost_horizon", c.cost.horizon.map_or("full".into(), |h| h.to_string()));
    kv("series_tol", c.cost.tol_abs.to_string());
    kv("series_cap", c.cost.l_max.to_string());
    if let Some(t) = &c.theta {
        kv("theta", join(t));
    }
    kv("starts", c.solver.starts.to_string());
    kv(
        "ascent_step",
        match c.solver.step {
            AscentStep::Fixed(a) => format!("fixed {a}"),
            AscentStep::Diminishing { a0 } => format!("diminishing {a0}"),
        },
    );
    kv("max_iters", c.solver.max_iters.to_string());
    kv("solver_tol", c.solver.tol.to_string());
    kv("near_margin", c.solver.near_margin.to_string());
    if let Some(g) = c.grid {
        kv("grid", g.to_string());
    }
    if let Some(r) = c.refine {
        kv("refine", r.to_string());
    }
    kv(
        "x0",
        match &c.x0 {
            StartPoint::Random => "random".into(),
            StartPoint::Uniform => "uniform".into(),
            StartPoint::Given(x) => join(x),
        },
    );
    if let Some(t) = &c.theta0 {
        kv("theta0", join(t));
    }
    if let Some(s) = c.step {
        kv("step_a0", s.a0.to_string());
        kv("step_exponent", s.exponent.to_string());
    }
    if let Some(s) = c.interest_step {
        kv("interest_b0", s.a0.to_string());
        kv("interest_exponent", s.exponent.to_string());
    }
    kv(
        "coupling",
        match c.coupling {
            CouplingMode::TwoTimescale => "two-timescale".into(),
            CouplingMode::Joint => "joint".into(),
        },
    );
    if let Some(inf) = &c.influence {
        let kind = inf.topics.first().map_or(InfluenceKind::None, |t| t.kind);
        kv(
            "influence",
            match kind {
                InfluenceKind::A => "A".into(),
                InfluenceKind::B => "B".into(),
                InfluenceKind::None => "none".into(),
            },
        );
        kv("xi", join(&inf.topics.iter().map(|t| t.xi).collect::<Vec<_>>()));
        kv("beta", join(&inf.topics.iter().map(|t| t.beta).collect::<Vec<_>>()));
        kv("v_floor", inf.v_floor.to_string());
    }
    if let Some(r) = &c.reference {
        kv("reference", join(r));
    }
    kv("sessions", c.sessions.to_string());
    kv(
        "seeds",
        c.seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(", "),
    );
    kv("decimate", c.decimate.to_string());
    if let Some(o) = &c.out {
        kv("out", o.display().to_string());
    }
    out.push_str("publishing =\n");
    for row in &c.publishing {
        out.push_str("    ");
        out.push_str(&join(row));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
mode = static
publishing =
    0.25 0.25 0.25 0.25
    0.25 0.25 0.25 0.25
    0.10 0.40 0.45 0.05
    0.10 0.05 0.15 0.70
    0.65 0.10 0.20 0.05
rewards = 150, 125, 150, 400, 100
theta = 0.03, 0.05, 0.02, 0.9
";

    #[test]
    fn minimal_static_config() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.mode, Mode::Static);
        assert_eq!((c.sites(), c.topics()), (5, 4));
        assert_eq!(c.kappa, 2.5);
        assert!(c.cost.horizon.is_none());
    }

    #[test]
    fn comments_and_blank_lines() {
        let text = format!("# header\n\n{}\nkappa = 1 # linear cost\n", MINIMAL);
        assert_eq!(parse_config(&text).unwrap().kappa, 1.0);
    }

    #[test]
    fn seeds_lists_and_ranges() {
        assert_eq!(parse_seeds("1-3, 7").unwrap(), vec![1, 2, 3, 7]);
        assert!(parse_seeds("3-1").is_err());
        assert!(parse_seeds("1,1").is_err());
        assert!(parse_seeds("").is_err());
    }

    #[test]
    fn matrix_rows_must_agree() {
        let text = MINIMAL.replace("0.65 0.10 0.20 0.05", "0.65 0.10 0.20");
        let err = parse_config(&text).unwrap_err();
        assert!(err
            .0
            .iter()
            .any(|e| e.key == "publishing" && e.message.contains("row 5")));
    }

    #[test]
    fn missing_keys_are_named() {
        let err = parse_config("mode = learn\n").unwrap_err();
        let keys: Vec<&str> = err.0.iter().map(|e| e.key.as_str()).collect();
        for k in ["publishing", "rewards", "theta", "step_a0"] {
            assert!(keys.contains(&k), "{keys:?}");
        }
    }

    #[test]
    fn malformed_line() {
        let err = parse_config(&format!("{MINIMAL}just words\n")).unwrap_err();
        assert_eq!(err.0[0].line, Some(10));
    }

    #[test]
    fn bad_values() {
        let text = format!("{MINIMAL}ascent_step = sideways 1\ncoupling = loose\nx0 = 1, two\n");
        let err = parse_config(&text).unwrap_err();
        assert_eq!(err.0.len(), 3, "{err}");
    }
}
