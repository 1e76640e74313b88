//! Static solver for the known-interest problem: projection onto the floored
//! simplex, multistart projected gradient ascent and an exhaustive lattice
//! oracle for small instances.

use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CostSeriesPolicy, InterestProfile, ModelSpec, Strategy};
use crate::simulate::RngStream;

/// Inputs within this distance of unit mass (and above the floor) are
/// returned unchanged by [`project_eps_simplex`].
const FEASIBLE_PASSTHROUGH_TOL: f64 = 1e-12;

/// Largest lattice the grid oracle will enumerate.
pub const LATTICE_LIMIT: u128 = 10_000_000;

/// Euclidean projection of `y` onto `{x : sum x = 1, x_m >= eps}`.
///
/// Shifts by `eps`, projects onto the simplex of mass `1 - M eps` by sorting
/// and thresholding, then shifts back.
pub fn project_eps_simplex(y: &[f64], eps: f64) -> Result<Strategy> {
    Ok(Strategy::from_raw(project_raw(y, eps)?))
}

pub(crate) fn project_raw(y: &[f64], eps: f64) -> Result<Vec<f64>> {
    let sites = y.len();
    if sites == 0 {
        return Err(Error::Infeasible("cannot project an empty vector".into()));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("projection input"));
    }
    if !(eps >= 0.0) || sites as f64 * eps > 1.0 + 1e-12 {
        return Err(Error::EmptyFeasibleSet { sites, eps });
    }
    let sum: f64 = y.iter().sum();
    if (sum - 1.0).abs() <= FEASIBLE_PASSTHROUGH_TOL && y.iter().all(|&v| v >= eps) {
        return Ok(y.to_vec());
    }
    let mass = (1.0 - sites as f64 * eps).max(0.0);
    let z: Vec<f64> = y.iter().map(|v| v - eps).collect();
    let mut sorted = z.clone();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let mut cumulative = 0.0;
    let mut threshold = 0.0;
    for (i, &u) in sorted.iter().enumerate() {
        cumulative += u;
        let t = (cumulative - mass) / (i + 1) as f64;
        if i == 0 || u - t > 0.0 {
            threshold = t;
        }
    }
    Ok(z.iter().map(|v| (v - threshold).max(0.0) + eps).collect())
}

/// Draws a point uniformly from the simplex (symmetric Dirichlet with unit
/// concentration) and projects it onto the floored simplex.
pub fn random_feasible(sites: usize, eps: f64, rng: &mut RngStream) -> Result<Strategy> {
    let draws: Vec<f64> = (0..sites).map(|_| rng.sample::<f64, _>(Exp1)).collect();
    let total: f64 = draws.iter().sum();
    let point: Vec<f64> = draws.iter().map(|d| d / total).collect();
    project_eps_simplex(&point, eps)
}

/// Step size rule for projected gradient ascent.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum AscentStep {
    /// `a_t = a0 / (1 + t)`, `t = 0, 1, ...`
    Diminishing {
        a0: f64,
    },
    Fixed(f64),
}

impl AscentStep {
    pub fn at(&self, t: usize) -> f64 {
        match *self {
            AscentStep::Diminishing { a0 } => a0 / (1.0 + t as f64),
            AscentStep::Fixed(a) => a,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveConfig {
    /// Random starts in addition to the uniform point.
    pub starts: usize,
    pub step: AscentStep,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    /// Endpoints within this margin of the best are reported as near-optimal.
    pub near_margin: f64,
}

impl Default for SolveConfig {
    fn default() -> Self {
        Self {
            starts: 16,
            step: AscentStep::Fixed(1e-4),
            max_iters: 200_000,
            tol: 1e-8,
            seed: 0,
            near_margin: 0.1,
        }
    }
}

/// Outcome of one ascent run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StartOutcome {
    pub start: usize,
    pub x: Strategy,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Set when a non-finite value or evaluation error ended the run.
    pub aborted: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    pub best_x: Strategy,
    pub best_value: f64,
    pub starts: usize,
    pub runs: Vec<StartOutcome>,
    /// Indices into `runs` whose value is within `near_margin` of the best.
    pub near_optimal: Vec<usize>,
    /// `best_value - oracle_value`, when an oracle was consulted.
    pub grid_gap: Option<f64>,
}

/// Runs projected gradient ascent from a given start.
pub fn ascend(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    start: Strategy,
    config: &SolveConfig,
) -> (Strategy, usize, bool, bool) {
    let eps = spec.epsilon();
    let mut x = start;
    for t in 0..config.max_iters {
        let grad = match spec.grad_net(&x, theta, policy) {
            Ok(g) if g.iter().all(|v| v.is_finite()) => g,
            _ => return (x, t, false, true),
        };
        let a = config.step.at(t);
        let y: Vec<f64> = x.as_slice().iter().zip(&grad).map(|(xi, gi)| xi + a * gi).collect();
        let next = match project_raw(&y, eps) {
            Ok(v) => Strategy::from_raw(v),
            Err(_) => return (x, t, false, true),
        };
        let moved = next
            .as_slice()
            .iter()
            .zip(x.as_slice())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        x = next;
        if moved < config.tol {
            return (x, t + 1, true, false);
        }
    }
    (x, config.max_iters, false, false)
}

/// Multistart projected gradient ascent on the net revenue.
pub fn solve_static(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    config: &SolveConfig,
) -> Result<SolveReport> {
    let sites = spec.sites();
    let mut runs = Vec::with_capacity(config.starts + 1);
    for start in 0..=config.starts {
        let init = if start == 0 {
            Strategy::uniform(sites)
        } else {
            let mut rng = RngStream::new(config.seed, start as u64);
            random_feasible(sites, spec.epsilon(), &mut rng)?
        };
        let (x, iterations, converged, mut aborted) = ascend(spec, theta, policy, init, config);
        let value = match spec.net_revenue(&x, theta, policy) {
            Ok(v) if v.is_finite() => v,
            _ => {
                aborted = true;
                f64::NEG_INFINITY
            }
        };
        runs.push(StartOutcome {
            start,
            x,
            value,
            iterations,
            converged,
            aborted,
        });
    }
    // first-found wins ties
    let mut best = 0;
    for (i, run) in runs.iter().enumerate() {
        if run.value > runs[best].value {
            best = i;
        }
    }
    if !runs[best].value.is_finite() {
        return Err(Error::NonFinite("net revenue at every start"));
    }
    let best_value = runs[best].value;
    let near_optimal = runs
        .iter()
        .enumerate()
        .filter(|(_, r)| r.value >= best_value - config.near_margin)
        .map(|(i, _)| i)
        .collect();
    Ok(SolveReport {
        best_x: runs[best].x.clone(),
        best_value,
        starts: runs.len(),
        runs,
        near_optimal,
        grid_gap: None,
    })
}

impl SolveReport {
    /// Records the gap to an oracle value.
    pub fn with_oracle(mut self, oracle_value: f64) -> Self {
        self.grid_gap = Some(self.best_value - oracle_value);
        self
    }
}

/// Largest step of the projected-gradient map, `|P(x + a grad F) - x|_inf`.
pub fn stationarity_residual(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    x: &Strategy,
    step: f64,
) -> Result<f64> {
    let grad = spec.grad_net(x, theta, policy)?;
    let y: Vec<f64> = x.as_slice().iter().zip(&grad).map(|(a, g)| a + step * g).collect();
    let p = project_raw(&y, spec.epsilon())?;
    Ok(p.iter()
        .zip(x.as_slice())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

/// Exhaustive maximisation of the net revenue over the lattice
/// `{x in D_eps : x_m - eps in resolution * Z}`.
///
/// Lattice points where the model cannot be evaluated (a topic with zero
/// acceptance when `eps = 0`) are skipped.
pub fn grid_oracle(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    resolution: f64,
) -> Result<(Strategy, f64)> {
    let units = lattice_units(spec, resolution)?;
    let bounds = vec![(0, units); spec.sites()];
    search_lattice(spec, theta, policy, resolution, units, &bounds)
}

/// Lattice search restricted to the box `|x_m - center_m| <= radius`.
pub fn grid_refine(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    center: &Strategy,
    resolution: f64,
    radius: f64,
) -> Result<(Strategy, f64)> {
    let units = lattice_units(spec, resolution)?;
    let eps = spec.epsilon();
    let bounds: Vec<(u64, u64)> = center
        .as_slice()
        .iter()
        .map(|&c| {
            let lo = ((c - radius - eps) / resolution).ceil().max(0.0) as u64;
            let hi = (((c + radius - eps) / resolution).floor().max(0.0) as u64).min(units);
            (lo.min(hi), hi)
        })
        .collect();
    search_lattice(spec, theta, policy, resolution, units, &bounds)
}

/// Number of lattice steps making up the free mass `1 - M eps`.
fn lattice_units(spec: &ModelSpec, resolution: f64) -> Result<u64> {
    if !(resolution > 0.0) || resolution > 1.0 {
        return Err(Error::InvalidModel(format!(
            "lattice resolution {resolution} must be in (0, 1]"
        )));
    }
    let free = 1.0 - spec.sites() as f64 * spec.epsilon();
    let units = (free / resolution).round();
    if (units * resolution - free).abs() > 1e-9 {
        return Err(Error::InvalidModel(format!(
            "resolution {resolution} does not divide the free mass {free}"
        )));
    }
    Ok(units as u64)
}

/// Counts compositions of `total` with per-part bounds.
fn count_compositions(bounds: &[(u64, u64)], total: u64) -> u128 {
    let total = total as usize;
    let mut ways = vec![0u128; total + 1];
    ways[0] = 1;
    for &(lo, hi) in bounds {
        let mut next = vec![0u128; total + 1];
        for (s, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for k in lo..=hi {
                let t = s + k as usize;
                if t > total {
                    break;
                }
                next[t] = next[t].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[total]
}

fn search_lattice(
    spec: &ModelSpec,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    resolution: f64,
    units: u64,
    bounds: &[(u64, u64)],
) -> Result<(Strategy, f64)> {
    let points = count_compositions(bounds, units);
    if points > LATTICE_LIMIT {
        return Err(Error::LatticeTooLarge {
            points,
            limit: LATTICE_LIMIT,
        });
    }
    if points == 0 {
        return Err(Error::Infeasible("lattice box contains no feasible point".into()));
    }
    // remaining capacity of the upper bounds from position i onwards
    let mut tail_max = vec![0u64; bounds.len() + 1];
    let mut tail_min = vec![0u64; bounds.len() + 1];
    for i in (0..bounds.len()).rev() {
        tail_max[i] = tail_max[i + 1] + bounds[i].1;
        tail_min[i] = tail_min[i + 1] + bounds[i].0;
    }
    let mut search = LatticeSearch {
        spec,
        theta,
        policy,
        resolution,
        bounds,
        tail_min: &tail_min,
        tail_max: &tail_max,
        counts: vec![0; bounds.len()],
        best: None,
    };
    search.visit(0, units);
    search
        .best
        .map(|(x, v)| (Strategy::from_raw(x), v))
        .ok_or(Error::NonFinite("net revenue on every lattice point"))
}

struct LatticeSearch<'a> {
    spec: &'a ModelSpec,
    theta: &'a InterestProfile,
    policy: &'a CostSeriesPolicy,
    resolution: f64,
    bounds: &'a [(u64, u64)],
    tail_min: &'a [u64],
    tail_max: &'a [u64],
    counts: Vec<u64>,
    best: Option<(Vec<f64>, f64)>,
}

impl LatticeSearch<'_> {
    fn visit(&mut self, index: usize, remaining: u64) {
        let last = self.bounds.len() - 1;
        let (lo, hi) = self.bounds[index];
        if index == last {
            if remaining < lo || remaining > hi {
                return;
            }
            self.counts[index] = remaining;
            self.evaluate();
            return;
        }
        let rest_min = self.tail_min[index + 1];
        let rest_max = self.tail_max[index + 1];
        let k_lo = lo.max(remaining.saturating_sub(rest_max));
        let k_hi = hi.min(remaining.saturating_sub(rest_min));
        if remaining < rest_min || k_lo > k_hi {
            return;
        }
        for k in k_lo..=k_hi {
            self.counts[index] = k;
            self.visit(index + 1, remaining - k);
        }
    }

    fn evaluate(&mut self) {
        let eps = self.spec.epsilon();
        let x: Vec<f64> = self.counts.iter().map(|&k| eps + k as f64 * self.resolution).collect();
        let strategy = Strategy::from_raw(x);
        if let Ok(value) = self.spec.net_revenue(&strategy, self.theta, self.policy) {
            if value.is_finite() && self.best.as_ref().is_none_or(|(_, b)| value > *b) {
                self.best = Some((strategy.into_inner(), value));
            }
        }
    }
}
