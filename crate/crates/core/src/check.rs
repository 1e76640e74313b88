//! Numerical self-checks of the model, solver, session engine and learner on
//! a given instance. Each check runs a batch of seeded probes and counts how
//! many pass.

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::learn::gradient_estimate;
use crate::model::{CostSeriesPolicy, InterestProfile, ModelSpec, Strategy};
use crate::optimize::{project_eps_simplex, random_feasible};
use crate::simulate::{RngStream, SessionSampler};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckConfig {
    pub seed: u64,
    /// Points for the finite-difference gradient check.
    pub gradient_points: usize,
    pub convexity_probes: usize,
    pub projection_probes: usize,
    /// Sessions for the estimator mean and the session-law checks.
    pub estimator_sessions: u64,
    pub session_samples: u64,
    pub fd_step: f64,
    pub fd_rel_tol: f64,
    pub convexity_slack: f64,
    /// Standard errors allowed in Monte-Carlo comparisons.
    pub z_max: f64,
    pub policy: CostSeriesPolicy,
}

impl Default for CheckConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            gradient_points: 100,
            convexity_probes: 1000,
            projection_probes: 1000,
            estimator_sessions: 1_000_000,
            session_samples: 100_000,
            fd_step: 1e-6,
            fd_rel_tol: 1e-5,
            convexity_slack: 1e-8,
            z_max: 3.0,
            policy: CostSeriesPolicy::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: usize,
    pub failed: usize,
    /// Worst observed statistic, e.g. a relative error or z-score.
    pub worst: f64,
}

impl CheckResult {
    fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            passed: 0,
            failed: 0,
            worst: 0.0,
        }
    }

    fn record(&mut self, ok: bool, stat: f64) {
        if ok {
            self.passed += 1;
        } else {
            self.failed += 1;
        }
        if stat.is_nan() || stat > self.worst {
            self.worst = stat;
        }
    }

    pub fn ok(&self) -> bool {
        self.failed == 0 && self.passed > 0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub checks: Vec<CheckResult>,
}

impl CheckReport {
    pub fn passed(&self) -> usize {
        self.checks.iter().filter(|c| c.ok()).count()
    }

    pub fn failed(&self) -> usize {
        self.checks.len() - self.passed()
    }

    pub fn all_ok(&self) -> bool {
        self.checks.iter().all(CheckResult::ok)
    }
}

fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, a| m.max(a.abs()))
}

/// `|a - b|_inf / max(|b|_inf, 1)`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    diff / sup_norm(b).max(1.0)
}

/// Central differences of reward and cost along every coordinate axis.
pub fn finite_difference(
    spec: &ModelSpec,
    x: &Strategy,
    theta: &InterestProfile,
    policy: &CostSeriesPolicy,
    step: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut reward = Vec::with_capacity(x.len());
    let mut cost = Vec::with_capacity(x.len());
    for m in 0..x.len() {
        let mut hi = x.as_slice().to_vec();
        let mut lo = hi.clone();
        hi[m] += step;
        lo[m] -= step;
        let (rh, ch) = spec.reward_and_cost_at(&hi, theta, policy)?;
        let (rl, cl) = spec.reward_and_cost_at(&lo, theta, policy)?;
        reward.push((rh - rl) / (2.0 * step));
        cost.push((ch - cl) / (2.0 * step));
    }
    Ok((reward, cost))
}

/// Runs every check on one instance.
pub fn run_checks(spec: &ModelSpec, theta: &InterestProfile, config: &CheckConfig) -> Result<CheckReport> {
    let checks = vec![
        check_gradients(spec, theta, config, 1)?,
        check_convexity(spec, theta, config, 2)?,
        check_projection(spec, config, 3)?,
        check_acceptance_bounds(spec, config, 4)?,
        check_reward_bounds(spec, theta, config, 5)?,
        check_truncation(spec, theta, config, 6)?,
        check_gradient_finite(spec, theta, config, 7)?,
        check_estimator(spec, theta, config, 8)?,
        check_sessions(spec, theta, config, 9)?,
    ];
    Ok(CheckReport { checks })
}

fn check_gradients(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("gradient vs central differences");
    let mut rng = RngStream::new(c.seed, stream);
    for _ in 0..c.gradient_points {
        let x = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let (fd_r, fd_c) = finite_difference(spec, &x, theta, &c.policy, c.fd_step)?;
        let fd_f: Vec<f64> = fd_r.iter().zip(&fd_c).map(|(a, b)| a - b).collect();
        let err = relative_error(&spec.grad_reward(&x, theta)?, &fd_r)
            .max(relative_error(&spec.grad_cost(&x, theta, &c.policy)?, &fd_c))
            .max(relative_error(&spec.grad_net(&x, theta, &c.policy)?, &fd_f));
        result.record(err <= c.fd_rel_tol, err);
    }
    Ok(result)
}

fn check_convexity(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    use rand::Rng;
    let mut result = CheckResult::new("cost convexity");
    let mut rng = RngStream::new(c.seed, stream);
    for _ in 0..c.convexity_probes {
        let a = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let b = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let lambda: f64 = rng.random();
        let mid: Vec<f64> = a
            .as_slice()
            .iter()
            .zip(b.as_slice())
            .map(|(u, v)| lambda * u + (1.0 - lambda) * v)
            .collect();
        let cm = spec.reward_and_cost_at(&mid, theta, &c.policy)?.1;
        let chord = lambda * spec.expected_cost(&a, theta, &c.policy)?
            + (1.0 - lambda) * spec.expected_cost(&b, theta, &c.policy)?;
        let excess = cm - chord;
        result.record(excess <= c.convexity_slack, excess.max(0.0));
    }
    Ok(result)
}

fn check_projection(spec: &ModelSpec, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    use rand::Rng;
    let mut result = CheckResult::new("projection idempotent and non-expansive");
    let mut rng = RngStream::new(c.seed, stream);
    let eps = spec.epsilon();
    for _ in 0..c.projection_probes {
        let y1: Vec<f64> = (0..spec.sites()).map(|_| rng.random_range(-1.0..2.0)).collect();
        let y2: Vec<f64> = (0..spec.sites()).map(|_| rng.random_range(-1.0..2.0)).collect();
        let p1 = project_eps_simplex(&y1, eps)?;
        let p2 = project_eps_simplex(&y2, eps)?;
        let again = project_eps_simplex(p1.as_slice(), eps)?;
        let dy: f64 = y1.iter().zip(&y2).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let excess = p1.distance(&p2) - dy;
        let ok = again == p1 && excess <= 1e-9;
        result.record(ok, excess.max(0.0));
    }
    Ok(result)
}

fn check_acceptance_bounds(spec: &ModelSpec, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("acceptance probabilities within bounds");
    let mut rng = RngStream::new(c.seed, stream);
    for _ in 0..c.convexity_probes {
        let x = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let rho = spec.acceptance_probs(&x)?;
        let mut worst = 0.0f64;
        for (n, r) in rho.iter().enumerate() {
            let col: f64 = spec.publishing().iter().map(|row| row[n]).sum();
            let lo = spec.epsilon() * col - 1e-12;
            worst = worst.max(lo - r).max(r - 1.0 - 1e-12);
        }
        result.record(worst <= 0.0, worst.max(0.0));
    }
    Ok(result)
}

fn check_reward_bounds(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("reward between min and max revenue");
    let mut rng = RngStream::new(c.seed, stream);
    let lo = spec.rewards().iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = spec.rewards().iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..c.convexity_probes {
        let x = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let r = spec.expected_reward(&x, theta)?;
        let slack = 1e-9 * hi.abs().max(1.0);
        let out = (lo - r).max(r - hi);
        result.record(out <= slack, out.max(0.0));
    }
    Ok(result)
}

fn check_truncation(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("series truncation stable under refinement");
    if !c.policy.is_exact() {
        return Ok(result);
    }
    let finer = CostSeriesPolicy {
        tol_abs: c.policy.tol_abs / 2.0,
        l_max: c.policy.l_max.saturating_mul(2),
        horizon: None,
    };
    let mut rng = RngStream::new(c.seed, stream);
    for _ in 0..c.gradient_points {
        let x = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let a = spec.expected_cost(&x, theta, &c.policy)?;
        let b = spec.expected_cost(&x, theta, &finer)?;
        let diff = (a - b).abs();
        result.record(diff < 10.0 * c.policy.tol_abs, diff);
    }
    Ok(result)
}

fn check_gradient_finite(
    spec: &ModelSpec,
    theta: &InterestProfile,
    c: &CheckConfig,
    stream: u64,
) -> Result<CheckResult> {
    let mut result = CheckResult::new("net-revenue gradient finite");
    let mut rng = RngStream::new(c.seed, stream);
    for _ in 0..c.convexity_probes {
        let x = random_feasible(spec.sites(), spec.epsilon(), &mut rng)?;
        let g = spec.grad_net(&x, theta, &c.policy)?;
        let norm = sup_norm(&g);
        result.record(norm.is_finite(), norm);
    }
    Ok(result)
}

fn check_estimator(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("gradient estimate unbiased at uniform strategy");
    let x = Strategy::uniform(spec.sites());
    let exact = spec.grad_net(&x, theta, &c.policy)?;
    let sampler = SessionSampler::new(spec, &x, theta)?;
    let mut rng = RngStream::new(c.seed, stream);
    let sites = spec.sites();
    let (mut sum, mut sum_sq) = (vec![0.0; sites], vec![0.0; sites]);
    for _ in 0..c.estimator_sessions {
        let outcome = sampler.sample(&mut rng)?;
        let g = gradient_estimate(spec, &x, &outcome)?;
        let m = outcome.accepted_site;
        sum[m] += g[m];
        sum_sq[m] += g[m] * g[m];
    }
    for m in 0..sites {
        let est = crate::simulate::Estimate::from_moments(sum[m], sum_sq[m], c.estimator_sessions);
        let z = est.z_score(exact[m]);
        result.record(z <= c.z_max, z);
    }
    Ok(result)
}

fn check_sessions(spec: &ModelSpec, theta: &InterestProfile, c: &CheckConfig, stream: u64) -> Result<CheckResult> {
    let mut result = CheckResult::new("session law: trials, accepted site, topic");
    let x = Strategy::uniform(spec.sites());
    let rho = spec.acceptance_probs(&x)?;
    let sampler = SessionSampler::new(spec, &x, theta)?;
    let mut rng = RngStream::new(c.seed, stream);
    let (sites, topics) = (spec.sites(), spec.topics());
    let k = c.session_samples;
    let mut per_topic = vec![0u64; topics];
    let mut trials = vec![(0.0, 0.0); topics];
    let mut site_counts = vec![vec![0u64; sites]; topics];
    for _ in 0..k {
        let o = sampler.sample(&mut rng)?;
        per_topic[o.topic] += 1;
        let t = o.trials as f64;
        trials[o.topic].0 += t;
        trials[o.topic].1 += t * t;
        site_counts[o.topic][o.accepted_site] += 1;
    }
    let z_bernoulli = |count: u64, total: u64, p: f64, result: &mut CheckResult| {
        if total == 0 {
            return;
        }
        let se = (p * (1.0 - p) / total as f64).sqrt();
        let freq = count as f64 / total as f64;
        let z = if se > 0.0 {
            (freq - p).abs() / se
        } else if freq == p {
            0.0
        } else {
            f64::INFINITY
        };
        result.record(z <= c.z_max, z);
    };
    for n in 0..topics {
        z_bernoulli(per_topic[n], k, theta.as_slice()[n], &mut result);
        if per_topic[n] < 2 {
            continue;
        }
        let est = crate::simulate::Estimate::from_moments(trials[n].0, trials[n].1, per_topic[n]);
        let z = est.z_score(1.0 / rho[n]);
        result.record(z <= c.z_max, z);
        for (m, &count) in site_counts[n].iter().enumerate() {
            let p = x.as_slice()[m] * spec.coverage(m, n) / rho[n];
            z_bernoulli(count, per_topic[n], p, &mut result);
        }
    }
    Ok(result)
}
