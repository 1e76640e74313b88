//! Static recommendation model.
//!
//! A platform recommends one of `M` sites per trial according to a strategy
//! `x`; each showing of site `m` independently covers topic `n` with
//! probability `p[m][n]`. A user seeking topic `n` accepts the first trial
//! whose coverage contains `n`, so the trial count is geometric with
//! parameter `rho[n] = sum_m x[m] p[m][n]`. The platform earns `r[m]` on a
//! click-through to `m` and pays `c_l = l^kappa` for a session of `l` trials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on `sum = 1` for strategies and interest profiles.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Smallest acceptance probability the evaluators accept.
pub const RHO_MIN: f64 = 1e-8;

/// Slack allowed below the floor when validating a strategy.
const FLOOR_SLACK: f64 = 1e-12;

/// Publishing matrix, revenues, cost exponent and recommendation floor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    publishing: Vec<Vec<f64>>,
    rewards: Vec<f64>,
    kappa: f64,
    epsilon: f64,
}

impl ModelSpec {
    /// Builds a model after checking every structural invariant.
    pub fn new(publishing: Vec<Vec<f64>>, rewards: Vec<f64>, kappa: f64, epsilon: f64) -> Result<Self> {
        let sites = publishing.len();
        if sites == 0 {
            return Err(Error::InvalidModel("publishing matrix has no rows".into()));
        }
        let topics = publishing[0].len();
        if topics == 0 {
            return Err(Error::InvalidModel("publishing matrix has no columns".into()));
        }
        for row in &publishing {
            if row.len() != topics {
                return Err(Error::DimensionMismatch {
                    what: "publishing matrix row",
                    expected: topics,
                    found: row.len(),
                });
            }
        }
        if rewards.len() != sites {
            return Err(Error::DimensionMismatch {
                what: "reward vector",
                expected: sites,
                found: rewards.len(),
            });
        }
        for (m, row) in publishing.iter().enumerate() {
            for (n, &p) in row.iter().enumerate() {
                if !(0.0..=1.0).contains(&p) {
                    return Err(Error::InvalidModel(format!(
                        "coverage probability p[{m}][{n}] = {p} outside [0, 1]"
                    )));
                }
            }
        }
        for n in 0..topics {
            let col: f64 = publishing.iter().map(|row| row[n]).sum();
            if col <= 0.0 {
                return Err(Error::InvalidModel(format!("topic {n} is covered by no site")));
            }
        }
        if let Some((m, r)) = rewards.iter().enumerate().find(|(_, r)| !r.is_finite() || **r < 0.0) {
            return Err(Error::InvalidModel(format!(
                "reward r[{m}] = {r} must be finite and non-negative"
            )));
        }
        if !kappa.is_finite() || kappa < 0.0 {
            return Err(Error::InvalidModel(format!(
                "cost exponent kappa = {kappa} must be finite and >= 0"
            )));
        }
        if !epsilon.is_finite() || epsilon < 0.0 {
            return Err(Error::InvalidModel(format!("floor epsilon = {epsilon} must be >= 0")));
        }
        if sites as f64 * epsilon > 1.0 + SIMPLEX_TOL {
            return Err(Error::EmptyFeasibleSet { sites, eps: epsilon });
        }
        Ok(Self {
            publishing,
            rewards,
            kappa,
            epsilon,
        })
    }

    pub fn sites(&self) -> usize {
        self.publishing.len()
    }

    pub fn topics(&self) -> usize {
        self.publishing[0].len()
    }

    pub fn publishing(&self) -> &[Vec<f64>] {
        &self.publishing
    }

    pub fn coverage(&self, site: usize, topic: usize) -> f64 {
        self.publishing[site][topic]
    }

    pub fn rewards(&self) -> &[f64] {
        &self.rewards
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    /// Same world with a different revenue vector.
    pub fn with_rewards(&self, rewards: Vec<f64>) -> Result<Self> {
        Self::new(self.publishing.clone(), rewards, self.kappa, self.epsilon)
    }

    /// Validates a raw vector as a strategy for this model.
    pub fn strategy(&self, x: Vec<f64>) -> Result<Strategy> {
        if x.len() != self.sites() {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: self.sites(),
                found: x.len(),
            });
        }
        Strategy::new(x, self.epsilon)
    }

    pub fn interest(&self, theta: Vec<f64>) -> Result<InterestProfile> {
        if theta.len() != self.topics() {
            return Err(Error::DimensionMismatch {
                what: "interest profile",
                expected: self.topics(),
                found: theta.len(),
            });
        }
        InterestProfile::new(theta)
    }

    fn check_strategy(&self, x: &Strategy) -> Result<()> {
        if x.len() != self.sites() {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: self.sites(),
                found: x.len(),
            });
        }
        Ok(())
    }

    fn check_interest(&self, theta: &InterestProfile) -> Result<()> {
        if theta.len() != self.topics() {
            return Err(Error::DimensionMismatch {
                what: "interest profile",
                expected: self.topics(),
                found: theta.len(),
            });
        }
        Ok(())
    }

    /// Per-trial acceptance probability for each topic.
    pub fn acceptance_probs(&self, x: &Strategy) -> Result<Vec<f64>> {
        self.check_strategy(x)?;
        Ok(self.acceptance_unchecked(x.as_slice()))
    }

    pub(crate) fn acceptance_unchecked(&self, x: &[f64]) -> Vec<f64> {
        let mut rho = vec![0.0; self.topics()];
        for (row, &xm) in self.publishing.iter().zip(x) {
            for (acc, &p) in rho.iter_mut().zip(row) {
                *acc += xm * p;
            }
        }
        rho
    }

    /// Revenue-weighted acceptance per topic, `sum_k r_k x_k p_{k,n}`.
    pub(crate) fn weighted_acceptance(&self, x: &[f64]) -> Vec<f64> {
        let mut h = vec![0.0; self.topics()];
        for ((row, &xm), &rm) in self.publishing.iter().zip(x).zip(&self.rewards) {
            for (acc, &p) in h.iter_mut().zip(row) {
                *acc += rm * xm * p;
            }
        }
        h
    }

    /// Acceptance probabilities, refusing any topic below [`RHO_MIN`].
    fn guarded_acceptance(&self, x: &Strategy) -> Result<Vec<f64>> {
        self.check_strategy(x)?;
        self.guarded_raw(x.as_slice())
    }

    fn guarded_raw(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.sites() {
            return Err(Error::DimensionMismatch {
                what: "strategy",
                expected: self.sites(),
                found: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("strategy"));
        }
        let rho = self.acceptance_unchecked(x);
        for (topic, &r) in rho.iter().enumerate() {
            if !(r >= RHO_MIN) {
                return Err(Error::DegenerateAcceptance { topic, rho: r });
            }
        }
        Ok(rho)
    }

    /// Expected click-through revenue of one session.
    pub fn expected_reward(&self, x: &Strategy, theta: &InterestProfile) -> Result<f64> {
        self.check_interest(theta)?;
        let rho = self.guarded_acceptance(x)?;
        let h = self.weighted_acceptance(x.as_slice());
        Ok(theta
            .as_slice()
            .iter()
            .zip(rho.iter().zip(&h))
            .map(|(&t, (&rn, &hn))| t * hn / rn)
            .sum())
    }

    /// Expected session cost `E[T^kappa]`, evaluated under `policy`.
    pub fn expected_cost(&self, x: &Strategy, theta: &InterestProfile, policy: &CostSeriesPolicy) -> Result<f64> {
        self.check_interest(theta)?;
        let rho = self.guarded_acceptance(x)?;
        let mut total = 0.0;
        for (&t, &rn) in theta.as_slice().iter().zip(&rho) {
            total += t * policy.topic_cost(rn, self.kappa)?;
        }
        Ok(total)
    }

    /// Net revenue `R(x) - C(x)`.
    pub fn net_revenue(&self, x: &Strategy, theta: &InterestProfile, policy: &CostSeriesPolicy) -> Result<f64> {
        Ok(self.expected_reward(x, theta)? - self.expected_cost(x, theta, policy)?)
    }

    /// Reward and cost at an arbitrary non-negative vector, which need not lie
    /// on the simplex. Useful for finite differences along coordinate axes.
    pub fn reward_and_cost_at(
        &self,
        x: &[f64],
        theta: &InterestProfile,
        policy: &CostSeriesPolicy,
    ) -> Result<(f64, f64)> {
        self.check_interest(theta)?;
        let rho = self.guarded_raw(x)?;
        let h = self.weighted_acceptance(x);
        let (mut reward, mut cost) = (0.0, 0.0);
        for ((&t, &rn), &hn) in theta.as_slice().iter().zip(&rho).zip(&h) {
            reward += t * hn / rn;
            cost += t * policy.topic_cost(rn, self.kappa)?;
        }
        Ok((reward, cost))
    }

    pub fn net_revenue_at(&self, x: &[f64], theta: &InterestProfile, policy: &CostSeriesPolicy) -> Result<f64> {
        let (r, c) = self.reward_and_cost_at(x, theta, policy)?;
        Ok(r - c)
    }

    pub fn grad_reward(&self, x: &Strategy, theta: &InterestProfile) -> Result<Vec<f64>> {
        self.check_interest(theta)?;
        let rho = self.guarded_acceptance(x)?;
        let h = self.weighted_acceptance(x.as_slice());
        let th = theta.as_slice();
        Ok(self
            .publishing
            .iter()
            .zip(&self.rewards)
            .map(|(row, &rm)| {
                (0..self.topics())
                    .map(|n| th[n] * row[n] / rho[n] * (rm - h[n] / rho[n]))
                    .sum()
            })
            .collect())
    }

    /// Gradient of the expected cost. Under the full series every component
    /// is non-positive.
    pub fn grad_cost(&self, x: &Strategy, theta: &InterestProfile, policy: &CostSeriesPolicy) -> Result<Vec<f64>> {
        self.check_interest(theta)?;
        let rho = self.guarded_acceptance(x)?;
        let th = theta.as_slice();
        // d C / d rho_n, weighted by theta_n
        let mut slope = Vec::with_capacity(rho.len());
        for (&t, &rn) in th.iter().zip(&rho) {
            slope.push(t * policy.topic_cost_slope(rn, self.kappa)?);
        }
        Ok(self
            .publishing
            .iter()
            .map(|row| row.iter().zip(&slope).map(|(&p, &s)| p * s).sum())
            .collect())
    }

    pub fn grad_net(&self, x: &Strategy, theta: &InterestProfile, policy: &CostSeriesPolicy) -> Result<Vec<f64>> {
        let gr = self.grad_reward(x, theta)?;
        let gc = self.grad_cost(x, theta, policy)?;
        Ok(gr.iter().zip(&gc).map(|(a, b)| a - b).collect())
    }

    /// Net revenue and its gradient in one pass over the series.
    pub fn net_and_grad(
        &self,
        x: &Strategy,
        theta: &InterestProfile,
        policy: &CostSeriesPolicy,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_interest(theta)?;
        let rho = self.guarded_acceptance(x)?;
        let h = self.weighted_acceptance(x.as_slice());
        let th = theta.as_slice();
        let mut value = 0.0;
        // per-topic coefficient multiplying p[m][n] in the gradient, split into
        // a part scaled by r_m and a constant part
        let mut reward_coef = vec![0.0; rho.len()];
        let mut const_coef = vec![0.0; rho.len()];
        for n in 0..rho.len() {
            let (cost, slope) = policy.topic_cost_and_slope(rho[n], self.kappa)?;
            value += th[n] * (h[n] / rho[n] - cost);
            reward_coef[n] = th[n] / rho[n];
            const_coef[n] = -th[n] * h[n] / (rho[n] * rho[n]) - th[n] * slope;
        }
        let grad = self
            .publishing
            .iter()
            .zip(&self.rewards)
            .map(|(row, &rm)| {
                row.iter()
                    .enumerate()
                    .map(|(n, &p)| p * (rm * reward_coef[n] + const_coef[n]))
                    .sum()
            })
            .collect();
        Ok((value, grad))
    }
}

/// Session cost `c_l = l^kappa`, with `c_0 = 0`.
pub fn session_cost(trials: u64, kappa: f64) -> f64 {
    if trials == 0 {
        0.0
    } else {
        (trials as f64).powf(kappa)
    }
}

/// First difference `c_l - c_{l-1}`.
pub fn cost_increment(trials: u64, kappa: f64) -> f64 {
    session_cost(trials, kappa) - session_cost(trials.saturating_sub(1), kappa)
}

/// How the cost series is evaluated.
///
/// By default the full series `sum_l dc_l (1 - rho)^(l-1)` is summed until
/// the remaining tail is below `tol_abs`. Setting `horizon` instead evaluates
/// the finite sum `sum_{l <= horizon} c_l rho (1 - rho)^(l-1)`, i.e. only
/// sessions that end within `horizon` trials contribute cost.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostSeriesPolicy {
    pub tol_abs: f64,
    pub l_max: u64,
    #[serde(default)]
    pub horizon: Option<u64>,
}

impl Default for CostSeriesPolicy {
    fn default() -> Self {
        Self {
            tol_abs: 1e-10,
            l_max: 1_000_000,
            horizon: None,
        }
    }
}

impl CostSeriesPolicy {
    pub fn new(tol_abs: f64, l_max: u64) -> Result<Self> {
        let policy = Self {
            tol_abs,
            l_max,
            horizon: None,
        };
        policy.validate()?;
        Ok(policy)
    }

    /// Finite-horizon evaluation over sessions of at most `trials` trials.
    pub fn horizon(trials: u64) -> Self {
        Self {
            horizon: Some(trials),
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.tol_abs > 0.0) || !self.tol_abs.is_finite() {
            return Err(Error::InvalidModel(format!(
                "series tolerance {} must be > 0",
                self.tol_abs
            )));
        }
        if self.l_max < 1 {
            return Err(Error::InvalidModel("series term cap must be >= 1".into()));
        }
        if self.horizon == Some(0) {
            return Err(Error::InvalidModel("cost horizon must be >= 1".into()));
        }
        Ok(())
    }

    pub fn is_exact(&self) -> bool {
        self.horizon.is_none()
    }

    /// Expected cost for a single topic with acceptance probability `rho`.
    pub fn topic_cost(&self, rho: f64, kappa: f64) -> Result<f64> {
        Ok(self.topic_cost_and_slope(rho, kappa)?.0)
    }

    /// Derivative of [`Self::topic_cost`] with respect to `rho`.
    pub fn topic_cost_slope(&self, rho: f64, kappa: f64) -> Result<f64> {
        Ok(self.topic_cost_and_slope(rho, kappa)?.1)
    }

    pub fn topic_cost_and_slope(&self, rho: f64, kappa: f64) -> Result<(f64, f64)> {
        match self.horizon {
            Some(h) => Ok(horizon_series(rho, kappa, h)),
            None => self.full_series(rho, kappa),
        }
    }

    /// Sums `S = sum_{l>=1} dc_l q^(l-1)` and `D = sum_{l>=1} l dc_{l+1} q^(l-1)`
    /// with `q = 1 - rho`; the slope is `dS/drho = -D`.
    fn full_series(&self, rho: f64, kappa: f64) -> Result<(f64, f64)> {
        let q = 1.0 - rho;
        let mut value = 0.0;
        let mut deriv = 0.0;
        let mut qpow = 1.0;
        let mut prev = 0.0; // c_{l-1}
        let mut cur = 1.0; // c_l
        let mut value_done = false;
        let mut deriv_done = false;
        for l in 1..=self.l_max {
            let next = ((l + 1) as f64).powf(kappa);
            let dc = cur - prev;
            let dc_next = next - cur;
            let lf = l as f64;
            let value_term = dc * qpow;
            let deriv_term = lf * dc_next * qpow;
            if !value_done {
                value += value_term;
            }
            if !deriv_done {
                deriv += deriv_term;
            }
            // Ratio of consecutive terms is bounded by q ((l+1)/l)^(kappa+1);
            // once below one the tail is dominated by a geometric series.
            let ratio = q * ((lf + 1.0) / lf).powf(kappa + 1.0);
            if ratio < 1.0 {
                let tail = |term: f64| term * ratio / (1.0 - ratio);
                value_done = value_done || (value_term < self.tol_abs && tail(value_term) < self.tol_abs);
                deriv_done = deriv_done || (deriv_term < self.tol_abs && tail(deriv_term) < self.tol_abs);
                if value_done && deriv_done {
                    return Ok((value, -deriv));
                }
            }
            qpow *= q;
            prev = cur;
            cur = next;
        }
        Err(Error::SeriesCap { l_max: self.l_max, rho })
    }
}

fn horizon_series(rho: f64, kappa: f64, horizon: u64) -> (f64, f64) {
    let q = 1.0 - rho;
    let mut value = 0.0;
    let mut slope = 0.0;
    // q^(l-2), starting from l = 1 where the (l-1) factor zeroes it out
    let mut qpow_prev = 0.0;
    let mut qpow = 1.0;
    for l in 1..=horizon {
        let c = session_cost(l, kappa);
        value += c * rho * qpow;
        slope += c * (qpow - (l - 1) as f64 * rho * qpow_prev);
        qpow_prev = qpow;
        qpow *= q;
    }
    (value, slope)
}

/// A randomized recommendation strategy on the floored simplex.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Strategy(Vec<f64>);

impl Strategy {
    /// Validates `sum x = 1` and `x_m >= eps`.
    pub fn new(x: Vec<f64>, eps: f64) -> Result<Self> {
        if x.is_empty() {
            return Err(Error::Infeasible("empty strategy".into()));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("strategy"));
        }
        let sum: f64 = x.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Infeasible(format!("strategy sums to {sum}")));
        }
        if let Some((m, v)) = x.iter().enumerate().find(|(_, v)| **v < eps - FLOOR_SLACK) {
            return Err(Error::Infeasible(format!("x[{m}] = {v} below floor {eps}")));
        }
        Ok(Self(x))
    }

    pub fn uniform(sites: usize) -> Self {
        Self(vec![1.0 / sites as f64; sites])
    }

    /// Wraps a vector already known to be feasible.
    pub(crate) fn from_raw(x: Vec<f64>) -> Self {
        Self(x)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn distance(&self, other: &Strategy) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }
}

/// The user's distribution over topics.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct InterestProfile(Vec<f64>);

impl InterestProfile {
    pub fn new(theta: Vec<f64>) -> Result<Self> {
        if theta.is_empty() {
            return Err(Error::Infeasible("empty interest profile".into()));
        }
        if theta.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("interest profile"));
        }
        if let Some((n, v)) = theta.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::Infeasible(format!("theta[{n}] = {v} is negative")));
        }
        let sum: f64 = theta.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::Infeasible(format!("interest profile sums to {sum}")));
        }
        Ok(Self(theta))
    }

    pub fn uniform(topics: usize) -> Self {
        Self(vec![1.0 / topics as f64; topics])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}
